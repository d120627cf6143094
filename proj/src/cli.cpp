#include "psyduck/cli.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <iterator>
#include <memory>
#include <random>
#include <sstream>

#include "CLI11.hpp"
#include "psyduck/analysis.hpp"
#include "psyduck/bridge.hpp"
#include "psyduck/config.hpp"
#include "psyduck/container.hpp"
#include "psyduck/error.hpp"
#include "psyduck/keys.hpp"
#include "psyduck/protocol.hpp"

namespace psyduck::cli {
namespace {

struct Options {
  std::string config_path;
  std::string key_path;
  std::string in_path = "-";
  std::string out_path;
  std::string grid_path;
  std::string backend;
  std::size_t trials = 10;
};

std::vector<std::uint8_t> read_all(std::istream& in) {
  return std::vector<std::uint8_t>((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
}

std::vector<std::uint8_t> read_input(const std::string& path, std::istream& stdin_stream) {
  if (path == "-") return read_all(stdin_stream);
  std::ifstream file(path, std::ios::binary);
  if (!file) throw IoError("cannot open " + path);
  return read_all(file);
}

std::string read_text(const std::string& path) {
  std::ifstream file(path);
  if (!file) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << file.rdbuf();
  return ss.str();
}

Config load(const Options& opt, char** envp) {
  KeyValues values;
  if (!opt.config_path.empty()) values = parse_key_values(read_text(opt.config_path));
  merge_overrides(values, env_overrides(envp));
  if (!opt.backend.empty()) values["backend.kind"] = opt.backend;
  return config_from_values(values);
}

/// Config plus a live bridge when one is configured.
struct Session {
  Config config;
  std::shared_ptr<BridgeClient> bridge;
  Setup setup;
};

Session open_session(const Options& opt, char** envp) {
  Config config = load(opt, envp);
  std::shared_ptr<BridgeClient> bridge;
  if (config.uses_bridge()) {
    BridgeClient::Options bo;
    bo.command = config.bridge_command();
    bo.timeout = std::chrono::milliseconds(static_cast<long long>(config.bridge_timeout_s * 1000.0));
    bridge = std::make_shared<BridgeClient>(bo);
    check_bridge_info(bridge->init(), config.sample_shape, config.schedule());
  }
  Setup setup = Setup::from_config(config, bridge);
  return Session{std::move(config), std::move(bridge), std::move(setup)};
}

KeySet load_keys(const Options& opt, std::size_t r, std::ostream& err) {
  if (opt.key_path.empty()) throw ConfigError("--key is required");
  const LoadedKey loaded = load_key_file(opt.key_path);
  if (loaded.warning) err << "warning: " << *loaded.warning << '\n';
  return derive_keyset(loaded.key, r);
}

int cmd_keygen(const Options& opt, std::ostream& err) {
  if (opt.out_path.empty()) throw ConfigError("--out is required");
  write_key_file(opt.out_path, SecretKey::random());
  err << "wrote key to " << opt.out_path << '\n';
  return kOk;
}

int cmd_encode(const Options& opt, std::istream& in, std::ostream& err, char** envp) {
  if (opt.out_path.empty()) throw ConfigError("--out is required");
  Session s = open_session(opt, envp);
  const KeySet keys = load_keys(opt, s.config.r, err);
  const auto payload = read_input(opt.in_path, in);
  const auto& p = s.setup.params;
  err << "capacity: " << capacity_bytes(p) << " bytes (d=" << p.d << ", r=" << p.r
      << ", cells=" << p.cells.count() << ")\n";
  const EncodeResult result =
      encode_detailed(payload, keys, p, s.setup.schedule, s.setup.backend, s.setup.codec);
  write_container(opt.out_path, result.container);
  err << "embedded: " << payload.size() << " bytes\n";
  err << "E_sec: " << security_error(result.latent, keys, p, s.setup.schedule, s.setup.backend)
      << '\n';
  return kOk;
}

int cmd_decode(const Options& opt, std::ostream& out, std::ostream& err, char** envp) {
  if (opt.in_path == "-") throw ConfigError("--in must name a container file");
  Session s = open_session(opt, envp);
  const KeySet keys = load_keys(opt, s.config.r, err);
  const StegoContainer container = read_container(opt.in_path);
  const auto payload =
      decode(container, keys, s.setup.params, s.setup.schedule, s.setup.backend, s.setup.codec);
  if (opt.out_path.empty() || opt.out_path == "-") {
    out.write(reinterpret_cast<const char*>(payload.data()),
              static_cast<std::streamsize>(payload.size()));
    out.flush();
  } else {
    std::ofstream file(opt.out_path, std::ios::binary | std::ios::trunc);
    if (!file) throw IoError("cannot write " + opt.out_path);
    file.write(reinterpret_cast<const char*>(payload.data()),
               static_cast<std::streamsize>(payload.size()));
  }
  return kOk;
}

int cmd_sweep(const Options& opt, std::ostream& out, std::ostream& err, char** envp) {
  if (opt.grid_path.empty()) throw ConfigError("--grid is required");
  Session s = open_session(opt, envp);
  const Grid grid = parse_grid(read_text(opt.grid_path));
  SweepSummary summary;
  if (opt.out_path.empty() || opt.out_path == "-")
    summary = run_sweep(s.config, grid, opt.trials, out, s.bridge);
  else
    summary = run_sweep(s.config, grid, opt.trials, opt.out_path, s.bridge);
  err << "sweep: " << summary.trial_rows << " trial rows, " << summary.aggregates.size()
      << " aggregate rows\n";
  return kOk;
}

int cmd_verify(const Options& opt, std::ostream& out, char** envp) {
  Session s = open_session(opt, envp);
  if (s.config.uses_bridge()) throw ConfigError("verify runs on the analytic backend");
  bool all = true;
  auto report = [&](bool pass, const std::string& name, const std::string& detail) {
    all = all && pass;
    out << (pass ? "PASS " : "FAIL ") << name << ": " << detail << '\n';
  };

  {
    Setup rt = s.setup;
    rt.codec = CodecSpec{};
    std::mt19937_64 rng(s.config.seed);
    std::size_t ok = 0;
    for (std::size_t k = 0; k < opt.trials; ++k) {
      const KeySet keys = derive_keyset(seeded_key(rng), rt.params.r);
      std::vector<std::uint8_t> payload(rng() % (capacity_bytes(rt.params) + 1));
      for (auto& b : payload) b = static_cast<std::uint8_t>(rng());
      const auto c = encode(payload, keys, rt.params, rt.schedule, rt.backend, rt.codec);
      ok += decode(c, keys, rt.params, rt.schedule, rt.backend, rt.codec) == payload;
    }
    report(ok == opt.trials, "round_trip",
           std::to_string(ok) + "/" + std::to_string(opt.trials) + " payloads recovered");
  }
  {
    std::vector<std::size_t> ds;
    for (std::size_t d : {1, 2, 3, 5, 10})
      if (d + 1 <= s.setup.schedule.T()) ds.push_back(d);
    const std::vector<std::size_t> rs{2, 4};
    Setup b = s.setup;
    b.params.step_mode = StepMode::stochastic;
    const BoundReport br = bound_check(b, ds, rs, 30, s.config.seed);
    std::ostringstream detail;
    detail << "max ratio " << br.max_ratio << " <= 3 x " << br.anchor_ratio;
    report(br.pass, "security_error_bound", detail.str());
  }
  for (std::size_t r : {2, 4}) {
    std::mt19937_64 rng(s.config.seed + r);
    const KeySet keys = derive_keyset(seeded_key(rng), r);
    SecurityTestOptions so;
    so.seed = s.config.seed;
    const SecurityReport sr = stochastic_security_test(keys, s.setup.schedule, so);
    std::ostringstream detail;
    detail << "r=" << r << " ks p=" << sr.ks.p_value << " var p=" << sr.variance.p_value
           << " lag1 p=" << sr.autocorrelation.p_value << " (alpha " << sr.corrected_alpha << ")";
    report(sr.pass, "mixed_noise_indistinguishable", detail.str());
    if (r == 2) {
      so.fault_scale = 1.5;
      const SecurityReport fault = stochastic_security_test(keys, s.setup.schedule, so);
      report(!fault.pass, "battery_power",
             std::string("1.5x variance fault ") + (fault.pass ? "missed" : "detected"));
    }
  }
  return all ? kOk : kFailure;
}

}  // namespace

int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out,
        std::ostream& err, char** envp) {
  CLI::App app{"Keyed diffusion-trajectory steganography", "psyduck"};
  app.require_subcommand(1);
  Options opt;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opt.config_path, "Config file (section.key = value)");
    sub->add_option("--backend", opt.backend, "analytic | bridge:<command>");
  };
  auto* keygen = app.add_subcommand("keygen", "Write a fresh 32-byte master key");
  keygen->add_option("--out", opt.out_path, "Key file to write")->required();

  auto* enc = app.add_subcommand("encode", "Embed a message into a stego container");
  add_common(enc);
  enc->add_option("--key", opt.key_path, "Master key file")->required();
  enc->add_option("--in", opt.in_path, "Message file, or - for stdin");
  enc->add_option("--out", opt.out_path, "Container to write")->required();

  auto* dec = app.add_subcommand("decode", "Extract a message; payload goes to stdout");
  add_common(dec);
  dec->add_option("--key", opt.key_path, "Master key file")->required();
  dec->add_option("--in", opt.in_path, "Container file")->required();
  dec->add_option("--out", opt.out_path, "Write payload here instead of stdout");

  auto* sweep = app.add_subcommand("sweep", "Run a parameter grid and write CSV");
  add_common(sweep);
  sweep->add_option("--grid", opt.grid_path, "Grid file")->required();
  sweep->add_option("--out", opt.out_path, "CSV file, or - for stdout");
  sweep->add_option("--trials", opt.trials, "Trials per grid point");

  auto* verify = app.add_subcommand("verify", "Run the property batteries");
  add_common(verify);
  verify->add_option("--trials", opt.trials, "Round-trip payloads");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, err, err);
    return code == 0 ? kOk : kFailure;
  }

  try {
    if (*keygen) return cmd_keygen(opt, err);
    if (*enc) return cmd_encode(opt, in, err, envp);
    if (*dec) return cmd_decode(opt, out, err, envp);
    if (*sweep) return cmd_sweep(opt, out, err, envp);
    if (*verify) return cmd_verify(opt, out, envp);
  } catch (const CapacityError& e) {
    err << "error: " << e.what() << " (max " << e.max_payload_bytes() << " bytes)\n";
    return kCapacity;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const ParameterError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const ShapeError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const IoError& e) {
    err << "I/O error: " << e.what() << '\n';
    return kIo;
  } catch (const FramingError& e) {
    err << "framing error: " << e.what() << " (wrong key or corrupted container)\n";
    return kFraming;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kFailure;
}

}  // namespace psyduck::cli
