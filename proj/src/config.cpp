#include "psyduck/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include "psyduck/error.hpp"

namespace psyduck {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

template <typename T>
T parse_value(const std::string& key, const std::string& text) {
  T value{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (text.empty() || ec != std::errc{} || ptr != text.data() + text.size())
    throw ConfigError("invalid value '" + text + "' for " + key);
  return value;
}

// Rethrows parameter errors raised while interpreting a value as config errors.
template <typename F>
auto as_config(const std::string& key, F&& f) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(key + ": " + e.what());
  }
}

const char* const kKnownKeys[] = {
    "schedule.preset",   "schedule.T",          "schedule.beta_start",
    "schedule.beta_end", "backend.kind",        "backend.prior_mean",
    "backend.prior_std", "backend.step_mode",   "backend.timeout_s",
    "codec.spec",        "codec.clip_lo",       "codec.clip_hi",
    "protocol.d",        "protocol.r",          "protocol.cell_shape",
    "protocol.final_step_key_mode",             "protocol.precision",
    "protocol.repetition", "sample.shape",      "sample.space",
    "run.seed",
};

}  // namespace

Schedule Config::schedule() const {
  if (!schedule_preset.empty()) return psyduck::schedule_preset(schedule_preset);
  return make_schedule(schedule_T, beta_start, beta_end);
}

ProtocolParams Config::protocol() const {
  ProtocolParams p;
  p.d = d;
  p.r = r;
  p.cells = CellMap(sample_shape, cell_shape);
  p.final_step_key_mode = final_step_key_mode;
  p.step_mode = step_mode;
  p.precision = precision;
  p.space = space;
  p.repetition = repetition;
  return p;
}

BackendSpec Config::backend_spec() const {
  BackendSpec spec;
  spec.kind = uses_bridge() ? BackendKind::external_bridge : BackendKind::analytic_gaussian;
  spec.prior_mean = {prior_mean};
  spec.prior_std = {prior_std};
  spec.step_mode = step_mode;
  return spec;
}

std::string Config::bridge_command() const {
  if (!uses_bridge()) return {};
  return backend.substr(std::string_view("bridge:").size());
}

KeyValues parse_key_values(std::string_view text) {
  KeyValues out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    ++line_no;
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    const std::string key(trim(line.substr(0, eq)));
    const std::string value(trim(line.substr(eq + 1)));
    if (key.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty key");
    if (!out.emplace(key, value).second) throw ConfigError("duplicate key " + key);
  }
  return out;
}

Config config_from_values(const KeyValues& values) {
  for (const auto& [key, value] : values) {
    if (std::find(std::begin(kKnownKeys), std::end(kKnownKeys), key) == std::end(kKnownKeys))
      throw ConfigError("unknown config key " + key);
  }
  Config c;
  auto get = [&](const char* key) -> const std::string* {
    auto it = values.find(key);
    return it == values.end() ? nullptr : &it->second;
  };

  if (auto v = get("schedule.preset")) c.schedule_preset = *v;
  const bool explicit_schedule =
      get("schedule.T") || get("schedule.beta_start") || get("schedule.beta_end");
  if (explicit_schedule) {
    if (get("schedule.preset")) throw ConfigError("schedule.preset conflicts with explicit schedule");
    if (!(get("schedule.T") && get("schedule.beta_start") && get("schedule.beta_end")))
      throw ConfigError("explicit schedule needs schedule.T, beta_start and beta_end");
    c.schedule_preset.clear();
    c.schedule_T = parse_value<std::size_t>("schedule.T", *get("schedule.T"));
    c.beta_start = parse_value<double>("schedule.beta_start", *get("schedule.beta_start"));
    c.beta_end = parse_value<double>("schedule.beta_end", *get("schedule.beta_end"));
  }

  if (auto v = get("backend.kind")) c.backend = *v;
  if (auto v = get("backend.prior_mean")) c.prior_mean = parse_value<double>("backend.prior_mean", *v);
  if (auto v = get("backend.prior_std")) c.prior_std = parse_value<double>("backend.prior_std", *v);
  if (auto v = get("backend.step_mode"))
    c.step_mode = as_config("backend.step_mode", [&] { return parse_step_mode(*v); });
  if (auto v = get("backend.timeout_s")) c.bridge_timeout_s = parse_value<double>("backend.timeout_s", *v);

  if (auto v = get("codec.spec")) c.codec = as_config("codec.spec", [&] { return parse_codec(*v); });
  if (auto v = get("codec.clip_lo")) c.codec.clip_lo = parse_value<double>("codec.clip_lo", *v);
  if (auto v = get("codec.clip_hi")) c.codec.clip_hi = parse_value<double>("codec.clip_hi", *v);

  if (auto v = get("protocol.d")) c.d = parse_value<std::size_t>("protocol.d", *v);
  if (auto v = get("protocol.r")) c.r = parse_value<std::size_t>("protocol.r", *v);
  if (auto v = get("protocol.cell_shape"))
    c.cell_shape = as_config("protocol.cell_shape", [&] { return parse_shape(*v); });
  if (auto v = get("protocol.final_step_key_mode"))
    c.final_step_key_mode = as_config("protocol.final_step_key_mode",
                                      [&] { return parse_final_step_key_mode(*v); });
  if (auto v = get("protocol.precision"))
    c.precision = as_config("protocol.precision", [&] { return parse_precision(*v); });
  if (auto v = get("protocol.repetition"))
    c.repetition = parse_value<std::size_t>("protocol.repetition", *v);
  if (auto v = get("sample.shape"))
    c.sample_shape = as_config("sample.shape", [&] { return parse_shape(*v); });
  if (auto v = get("sample.space"))
    c.space = as_config("sample.space", [&] { return parse_space(*v); });
  if (auto v = get("run.seed")) c.seed = parse_value<std::uint64_t>("run.seed", *v);

  validate_config(c);
  return c;
}

void validate_config(const Config& c) {
  as_config("config", [&] {
    if (c.backend != "analytic" && !c.uses_bridge())
      throw ConfigError("backend.kind must be 'analytic' or 'bridge:<command>'");
    if (c.uses_bridge() && c.bridge_command().empty())
      throw ConfigError("bridge backend needs a command");
    if (!(c.bridge_timeout_s > 0.0)) throw ConfigError("backend.timeout_s must be > 0");
    const Schedule sched = c.schedule();
    validate_codec(c.codec);
    const ProtocolParams params = c.protocol();
    validate_params(params, sched);
    if (!c.uses_bridge()) validate_backend(c.backend_spec(), element_count(c.sample_shape));
    return 0;
  });
}

Config parse_config(std::string_view text) { return config_from_values(parse_key_values(text)); }

Config load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_config(const Config& c) {
  std::ostringstream os;
  if (!c.schedule_preset.empty()) {
    os << "schedule.preset = " << c.schedule_preset << '\n';
  } else {
    os << "schedule.T = " << c.schedule_T << '\n';
    os << "schedule.beta_start = " << format_double(c.beta_start) << '\n';
    os << "schedule.beta_end = " << format_double(c.beta_end) << '\n';
  }
  os << "backend.kind = " << c.backend << '\n';
  os << "backend.prior_mean = " << format_double(c.prior_mean) << '\n';
  os << "backend.prior_std = " << format_double(c.prior_std) << '\n';
  os << "backend.step_mode = " << to_string(c.step_mode) << '\n';
  os << "backend.timeout_s = " << format_double(c.bridge_timeout_s) << '\n';
  os << "codec.spec = " << to_string(c.codec) << '\n';
  os << "codec.clip_lo = " << format_double(c.codec.clip_lo) << '\n';
  os << "codec.clip_hi = " << format_double(c.codec.clip_hi) << '\n';
  os << "protocol.d = " << c.d << '\n';
  os << "protocol.r = " << c.r << '\n';
  if (!c.cell_shape.empty()) os << "protocol.cell_shape = " << shape_to_string(c.cell_shape) << '\n';
  os << "protocol.final_step_key_mode = " << to_string(c.final_step_key_mode) << '\n';
  os << "protocol.precision = " << to_string(c.precision) << '\n';
  os << "protocol.repetition = " << c.repetition << '\n';
  os << "sample.shape = " << shape_to_string(c.sample_shape) << '\n';
  os << "sample.space = " << to_string(c.space) << '\n';
  os << "run.seed = " << c.seed << '\n';
  return os.str();
}

KeyValues env_overrides(char** envp) {
  KeyValues out;
  if (!envp) return out;
  constexpr std::string_view prefix = "PSYDUCK_";
  for (char** e = envp; *e; ++e) {
    std::string_view entry(*e);
    if (entry.substr(0, prefix.size()) != prefix) continue;
    const auto eq = entry.find('=');
    if (eq == std::string_view::npos) continue;
    std::string name(entry.substr(prefix.size(), eq - prefix.size()));
    const auto underscore = name.find('_');
    if (underscore == std::string::npos) continue;
    std::transform(name.begin(), name.end(), name.begin(),
                   [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
    name[underscore] = '.';
    // Schedule length keeps its upper-case spelling.
    if (name == "schedule.t") name = "schedule.T";
    out[name] = std::string(entry.substr(eq + 1));
  }
  return out;
}

void merge_overrides(KeyValues& base, const KeyValues& overrides) {
  for (const auto& [key, value] : overrides) {
    if (key == "schedule.T" || key == "schedule.beta_start" || key == "schedule.beta_end")
      base.erase("schedule.preset");
    if (key == "schedule.preset") {
      base.erase("schedule.T");
      base.erase("schedule.beta_start");
      base.erase("schedule.beta_end");
    }
    base[key] = value;
  }
}

bool operator==(const Config& a, const Config& b) { return serialize_config(a) == serialize_config(b); }

}  // namespace psyduck
