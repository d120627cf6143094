#include "psyduck/analysis.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>

#include "psyduck/error.hpp"

namespace psyduck {

Setup Setup::from_config(const Config& config, std::shared_ptr<MeanPredictor> predictor) {
  Setup setup{config.protocol(), config.schedule(), config.backend_spec(), config.codec};
  setup.backend.predictor = std::move(predictor);
  return setup;
}

SecretKey seeded_key(std::mt19937_64& rng) {
  SecretKey::Bytes bytes{};
  for (std::size_t i = 0; i < bytes.size(); i += 8) {
    const std::uint64_t w = rng();
    for (std::size_t k = 0; k < 8; ++k) bytes[i + k] = static_cast<std::uint8_t>(w >> (8 * k));
  }
  return SecretKey(bytes);
}

double security_error(const Sample& stego_latent, const KeySet& keys,
                      const ProtocolParams& params, const Schedule& sched,
                      const BackendSpec& spec) {
  const Sample cover = cover_sample(keys.sync, params, sched, spec);
  return l2_distance(stego_latent, cover);
}

double reconstruction_error(const Sample& received, const BitMessage& message,
                            const DivergedSet& references, const CellMap& cells) {
  return l2_distance(received, mix(message, references, cells));
}

double bit_accuracy(const BitMessage& sent, const BitMessage& received) {
  const auto a = message_bits(sent);
  const auto b = message_bits(received);
  if (a.size() != b.size() || a.empty()) throw ParameterError("messages differ in length");
  std::size_t same = 0;
  for (std::size_t i = 0; i < a.size(); ++i) same += a[i] == b[i];
  return static_cast<double>(same) / static_cast<double>(a.size());
}

TrialRecord run_trial(const Setup& setup, const SecretKey& master,
                      std::span<const std::uint8_t> payload) {
  const auto& p = setup.params;
  TrialRecord rec;
  rec.d = p.d;
  rec.r = p.r;
  rec.precision = p.precision;
  rec.codec = to_string(setup.codec);
  rec.bytes_encoded = payload.size();

  const auto start = std::chrono::steady_clock::now();
  const KeySet keys = derive_keyset(master, p.r);
  const BitMessage sent = pack_message(payload, p);
  const Sample latent = embed_digits(sent, keys, p, setup.schedule, setup.backend);
  StegoContainer container;
  container.sample = decode_latent(latent, setup.codec);
  container.sample.precision = p.precision;
  container.sample.normalize();
  const DecodeResult got =
      decode_digits(container, keys, p, setup.schedule, setup.backend, setup.codec);
  rec.runtime_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();

  rec.bit_accuracy = bit_accuracy(sent, got.message);
  rec.e_sec = security_error(latent, keys, p, setup.schedule, setup.backend);
  rec.e_rec = reconstruction_error(got.received, sent, got.references, p.cells);
  rec.separation_margin = stats::median(got.margin);
  try {
    const auto recovered = unpack_message(got.message);
    rec.payload_recovered = std::equal(recovered.begin(), recovered.end(), payload.begin(),
                                       payload.end());
  } catch (const FramingError&) {
    rec.payload_recovered = false;
  }
  return rec;
}

TrialRecord run_random_trial(const Setup& setup, std::mt19937_64& rng) {
  const SecretKey master = seeded_key(rng);
  std::vector<std::uint8_t> payload(capacity_bytes(setup.params));
  for (auto& b : payload) b = static_cast<std::uint8_t>(rng());
  return run_trial(setup, master, payload);
}

BoundReport bound_check(const Setup& base, std::span<const std::size_t> ds,
                        std::span<const std::size_t> rs, std::size_t trials,
                        std::uint64_t seed) {
  if (trials < 30) throw ParameterError("bound_check needs at least 30 trials per point");
  if (ds.empty() || rs.empty()) throw ParameterError("bound_check needs a non-empty grid");
  if (base.backend.kind != BackendKind::analytic_gaussian)
    throw ParameterError("bound_check runs on the analytic backend");

  auto measure = [&](std::size_t d, std::size_t r) {
    ProtocolParams p = base.params;
    p.d = d;
    p.r = r;
    validate_params(p, base.schedule);
    std::mt19937_64 rng(seed ^ (d * 0x9E3779B97F4A7C15ull) ^ (r << 32));
    std::uniform_int_distribution<std::uint32_t> digit(0, static_cast<std::uint32_t>(r - 1));
    double total = 0.0;
    for (std::size_t k = 0; k < trials; ++k) {
      const KeySet keys = derive_keyset(seeded_key(rng), r);
      BitMessage msg;
      msg.r = r;
      msg.digits.resize(p.cells.count());
      for (auto& x : msg.digits) x = digit(rng);
      const Sample latent = embed_digits(msg, keys, p, base.schedule, base.backend);
      total += security_error(latent, keys, p, base.schedule, base.backend);
    }
    BoundPoint pt;
    pt.d = d;
    pt.r = r;
    pt.trials = trials;
    pt.mean_e_sec = total / static_cast<double>(trials);
    pt.sigma = base.schedule.sigma(d + 1);
    const double n = static_cast<double>(p.cells.element_count());
    pt.ratio = pt.mean_e_sec / (static_cast<double>(d * r) * pt.sigma * std::sqrt(n));
    return pt;
  };

  BoundReport report;
  std::optional<double> anchor;
  bool finite = true;
  for (auto d : ds) {
    for (auto r : rs) {
      report.points.push_back(measure(d, r));
      const auto& pt = report.points.back();
      if (d == 1 && r == 2) anchor = pt.ratio;
      finite = finite && std::isfinite(pt.ratio) && pt.ratio > 0.0;
      report.max_ratio = std::max(report.max_ratio, pt.ratio);
    }
  }
  report.anchor_ratio = anchor ? *anchor : measure(1, 2).ratio;
  report.pass = finite && report.anchor_ratio > 0.0 &&
                report.max_ratio <= 3.0 * report.anchor_ratio;
  return report;
}

SecurityReport stochastic_security_test(const KeySet& keys, const Schedule& sched,
                                        const SecurityTestOptions& options) {
  const std::size_t refs = options.references == 0 ? keys.refs.size() : options.references;
  if (refs < 1 || refs > keys.refs.size()) throw ParameterError("invalid reference count");
  if (options.n_fields < 1) throw ParameterError("need at least one field");
  const std::size_t field_size = element_count(options.field_shape);
  const std::size_t row = options.field_shape.back();
  // Noise of the divergent step at t = 2, the d = 1 configuration.
  const std::size_t t = std::min<std::size_t>(2, sched.T());

  std::mt19937_64 rng(options.seed);
  std::vector<double> pooled;
  pooled.reserve(field_size * options.n_fields);
  const CellMap cells(options.field_shape);
  for (std::size_t f = 0; f < options.n_fields; ++f) {
    std::vector<Sample> eps;
    for (std::size_t i = 0; i < refs; ++i) {
      NoiseContext ctx{keys.refs[i], t + f * sched.T(), StreamTag::step};
      eps.push_back(gaussian_field(ctx, options.field_shape));
    }
    std::vector<std::uint32_t> digits(cells.count());
    std::uniform_int_distribution<std::uint32_t> pick(0, static_cast<std::uint32_t>(refs - 1));
    for (auto& x : digits) x = pick(rng);
    const Sample mixed = mix(digits, eps, cells);
    for (double v : mixed.values) pooled.push_back(options.fault_scale * v);
  }

  SecurityReport report;
  report.elements = pooled.size();
  report.references = refs;
  report.ks = stats::ks_standard_normal(pooled);
  report.variance = stats::variance_test(pooled, 1.0);
  report.autocorrelation = row >= 2 ? stats::lag1_autocorrelation(pooled, row)
                                    : stats::lag1_autocorrelation(pooled, pooled.size());
  report.corrected_alpha = options.alpha / 3.0;
  report.pass = report.ks.p_value > report.corrected_alpha &&
                report.variance.p_value > report.corrected_alpha &&
                report.autocorrelation.p_value > report.corrected_alpha;
  return report;
}

std::array<double, 4> detector_features(const Sample& sample) {
  const std::size_t row = sample.shape.back();
  const auto& v = sample.values;
  const double m = stats::mean(v);
  const double var = v.size() > 1 ? stats::variance(v) : 0.0;
  double lag = 0.0;
  double hf = 0.0;
  std::size_t pairs = 0;
  for (std::size_t start = 0; start < v.size(); start += row) {
    for (std::size_t i = start; i + 1 < start + row; ++i, ++pairs) {
      lag += (v[i] - m) * (v[i + 1] - m);
      const double diff = v[i + 1] - v[i];
      hf += diff * diff;
    }
  }
  if (pairs > 0) {
    lag = var > 0.0 ? lag / static_cast<double>(pairs) / var : 0.0;
    hf /= static_cast<double>(pairs);
  }
  return {m, var, lag, hf};
}

DetectorReport detector_auc(std::span<const Sample> covers, std::span<const Sample> stegos,
                            std::uint64_t seed) {
  if (covers.size() != stegos.size()) throw ParameterError("detector needs balanced sets");
  if (covers.size() < 100) throw ParameterError("detector needs at least 100 samples per class");
  constexpr int kF = 4;
  using Vec = Eigen::Matrix<double, kF, 1>;
  using Mat = Eigen::Matrix<double, kF, kF>;
  auto feat = [](const Sample& s) {
    const auto f = detector_features(s);
    return Vec(f[0], f[1], f[2], f[3]);
  };
  std::vector<Vec> train_c, train_s, test_c, test_s;
  for (std::size_t i = 0; i < covers.size(); ++i) {
    (i % 2 == 0 ? train_c : test_c).push_back(feat(covers[i]));
    (i % 2 == 0 ? train_s : test_s).push_back(feat(stegos[i]));
  }

  // Standardize on the pooled training set.
  Vec mu = Vec::Zero();
  for (const auto& x : train_c) mu += x;
  for (const auto& x : train_s) mu += x;
  mu /= static_cast<double>(train_c.size() + train_s.size());
  Vec sd = Vec::Zero();
  for (const auto& x : train_c) sd += (x - mu).cwiseAbs2();
  for (const auto& x : train_s) sd += (x - mu).cwiseAbs2();
  sd = (sd / static_cast<double>(train_c.size() + train_s.size() - 1)).cwiseSqrt();
  for (int k = 0; k < kF; ++k)
    if (!(sd[k] > 0.0)) sd[k] = 1.0;
  auto standardize = [&](std::vector<Vec>& xs) {
    for (auto& x : xs) x = (x - mu).cwiseQuotient(sd);
  };
  standardize(train_c);
  standardize(train_s);
  standardize(test_c);
  standardize(test_s);

  auto class_mean = [](const std::vector<Vec>& xs) {
    Vec m = Vec::Zero();
    for (const auto& x : xs) m += x;
    return Vec(m / static_cast<double>(xs.size()));
  };
  const Vec mc = class_mean(train_c);
  const Vec ms = class_mean(train_s);
  Mat sw = Mat::Zero();
  for (const auto& x : train_c) sw += (x - mc) * (x - mc).transpose();
  for (const auto& x : train_s) sw += (x - ms) * (x - ms).transpose();
  sw /= static_cast<double>(train_c.size() + train_s.size() - 2);
  sw += 1e-6 * Mat::Identity();
  const Vec w = sw.ldlt().solve(ms - mc);

  std::vector<double> score_c, score_s;
  for (const auto& x : test_c) score_c.push_back(w.dot(x));
  for (const auto& x : test_s) score_s.push_back(w.dot(x));

  DetectorReport report;
  report.n_cover = covers.size();
  report.n_stego = stegos.size();
  report.auc = stats::auc(score_c, score_s);
  report.ci = stats::bootstrap_two_sample(
      score_c, score_s,
      [](std::span<const double> c, std::span<const double> s) { return stats::auc(c, s); }, 2000,
      0.95, seed);
  return report;
}

std::size_t Grid::points() const {
  auto n = [](std::size_t k) { return k == 0 ? std::size_t{1} : k; };
  return n(d.size()) * n(r.size()) * n(precision.size()) * n(codec.size());
}

namespace {

std::vector<std::string_view> split_list(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto end = text.find(',', pos);
    if (end == std::string_view::npos) end = text.size();
    auto item = text.substr(pos, end - pos);
    while (!item.empty() && item.front() == ' ') item.remove_prefix(1);
    while (!item.empty() && item.back() == ' ') item.remove_suffix(1);
    if (!item.empty()) out.push_back(item);
    pos = end + 1;
  }
  return out;
}

std::size_t parse_count(std::string_view s) {
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    throw ConfigError("invalid grid value '" + std::string(s) + "'");
  return v;
}

void write_row(std::ostream& os, std::string_view kind, const TrialRecord& t,
               const std::optional<double>& auc) {
  os << kind << ',' << t.d << ',' << t.r << ',' << to_string(t.precision) << ',' << t.codec << ','
     << t.bytes_encoded << ',' << t.bit_accuracy << ',' << t.e_sec << ',' << t.e_rec << ','
     << t.separation_margin << ',';
  if (auc) os << *auc;
  os << ',' << t.runtime_ms << '\n';
}

}  // namespace

Grid parse_grid(std::string_view text) {
  Grid grid;
  KeyValues kv;
  try {
    kv = parse_key_values(text);
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("grid: ") + e.what());
  }
  for (const auto& [key, value] : kv) {
    const auto items = split_list(value);
    if (key == "d") {
      for (auto s : items) grid.d.push_back(parse_count(s));
    } else if (key == "r") {
      for (auto s : items) grid.r.push_back(parse_count(s));
    } else if (key == "precision") {
      for (auto s : items) grid.precision.push_back(parse_precision(s));
    } else if (key == "codec") {
      for (auto s : items) grid.codec.push_back(parse_codec(s));
    } else if (key == "auc") {
      grid.auc = value == "on" || value == "true" || value == "1";
    } else {
      throw ConfigError("unknown grid key " + key);
    }
  }
  if (grid.empty()) throw ConfigError("grid has no axes");
  return grid;
}

SweepSummary run_sweep(const Config& base, const Grid& grid, std::size_t trials, std::ostream& csv,
                       std::shared_ptr<MeanPredictor> predictor) {
  if (grid.empty()) throw ConfigError("grid has no axes");
  if (trials == 0) throw ConfigError("sweep needs at least one trial");
  auto axis = [](const auto& values, auto fallback) {
    using T = std::decay_t<decltype(fallback)>;
    return values.empty() ? std::vector<T>{fallback} : std::vector<T>(values.begin(), values.end());
  };
  const auto ds = axis(grid.d, base.d);
  const auto rs = axis(grid.r, base.r);
  const auto ps = axis(grid.precision, base.precision);
  const auto cs = axis(grid.codec, base.codec);

  csv << kSweepHeader << '\n';
  SweepSummary summary;
  std::size_t grid_index = 0;
  for (auto d : ds)
    for (auto r : rs)
      for (auto prec : ps)
        for (const auto& codec : cs) {
          Config cfg = base;
          cfg.d = d;
          cfg.r = r;
          cfg.precision = prec;
          cfg.codec = codec;
          try {
            validate_config(cfg);
          } catch (const Error& e) {
            throw ConfigError("grid point " + std::to_string(grid_index) + ": " + e.what());
          }
          const Setup setup = Setup::from_config(cfg, predictor);

          TrialRecord agg;
          agg.d = d;
          agg.r = r;
          agg.precision = prec;
          agg.codec = to_string(codec);
          std::vector<double> margins;
          std::vector<Sample> covers, stegos;
          for (std::size_t k = 0; k < trials; ++k) {
            std::seed_seq seq{base.seed, static_cast<std::uint64_t>(grid_index),
                              static_cast<std::uint64_t>(k)};
            std::mt19937_64 rng(seq);
            const TrialRecord t = run_random_trial(setup, rng);
            write_row(csv, "trial", t, std::nullopt);
            if (!csv) throw IoError("failed writing CSV at grid point " + std::to_string(grid_index));
            ++summary.trial_rows;
            agg.bytes_encoded = t.bytes_encoded;
            agg.bit_accuracy += t.bit_accuracy;
            agg.e_sec += t.e_sec;
            agg.e_rec += t.e_rec;
            agg.runtime_ms += t.runtime_ms;
            margins.push_back(t.separation_margin);

            if (grid.auc) {
              // Fresh keys for the detector set, independent of the trial.
              std::mt19937_64 drng(seq);
              drng.discard(1000);
              const KeySet cover_keys = derive_keyset(seeded_key(drng), r);
              covers.push_back(decode_latent(
                  cover_sample(cover_keys.sync, setup.params, setup.schedule, setup.backend), codec));
              const KeySet stego_keys = derive_keyset(seeded_key(drng), r);
              std::vector<std::uint8_t> payload(capacity_bytes(setup.params));
              for (auto& b : payload) b = static_cast<std::uint8_t>(drng());
              stegos.push_back(encode(payload, stego_keys, setup.params, setup.schedule,
                                      setup.backend, codec).sample);
            }
          }
          const double n = static_cast<double>(trials);
          agg.bit_accuracy /= n;
          agg.e_sec /= n;
          agg.e_rec /= n;
          agg.separation_margin = stats::median(margins);
          std::optional<DetectorReport> det;
          if (grid.auc && trials >= 100) det = detector_auc(covers, stegos, base.seed);
          write_row(csv, "aggregate", agg, det ? std::optional<double>(det->auc) : std::nullopt);
          if (!csv) throw IoError("failed writing CSV at grid point " + std::to_string(grid_index));
          summary.aggregates.push_back(agg);
          summary.detectors.push_back(det);
          ++grid_index;
        }
  return summary;
}

SweepSummary run_sweep(const Config& base, const Grid& grid, std::size_t trials,
                       const std::filesystem::path& out,
                       std::shared_ptr<MeanPredictor> predictor) {
  std::ofstream file(out, std::ios::trunc);
  if (!file) throw IoError("cannot write " + out.string());
  return run_sweep(base, grid, trials, file, std::move(predictor));
}

}  // namespace psyduck
