// Acceptance suite: one PASS/FAIL line per criterion, exit status 0 iff all
// pass. Runs on the in-process analytic backend only.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <iterator>
#include <random>
#include <sstream>

#include "psyduck/analysis.hpp"
#include "psyduck/container.hpp"
#include "psyduck/error.hpp"

using namespace psyduck;
using Clock = std::chrono::steady_clock;

namespace {

// Pinned thresholds.
constexpr std::size_t kRoundTripPayloads = 100;
constexpr double kRoundTripBudgetS = 60.0;
constexpr std::size_t kBruteForceInstances = 50;
constexpr std::size_t kBruteForceMaxCells = 12;
constexpr std::size_t kBoundTrials = 30;
constexpr double kBoundFactor = 3.0;  // enforced inside bound_check
constexpr double kBoundBudgetS = 300.0;
constexpr std::size_t kBatteryElements = 1000000;
constexpr double kBatteryAlpha = 0.01;
constexpr double kFaultScale = 1.5;
constexpr std::size_t kDetectorSamples = 200;
constexpr std::size_t kTrendTrials = 100;
constexpr double kBootstrapConfidence = 0.95;
constexpr std::size_t kBootstrapReplicates = 2000;
constexpr std::size_t kWrongKeyTrials = 100;
constexpr std::size_t kWrongKeyRequired = 99;
constexpr std::uint64_t kSeed = 20250101;

int failures = 0;

void report(bool pass, const std::string& name, const std::string& detail) {
  if (!pass) ++failures;
  std::cout << (pass ? "PASS " : "FAIL ") << name << ": " << detail << std::endl;
}

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

Setup base_setup() {
  Config c;  // linear-50, 43x96 = 4128 unit cells, r = 2, identity codec
  return Setup::from_config(c);
}

std::vector<std::uint8_t> random_payload(std::mt19937_64& rng, std::size_t max_len) {
  std::vector<std::uint8_t> p(rng() % (max_len + 1));
  for (auto& b : p) b = static_cast<std::uint8_t>(rng());
  return p;
}

void round_trip() {
  const auto start = Clock::now();
  std::size_t ok = 0, total = 0;
  double worst_accuracy = 1.0;
  for (std::size_t d : {1u, 2u, 3u, 10u}) {
    Setup s = base_setup();
    s.params.d = d;
    std::mt19937_64 rng(kSeed + d);
    for (std::size_t k = 0; k < kRoundTripPayloads; ++k, ++total) {
      const auto payload = random_payload(rng, capacity_bytes(s.params));
      const TrialRecord rec = run_trial(s, seeded_key(rng), payload);
      worst_accuracy = std::min(worst_accuracy, rec.bit_accuracy);
      ok += rec.payload_recovered && rec.bit_accuracy == 1.0;
    }
  }
  const double secs = seconds_since(start);
  std::ostringstream os;
  os << ok << "/" << total << " payloads exact over d in {1,2,3,10}, 4128 cells, min bit accuracy "
     << worst_accuracy << ", " << secs << " s (budget " << kRoundTripBudgetS << " s)";
  report(ok == total && secs < kRoundTripBudgetS, "exact_round_trip", os.str());
}

void brute_force() {
  const Schedule sched = schedule_preset("linear-50");
  std::mt19937_64 rng(kSeed);
  std::size_t match = 0;
  for (std::size_t inst = 0; inst < kBruteForceInstances; ++inst) {
    const std::size_t ell = 1 + rng() % kBruteForceMaxCells;
    ProtocolParams p;
    p.cells = CellMap({ell});
    p.r = 2;
    p.d = 1 + rng() % 3;
    const KeySet keys = derive_keyset(seeded_key(rng), 2);
    BitMessage msg;
    msg.r = 2;
    msg.digits.resize(ell);
    for (auto& x : msg.digits) x = rng() & 1u;
    // Clean stego latent plus channel noise comparable to the reference gap.
    StegoContainer c;
    c.sample = embed_digits(msg, keys, p, sched, BackendSpec{});
    std::normal_distribution<double> noise(0.0, 0.02 * static_cast<double>(inst % 3));
    for (auto& v : c.sample.values) v += noise(rng);
    const DecodeResult dr = decode_digits(c, keys, p, sched, BackendSpec{}, CodecSpec{});
    double best = std::numeric_limits<double>::infinity();
    std::uint64_t best_b = 0;
    for (std::uint64_t b = 0; b < (1ull << ell); ++b) {
      std::vector<std::uint32_t> digits(ell);
      for (std::size_t j = 0; j < ell; ++j) digits[j] = (b >> j) & 1u;
      const double dist = l2_distance(mix(digits, dr.references.samples, p.cells), dr.received);
      if (dist < best) {
        best = dist;
        best_b = b;
      }
    }
    bool same = true;
    for (std::size_t j = 0; j < ell; ++j) same = same && dr.message.digits[j] == ((best_b >> j) & 1u);
    match += same;
  }
  report(match == kBruteForceInstances, "brute_force_decoder_equivalence",
         std::to_string(match) + "/" + std::to_string(kBruteForceInstances) +
             " instances (ell <= 12, r = 2) equal the exhaustive argmin");
}

void bound() {
  const auto start = Clock::now();
  const std::vector<std::size_t> ds{1, 2, 3, 5, 10}, rs{2, 4};
  const BoundReport r = bound_check(base_setup(), ds, rs, kBoundTrials, kSeed);
  const double secs = seconds_since(start);
  std::ostringstream os;
  os << "rho(1,2) = " << r.anchor_ratio << ", max rho = " << r.max_ratio << " (limit "
     << kBoundFactor << " x anchor), rho by (d,r):";
  for (const auto& pt : r.points) os << " (" << pt.d << "," << pt.r << ")=" << pt.ratio;
  os << ", " << secs << " s";
  report(r.pass && secs < kBoundBudgetS, "security_error_bound", os.str());
}

void battery() {
  const Schedule sched = schedule_preset("linear-50");
  bool all = true;
  std::ostringstream os;
  for (std::size_t r : {2u, 4u}) {
    std::mt19937_64 rng(kSeed + r);
    const KeySet keys = derive_keyset(seeded_key(rng), r);
    SecurityTestOptions o;
    o.field_shape = {1000, kBatteryElements / 1000};
    o.alpha = kBatteryAlpha;
    o.seed = kSeed + r;
    const SecurityReport rep = stochastic_security_test(keys, sched, o);
    all = all && rep.pass;
    os << "r=" << r << " p(ks,var,lag1)=(" << rep.ks.p_value << "," << rep.variance.p_value << ","
       << rep.autocorrelation.p_value << ") ";
    if (r == 2) {
      o.fault_scale = kFaultScale;
      const SecurityReport fault = stochastic_security_test(keys, sched, o);
      all = all && !fault.pass;
      os << "[1.5x fault var p=" << fault.variance.p_value << (fault.pass ? " missed] " : " caught] ");
    }
  }
  os << "alpha/3 = " << kBatteryAlpha / 3.0;
  report(all, "mixed_noise_indistinguishable", os.str());
}

void detector_null() {
  const Setup s = base_setup();
  std::mt19937_64 rng(kSeed);
  std::vector<Sample> covers, stegos;
  for (std::size_t i = 0; i < kDetectorSamples; ++i) {
    const KeySet cover_keys = derive_keyset(seeded_key(rng), 2);
    covers.push_back(decode_latent(cover_sample(cover_keys.sync, s.params, s.schedule, s.backend), s.codec));
    const KeySet keys = derive_keyset(seeded_key(rng), 2);
    const auto payload = random_payload(rng, capacity_bytes(s.params));
    stegos.push_back(encode(payload, keys, s.params, s.schedule, s.backend, s.codec).sample);
  }
  const DetectorReport r = detector_auc(covers, stegos, kSeed);
  std::ostringstream os;
  os << "AUC " << r.auc << ", 95% CI [" << r.ci.lo << ", " << r.ci.hi << "], " << r.n_cover
     << " cover / " << r.n_stego << " stego, d = 1 stochastic, identity codec";
  report(r.ci.contains(0.5), "detector_null", os.str());
}

/// Bit accuracies of kTrendTrials paired trials: trial k uses the same key
/// and payload under every setting.
std::vector<double> accuracies(const Setup& s) {
  std::vector<double> acc;
  for (std::size_t k = 0; k < kTrendTrials; ++k) {
    std::mt19937_64 rng(kSeed + 7919 * k);
    acc.push_back(run_random_trial(s, rng).bit_accuracy);
  }
  return acc;
}

void trends() {
  bool pass = true;
  std::ostringstream os;
  // (a) fewer codec bits never significantly improve accuracy.
  {
    std::vector<std::vector<double>> acc;
    os << "(a) d=2 bits 8/6/4/2 mean acc";
    for (int bits : {8, 6, 4, 2}) {
      Setup s = base_setup();
      s.params.d = 2;
      s.codec = parse_codec("quantize:" + std::to_string(bits));
      acc.push_back(accuracies(s));
      os << " " << stats::mean(acc.back());
    }
    for (std::size_t i = 1; i < acc.size(); ++i) {
      const auto ci = stats::bootstrap_mean_difference(acc[i], acc[i - 1], kBootstrapReplicates,
                                                       kBootstrapConfidence, kSeed + i);
      if (ci.lo > 0.0) pass = false;
    }
  }
  // (b) more divergent steps never significantly hurt accuracy.
  {
    std::vector<std::vector<double>> acc;
    os << "; (b) quantize:6 d=1/2/3 mean acc";
    for (std::size_t d : {1u, 2u, 3u}) {
      Setup s = base_setup();
      s.params.d = d;
      s.codec = parse_codec("quantize:6");
      acc.push_back(accuracies(s));
      os << " " << stats::mean(acc.back());
    }
    for (std::size_t i = 1; i < acc.size(); ++i) {
      const auto ci = stats::bootstrap_mean_difference(acc[i], acc[i - 1], kBootstrapReplicates,
                                                       kBootstrapConfidence, kSeed + 10 + i);
      if (ci.hi < 0.0) pass = false;
    }
  }
  // (c) f64 not significantly below f32, same rule as (a) and (b).
  {
    Setup s = base_setup();
    s.params.d = 3;
    s.codec = parse_codec("quantize:6");
    s.params.precision = Precision::f32;
    const auto f32 = accuracies(s);
    s.params.precision = Precision::f64;
    const auto f64 = accuracies(s);
    const auto ci = stats::bootstrap_mean_difference(f64, f32, kBootstrapReplicates,
                                                     kBootstrapConfidence, kSeed + 20);
    os << "; (c) d=3 quantize:6 f64 " << std::setprecision(8) << stats::mean(f64) << " vs f32 "
       << stats::mean(f32) << " diff CI [" << ci.lo << ", " << ci.hi << "]" << std::setprecision(6);
    if (ci.hi < 0.0) pass = false;
  }
  os << " (" << kTrendTrials << " paired trials per point, 95% bootstrap)";
  report(pass, "trend_checks", os.str());
}

void determinism() {
  ProtocolParams p;
  p.cells = CellMap({4, 8});
  p.r = 4;
  p.d = 2;
  p.precision = Precision::f32;
  const std::vector<std::uint8_t> payload{'d', 'u', 'c', 'k'};
  SecretKey::Bytes kb{};
  for (std::size_t i = 0; i < kb.size(); ++i) kb[i] = static_cast<std::uint8_t>(i);
  const KeySet keys = derive_keyset(SecretKey(kb), 4);
  const Schedule sched = schedule_preset("linear-50");
  const auto a = serialize_container(encode(payload, keys, p, sched, BackendSpec{}, CodecSpec{}));
  const auto b = serialize_container(encode(payload, keys, p, sched, BackendSpec{}, CodecSpec{}));
  std::ifstream in(std::filesystem::path(PSYDUCK_TEST_DATA) / "golden_encode.psyd", std::ios::binary);
  const std::vector<std::uint8_t> golden{std::istreambuf_iterator<char>(in), {}};

  const Setup s = base_setup();
  std::mt19937_64 rng(kSeed);
  const KeySet big_keys = derive_keyset(seeded_key(rng), 2);
  const auto big_payload = random_payload(rng, capacity_bytes(s.params));
  const auto c1 = serialize_container(encode(big_payload, big_keys, s.params, s.schedule, s.backend, s.codec));
  const auto c2 = serialize_container(encode(big_payload, big_keys, s.params, s.schedule, s.backend, s.codec));

  std::ostringstream os;
  os << "repeat encodes " << (a == b && c1 == c2 ? "byte-identical" : "DIFFER") << ", golden file "
     << (golden.empty() ? "missing" : a == golden ? "matches" : "differs") << " (" << a.size()
     << " bytes)";
  report(a == b && c1 == c2 && a == golden, "determinism_and_golden", os.str());
}

void wrong_key() {
  const Setup s = base_setup();
  std::mt19937_64 rng(kSeed);
  std::size_t framing = 0;
  for (std::size_t k = 0; k < kWrongKeyTrials; ++k) {
    const KeySet keys = derive_keyset(seeded_key(rng), 2);
    const KeySet wrong = derive_keyset(seeded_key(rng), 2);
    const auto payload = random_payload(rng, capacity_bytes(s.params));
    const auto c = encode(payload, keys, s.params, s.schedule, s.backend, s.codec);
    try {
      decode(c, wrong, s.params, s.schedule, s.backend, s.codec);
    } catch (const FramingError&) {
      ++framing;
    }
  }
  report(framing >= kWrongKeyRequired, "wrong_key_framing_error",
         std::to_string(framing) + "/" + std::to_string(kWrongKeyTrials) +
             " wrong-key decodes raised a framing error (need " +
             std::to_string(kWrongKeyRequired) + ")");
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<void()>>> checks = {
      {"exact_round_trip", round_trip},
      {"brute_force_decoder_equivalence", brute_force},
      {"security_error_bound", bound},
      {"mixed_noise_indistinguishable", battery},
      {"detector_null", detector_null},
      {"trend_checks", trends},
      {"determinism_and_golden", determinism},
      {"wrong_key_framing_error", wrong_key},
  };
  for (const auto& [name, fn] : checks) {
    try {
      fn();
    } catch (const std::exception& e) {
      report(false, name, std::string("threw: ") + e.what());
    }
  }
  std::cout << (failures == 0 ? "ALL PASS" : std::to_string(failures) + " FAILED") << std::endl;
  return failures == 0 ? 0 : 1;
}
