#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "psyduck/config.hpp"
#include "psyduck/protocol.hpp"
#include "psyduck/stats.hpp"

namespace psyduck {

/// Everything one protocol run needs apart from keys and payload.
struct Setup {
  ProtocolParams params;
  Schedule schedule;
  BackendSpec backend;
  CodecSpec codec;

  /// `predictor` is attached when the config selects the bridge backend.
  static Setup from_config(const Config& config,
                           std::shared_ptr<MeanPredictor> predictor = nullptr);
};

struct TrialRecord {
  std::size_t d = 0;
  std::size_t r = 0;
  Precision precision = Precision::f64;
  std::string codec;
  std::size_t bytes_encoded = 0;
  double bit_accuracy = 0.0;
  double e_sec = 0.0;
  double e_rec = 0.0;
  double separation_margin = 0.0;
  double runtime_ms = 0.0;
  bool payload_recovered = false;
};

/// Deterministic 32-byte key drawn from a seeded generator (tests, sweeps).
SecretKey seeded_key(std::mt19937_64& rng);

/// ||x0^A - x0|| where x0 is the cover produced by the plain k_s trajectory.
double security_error(const Sample& stego_latent, const KeySet& keys,
                      const ProtocolParams& params, const Schedule& sched,
                      const BackendSpec& spec);

/// ||x0^A - Mix(b, references)|| for the true message b.
double reconstruction_error(const Sample& received, const BitMessage& message,
                            const DivergedSet& references, const CellMap& cells);

/// Fraction of framed bits (header, payload and padding) decoded correctly.
double bit_accuracy(const BitMessage& sent, const BitMessage& received);

/// Full encode -> codec -> decode round for one key and payload.
TrialRecord run_trial(const Setup& setup, const SecretKey& master,
                      std::span<const std::uint8_t> payload);

/// Trial with a key and a capacity-filling payload drawn from `rng`.
TrialRecord run_random_trial(const Setup& setup, std::mt19937_64& rng);

struct BoundPoint {
  std::size_t d = 0;
  std::size_t r = 0;
  std::size_t trials = 0;
  double mean_e_sec = 0.0;
  double sigma = 0.0;  // sigma_{d+1}
  double ratio = 0.0;  // mean_e_sec / (d r sigma_{d+1} sqrt(n))
};

struct BoundReport {
  std::vector<BoundPoint> points;
  double anchor_ratio = 0.0;  // ratio at d=1, r=2
  double max_ratio = 0.0;
  bool pass = false;
};

/// Sweeps d x r with `trials` random digit strings each. PASS iff every ratio
/// is finite and positive and max ratio <= 3 * ratio(d=1, r=2).
BoundReport bound_check(const Setup& base, std::span<const std::size_t> ds,
                        std::span<const std::size_t> rs, std::size_t trials,
                        std::uint64_t seed);

struct SecurityTestOptions {
  Shape field_shape{1000, 1000};
  std::size_t n_fields = 1;
  std::size_t references = 0;  // 0 means all keys.refs
  double fault_scale = 1.0;    // multiplies the mixed field, for power checks
  double alpha = 0.01;
  std::uint64_t seed = 1;
};

struct SecurityReport {
  std::size_t elements = 0;
  std::size_t references = 0;
  stats::TestResult ks;
  stats::TestResult variance;
  stats::TestResult autocorrelation;
  double corrected_alpha = 0.0;
  bool pass = false;
};

/// Mixes independent keyed unit-normal fields with random digits and tests the
/// result against iid N(0,1): KS, variance and lag-1 autocorrelation, each at
/// alpha / 3.
SecurityReport stochastic_security_test(const KeySet& keys, const Schedule& sched,
                                        const SecurityTestOptions& options);

/// mean, variance, lag-1 autocorrelation and mean squared first difference
/// along the last axis.
std::array<double, 4> detector_features(const Sample& sample);

struct DetectorReport {
  std::string feature_set = "moments+lag1+hf";
  double auc = 0.5;
  stats::Interval ci;
  std::size_t n_cover = 0;
  std::size_t n_stego = 0;
};

/// Fisher discriminant on even-indexed samples, AUC with a 95% bootstrap CI
/// on the odd-indexed ones. Needs balanced sets of at least 100.
DetectorReport detector_auc(std::span<const Sample> covers, std::span<const Sample> stegos,
                            std::uint64_t seed = 7);

/// Grid axes for run_sweep. Empty axes fall back to the base config value.
struct Grid {
  std::vector<std::size_t> d;
  std::vector<std::size_t> r;
  std::vector<Precision> precision;
  std::vector<CodecSpec> codec;
  bool auc = false;

  bool empty() const { return d.empty() && r.empty() && precision.empty() && codec.empty(); }
  std::size_t points() const;
};

/// Lines such as "d = 1,2,3", "precision = f32,f64", "codec = quantize:6",
/// "auc = on".
Grid parse_grid(std::string_view text);

struct SweepSummary {
  std::vector<TrialRecord> aggregates;
  std::vector<std::optional<DetectorReport>> detectors;
  std::size_t trial_rows = 0;
};

inline constexpr const char* kSweepHeader =
    "kind,d,r,precision,codec,bytes,bit_accuracy,E_sec,E_rec,separation_margin,auc,runtime_ms";

/// One CSV row per trial and one aggregate row per grid point, in
/// (grid index, trial index) order.
SweepSummary run_sweep(const Config& base, const Grid& grid, std::size_t trials, std::ostream& csv,
                       std::shared_ptr<MeanPredictor> predictor = nullptr);
SweepSummary run_sweep(const Config& base, const Grid& grid, std::size_t trials,
                       const std::filesystem::path& out,
                       std::shared_ptr<MeanPredictor> predictor = nullptr);

}  // namespace psyduck
