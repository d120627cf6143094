#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>

#include "psyduck/codec.hpp"
#include "psyduck/diffusion.hpp"
#include "psyduck/protocol.hpp"

namespace psyduck {

/// Everything that both parties must agree on besides the key.
///
/// Text form is flat `section.key = value` lines; `#` starts a comment.
/// Setting any of schedule.T / beta_start / beta_end switches from the preset
/// to an explicit schedule.
struct Config {
  std::string schedule_preset = "linear-50";
  std::size_t schedule_T = 50;
  double beta_start = 1e-4;
  double beta_end = 0.05;

  std::string backend = "analytic";  // or "bridge:<command line>"
  double prior_mean = 0.0;
  double prior_std = 1.0;
  StepMode step_mode = StepMode::stochastic;
  double bridge_timeout_s = 120.0;

  CodecSpec codec;

  std::size_t d = 1;
  std::size_t r = 2;
  Shape cell_shape;  // empty = unit cells
  FinalStepKeyMode final_step_key_mode = FinalStepKeyMode::sync;
  Precision precision = Precision::f64;
  std::size_t repetition = 1;

  Shape sample_shape{43, 96};
  Space space = Space::latent;

  std::uint64_t seed = 20250101;  // sweeps and test batteries only

  Schedule schedule() const;
  ProtocolParams protocol() const;
  /// Analytic backend spec; a bridge predictor must be attached by the caller.
  BackendSpec backend_spec() const;
  bool uses_bridge() const { return backend.rfind("bridge:", 0) == 0; }
  std::string bridge_command() const;
};

using KeyValues = std::map<std::string, std::string>;

/// Splits text into key/value pairs. Throws ConfigError on malformed lines or
/// duplicate keys.
KeyValues parse_key_values(std::string_view text);

/// Builds and validates a config, applying every cross-module constraint.
Config config_from_values(const KeyValues& values);

Config parse_config(std::string_view text);
Config load_config(const std::string& path);

/// Canonical text form; parse_config(serialize_config(c)) == c.
std::string serialize_config(const Config& config);

/// PSYDUCK_<SECTION>_<KEY>=value entries from `environ`-style storage mapped
/// onto section.key (lower-cased, first underscore becomes the dot).
KeyValues env_overrides(char** envp);

/// Applies overrides on top of base. An explicit schedule override drops a
/// preset and vice versa.
void merge_overrides(KeyValues& base, const KeyValues& overrides);

/// Throws ConfigError describing the first violated constraint.
void validate_config(const Config& config);

bool operator==(const Config& a, const Config& b);

}  // namespace psyduck
