#pragma once

#include <string>
#include <string_view>

#include "psyduck/sample.hpp"

namespace psyduck {

/// Stand-in for a latent autoencoder round trip: a clip + uniform quantizer,
/// optionally followed by additive Gaussian channel noise.
struct CodecSpec {
  enum class Kind { identity, quantize, quantize_noise };

  Kind kind = Kind::identity;
  int bits = 8;
  double noise_std = 0.0;
  double clip_lo = -4.0;
  double clip_hi = 4.0;

  double step() const { return (clip_hi - clip_lo) / static_cast<double>(1u << bits); }
  bool operator==(const CodecSpec&) const = default;
};

void validate_codec(const CodecSpec& spec);

/// "identity", "quantize:8", "quantize_noise:8:0.01".
CodecSpec parse_codec(std::string_view text);
std::string to_string(const CodecSpec& spec);

/// Latent -> transmitted signal.
Sample decode_latent(const Sample& z, const CodecSpec& spec);
/// Transmitted signal -> latent. Clips for quantizing codecs, so it is
/// idempotent on quantizer output.
Sample encode_latent(const Sample& x, const CodecSpec& spec);

}  // namespace psyduck
