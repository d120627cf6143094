#include "psyduck/codec.hpp"

#include <sodium.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>
#include <vector>

#include "psyduck/error.hpp"
#include "psyduck/keys.hpp"

namespace psyduck {
namespace {

std::vector<std::string_view> split(std::string_view text, char sep) {
  std::vector<std::string_view> parts;
  std::size_t pos = 0;
  while (true) {
    auto end = text.find(sep, pos);
    parts.push_back(text.substr(pos, end == std::string_view::npos ? end : end - pos));
    if (end == std::string_view::npos) break;
    pos = end + 1;
  }
  return parts;
}

template <typename T>
T parse_number(std::string_view token, std::string_view whole) {
  T value{};
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (token.empty() || ec != std::errc{} || ptr != token.data() + token.size())
    throw ParameterError("malformed codec '" + std::string(whole) + "'");
  return value;
}

// Public, fixed key: the channel noise is not a secret.
const SecretKey& channel_key() {
  static const SecretKey key = [] {
    SecretKey::Bytes bytes{};
    const std::string_view label = "psyduck-public-channel-noise";
    crypto_generichash(bytes.data(), bytes.size(),
                       reinterpret_cast<const unsigned char*>(label.data()), label.size(),
                       nullptr, 0);
    return SecretKey(bytes);
  }();
  return key;
}

Sample quantize(const Sample& z, const CodecSpec& spec) {
  const double q = spec.step();
  const long levels = 1L << spec.bits;
  Sample out = z;
  for (auto& v : out.values) {
    const double clipped = std::clamp(v, spec.clip_lo, spec.clip_hi);
    long idx = static_cast<long>(std::floor((clipped - spec.clip_lo) / q));
    idx = std::clamp(idx, 0L, levels - 1);
    v = spec.clip_lo + (static_cast<double>(idx) + 0.5) * q;
  }
  out.normalize();
  return out;
}

}  // namespace

void validate_codec(const CodecSpec& spec) {
  if (spec.kind != CodecSpec::Kind::identity && (spec.bits < 1 || spec.bits > 16))
    throw ParameterError("codec bits must lie in [1, 16]");
  if (!(spec.noise_std >= 0.0)) throw ParameterError("codec noise_std must be >= 0");
  if (!(spec.clip_lo < spec.clip_hi)) throw ParameterError("codec clip range must have lo < hi");
}

CodecSpec parse_codec(std::string_view text) {
  const auto parts = split(text, ':');
  CodecSpec spec;
  if (parts[0] == "identity" && parts.size() == 1) {
    spec.kind = CodecSpec::Kind::identity;
  } else if (parts[0] == "quantize" && parts.size() == 2) {
    spec.kind = CodecSpec::Kind::quantize;
    spec.bits = parse_number<int>(parts[1], text);
  } else if (parts[0] == "quantize_noise" && parts.size() == 3) {
    spec.kind = CodecSpec::Kind::quantize_noise;
    spec.bits = parse_number<int>(parts[1], text);
    spec.noise_std = parse_number<double>(parts[2], text);
  } else {
    throw ParameterError("malformed codec '" + std::string(text) + "'");
  }
  validate_codec(spec);
  return spec;
}

std::string to_string(const CodecSpec& spec) {
  std::ostringstream os;
  switch (spec.kind) {
    case CodecSpec::Kind::identity: os << "identity"; break;
    case CodecSpec::Kind::quantize: os << "quantize:" << spec.bits; break;
    case CodecSpec::Kind::quantize_noise:
      os << "quantize_noise:" << spec.bits << ':' << spec.noise_std;
      break;
  }
  return os.str();
}

Sample decode_latent(const Sample& z, const CodecSpec& spec) {
  validate_codec(spec);
  switch (spec.kind) {
    case CodecSpec::Kind::identity: return z;
    case CodecSpec::Kind::quantize: return quantize(z, spec);
    case CodecSpec::Kind::quantize_noise: {
      Sample out = quantize(z, spec);
      std::vector<double> noise(out.size());
      gaussian_values(NoiseContext{channel_key(), 0, StreamTag::channel}, 0, noise);
      for (std::size_t i = 0; i < out.size(); ++i) out.values[i] += spec.noise_std * noise[i];
      out.normalize();
      return out;
    }
  }
  return z;
}

Sample encode_latent(const Sample& x, const CodecSpec& spec) {
  validate_codec(spec);
  if (spec.kind == CodecSpec::Kind::identity) return x;
  Sample out = x;
  for (auto& v : out.values) v = std::clamp(v, spec.clip_lo, spec.clip_hi);
  out.normalize();
  return out;
}

}  // namespace psyduck
