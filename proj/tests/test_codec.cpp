#include <gtest/gtest.h>

#include <cmath>

#include "psyduck/codec.hpp"
#include "psyduck/error.hpp"
#include "psyduck/keys.hpp"
#include "psyduck/stats.hpp"
#include "test_util.hpp"

using namespace psyduck;
using psyduck::testing::counting_key;

namespace {

Sample unit_field(std::size_t n, std::uint8_t seed = 1) {
  return gaussian_field({counting_key(seed), 3, StreamTag::analysis}, {n});
}

double roundtrip_rmse(const Sample& z, const CodecSpec& spec) {
  const Sample back = encode_latent(decode_latent(z, spec), spec);
  return l2_distance(z, back) / std::sqrt(double(z.size()));
}

TEST(Codec, IdentityIsBitExact) {
  const Sample z = unit_field(100);
  EXPECT_EQ(decode_latent(z, CodecSpec{}), z);
  EXPECT_EQ(encode_latent(decode_latent(z, CodecSpec{}), CodecSpec{}), z);
}

TEST(Codec, TwoBitLevels) {
  const CodecSpec spec = parse_codec("quantize:2");
  CodecSpec c = spec;
  c.clip_lo = -1.0;
  c.clip_hi = 1.0;
  const Sample out = decode_latent(Sample({6}, {0.3, -0.3, 0.9, -2.0, 0.0, 0.74}), c);
  EXPECT_EQ(out.values, (std::vector<double>{0.25, -0.25, 0.75, -0.75, 0.25, 0.75}));
}

TEST(Codec, EightBitErrorWithinHalfStep) {
  const CodecSpec spec = parse_codec("quantize:8");
  EXPECT_DOUBLE_EQ(spec.step() / 2, 0.015625);
  Sample z = unit_field(100000);
  for (auto& v : z.values) v = std::clamp(v, -4.0, 4.0);
  const Sample q = decode_latent(z, spec);
  double worst = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) worst = std::max(worst, std::abs(q.values[i] - z.values[i]));
  EXPECT_LE(worst, 0.015625);
}

TEST(Codec, QuantizerIsIdempotent) {
  for (int bits : {2, 4, 6, 8}) {
    CodecSpec spec;
    spec.kind = CodecSpec::Kind::quantize;
    spec.bits = bits;
    const Sample once = decode_latent(unit_field(5000), spec);
    EXPECT_EQ(decode_latent(once, spec), once);
    EXPECT_EQ(encode_latent(once, spec), once);
  }
}

TEST(Codec, QuantizeNoiseMatchesErrorModel) {
  const CodecSpec spec = parse_codec("quantize_noise:6:0.05");
  Sample z = unit_field(1000000, 9);
  for (auto& v : z.values) v = std::clamp(v, -3.9, 3.9);
  const Sample back = encode_latent(decode_latent(z, spec), spec);
  std::vector<double> err(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) err[i] = back.values[i] - z.values[i];
  const double q = spec.step();
  const double model = std::sqrt(q * q / 12.0 + spec.noise_std * spec.noise_std);
  EXPECT_NEAR(std::sqrt(stats::variance(err)) / model, 1.0, 0.10);
}

TEST(Codec, DistortionMonotoneInBitsAndNoise) {
  const Sample z = unit_field(20000, 4);
  double prev = std::numeric_limits<double>::infinity();
  for (int bits : {2, 4, 6, 8, 10}) {
    const double e = roundtrip_rmse(z, parse_codec("quantize:" + std::to_string(bits)));
    EXPECT_LE(e, prev);
    prev = e;
  }
  prev = 0.0;
  for (const char* noise : {"0", "0.01", "0.05", "0.2"}) {
    const double e = roundtrip_rmse(z, parse_codec(std::string("quantize_noise:8:") + noise));
    EXPECT_GE(e, prev);
    prev = e;
  }
}

TEST(Codec, ParseAndFormat) {
  for (const char* text : {"identity", "quantize:8", "quantize:2", "quantize_noise:8:0.01"})
    EXPECT_EQ(to_string(parse_codec(text)), text);
  const CodecSpec spec = parse_codec("quantize_noise:6:0.25");
  EXPECT_EQ(spec.kind, CodecSpec::Kind::quantize_noise);
  EXPECT_EQ(spec.bits, 6);
  EXPECT_DOUBLE_EQ(spec.noise_std, 0.25);
}

TEST(Codec, RejectsMalformedSpecs) {
  for (const char* text : {"", "jpeg", "quantize", "quantize:0", "quantize:17", "quantize:x",
                           "quantize_noise:8", "quantize_noise:8:-1", "identity:3"})
    EXPECT_THROW(parse_codec(text), ParameterError) << text;
}

TEST(Codec, ChannelNoiseIsPublic) {
  const CodecSpec spec = parse_codec("quantize_noise:8:0.1");
  const Sample z = unit_field(64);
  EXPECT_EQ(decode_latent(z, spec), decode_latent(z, spec));
}

}  // namespace
