#include <gtest/gtest.h>

#include <bit>
#include <cmath>
#include <limits>

#include "json.hpp"
#include "psyduck/bridge.hpp"
#include "psyduck/error.hpp"
#include "psyduck/protocol.hpp"
#include "test_util.hpp"

using namespace psyduck;
using psyduck::testing::counting_key;

#ifndef PSYDUCK_MOCK_BRIDGE
#error "PSYDUCK_MOCK_BRIDGE must name the mock responder binary"
#endif

namespace {

std::shared_ptr<BridgeClient> spawn(const std::string& args = "--shape 4x8",
                                    std::chrono::milliseconds timeout = std::chrono::seconds(10)) {
  BridgeClient::Options o;
  o.command = std::string(PSYDUCK_MOCK_BRIDGE) + " " + args;
  o.timeout = timeout;
  return std::make_shared<BridgeClient>(o);
}

TEST(TensorCodec, F32RoundTripIsBitExact) {
  const std::vector<double> vals = {0.0, -0.0, 1.0, -2.5, 1e-40, 3.4e38,
                                    static_cast<double>(std::numeric_limits<float>::denorm_min()),
                                    0.1f, -123.456f};
  const Sample s({vals.size()}, vals, Precision::f32);
  const Sample back = decode_tensor(encode_tensor(s), s.shape);
  for (std::size_t i = 0; i < vals.size(); ++i)
    EXPECT_EQ(std::bit_cast<std::uint32_t>(static_cast<float>(back.values[i])),
              std::bit_cast<std::uint32_t>(static_cast<float>(vals[i])));
}

TEST(TensorCodec, KnownEncoding) {
  EXPECT_EQ(encode_tensor(Sample({1}, {1.0})), "AACAPw==");  // 00 00 80 3f
  EXPECT_THROW(decode_tensor("AACAPw==", {2}), BackendError);
  EXPECT_THROW(decode_tensor("%%%", {1}), BackendError);
  EXPECT_THROW(decode_tensor("AADAfw==", {1}), BackendError);  // NaN
}

TEST(Bridge, Handshake) {
  auto b = spawn();
  const BridgeInfo info = b->init();
  EXPECT_EQ(info.version, kBridgeVersion);
  EXPECT_EQ(info.shape, (Shape{4, 8}));
  EXPECT_EQ(info.T, 50u);
  EXPECT_NO_THROW(check_bridge_info(info, {4, 8}, schedule_preset("linear-50")));
  EXPECT_THROW(check_bridge_info(info, {43, 96}, schedule_preset("linear-50")), ConfigError);
  EXPECT_THROW(check_bridge_info(info, {4, 8}, schedule_preset("linear-1000")), ConfigError);
  b->shutdown();
  EXPECT_FALSE(b->alive());
  b->shutdown();
}

TEST(Bridge, VersionMismatchRejected) {
  auto b = spawn("--shape 4x8 --version psyduck-bridge/0");
  EXPECT_THROW(b->init(), BackendError);
}

TEST(Bridge, RequestsBeforeInitRejected) {
  auto b = spawn();
  EXPECT_THROW(b->sigma(3), BackendError);
}

TEST(Bridge, TensorSurvivesRoundTripBitExactly) {
  auto b = spawn();
  b->init();
  const Sample x = gaussian_field({counting_key(1), 1, StreamTag::analysis}, {4, 8}, Precision::f32);
  EXPECT_EQ(b->enc(x), x);
  EXPECT_EQ(b->dec(x), x);
}

TEST(Bridge, ServesTheModelMean) {
  auto b = spawn();
  b->init();
  const Schedule s = schedule_preset("linear-50");
  const Sample x = gaussian_field({counting_key(2), 1, StreamTag::analysis}, {4, 8}, Precision::f32);
  const Sample mu = b->predict_mean(x, 17);
  const Sample want = model_predict(x, 17, s, BackendSpec{});
  for (std::size_t i = 0; i < x.size(); ++i)
    EXPECT_EQ(mu.values[i], static_cast<double>(static_cast<float>(want.values[i])));
  EXPECT_DOUBLE_EQ(b->sigma(17), s.sigma(17));
}

TEST(Bridge, RecoversFromErrorResponses) {
  auto b = spawn();
  b->init();
  const auto raw = nlohmann::json::parse(b->transact_raw("this is not json"));
  EXPECT_FALSE(raw.at("ok").get<bool>());
  EXPECT_EQ(raw.at("code"), "bad_request");
  EXPECT_TRUE(b->alive());
  const auto unknown = nlohmann::json::parse(b->transact_raw(R"({"id":99,"op":"teleport"})"));
  EXPECT_EQ(unknown.at("id"), 99);
  EXPECT_EQ(unknown.at("code"), "unknown_op");
  // A malformed tensor is reported as an error response and the session goes on.
  const auto bad = nlohmann::json::parse(
      b->transact_raw(R"({"id":100,"op":"enc","shape":[4,8],"tensor":"AAAA"})"));
  EXPECT_FALSE(bad.at("ok").get<bool>());
  EXPECT_DOUBLE_EQ(b->sigma(5), schedule_preset("linear-50").sigma(5));
}

TEST(Bridge, ErrorResponseBecomesBackendError) {
  auto b = spawn();
  b->init();
  try {
    b->sigma(0);
    FAIL() << "expected BackendError";
  } catch (const BackendError& e) {
    EXPECT_NE(std::string(e.what()).find("bad_request"), std::string::npos);
  }
  EXPECT_TRUE(b->alive());
}

TEST(Bridge, TimeoutKillsTheChild) {
  auto b = spawn("--shape 4x8 --hang-on sigma", std::chrono::milliseconds(300));
  b->init();
  const auto start = std::chrono::steady_clock::now();
  EXPECT_THROW(b->sigma(3), BackendError);
  EXPECT_LT(std::chrono::steady_clock::now() - start, std::chrono::seconds(5));
  EXPECT_FALSE(b->alive());
  EXPECT_THROW(b->sigma(3), BackendError);
}

TEST(Bridge, ChildExitIsBackendError) {
  auto b = spawn("--shape 4x8 --exit-on sigma");
  b->init();
  EXPECT_THROW(b->sigma(3), BackendError);
  EXPECT_FALSE(b->alive());
}

TEST(Bridge, GarbageResponseIsBackendError) {
  auto b = spawn("--shape 4x8 --garbage-on sigma");
  b->init();
  EXPECT_THROW(b->sigma(3), BackendError);
}

TEST(Bridge, MissingCommandFailsAtFirstRequest) {
  BridgeClient::Options o;
  o.command = "/nonexistent/bridge-binary";
  o.timeout = std::chrono::seconds(5);
  BridgeClient b(o);
  EXPECT_THROW(b.init(), BackendError);
}

TEST(Bridge, DrivesTheProtocolEndToEnd) {
  auto b = spawn();
  ASSERT_NO_THROW(check_bridge_info(b->init(), {4, 8}, schedule_preset("linear-50")));
  BackendSpec spec;
  spec.kind = BackendKind::external_bridge;
  spec.predictor = b;
  ProtocolParams p;
  p.cells = CellMap({4, 8});
  p.r = 4;
  p.d = 2;
  p.precision = Precision::f32;
  const Schedule s = schedule_preset("linear-50");
  const KeySet keys = derive_keyset(counting_key(9), 4);
  const std::vector<std::uint8_t> payload{'q', 'u', 'a', 'k'};
  const auto c = encode(payload, keys, p, s, spec, CodecSpec{});
  EXPECT_EQ(decode(c, keys, p, s, spec, CodecSpec{}), payload);
  // Same protocol on the in-process model differs only by f32 rounding of the mean.
  const auto local = encode(payload, keys, p, s, BackendSpec{}, CodecSpec{});
  EXPECT_LT(l2_distance(c.sample, local.sample), 1e-5);
}

}  // namespace
