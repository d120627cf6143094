#pragma once

#include <chrono>
#include <cstdint>
#include <string>
#include <string_view>

#include "psyduck/diffusion.hpp"
#include "psyduck/sample.hpp"

namespace psyduck {

inline constexpr std::string_view kBridgeVersion = "psyduck-bridge/1";

/// What a bridge reports in its handshake.
struct BridgeInfo {
  std::string version;
  Shape shape;
  std::size_t T = 0;
  double beta_start = 0.0;
  double beta_end = 0.0;
};

/// Base64 of the little-endian f32 buffer.
std::string encode_tensor(const Sample& sample);
/// Inverse of encode_tensor. Throws BackendError on bad base64 or length.
Sample decode_tensor(std::string_view base64, const Shape& shape);

/// Client side of the model bridge: one child process spoken to over
/// newline-delimited JSON on its stdin/stdout, one request in flight.
///
/// Only deterministic means cross the wire. Keyed noise is added by the
/// caller and key material never reaches the child.
class BridgeClient : public MeanPredictor {
 public:
  struct Options {
    std::string command;  // run through /bin/sh -c
    std::chrono::milliseconds timeout{120'000};
  };

  explicit BridgeClient(Options options);
  ~BridgeClient() override;

  BridgeClient(const BridgeClient&) = delete;
  BridgeClient& operator=(const BridgeClient&) = delete;

  /// Version handshake. Must be called before any other request.
  BridgeInfo init();

  Sample predict_mean(const Sample& x_t, std::size_t t) override;
  double sigma(std::size_t t);
  Sample enc(const Sample& x);
  Sample dec(const Sample& z);

  /// Sends shutdown and reaps the child. Idempotent.
  void shutdown();

  /// Writes one raw line and returns the raw response line. Exposed for
  /// conformance tests of the wire format.
  std::string transact_raw(const std::string& line);

  bool alive() const noexcept { return pid_ > 0; }
  std::uint64_t last_id() const noexcept { return next_id_ - 1; }

 private:
  std::string read_line();
  void write_line(const std::string& line);
  void kill_child();
  std::string request(const std::string& op, const std::string& extra_fields);
  Sample tensor_request(const std::string& op, const Sample& x, const std::string& extra);

  Options options_;
  int pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string buffer_;
  std::uint64_t next_id_ = 1;
  bool initialised_ = false;
  Shape shape_;
};

/// Throws ConfigError when the bridge's shape or schedule disagrees with the
/// local configuration.
void check_bridge_info(const BridgeInfo& info, const Shape& shape, const Schedule& sched);

}  // namespace psyduck
