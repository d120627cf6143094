#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "psyduck/sample.hpp"

namespace psyduck {

/// 32 bytes of opaque key material. Deliberately not streamable.
class SecretKey {
 public:
  static constexpr std::size_t kSize = 32;
  using Bytes = std::array<std::uint8_t, kSize>;

  SecretKey() = default;
  explicit SecretKey(const Bytes& bytes) : bytes_(bytes) {}

  /// Fresh key from the operating system entropy source.
  static SecretKey random();
  /// Parses exactly 64 hex characters.
  static SecretKey from_hex(std::string_view hex);

  const Bytes& bytes() const noexcept { return bytes_; }
  std::string to_hex() const;

  bool operator==(const SecretKey&) const = default;

 private:
  Bytes bytes_{};
};

struct KeySet {
  SecretKey sync;
  std::vector<SecretKey> refs;

  std::size_t r() const noexcept { return refs.size(); }
  bool operator==(const KeySet&) const = default;
};

/// Checks r >= 2 and pairwise distinctness of all r+1 keys.
void validate_keyset(const KeySet& keys);

/// Expands one shared secret into a sync key and r reference keys using
/// BLAKE2b-based subkey derivation. Reference keys are indexed, so the
/// first r keys of a larger set equal the keys of a smaller one.
KeySet derive_keyset(const SecretKey& master, std::size_t r);

/// Selects one of several independent noise streams under the same key.
enum class StreamTag : std::uint32_t {
  initial = 1,  // x_T drawn by preprocess
  step = 2,     // noise injected by a denoising step
  forward = 3,  // forward diffusion
  channel = 4,  // public channel noise of the codec simulation
  analysis = 5, // test batteries
};

struct NoiseContext {
  SecretKey key;
  std::uint64_t timestep = 0;
  StreamTag tag = StreamTag::step;
};

/// Position of one element inside the ChaCha20 keystream.
struct GeneratorCounter {
  std::array<std::uint8_t, 12> nonce{};
  std::uint32_t block = 0;
  std::uint32_t word = 0;  // first of the two 64-bit words, 0..7 in units of u64

  auto operator<=>(const GeneratorCounter&) const = default;
};

/// Counter-based keyed generator: element j consumes 64-bit little-endian
/// keystream words 2j and 2j+1 of ChaCha20-IETF under (key, nonce =
/// le64(timestep) || le32(tag)).
GeneratorCounter generator_counter(const NoiseContext& ctx, std::size_t element);

/// Standard-normal values for elements [first, first + out.size()) of the
/// field named by ctx. Any sub-range reproduces the same values as the full
/// field.
void gaussian_values(const NoiseContext& ctx, std::size_t first, std::span<double> out);

/// iid N(0,1) field in row-major order. f32 fields are computed in f64 and
/// rounded once per element.
Sample gaussian_field(const NoiseContext& ctx, const Shape& shape,
                      Precision precision = Precision::f64);

/// Box-Muller transform of two raw 64-bit words (exposed for tests).
double box_muller(std::uint64_t w1, std::uint64_t w2);

struct LoadedKey {
  SecretKey key;
  std::optional<std::string> warning;  // set when the file is group/world readable
};

LoadedKey load_key_file(const std::filesystem::path& path);
/// Writes 64 hex characters and a newline with mode 0600.
void write_key_file(const std::filesystem::path& path, const SecretKey& key);

}  // namespace psyduck
