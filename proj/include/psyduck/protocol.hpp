#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "psyduck/codec.hpp"
#include "psyduck/diffusion.hpp"
#include "psyduck/keys.hpp"
#include "psyduck/sample.hpp"

namespace psyduck {

/// Partition of a sample into equally shaped rectangular cells, numbered
/// row-major over the cell grid. Each cell carries one message digit.
class CellMap {
 public:
  CellMap() = default;
  /// An empty cell_shape means one element per cell.
  explicit CellMap(Shape sample_shape, Shape cell_shape = {});

  const Shape& sample_shape() const noexcept { return sample_shape_; }
  const Shape& cell_shape() const noexcept { return cell_shape_; }
  const Shape& grid_shape() const noexcept { return grid_shape_; }
  std::size_t count() const noexcept { return count_; }
  std::size_t element_count() const noexcept { return cell_of_.size(); }

  /// Cell index of a row-major element index.
  std::size_t cell_of(std::size_t element) const { return cell_of_.at(element); }
  /// Row-major element indices of one cell, ascending.
  std::vector<std::size_t> elements_of(std::size_t cell) const;

  bool operator==(const CellMap& o) const {
    return sample_shape_ == o.sample_shape_ && cell_shape_ == o.cell_shape_;
  }

 private:
  Shape sample_shape_;
  Shape cell_shape_;
  Shape grid_shape_;
  std::size_t count_ = 0;
  std::vector<std::uint32_t> cell_of_;
};

enum class FinalStepKeyMode { sync, reference };

std::string_view to_string(FinalStepKeyMode m);
FinalStepKeyMode parse_final_step_key_mode(std::string_view text);

struct ProtocolParams {
  std::size_t d = 1;  // divergent steps
  std::size_t r = 2;  // reference keys
  CellMap cells;
  FinalStepKeyMode final_step_key_mode = FinalStepKeyMode::sync;
  StepMode step_mode = StepMode::stochastic;
  Precision precision = Precision::f64;
  Space space = Space::latent;
  /// Odd repetition factor per digit; 1 disables the repetition code.
  std::size_t repetition = 1;
};

inline constexpr std::size_t kHeaderBits = 32;

/// floor(log2 r).
std::size_t bits_per_digit(std::size_t r);

/// Distinct digits the carrier can hold: cells / repetition.
std::size_t digit_slots(const ProtocolParams& params);

/// Payload bits: slots * floor(log2 r) - 32 header bits. Independent of d.
std::size_t capacity(const ProtocolParams& params);
inline std::size_t capacity_bytes(const ProtocolParams& params) { return capacity(params) / 8; }

/// Checks the cross-field constraints, including d + 1 <= T.
void validate_params(const ProtocolParams& params, const Schedule& sched);
/// validate_params without the framing capacity requirement.
void validate_geometry(const ProtocolParams& params, const Schedule& sched);

/// One digit in [0, r) per cell.
struct BitMessage {
  std::vector<std::uint32_t> digits;
  std::size_t r = 2;
  std::size_t repetition = 1;

  bool operator==(const BitMessage&) const = default;
};

/// Header (32-bit big-endian byte length) || payload || zero padding, grouped
/// most-significant-first into floor(log2 r)-bit digits, one per cell.
BitMessage pack_message(std::span<const std::uint8_t> payload, const ProtocolParams& params);

/// Inverse of pack_message. Repeated digits are decided by plurality with ties
/// going to the lowest digit. Throws FramingError when the declared length
/// exceeds capacity.
std::vector<std::uint8_t> unpack_message(const BitMessage& message);

/// Raw framed bit stream carried by a message (header included).
std::vector<std::uint8_t> message_bits(const BitMessage& message);

struct DivergedSet {
  std::size_t t = 0;
  std::vector<Sample> samples;
};

/// Element-wise selection: every element of cell j comes from
/// samples[digits[j]].
Sample mix(const BitMessage& message, const DivergedSet& set, const CellMap& cells);
Sample mix(std::span<const std::uint32_t> digits, std::span<const Sample> samples,
           const CellMap& cells);

/// Runs `steps` denoising steps from x_start under each reference key.
DivergedSet diverge(const Sample& x_start, std::size_t t_start, std::size_t steps,
                    const KeySet& keys, const Schedule& sched, const BackendSpec& spec);

/// Shared ancestor x_{d+1}: preprocess(k_s) denoised with k_s down to d+1.
Sample sync_ancestor(const SecretKey& sync, const ProtocolParams& params, const Schedule& sched,
                     const BackendSpec& spec);

/// Cover sample: the full k_s trajectory without divergence.
Sample cover_sample(const SecretKey& sync, const ProtocolParams& params, const Schedule& sched,
                    const BackendSpec& spec);

/// Sender-side latent x0^A before the codec. Accepts d = 0, which degenerates
/// to the cover trajectory.
Sample embed_digits(const BitMessage& message, const KeySet& keys, const ProtocolParams& params,
                    const Schedule& sched, const BackendSpec& spec);

struct StegoContainer {
  static constexpr std::uint16_t kVersion = 1;
  std::uint16_t version = kVersion;
  Sample sample;

  bool operator==(const StegoContainer&) const = default;
};

struct EncodeResult {
  StegoContainer container;
  BitMessage message;
  Sample latent;  // x0^A before the codec
};

EncodeResult encode_detailed(std::span<const std::uint8_t> payload, const KeySet& keys,
                             const ProtocolParams& params, const Schedule& sched,
                             const BackendSpec& spec, const CodecSpec& codec);

StegoContainer encode(std::span<const std::uint8_t> payload, const KeySet& keys,
                      const ProtocolParams& params, const Schedule& sched,
                      const BackendSpec& spec, const CodecSpec& codec);

struct DecodeResult {
  BitMessage message;
  Sample received;            // x0^A recovered through encode_latent
  DivergedSet references;     // x0^0 .. x0^{r-1}
  std::vector<double> margin; // per cell: second-best minus best squared distance
};

/// Receiver side up to the digit decision; never throws FramingError.
DecodeResult decode_digits(const StegoContainer& container, const KeySet& keys,
                           const ProtocolParams& params, const Schedule& sched,
                           const BackendSpec& spec, const CodecSpec& codec);

std::vector<std::uint8_t> decode(const StegoContainer& container, const KeySet& keys,
                                 const ProtocolParams& params, const Schedule& sched,
                                 const BackendSpec& spec, const CodecSpec& codec);

}  // namespace psyduck
