#include "psyduck/protocol.hpp"

#include <algorithm>
#include <bit>
#include <limits>

#include "psyduck/error.hpp"

namespace psyduck {

CellMap::CellMap(Shape sample_shape, Shape cell_shape)
    : sample_shape_(std::move(sample_shape)), cell_shape_(std::move(cell_shape)) {
  const std::size_t n = psyduck::element_count(sample_shape_);
  if (cell_shape_.empty()) cell_shape_.assign(sample_shape_.size(), 1);
  if (cell_shape_.size() != sample_shape_.size())
    throw ParameterError("cell shape rank must match sample shape rank");
  grid_shape_.resize(sample_shape_.size());
  for (std::size_t k = 0; k < sample_shape_.size(); ++k) {
    if (cell_shape_[k] == 0 || sample_shape_[k] % cell_shape_[k] != 0)
      throw ParameterError("cell shape " + shape_to_string(cell_shape_) +
                           " does not divide sample shape " + shape_to_string(sample_shape_));
    grid_shape_[k] = sample_shape_[k] / cell_shape_[k];
  }
  count_ = psyduck::element_count(grid_shape_);
  if (n > std::numeric_limits<std::uint32_t>::max())
    throw ParameterError("sample too large for a cell map");

  cell_of_.resize(n);
  std::vector<std::size_t> coord(sample_shape_.size(), 0);
  for (std::size_t e = 0; e < n; ++e) {
    std::size_t cell = 0;
    for (std::size_t k = 0; k < coord.size(); ++k)
      cell = cell * grid_shape_[k] + coord[k] / cell_shape_[k];
    cell_of_[e] = static_cast<std::uint32_t>(cell);
    for (std::size_t k = coord.size(); k-- > 0;) {
      if (++coord[k] < sample_shape_[k]) break;
      coord[k] = 0;
    }
  }
}

std::vector<std::size_t> CellMap::elements_of(std::size_t cell) const {
  if (cell >= count_) throw ParameterError("cell index out of range");
  std::vector<std::size_t> out;
  for (std::size_t e = 0; e < cell_of_.size(); ++e)
    if (cell_of_[e] == cell) out.push_back(e);
  return out;
}

std::string_view to_string(FinalStepKeyMode m) {
  return m == FinalStepKeyMode::sync ? "sync" : "reference";
}

FinalStepKeyMode parse_final_step_key_mode(std::string_view text) {
  if (text == "sync") return FinalStepKeyMode::sync;
  if (text == "reference") return FinalStepKeyMode::reference;
  throw ParameterError("unknown final step key mode '" + std::string(text) + "'");
}

std::size_t bits_per_digit(std::size_t r) {
  if (r < 2) throw ParameterError("r must be >= 2");
  return static_cast<std::size_t>(std::bit_width(r)) - 1;
}

std::size_t digit_slots(const ProtocolParams& params) {
  if (params.repetition == 0 || params.repetition % 2 == 0)
    throw ParameterError("repetition factor must be odd");
  return params.cells.count() / params.repetition;
}

std::size_t capacity(const ProtocolParams& params) {
  const std::size_t raw = digit_slots(params) * bits_per_digit(params.r);
  if (raw < kHeaderBits)
    throw ParameterError("carrier holds " + std::to_string(raw) +
                         " bits, fewer than the 32-bit header");
  return raw - kHeaderBits;
}

void validate_geometry(const ProtocolParams& params, const Schedule& sched) {
  if (params.r < 2) throw ParameterError("r must be >= 2");
  if (params.d < 1 || params.d > sched.T() - 1)
    throw ParameterError("d must lie in [1, T-1] = [1, " + std::to_string(sched.T() - 1) + "]");
  if (params.cells.count() == 0) throw ParameterError("protocol has no cell map");
}

void validate_params(const ProtocolParams& params, const Schedule& sched) {
  validate_geometry(params, sched);
  capacity(params);
}

namespace {

std::size_t used_digits(std::size_t r) { return std::size_t{1} << bits_per_digit(r); }

void check_digits(const BitMessage& message) {
  const std::size_t limit = used_digits(message.r);
  for (auto digit : message.digits)
    if (digit >= limit) throw ParameterError("digit outside alphabet");
}

}  // namespace

BitMessage pack_message(std::span<const std::uint8_t> payload, const ProtocolParams& params) {
  const std::size_t bpd = bits_per_digit(params.r);
  const std::size_t slots = digit_slots(params);
  const std::size_t cap = capacity(params);
  if (8 * payload.size() > cap || payload.size() > std::numeric_limits<std::uint32_t>::max())
    throw CapacityError("payload of " + std::to_string(payload.size()) +
                            " bytes exceeds capacity of " + std::to_string(cap / 8) + " bytes",
                        cap / 8);

  std::vector<std::uint8_t> bits;
  bits.reserve(slots * bpd);
  const auto len = static_cast<std::uint32_t>(payload.size());
  for (int i = 31; i >= 0; --i) bits.push_back((len >> i) & 1u);
  for (auto byte : payload)
    for (int i = 7; i >= 0; --i) bits.push_back((byte >> i) & 1u);
  bits.resize(slots * bpd, 0);

  BitMessage message;
  message.r = params.r;
  message.repetition = params.repetition;
  message.digits.assign(params.cells.count(), 0);
  for (std::size_t s = 0; s < slots; ++s) {
    std::uint32_t digit = 0;
    for (std::size_t b = 0; b < bpd; ++b) digit = (digit << 1) | bits[s * bpd + b];
    for (std::size_t k = 0; k < params.repetition; ++k)
      message.digits[s * params.repetition + k] = digit;
  }
  return message;
}

std::vector<std::uint8_t> message_bits(const BitMessage& message) {
  check_digits(message);
  const std::size_t bpd = bits_per_digit(message.r);
  const std::size_t rep = message.repetition;
  if (rep == 0 || rep % 2 == 0) throw ParameterError("repetition factor must be odd");
  const std::size_t slots = message.digits.size() / rep;
  std::vector<std::uint8_t> bits;
  bits.reserve(slots * bpd);
  std::vector<std::size_t> votes(used_digits(message.r));
  for (std::size_t s = 0; s < slots; ++s) {
    std::fill(votes.begin(), votes.end(), 0);
    for (std::size_t k = 0; k < rep; ++k) ++votes[message.digits[s * rep + k]];
    const auto digit = static_cast<std::uint32_t>(
        std::max_element(votes.begin(), votes.end()) - votes.begin());
    for (std::size_t b = bpd; b-- > 0;) bits.push_back((digit >> b) & 1u);
  }
  return bits;
}

std::vector<std::uint8_t> unpack_message(const BitMessage& message) {
  const auto bits = message_bits(message);
  if (bits.size() < kHeaderBits) throw FramingError("message shorter than its header");
  std::uint64_t len = 0;
  for (std::size_t i = 0; i < kHeaderBits; ++i) len = (len << 1) | bits[i];
  const std::size_t cap_bytes = (bits.size() - kHeaderBits) / 8;
  if (len > cap_bytes)
    throw FramingError("declared payload length " + std::to_string(len) +
                       " exceeds capacity of " + std::to_string(cap_bytes) + " bytes");
  std::vector<std::uint8_t> payload(len, 0);
  for (std::size_t i = 0; i < 8 * len; ++i)
    payload[i / 8] = static_cast<std::uint8_t>((payload[i / 8] << 1) | bits[kHeaderBits + i]);
  return payload;
}

Sample mix(std::span<const std::uint32_t> digits, std::span<const Sample> samples,
           const CellMap& cells) {
  if (samples.empty()) throw ParameterError("mix needs at least one sample");
  if (digits.size() != cells.count())
    throw ParameterError("message has " + std::to_string(digits.size()) + " digits for " +
                         std::to_string(cells.count()) + " cells");
  for (const auto& s : samples) {
    require_same_shape(s, samples[0]);
    if (s.shape != cells.sample_shape()) throw ShapeError("sample does not match cell map");
  }
  for (auto digit : digits)
    if (digit >= samples.size())
      throw ParameterError("digit " + std::to_string(digit) + " has no diverged sample");
  Sample out = samples[0];
  for (std::size_t e = 0; e < out.size(); ++e)
    out.values[e] = samples[digits[cells.cell_of(e)]].values[e];
  return out;
}

Sample mix(const BitMessage& message, const DivergedSet& set, const CellMap& cells) {
  return mix(message.digits, set.samples, cells);
}

DivergedSet diverge(const Sample& x_start, std::size_t t_start, std::size_t steps,
                    const KeySet& keys, const Schedule& sched, const BackendSpec& spec) {
  if (steps > t_start)
    throw ParameterError("cannot diverge " + std::to_string(steps) + " steps from t=" +
                         std::to_string(t_start));
  DivergedSet set;
  set.t = t_start - steps;
  set.samples.reserve(keys.refs.size());
  for (const auto& key : keys.refs)
    set.samples.push_back(denoise(x_start, t_start, set.t, key, sched, spec));
  return set;
}

namespace {

BackendSpec with_mode(const BackendSpec& spec, const ProtocolParams& params) {
  BackendSpec copy = spec;
  copy.step_mode = params.step_mode;
  return copy;
}

void check_sample_shape(const ProtocolParams& params) {
  if (params.cells.count() == 0) throw ParameterError("protocol has no cell map");
}

}  // namespace

Sample sync_ancestor(const SecretKey& sync, const ProtocolParams& params, const Schedule& sched,
                     const BackendSpec& spec) {
  check_sample_shape(params);
  if (params.d + 1 > sched.T())
    throw ParameterError("d + 1 exceeds the schedule length");
  const BackendSpec backend = with_mode(spec, params);
  Sample x = preprocess(sync, params.cells.sample_shape(), sched, params.precision, params.space);
  return denoise(std::move(x), sched.T(), params.d + 1, sync, sched, backend);
}

Sample cover_sample(const SecretKey& sync, const ProtocolParams& params, const Schedule& sched,
                    const BackendSpec& spec) {
  check_sample_shape(params);
  const BackendSpec backend = with_mode(spec, params);
  Sample x = preprocess(sync, params.cells.sample_shape(), sched, params.precision, params.space);
  return denoise(std::move(x), sched.T(), 0, sync, sched, backend);
}

Sample embed_digits(const BitMessage& message, const KeySet& keys, const ProtocolParams& params,
                    const Schedule& sched, const BackendSpec& spec) {
  if (keys.refs.size() != params.r) throw ParameterError("key set size does not match r");
  const BackendSpec backend = with_mode(spec, params);
  const Sample ancestor = sync_ancestor(keys.sync, params, sched, spec);
  const DivergedSet x1 = diverge(ancestor, params.d + 1, params.d, keys, sched, backend);
  const Sample mixed = mix(message, x1, params.cells);
  if (params.final_step_key_mode == FinalStepKeyMode::sync)
    return diffusion_step(mixed, 1, keys.sync, sched, backend);
  // Each cell takes its last step under the reference key it selected, which
  // is what the receiver's references do.
  DivergedSet finals;
  finals.t = 0;
  for (const auto& key : keys.refs) finals.samples.push_back(diffusion_step(mixed, 1, key, sched, backend));
  return mix(message, finals, params.cells);
}

EncodeResult encode_detailed(std::span<const std::uint8_t> payload, const KeySet& keys,
                             const ProtocolParams& params, const Schedule& sched,
                             const BackendSpec& spec, const CodecSpec& codec) {
  validate_params(params, sched);
  validate_keyset(keys);
  EncodeResult result;
  result.message = pack_message(payload, params);
  result.latent = embed_digits(result.message, keys, params, sched, spec);
  result.container.sample = decode_latent(result.latent, codec);
  result.container.sample.precision = params.precision;
  result.container.sample.space = params.space;
  result.container.sample.normalize();
  return result;
}

StegoContainer encode(std::span<const std::uint8_t> payload, const KeySet& keys,
                      const ProtocolParams& params, const Schedule& sched,
                      const BackendSpec& spec, const CodecSpec& codec) {
  return encode_detailed(payload, keys, params, sched, spec, codec).container;
}

DecodeResult decode_digits(const StegoContainer& container, const KeySet& keys,
                           const ProtocolParams& params, const Schedule& sched,
                           const BackendSpec& spec, const CodecSpec& codec) {
  validate_geometry(params, sched);
  validate_keyset(keys);
  if (keys.refs.size() != params.r) throw ParameterError("key set size does not match r");
  if (container.sample.shape != params.cells.sample_shape())
    throw ShapeError("container shape " + shape_to_string(container.sample.shape) +
                     " does not match configured shape " +
                     shape_to_string(params.cells.sample_shape()));
  if (container.sample.precision != params.precision)
    throw ShapeError("container dtype does not match configured precision");

  DecodeResult result;
  result.received = encode_latent(container.sample, codec);
  const BackendSpec backend = with_mode(spec, params);
  const Sample ancestor = sync_ancestor(keys.sync, params, sched, spec);
  result.references = diverge(ancestor, params.d + 1, params.d + 1, keys, sched, backend);

  const std::size_t cells = params.cells.count();
  const std::size_t candidates = std::min(params.r, used_digits(params.r));
  std::vector<double> dist(cells * candidates, 0.0);
  for (std::size_t i = 0; i < candidates; ++i) {
    const auto& ref = result.references.samples[i].values;
    for (std::size_t e = 0; e < ref.size(); ++e) {
      const double diff = ref[e] - result.received.values[e];
      dist[params.cells.cell_of(e) * candidates + i] += diff * diff;
    }
  }
  result.message.r = params.r;
  result.message.repetition = params.repetition;
  result.message.digits.resize(cells);
  result.margin.resize(cells);
  for (std::size_t j = 0; j < cells; ++j) {
    const double* row = dist.data() + j * candidates;
    std::size_t best = 0;
    for (std::size_t i = 1; i < candidates; ++i)
      if (row[i] < row[best]) best = i;  // strict: ties keep the lowest index
    double second = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < candidates; ++i)
      if (i != best) second = std::min(second, row[i]);
    result.message.digits[j] = static_cast<std::uint32_t>(best);
    result.margin[j] = second - row[best];
  }
  return result;
}

std::vector<std::uint8_t> decode(const StegoContainer& container, const KeySet& keys,
                                 const ProtocolParams& params, const Schedule& sched,
                                 const BackendSpec& spec, const CodecSpec& codec) {
  return unpack_message(decode_digits(container, keys, params, sched, spec, codec).message);
}

}  // namespace psyduck
