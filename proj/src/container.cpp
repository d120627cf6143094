#include "psyduck/container.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "psyduck/error.hpp"

namespace psyduck {
namespace {

constexpr std::uint8_t kMagic[4] = {'P', 'S', 'Y', 'D'};

template <typename U>
void put_le(std::vector<std::uint8_t>& out, U value) {
  for (std::size_t i = 0; i < sizeof(U); ++i)
    out.push_back(static_cast<std::uint8_t>(value >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <typename U>
  U get_le() {
    need(sizeof(U));
    U value = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i)
      value |= static_cast<U>(static_cast<U>(bytes_[pos_ + i]) << (8 * i));
    pos_ += sizeof(U);
    return value;
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (remaining() < n) throw IoError("container truncated");
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> serialize_container(const StegoContainer& container) {
  const Sample& s = container.sample;
  if (s.shape.empty() || s.shape.size() > 255) throw ParameterError("container rank must be 1..255");
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put_le<std::uint16_t>(out, container.version);
  out.push_back(static_cast<std::uint8_t>(s.precision));
  out.push_back(static_cast<std::uint8_t>(s.space));
  out.push_back(static_cast<std::uint8_t>(s.shape.size()));
  for (auto dim : s.shape) {
    if (dim > 0xFFFFFFFFu) throw ParameterError("container dimension exceeds u32");
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(dim));
  }
  if (s.precision == Precision::f32) {
    for (double v : s.values) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  } else {
    for (double v : s.values) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  }
  return out;
}

StegoContainer parse_container(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw IoError("not a PSYD container");
  Reader in(bytes.subspan(4));
  StegoContainer c;
  c.version = in.get_le<std::uint16_t>();
  if (c.version != StegoContainer::kVersion)
    throw IoError("unsupported container version " + std::to_string(c.version));
  const auto dtype = in.get_le<std::uint8_t>();
  const auto space = in.get_le<std::uint8_t>();
  const auto ndim = in.get_le<std::uint8_t>();
  if (dtype > 1) throw IoError("unknown container dtype " + std::to_string(dtype));
  if (space > 1) throw IoError("unknown container space " + std::to_string(space));
  if (ndim == 0) throw IoError("container has zero dimensions");
  Shape shape(ndim);
  std::size_t n = 1;
  for (auto& dim : shape) {
    dim = in.get_le<std::uint32_t>();
    if (dim == 0) throw IoError("container has a zero-sized dimension");
    n *= dim;
  }
  const auto precision = static_cast<Precision>(dtype);
  const std::size_t width = precision == Precision::f32 ? 4 : 8;
  if (in.remaining() / width < n || in.remaining() != n * width)
    throw IoError("container data length does not match its shape");
  std::vector<double> values(n);
  for (auto& v : values) {
    v = precision == Precision::f32
            ? static_cast<double>(std::bit_cast<float>(in.get_le<std::uint32_t>()))
            : std::bit_cast<double>(in.get_le<std::uint64_t>());
  }
  try {
    c.sample = Sample(std::move(shape), std::move(values), precision, static_cast<Space>(space));
  } catch (const ParameterError& e) {
    throw IoError(std::string("container holds invalid values: ") + e.what());
  }
  return c;
}

void write_container(const std::filesystem::path& path, const StegoContainer& container) {
  const auto bytes = serialize_container(container);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

StegoContainer read_container(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return parse_container(bytes);
}

}  // namespace psyduck
