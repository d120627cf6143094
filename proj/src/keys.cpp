#include "psyduck/keys.hpp"

#include <sodium.h>
#include <sys/stat.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>

#include "psyduck/error.hpp"

namespace psyduck {
namespace {

void ensure_sodium() {
  static const bool ready = [] {
    if (sodium_init() < 0) throw Error("libsodium initialisation failed");
    return true;
  }();
  (void)ready;
}

constexpr char kSyncContext[crypto_kdf_CONTEXTBYTES + 1] = "PSYDSYNC";
constexpr char kRefContext[crypto_kdf_CONTEXTBYTES + 1] = "PSYDREF_";

SecretKey derive_subkey(const SecretKey& master, std::uint64_t index, const char* context) {
  SecretKey::Bytes out{};
  if (crypto_kdf_derive_from_key(out.data(), out.size(), index, context,
                                 master.bytes().data()) != 0)
    throw Error("key derivation failed");
  return SecretKey(out);
}

std::array<std::uint8_t, crypto_stream_chacha20_ietf_NONCEBYTES> make_nonce(
    const NoiseContext& ctx) {
  std::array<std::uint8_t, crypto_stream_chacha20_ietf_NONCEBYTES> nonce{};
  for (int i = 0; i < 8; ++i) nonce[i] = static_cast<std::uint8_t>(ctx.timestep >> (8 * i));
  const auto tag = static_cast<std::uint32_t>(ctx.tag);
  for (int i = 0; i < 4; ++i) nonce[8 + i] = static_cast<std::uint8_t>(tag >> (8 * i));
  return nonce;
}

std::uint64_t load_le64(const std::uint8_t* p) {
  std::uint64_t w = 0;
  for (int i = 7; i >= 0; --i) w = (w << 8) | p[i];
  return w;
}

constexpr std::size_t kBlockBytes = 64;
constexpr std::size_t kElementsPerBlock = kBlockBytes / 16;

}  // namespace

SecretKey SecretKey::random() {
  ensure_sodium();
  Bytes bytes{};
  randombytes_buf(bytes.data(), bytes.size());
  return SecretKey(bytes);
}

SecretKey SecretKey::from_hex(std::string_view hex) {
  ensure_sodium();
  if (hex.size() != 2 * kSize) throw ParameterError("key must be exactly 64 hex characters");
  Bytes bytes{};
  std::size_t written = 0;
  if (sodium_hex2bin(bytes.data(), bytes.size(), hex.data(), hex.size(), nullptr, &written,
                     nullptr) != 0 ||
      written != kSize)
    throw ParameterError("key is not valid hex");
  return SecretKey(bytes);
}

std::string SecretKey::to_hex() const {
  ensure_sodium();
  std::string out(2 * kSize + 1, '\0');
  sodium_bin2hex(out.data(), out.size(), bytes_.data(), bytes_.size());
  out.pop_back();
  return out;
}

void validate_keyset(const KeySet& keys) {
  if (keys.refs.size() < 2) throw ParameterError("a key set needs at least 2 reference keys");
  for (std::size_t i = 0; i < keys.refs.size(); ++i) {
    if (keys.refs[i] == keys.sync) throw ParameterError("reference key equals sync key");
    for (std::size_t j = i + 1; j < keys.refs.size(); ++j)
      if (keys.refs[i] == keys.refs[j]) throw ParameterError("duplicate reference keys");
  }
}

KeySet derive_keyset(const SecretKey& master, std::size_t r) {
  if (r < 2) throw ParameterError("derive_keyset: r must be >= 2, got " + std::to_string(r));
  ensure_sodium();
  KeySet keys;
  keys.sync = derive_subkey(master, 0, kSyncContext);
  keys.refs.reserve(r);
  for (std::size_t i = 0; i < r; ++i) keys.refs.push_back(derive_subkey(master, i, kRefContext));
  validate_keyset(keys);
  return keys;
}

GeneratorCounter generator_counter(const NoiseContext& ctx, std::size_t element) {
  GeneratorCounter c;
  c.nonce = make_nonce(ctx);
  c.block = static_cast<std::uint32_t>(element / kElementsPerBlock);
  c.word = static_cast<std::uint32_t>(2 * (element % kElementsPerBlock));
  return c;
}

double box_muller(std::uint64_t w1, std::uint64_t w2) {
  // 53-bit mantissas offset by half an ulp so u lies strictly inside (0,1).
  const double u1 = (static_cast<double>(w1 >> 11) + 0.5) * 0x1p-53;
  const double u2 = (static_cast<double>(w2 >> 11) + 0.5) * 0x1p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

void gaussian_values(const NoiseContext& ctx, std::size_t first, std::span<double> out) {
  if (out.empty()) return;
  ensure_sodium();
  const auto nonce = make_nonce(ctx);
  const std::size_t last = first + out.size();  // exclusive
  const std::size_t first_block = first / kElementsPerBlock;
  const std::size_t end_block = (last + kElementsPerBlock - 1) / kElementsPerBlock;
  if (end_block > std::numeric_limits<std::uint32_t>::max())
    throw ParameterError("noise field exceeds generator counter range");

  constexpr std::size_t kChunkBlocks = 1024;
  std::vector<std::uint8_t> zeros(kChunkBlocks * kBlockBytes, 0);
  std::vector<std::uint8_t> stream(kChunkBlocks * kBlockBytes);
  for (std::size_t block = first_block; block < end_block; block += kChunkBlocks) {
    const std::size_t nblocks = std::min(kChunkBlocks, end_block - block);
    crypto_stream_chacha20_ietf_xor_ic(stream.data(), zeros.data(), nblocks * kBlockBytes,
                                       nonce.data(), static_cast<std::uint32_t>(block),
                                       ctx.key.bytes().data());
    const std::size_t lo = std::max(first, block * kElementsPerBlock);
    const std::size_t hi = std::min(last, (block + nblocks) * kElementsPerBlock);
    for (std::size_t j = lo; j < hi; ++j) {
      const std::uint8_t* p = stream.data() + (j - block * kElementsPerBlock) * 16;
      out[j - first] = box_muller(load_le64(p), load_le64(p + 8));
    }
  }
}

Sample gaussian_field(const NoiseContext& ctx, const Shape& shape, Precision precision) {
  Sample s(shape, precision);
  gaussian_values(ctx, 0, s.values);
  s.normalize();
  return s;
}

LoadedKey load_key_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open key file " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (!text.empty() && text.back() == '\n') text.pop_back();
  if (!text.empty() && text.back() == '\r') text.pop_back();
  LoadedKey loaded{SecretKey::from_hex(text), std::nullopt};
  struct stat st {};
  if (::stat(path.c_str(), &st) == 0 && (st.st_mode & (S_IRWXG | S_IRWXO)))
    loaded.warning = "key file " + path.string() + " is accessible by group or others";
  return loaded;
}

void write_key_file(const std::filesystem::path& path, const SecretKey& key) {
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write key file " + path.string());
    out << key.to_hex() << '\n';
    if (!out) throw IoError("failed writing key file " + path.string());
  }
  std::error_code ec;
  std::filesystem::permissions(path,
                               std::filesystem::perms::owner_read |
                                   std::filesystem::perms::owner_write,
                               std::filesystem::perm_options::replace, ec);
  if (ec) throw IoError("cannot restrict permissions of " + path.string());
}

}  // namespace psyduck
