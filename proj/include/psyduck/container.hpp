#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "psyduck/protocol.hpp"

namespace psyduck {

// Little-endian layout:
//   "PSYD" | u16 version | u8 dtype (0=f32, 1=f64) | u8 space (0=pixel,
//   1=latent) | u8 ndim | u32 dims[ndim] | raw values
std::vector<std::uint8_t> serialize_container(const StegoContainer& container);

/// Throws IoError on a bad magic, unknown version/dtype, or a length that
/// does not match the declared shape.
StegoContainer parse_container(std::span<const std::uint8_t> bytes);

void write_container(const std::filesystem::path& path, const StegoContainer& container);
StegoContainer read_container(const std::filesystem::path& path);

}  // namespace psyduck
