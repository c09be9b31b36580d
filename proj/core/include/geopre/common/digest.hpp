#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

namespace geopre {

/// CRC32 (zlib polynomial) over a byte range; chainable via `seed`.
std::uint32_t crc32(std::span<const std::byte> bytes, std::uint32_t seed = 0);

}  // namespace geopre
