#include "geopre/common/digest.hpp"

#include <zlib.h>

namespace geopre {

std::uint32_t crc32(std::span<const std::byte> bytes, std::uint32_t seed) {
  uLong crc = seed;
  const auto* data = reinterpret_cast<const Bytef*>(bytes.data());
  std::size_t left = bytes.size();
  // zlib takes uInt lengths.
  while (left > 0) {
    const auto chunk = static_cast<uInt>(left > (1u << 30) ? (1u << 30) : left);
    crc = ::crc32(crc, data, chunk);
    data += chunk;
    left -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

}  // namespace geopre
