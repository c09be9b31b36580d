#pragma once

#include <nlohmann/json.hpp>

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <string>
#include <vector>

namespace geopre {

enum class DType : std::uint8_t { f32, f64, u8, i64 };

std::string_view dtype_name(DType d);
std::size_t dtype_size(DType d);

/// One named, typed, row-major array.
struct NamedArray {
  std::string name;
  DType dtype = DType::f32;
  std::vector<std::int64_t> shape;
  std::vector<std::byte> data;

  std::int64_t element_count() const;

  template <typename T>
  static NamedArray from(std::string name, DType dtype, std::vector<std::int64_t> shape, std::span<const T> values);
  template <typename T>
  std::vector<T> as() const;
};

/// Binary container shared by dataset records and checkpoints:
///
///   magic[8] | u32 version | u32 header_len | header (UTF-8 JSON) |
///   array payloads (little-endian, row-major) | u32 crc32
///
/// The header holds {"meta": ..., "arrays": [{name, dtype, shape, offset, nbytes}]};
/// the CRC covers every preceding byte.
struct Container {
  nlohmann::json meta = nlohmann::json::object();
  std::vector<NamedArray> arrays;

  const NamedArray& array(std::string_view name) const;
  const NamedArray* find(std::string_view name) const;
};

using Magic = std::array<char, 8>;

std::vector<std::byte> encode_container(const Magic& magic, std::uint32_t version, const Container& c);
/// Throws Error with format_version, truncated, checksum, or io codes.
Container decode_container(std::span<const std::byte> bytes, const Magic& magic, std::uint32_t version);

/// Writes through a temporary file and renames into place.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::byte> bytes);
std::vector<std::byte> read_file(const std::filesystem::path& path);
inline void write_text_atomic(const std::filesystem::path& path, std::string_view text) {
  write_file_atomic(path, std::as_bytes(std::span(text.data(), text.size())));
}

void write_container(const std::filesystem::path& path, const Magic& magic, std::uint32_t version,
                     const Container& c);
Container read_container(const std::filesystem::path& path, const Magic& magic, std::uint32_t version);

}  // namespace geopre
