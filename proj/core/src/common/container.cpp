#include "geopre/common/container.hpp"

#include "geopre/common/digest.hpp"
#include "geopre/common/error.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace geopre {

static_assert(std::endian::native == std::endian::little, "container payloads are written in native little-endian order");

std::string_view dtype_name(DType d) {
  switch (d) {
    case DType::f32: return "f32";
    case DType::f64: return "f64";
    case DType::u8: return "u8";
    case DType::i64: return "i64";
  }
  return "?";
}

std::size_t dtype_size(DType d) {
  switch (d) {
    case DType::f32: return 4;
    case DType::f64: return 8;
    case DType::u8: return 1;
    case DType::i64: return 8;
  }
  return 0;
}

namespace {

DType parse_dtype(const std::string& s) {
  if (s == "f32") return DType::f32;
  if (s == "f64") return DType::f64;
  if (s == "u8") return DType::u8;
  if (s == "i64") return DType::i64;
  fail(Errc::io, "unknown dtype '" + s + "'");
}

template <typename T>
constexpr bool dtype_matches(DType d) {
  if constexpr (std::is_same_v<T, float>) return d == DType::f32;
  if constexpr (std::is_same_v<T, double>) return d == DType::f64;
  if constexpr (std::is_same_v<T, std::uint8_t>) return d == DType::u8;
  if constexpr (std::is_same_v<T, std::int64_t>) return d == DType::i64;
  return false;
}

void put_u32(std::vector<std::byte>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::byte>((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(std::span<const std::byte> b, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[at + i]) << (8 * i);
  return v;
}

}  // namespace

std::int64_t NamedArray::element_count() const {
  std::int64_t n = 1;
  for (auto s : shape) n *= s;
  return n;
}

template <typename T>
NamedArray NamedArray::from(std::string name, DType dtype, std::vector<std::int64_t> shape, std::span<const T> values) {
  require(dtype_matches<T>(dtype), Errc::invalid_argument, "NamedArray::from: dtype mismatch for " + name);
  NamedArray a;
  a.name = std::move(name);
  a.dtype = dtype;
  a.shape = std::move(shape);
  require(static_cast<std::size_t>(a.element_count()) == values.size(), Errc::invalid_argument,
          "NamedArray::from: shape/size mismatch for " + a.name);
  a.data.resize(values.size_bytes());
  std::memcpy(a.data.data(), values.data(), values.size_bytes());
  return a;
}

template <typename T>
std::vector<T> NamedArray::as() const {
  require(dtype_matches<T>(dtype), Errc::mismatch, "array '" + name + "' has dtype " + std::string(dtype_name(dtype)));
  std::vector<T> out(data.size() / sizeof(T));
  std::memcpy(out.data(), data.data(), data.size());
  return out;
}

template NamedArray NamedArray::from<float>(std::string, DType, std::vector<std::int64_t>, std::span<const float>);
template NamedArray NamedArray::from<double>(std::string, DType, std::vector<std::int64_t>, std::span<const double>);
template NamedArray NamedArray::from<std::uint8_t>(std::string, DType, std::vector<std::int64_t>, std::span<const std::uint8_t>);
template NamedArray NamedArray::from<std::int64_t>(std::string, DType, std::vector<std::int64_t>, std::span<const std::int64_t>);
template std::vector<float> NamedArray::as<float>() const;
template std::vector<double> NamedArray::as<double>() const;
template std::vector<std::uint8_t> NamedArray::as<std::uint8_t>() const;
template std::vector<std::int64_t> NamedArray::as<std::int64_t>() const;

const NamedArray* Container::find(std::string_view name) const {
  for (const auto& a : arrays)
    if (a.name == name) return &a;
  return nullptr;
}

const NamedArray& Container::array(std::string_view name) const {
  const auto* a = find(name);
  require(a != nullptr, Errc::mismatch, "container has no array '" + std::string(name) + "'");
  return *a;
}

std::vector<std::byte> encode_container(const Magic& magic, std::uint32_t version, const Container& c) {
  nlohmann::json header;
  header["meta"] = c.meta;
  header["arrays"] = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& a : c.arrays) {
    require(a.data.size() == static_cast<std::size_t>(a.element_count()) * dtype_size(a.dtype), Errc::invalid_argument,
            "array '" + a.name + "' byte size does not match its shape");
    header["arrays"].push_back({{"name", a.name},
                                {"dtype", dtype_name(a.dtype)},
                                {"shape", a.shape},
                                {"offset", offset},
                                {"nbytes", a.data.size()}});
    offset += a.data.size();
  }
  const std::string text = header.dump();

  std::vector<std::byte> out;
  out.reserve(16 + text.size() + offset + 4);
  for (char ch : magic) out.push_back(static_cast<std::byte>(ch));
  put_u32(out, version);
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  for (char ch : text) out.push_back(static_cast<std::byte>(ch));
  for (const auto& a : c.arrays) out.insert(out.end(), a.data.begin(), a.data.end());
  put_u32(out, crc32(out));
  return out;
}

Container decode_container(std::span<const std::byte> bytes, const Magic& magic, std::uint32_t version) {
  constexpr std::size_t kFixed = 16;
  require(bytes.size() >= kFixed + 4, Errc::truncated, "container shorter than its fixed header");
  require(std::memcmp(bytes.data(), magic.data(), magic.size()) == 0, Errc::format_version, "bad magic bytes");
  const std::uint32_t file_version = get_u32(bytes, 8);
  require(file_version == version, Errc::format_version,
          "format version " + std::to_string(file_version) + " (expected " + std::to_string(version) + ")");
  const std::uint32_t header_len = get_u32(bytes, 12);
  require(kFixed + header_len + 4 <= bytes.size(), Errc::truncated, "container header extends past end of file");
  const std::size_t body = bytes.size() - 4;
  require(crc32(bytes.first(body)) == get_u32(bytes, body), Errc::checksum, "container checksum mismatch");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(reinterpret_cast<const char*>(bytes.data() + kFixed),
                                   reinterpret_cast<const char*>(bytes.data() + kFixed + header_len));
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::io, std::string("container header is not valid JSON: ") + e.what());
  }
  Container c;
  c.meta = header.value("meta", nlohmann::json::object());
  const std::size_t payload = kFixed + header_len;
  for (const auto& entry : header.at("arrays")) {
    NamedArray a;
    a.name = entry.at("name").get<std::string>();
    a.dtype = parse_dtype(entry.at("dtype").get<std::string>());
    a.shape = entry.at("shape").get<std::vector<std::int64_t>>();
    const auto offset = entry.at("offset").get<std::uint64_t>();
    const auto nbytes = entry.at("nbytes").get<std::uint64_t>();
    require(payload + offset + nbytes <= body, Errc::truncated, "array '" + a.name + "' extends past payload");
    require(nbytes == static_cast<std::uint64_t>(a.element_count()) * dtype_size(a.dtype), Errc::io,
            "array '" + a.name + "' size does not match its shape");
    const auto* start = bytes.data() + payload + offset;
    a.data.assign(start, start + nbytes);
    c.arrays.push_back(std::move(a));
  }
  return c;
}

void write_file_atomic(const std::filesystem::path& path, std::span<const std::byte> bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(f), Errc::io, "cannot open " + tmp.string() + " for writing");
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    require(static_cast<bool>(f), Errc::io, "write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::vector<std::byte> read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary | std::ios::ate);
  require(static_cast<bool>(f), Errc::io, "cannot open " + path.string());
  const auto size = static_cast<std::size_t>(f.tellg());
  std::vector<std::byte> out(size);
  f.seekg(0);
  f.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(size));
  require(static_cast<bool>(f), Errc::io, "read failed: " + path.string());
  return out;
}

void write_container(const std::filesystem::path& path, const Magic& magic, std::uint32_t version,
                     const Container& c) {
  write_file_atomic(path, encode_container(magic, version, c));
}

Container read_container(const std::filesystem::path& path, const Magic& magic, std::uint32_t version) {
  return decode_container(read_file(path), magic, version);
}

}  // namespace geopre
