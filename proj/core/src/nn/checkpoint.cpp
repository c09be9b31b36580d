#include "geopre/nn/checkpoint.hpp"

#include "geopre/common/digest.hpp"
#include "geopre/common/error.hpp"

#include <cstring>

namespace geopre::nn {

void save_checkpoint(const std::filesystem::path& path, const ParameterSet<float>& params, const CheckpointInfo& info) {
  Container c;
  c.meta = {{"kind", info.kind}, {"step", info.step}, {"config", info.config}};
  for (const auto& p : params) {
    c.arrays.push_back(NamedArray::from<float>(p.name, DType::f32, {p.value.rows(), p.value.cols()},
                                               std::span<const float>(p.value.data(), p.value.size())));
  }
  write_container(path, kCheckpointMagic, kCheckpointVersion, c);
}

namespace {

CheckpointInfo info_from(const Container& c) {
  CheckpointInfo info;
  info.kind = c.meta.value("kind", std::string{});
  info.step = c.meta.value("step", std::int64_t{0});
  info.config = c.meta.value("config", nlohmann::json::object());
  return info;
}

}  // namespace

CheckpointInfo load_checkpoint(const std::filesystem::path& path, ParameterSet<float>& params) {
  const Container c = read_container(path, kCheckpointMagic, kCheckpointVersion);
  require(c.arrays.size() == params.size(), Errc::mismatch,
          "checkpoint has " + std::to_string(c.arrays.size()) + " arrays, model has " + std::to_string(params.size()));
  for (auto& p : params) {
    const auto& a = c.array(p.name);
    require(a.shape.size() == 2 && a.shape[0] == p.value.rows() && a.shape[1] == p.value.cols(), Errc::mismatch,
            "checkpoint shape mismatch for " + p.name);
    const auto v = a.as<float>();
    std::memcpy(p.value.data(), v.data(), v.size() * sizeof(float));
  }
  return info_from(c);
}

CheckpointInfo read_checkpoint_info(const std::filesystem::path& path) {
  return info_from(read_container(path, kCheckpointMagic, kCheckpointVersion));
}

std::uint32_t parameter_digest(const ParameterSet<float>& params, std::string_view prefix) {
  std::uint32_t crc = 0;
  for (const auto& p : params) {
    if (!prefix.empty() && !p.name.starts_with(prefix)) continue;
    crc = crc32(std::as_bytes(std::span(p.name.data(), p.name.size())), crc);
    const std::int64_t shape[2] = {p.value.rows(), p.value.cols()};
    crc = crc32(std::as_bytes(std::span(shape)), crc);
    crc = crc32(std::as_bytes(std::span<const float>(p.value.data(), p.value.size())), crc);
  }
  return crc;
}

}  // namespace geopre::nn
