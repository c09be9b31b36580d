#pragma once

#include "geopre/common/container.hpp"
#include "geopre/nn/tape.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>

namespace geopre::nn {

inline constexpr Magic kCheckpointMagic = {'G', 'P', 'C', 'K', 'P', 'T', '0', '1'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointInfo {
  nlohmann::json config;
  std::int64_t step = 0;
  std::string kind;
};

/// Saves every parameter of `params` as a float32 array named after the
/// parameter, plus the config echo and step count in the header.
void save_checkpoint(const std::filesystem::path& path, const ParameterSet<float>& params, const CheckpointInfo& info);

/// Loads values into an already-built ParameterSet. Names and shapes must
/// match exactly. Returns the stored header.
CheckpointInfo load_checkpoint(const std::filesystem::path& path, ParameterSet<float>& params);
CheckpointInfo read_checkpoint_info(const std::filesystem::path& path);

/// CRC32 over names, shapes and values of the parameters whose names start
/// with `prefix` (all parameters when empty).
std::uint32_t parameter_digest(const ParameterSet<float>& params, std::string_view prefix = {});

}  // namespace geopre::nn
