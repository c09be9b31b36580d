#pragma once

#include "geopre/dataio/manifest.hpp"
#include "geopre/dataio/norm.hpp"
#include "geopre/dataio/record.hpp"

#include <filesystem>
#include <optional>
#include <vector>

namespace geopre::dataio {

/// A dataset directory loaded into memory.
class Dataset {
 public:
  static Dataset open(const std::filesystem::path& dir);

  const std::filesystem::path& dir() const { return dir_; }
  const DatasetManifest& manifest() const { return manifest_; }
  const std::vector<SampleRecord>& train() const { return train_; }
  const std::vector<SampleRecord>& test() const { return test_; }
  const std::optional<NormStats>& norm() const { return norm_; }

 private:
  std::filesystem::path dir_;
  DatasetManifest manifest_;
  std::vector<SampleRecord> train_;
  std::vector<SampleRecord> test_;
  std::optional<NormStats> norm_;
};

/// CRC32 over the manifest and every file it references, in manifest order.
std::uint32_t dataset_checksum(const std::filesystem::path& dir);

}  // namespace geopre::dataio
