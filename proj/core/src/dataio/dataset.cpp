#include "geopre/dataio/dataset.hpp"

#include "geopre/common/digest.hpp"
#include "geopre/common/error.hpp"

namespace geopre::dataio {

Dataset Dataset::open(const std::filesystem::path& dir) {
  Dataset d;
  d.dir_ = dir;
  d.manifest_ = read_manifest(dir);
  auto load = [&](const std::vector<ManifestEntry>& entries, std::vector<SampleRecord>& out) {
    out.reserve(entries.size());
    for (const auto& e : entries) {
      out.push_back(read_record(resolve_relative(dir, e.file)));
      require(out.back().has_physics() == e.physics, Errc::mismatch, "record " + e.file + " disagrees with manifest");
    }
  };
  load(d.manifest_.train, d.train_);
  load(d.manifest_.test, d.test_);
  if (!d.manifest_.norm_file.empty()) d.norm_ = read_norm_stats(resolve_relative(dir, d.manifest_.norm_file));
  return d;
}

std::uint32_t dataset_checksum(const std::filesystem::path& dir) {
  const auto m = read_manifest(dir);
  std::uint32_t crc = crc32(read_file(dir / "manifest.json"));
  for (const auto* split : {&m.train, &m.test})
    for (const auto& e : *split) crc = crc32(read_file(resolve_relative(dir, e.file)), crc);
  if (!m.norm_file.empty()) crc = crc32(read_file(resolve_relative(dir, m.norm_file)), crc);
  return crc;
}

}  // namespace geopre::dataio
