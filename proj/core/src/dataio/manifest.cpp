#include "geopre/dataio/manifest.hpp"

#include "geopre/common/container.hpp"
#include "geopre/common/error.hpp"

#include <cstdio>
#include <fstream>

namespace geopre::dataio {

int DatasetManifest::count(const std::vector<ManifestEntry>& split, bool physics) const {
  int n = 0;
  for (const auto& e : split) n += e.physics == physics;
  return n;
}

namespace {

void check_relative(const std::string& rel) {
  const std::filesystem::path p(rel);
  require(!rel.empty() && p.is_relative() && !p.has_root_name() && !p.has_root_directory(), Errc::io,
          "manifest path must be relative: '" + rel + "'");
  for (const auto& part : p) require(part != "..", Errc::io, "manifest path escapes the dataset: '" + rel + "'");
}

nlohmann::json entries_json(const std::vector<ManifestEntry>& es) {
  auto a = nlohmann::json::array();
  for (const auto& e : es) a.push_back({{"file", e.file}, {"physics", e.physics}, {"prior", e.prior_tag}});
  return a;
}

std::vector<ManifestEntry> entries_from(const nlohmann::json& a) {
  std::vector<ManifestEntry> out;
  for (const auto& e : a) {
    ManifestEntry m{e.at("file").get<std::string>(), e.at("physics").get<bool>(), e.value("prior", std::string{})};
    check_relative(m.file);
    out.push_back(std::move(m));
  }
  return out;
}

}  // namespace

std::filesystem::path resolve_relative(const std::filesystem::path& dir, const std::string& rel) {
  check_relative(rel);
  return dir / rel;
}

std::string record_file(const std::string& split, std::int64_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%05lld.rec", static_cast<long long>(index));
  return split + "/" + buf;
}

nlohmann::json to_json(const DatasetManifest& m) {
  nlohmann::json j;
  j["format_version"] = m.format_version;
  j["kind"] = m.kind;
  j["seed"] = m.seed;
  j["domain"] = {{"lower", {m.domain.lower.x(), m.domain.lower.y()}}, {"upper", {m.domain.upper.x(), m.domain.upper.y()}}};
  j["counts"] = {{"train", m.train.size()},     {"train_physics", m.train_physics()},
                 {"train_geometry", m.train_geometry()}, {"test", m.test.size()},
                 {"test_physics", m.test_physics()},     {"test_geometry", m.test_geometry()}};
  j["norm"] = m.norm_file;
  j["k_norm"] = m.k_norm;
  j["config"] = m.config;
  j["train"] = entries_json(m.train);
  j["test"] = entries_json(m.test);
  return j;
}

DatasetManifest manifest_from_json(const nlohmann::json& j) {
  DatasetManifest m;
  m.format_version = j.at("format_version").get<std::uint32_t>();
  require(m.format_version == kManifestVersion, Errc::format_version,
          "manifest format version " + std::to_string(m.format_version) + " is not supported");
  m.kind = j.at("kind").get<std::string>();
  m.seed = j.at("seed").get<std::uint64_t>();
  const auto lo = j.at("domain").at("lower").get<std::vector<double>>();
  const auto hi = j.at("domain").at("upper").get<std::vector<double>>();
  require(lo.size() == 2 && hi.size() == 2 && lo[0] < hi[0] && lo[1] < hi[1], Errc::io, "invalid manifest domain");
  m.domain = {{lo[0], lo[1]}, {hi[0], hi[1]}};
  m.norm_file = j.value("norm", std::string{});
  if (!m.norm_file.empty()) check_relative(m.norm_file);
  m.k_norm = j.value("k_norm", 100);
  m.config = j.value("config", nlohmann::json::object());
  m.train = entries_from(j.at("train"));
  m.test = entries_from(j.at("test"));
  return m;
}

void write_manifest(const std::filesystem::path& dir, const DatasetManifest& m) {
  const std::string text = to_json(m).dump(2) + "\n";
  write_file_atomic(dir / "manifest.json", std::as_bytes(std::span(text.data(), text.size())));
}

DatasetManifest read_manifest(const std::filesystem::path& dir) {
  std::ifstream f(dir / "manifest.json");
  require(static_cast<bool>(f), Errc::io, "no manifest.json in " + dir.string());
  try {
    return manifest_from_json(nlohmann::json::parse(f));
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::io, std::string("malformed manifest: ") + e.what());
  }
}

}  // namespace geopre::dataio
