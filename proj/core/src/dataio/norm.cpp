#include "geopre/dataio/norm.hpp"

#include "geopre/common/container.hpp"
#include "geopre/common/error.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>

namespace geopre::dataio {

NormStats compute_norm_stats(std::span<const SampleRecord> train, int k_norm) {
  require(k_norm >= 1, Errc::config, "k_norm must be positive");
  std::vector<const SampleRecord*> physics;
  for (const auto& r : train)
    if (r.has_physics()) physics.push_back(&r);
  std::sort(physics.begin(), physics.end(), [](auto* a, auto* b) { return a->index < b->index; });
  require(static_cast<int>(physics.size()) >= k_norm, Errc::config,
          "normalisation needs " + std::to_string(k_norm) + " physics records, split has " +
              std::to_string(physics.size()));

  // Two passes in double for a stable variance.
  double sum = 0.0;
  long count = 0;
  for (int k = 0; k < k_norm; ++k) {
    for (auto* m : {&*physics[k]->physics_mesh, &*physics[k]->physics_values}) {
      sum += m->cast<double>().sum();
      count += m->size();
    }
  }
  const double mean = sum / static_cast<double>(count);
  double sq = 0.0;
  for (int k = 0; k < k_norm; ++k)
    for (auto* m : {&*physics[k]->physics_mesh, &*physics[k]->physics_values})
      sq += (m->cast<double>().array() - mean).square().sum();
  const double std = std::sqrt(sq / static_cast<double>(count));
  require(std > 1e-12 * std::max(1.0, std::abs(mean)), Errc::numerical, "physics values have zero spread");
  return {mean, std, k_norm};
}

void write_norm_stats(const std::filesystem::path& path, const NormStats& n) {
  const std::string text = nlohmann::json{{"mean", n.mean}, {"std", n.std}, {"k_norm", n.k_norm}}.dump(2) + "\n";
  write_file_atomic(path, std::as_bytes(std::span(text.data(), text.size())));
}

NormStats read_norm_stats(const std::filesystem::path& path) {
  std::ifstream f(path);
  require(static_cast<bool>(f), Errc::io, "cannot open " + path.string());
  const auto j = nlohmann::json::parse(f);
  NormStats n{j.at("mean").get<double>(), j.at("std").get<double>(), j.at("k_norm").get<int>()};
  require(n.std > 0, Errc::io, "norm stats with non-positive std");
  return n;
}

}  // namespace geopre::dataio
