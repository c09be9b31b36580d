#pragma once

#include "geopre/training/train.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace geopre::training {

enum class Suite { geometry_amount, kl_weight, proxy_task, latent_size };

Suite parse_suite(const std::string& s);
std::string to_string(Suite s);

struct AblationConfig {
  Suite suite = Suite::kl_weight;
  TrainConfig stage1;
  TrainConfig stage2;  ///< geom is forced per column
  std::vector<std::uint64_t> seeds = {0, 1, 2};  ///< Stage-2 seeds per column
  bool baseline = true;  ///< add a raw point-cloud column

  // Suite grids; only the one matching `suite` is used.
  std::vector<int> geometry_multipliers = {0, 1, 2, 4};  ///< |D'| as multiples of |D|
  std::vector<std::optional<double>> kl_weights = {0.01, 0.001, 0.0001, std::nullopt};
  std::vector<dataio::ProxyTask> proxies = {dataio::ProxyTask::occupancy, dataio::ProxyTask::sdf,
                                            dataio::ProxyTask::sv};
  std::vector<std::pair<int, int>> latent_sizes = {{128, 32}, {128, 64}, {256, 32}, {256, 64}, {512, 32}, {512, 64}};
};

nlohmann::json to_json(const AblationConfig& c);
AblationConfig ablation_config(const nlohmann::json& j);

/// Columns are variants, rows are metrics. Each cell holds one value per
/// run (Stage-1 rows: one; Stage-2 rows: one per seed); empty when the
/// metric does not apply to the column.
struct Table {
  std::string title;
  std::vector<std::string> columns;
  std::vector<std::string> rows;
  std::vector<double> row_scale;  ///< display multiplier per row
  std::vector<std::vector<std::vector<double>>> cells;  ///< [row][column] -> values
};

nlohmann::json to_json(const Table& t);
Table table_from_json(const nlohmann::json& j);

/// Runs every column of the suite under `out/<column>/...`, reusing runs
/// whose stored result matches the resolved config.
Table run_ablation(const AblationConfig& cfg, const std::filesystem::path& out, const LogFn& log = {});

}  // namespace geopre::training
