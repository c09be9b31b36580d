#pragma once

#include "geopre/autoenc/vae.hpp"
#include "geopre/dataio/batch.hpp"
#include "geopre/dataio/dataset.hpp"
#include "geopre/operators/operator.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace geopre::training {

using LogFn = std::function<void(const std::string&)>;

enum class LatentMode { mean, sample };

struct TrainConfig {
  int stage = 1;
  int epochs = 400;       ///< stage 2 defaults to 200
  int batch_size = 100;
  double lr_max = 1e-3;
  double lr_min = 1e-6;
  double weight_decay = 1e-4;
  double grad_clip = 1.0;
  std::optional<double> kl_weight = 1e-3;  ///< empty: deterministic autoencoder
  std::uint64_t seed = 0;
  std::string dataset;
  bool desk_profile = false;
  dataio::BatchCounts counts;
  dataio::ProxyTask proxy = dataio::ProxyTask::occupancy;
  int train_records = -1;          ///< stage 1: first N train records by index (-1 = all)
  int geometry_only_records = -1;  ///< stage 1: cap on geometry-only records among them
  int eval_every = 0;              ///< test metrics every k epochs (0 = only at the end)

  autoenc::VaeConfig vae;

  operators::OperatorConfig op;
  std::string encoder;  ///< Stage-1 checkpoint, latent mode only
  LatentMode latent_mode = LatentMode::mean;
  dataio::QueryMode train_mode = dataio::QueryMode::mixed;
  std::vector<dataio::QueryMode> eval_modes = {dataio::QueryMode::mesh, dataio::QueryMode::random};
};

nlohmann::json to_json(const TrainConfig& c);
/// Defaults depend on "stage" and "desk_profile"; keys present in `j`
/// override them. Unknown keys are rejected.
TrainConfig train_config(const nlohmann::json& j);

struct EpochStats {
  int epoch = 0;
  double lr = 0.0;
  double loss = 0.0;
  double recon = 0.0;            ///< stage 1 only
  std::optional<double> kl;      ///< stage 1 with a KL term
  double grad_norm = 0.0;        ///< mean pre-clip norm over the epoch's steps
  double seconds = 0.0;
  nlohmann::json test;           ///< filled on evaluation epochs
};

struct RunResult {
  int stage = 1;
  nlohmann::json config;
  std::vector<EpochStats> curve;
  nlohmann::json metrics;  ///< held-out test split only
  double wall_seconds = 0.0;
  std::string checkpoint;  ///< relative to the run directory
  std::uint32_t dataset_checksum = 0;
  std::optional<std::uint32_t> encoder_digest;
};

nlohmann::json to_json(const RunResult& r);
RunResult run_result(const nlohmann::json& j);
void write_run_result(const std::filesystem::path& path, const RunResult& r);
RunResult read_run_result(const std::filesystem::path& path);

/// Stage 1: fits the VAE on proxy fields of the selected train geometries.
/// Writes model.ckpt, last.ckpt and result.json into `out`. On a non-finite
/// loss, writes failure.json and throws; last.ckpt holds the last finite
/// epoch.
RunResult pretrain_stage1(const TrainConfig& cfg, const dataio::Dataset& ds, const std::filesystem::path& out,
                          const LogFn& log = {});

/// Stage 2: fits an operator on the physics records. In latent mode the
/// encoder is loaded from cfg.encoder, copied to out/encoder.ckpt and kept
/// frozen; its parameter digest is checked after training.
RunResult train_stage2(const TrainConfig& cfg, const dataio::Dataset& ds, const std::filesystem::path& out,
                       const LogFn& log = {});

/// Stage-1 train selection: indices into ds.train().
std::vector<std::size_t> stage1_selection(const dataio::Dataset& ds, int train_records, int geometry_only_records);

/// Returns the stored result if `dir/result.json` exists and was produced by
/// the same resolved config on a dataset with the same checksum.
std::optional<RunResult> reusable_result(const std::filesystem::path& dir, const TrainConfig& cfg,
                                         std::uint32_t dataset_checksum);

}  // namespace geopre::training
