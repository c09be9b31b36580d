#pragma once

#include "geopre/autoenc/vae.hpp"
#include "geopre/dataio/batch.hpp"
#include "geopre/dataio/dataset.hpp"
#include "geopre/operators/operator.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <utility>
#include <vector>

namespace geopre::training {

/// Geometry input for Stage 2: the raw mesh point cloud, or the frozen
/// encoder's h_mu on it. Latents are computed once per record and cached;
/// the encoder is permutation invariant, so any reordering of the same
/// stock yields the same latent.
class GeometryInput {
 public:
  GeometryInput() = default;  ///< raw point cloud
  explicit GeometryInput(const std::filesystem::path& encoder_checkpoint);

  bool latent() const { return vae_ != nullptr; }
  int latent_dim() const;
  const autoenc::VaeConfig& vae_config() const { return vae_->config(); }

  /// h_mu (M x C0) or the mesh points (N x 2).
  const nn::Matrix<float>& operator()(const dataio::SampleRecord& r);
  /// Standard deviation of the latent, for latent_mode = sample.
  const nn::Matrix<float>& sigma(const dataio::SampleRecord& r);

  std::uint32_t encoder_digest() const;

 private:
  struct Entry {
    nn::Matrix<float> mu;
    nn::Matrix<float> sigma;
  };
  const Entry& entry(const dataio::SampleRecord& r);

  std::unique_ptr<nn::ParameterSet<float>> params_;
  std::unique_ptr<autoenc::PointVae<float>> vae_;
  std::map<std::pair<std::string, std::int64_t>, Entry> cache_;
};

/// Held-out Stage-1 metrics from the full occupancy stocks: mean per-sample
/// IOU on the uniform stock ("iou"), pooled IOU, IOU on the perturbed
/// stock, reconstruction loss and mean KL (latent = h_mu).
nlohmann::json evaluate_vae(const autoenc::PointVae<float>& vae, std::span<const dataio::SampleRecord> records,
                            dataio::ProxyTask proxy = dataio::ProxyTask::occupancy,
                            const dataio::ProxyScale& scale = {});

/// Mean, std and per-sample relative L2 on normalised targets for each
/// query mode over the physics records, using the full query stock.
nlohmann::json evaluate_operator(const operators::NeuralOperator<float>& op, GeometryInput& geom,
                                 std::span<const dataio::SampleRecord> records,
                                 const std::vector<dataio::QueryMode>& modes, const dataio::NormStats& norm);

/// Physics records of a split, in stored order.
std::vector<dataio::SampleRecord> physics_records(const std::vector<dataio::SampleRecord>& split);

/// Loads a checkpoint written by either stage and evaluates it on the test
/// split. Operator checkpoints in latent mode read encoder.ckpt next to
/// the checkpoint. `modes` empty: the modes stored in the config.
nlohmann::json evaluate_checkpoint(const std::filesystem::path& checkpoint, const dataio::Dataset& ds,
                                   std::vector<dataio::QueryMode> modes = {});

}  // namespace geopre::training
