#include "geopre/autoenc/vae.hpp"
#include "geopre/geometry/fields.hpp"
#include "geopre/geometry/sampling.hpp"
#include "geopre/geometry/shapes.hpp"
#include "geopre/nn/ops.hpp"
#include "geopre/operators/operator.hpp"
#include "geopre/solver/poisson.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace geopre;

namespace {

nn::Matrix<float> uniform(int rows, int cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  nn::Matrix<float> m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

void BM_Occupancy(benchmark::State& state) {
  const auto g = geometry::make_interface_geometry(1, 7);
  const auto pts = geometry::sample_uniform_points({}, static_cast<int>(state.range(0)), 3);
  for (auto _ : state) benchmark::DoNotOptimize(geometry::occupancy_field(g, pts));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Occupancy)->Arg(4096);

void BM_DistanceFields(benchmark::State& state) {
  const auto g = geometry::make_interface_geometry(2, 7);
  const auto pts = geometry::sample_uniform_points({}, static_cast<int>(state.range(0)), 3);
  for (auto _ : state) benchmark::DoNotOptimize(geometry::distance_fields(g, pts));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_DistanceFields)->Arg(4096);

void BM_PoissonSolve(benchmark::State& state) {
  const auto g = geometry::make_interface_geometry(1, 7);
  const auto mat = solver::rasterize_materials(g, static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(solver::solve_poisson(mat));
}
BENCHMARK(BM_PoissonSolve)->Arg(129)->Arg(257)->Unit(benchmark::kMillisecond);

/// One desk-profile VAE training sample: encode 2048 points, decode 2048
/// occupancy queries, backward.
void BM_VaeStep(benchmark::State& state) {
  nn::ParameterSet<float> ps;
  const autoenc::PointVae<float> vae(autoenc::desk_vae_config(), ps, 1);
  const auto points = uniform(2048, 2, 2);
  const auto queries = uniform(2048, 2, 3);
  const nn::Matrix<float> targets = (uniform(2048, 1, 4).array() > 0.5f).cast<float>();
  for (auto _ : state) {
    nn::Tape<float> t;
    const auto lat = vae.encode(t, points);
    const auto loss = autoenc::vae_loss(vae.decode(t, lat.mu, queries), targets, lat, 1e-3);
    t.backward(loss.total);
  }
}
BENCHMARK(BM_VaeStep)->Unit(benchmark::kMillisecond);

/// One Stage-2 training sample on the raw point cloud: 2048 geometry points,
/// 1024 queries, backward. Argument: hidden width.
template <operators::Backbone B>
void BM_OperatorStep(benchmark::State& state) {
  auto cfg = operators::default_config(B);
  cfg.hidden = static_cast<int>(state.range(0));
  nn::ParameterSet<float> ps;
  const operators::NeuralOperator<float> op(cfg, ps, 1);
  const auto geom = uniform(2048, 2, 2);
  const auto queries = uniform(1024, cfg.query_dim, 3);
  const auto targets = uniform(1024, 1, 4);
  for (auto _ : state) {
    nn::Tape<float> t;
    t.backward(nn::rel_l2(op.forward(t, geom, queries), targets));
  }
}
BENCHMARK(BM_OperatorStep<operators::Backbone::gnot>)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_OperatorStep<operators::Backbone::transolver>)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_OperatorStep<operators::Backbone::lno>)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
