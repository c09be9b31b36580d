#include "geopre/dataio/batch.hpp"

#include "geopre/common/error.hpp"
#include "geopre/common/rng.hpp"

#include <cmath>
#include <numeric>

namespace geopre::dataio {

QueryMode parse_query_mode(const std::string& s) {
  if (s == "occ_stage1") return QueryMode::occ_stage1;
  if (s == "mesh") return QueryMode::mesh;
  if (s == "random") return QueryMode::random;
  if (s == "mixed") return QueryMode::mixed;
  fail(Errc::config, "unknown query mode '" + s + "'");
}

std::string to_string(QueryMode m) {
  switch (m) {
    case QueryMode::occ_stage1: return "occ_stage1";
    case QueryMode::mesh: return "mesh";
    case QueryMode::random: return "random";
    case QueryMode::mixed: return "mixed";
  }
  return "?";
}

ProxyTask parse_proxy_task(const std::string& s) {
  if (s == "occupancy") return ProxyTask::occupancy;
  if (s == "sdf") return ProxyTask::sdf;
  if (s == "sv") return ProxyTask::sv;
  fail(Errc::config, "unknown proxy task '" + s + "'");
}

std::string to_string(ProxyTask p) {
  switch (p) {
    case ProxyTask::occupancy: return "occupancy";
    case ProxyTask::sdf: return "sdf";
    case ProxyTask::sv: return "sv";
  }
  return "?";
}

std::vector<int> draw_indices(int stock, int k, std::uint64_t seed) {
  require(stock >= 1 && k >= 0, Errc::invalid_argument, "draw_indices: empty stock");
  Rng rng = make_rng(seed);
  std::vector<int> out(static_cast<std::size_t>(k));
  if (k <= stock) {
    std::vector<int> idx(static_cast<std::size_t>(stock));
    std::iota(idx.begin(), idx.end(), 0);
    // Partial Fisher-Yates.
    for (int i = 0; i < k; ++i) {
      std::uniform_int_distribution<int> pick(i, stock - 1);
      std::swap(idx[i], idx[pick(rng)]);
      out[i] = idx[i];
    }
  } else {
    std::uniform_int_distribution<int> pick(0, stock - 1);
    for (auto& v : out) v = pick(rng);
  }
  return out;
}

namespace {

FMatrix gather(const FMatrix& m, const std::vector<int>& idx) {
  FMatrix out(static_cast<Eigen::Index>(idx.size()), m.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(idx[i]);
  return out;
}

std::vector<int> all(Eigen::Index n) {
  std::vector<int> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  return idx;
}

// Stage-1 queries and targets from the chosen rows of the two stocks.
void stage1(const SampleRecord& r, const std::vector<int>& ir, const std::vector<int>& ip, ProxyTask proxy,
            const ProxyScale& scale, QuerySample& s) {
  const FMatrix pr = gather(r.occ_rand.points, ir);
  const FMatrix pp = gather(r.occ_perturbed.points, ip);
  s.queries.resize(pr.rows() + pp.rows(), 2);
  s.queries << pr, pp;
  switch (proxy) {
    case ProxyTask::occupancy: {
      s.targets.resize(s.queries.rows(), 1);
      Eigen::Index k = 0;
      for (int i : ir) s.targets(k++, 0) = r.occ_rand.values[i];
      for (int i : ip) s.targets(k++, 0) = r.occ_perturbed.values[i];
      break;
    }
    case ProxyTask::sdf:
    case ProxyTask::sv: {
      require(r.dist_rand && r.dist_perturbed, Errc::mismatch,
              "record " + std::to_string(r.index) + " has no SDF/SV samples");
      const bool sdf = proxy == ProxyTask::sdf;
      const FMatrix a = gather(sdf ? r.dist_rand->sdf : r.dist_rand->sv, ir);
      const FMatrix b = gather(sdf ? r.dist_perturbed->sdf : r.dist_perturbed->sv, ip);
      s.targets.resize(a.rows() + b.rows(), a.cols());
      s.targets << a, b;
      s.targets /= static_cast<float>(sdf ? scale.sdf : scale.sv);
      break;
    }
  }
}

// Physics queries: coordinates, occupancy channel, globals; normalised targets.
void physics(const SampleRecord& r, QueryMode mode, const std::vector<int>& idx, const NormStats& norm, QuerySample& s) {
  const bool mesh = mode == QueryMode::mesh;
  const FMatrix& pts = mesh ? r.mesh_points : *r.physics_points;
  const FMatrix& vals = mesh ? *r.physics_mesh : *r.physics_values;
  const Bits& occ = mesh ? r.mesh_occupancy : r.physics_occupancy;
  const Eigen::Index g = r.globals ? r.globals->cols() : 0;
  s.queries.resize(static_cast<Eigen::Index>(idx.size()), 3 + g);
  s.targets.resize(static_cast<Eigen::Index>(idx.size()), 1);
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const auto row = static_cast<Eigen::Index>(k);
    s.queries(row, 0) = pts(idx[k], 0);
    s.queries(row, 1) = pts(idx[k], 1);
    s.queries(row, 2) = static_cast<float>(occ[idx[k]]);
    if (g) s.queries.row(row).tail(g) = *r.globals;
    s.targets(row, 0) = static_cast<float>(norm.normalize(vals(idx[k], 0)));
  }
}

void check_physics(const SampleRecord& r, const NormStats* norm) {
  require(r.has_physics(), Errc::mismatch, "physics batch requested from geometry-only record " + std::to_string(r.index));
  require(norm != nullptr, Errc::config, "physics batch requires normalisation statistics");
}

}  // namespace

QuerySample make_query_sample(const SampleRecord& r, QueryMode mode, const BatchCounts& counts, const NormStats* norm,
                              std::uint64_t seed, ProxyTask proxy, const ProxyScale& scale) {
  QuerySample s;
  s.record = r.index;
  Rng rng = make_rng(derive_seed(seed, tag::batch, 0));
  if (mode == QueryMode::mixed) mode = std::bernoulli_distribution(0.5)(rng) ? QueryMode::mesh : QueryMode::random;
  s.mode = mode;
  s.geom = gather(r.mesh_points, draw_indices(static_cast<int>(r.mesh_points.rows()), counts.geom, derive_seed(seed, tag::batch, 1)));
  if (mode == QueryMode::occ_stage1) {
    const auto ir = draw_indices(static_cast<int>(r.occ_rand.points.rows()), counts.occ_rand, derive_seed(seed, tag::batch, 2));
    const auto ip = draw_indices(static_cast<int>(r.occ_perturbed.points.rows()), counts.occ_perturbed,
                                 derive_seed(seed, tag::batch, 3));
    stage1(r, ir, ip, proxy, scale, s);
    return s;
  }
  check_physics(r, norm);
  const Eigen::Index stock = mode == QueryMode::mesh ? r.mesh_points.rows() : r.physics_points->rows();
  physics(r, mode, draw_indices(static_cast<int>(stock), counts.physics, derive_seed(seed, tag::batch, 4)), *norm, s);
  return s;
}

QueryBatch make_query_batch(std::span<const SampleRecord* const> records, QueryMode mode, const BatchCounts& counts,
                            const NormStats* norm, std::uint64_t seed, ProxyTask proxy, const ProxyScale& scale) {
  QueryBatch b;
  b.mode = mode;
  b.samples.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i)
    b.samples.push_back(make_query_sample(*records[i], mode, counts, norm, derive_seed(seed, tag::batch, 100 + i), proxy, scale));
  return b;
}

QuerySample make_eval_sample(const SampleRecord& r, QueryMode mode, const NormStats* norm, ProxyTask proxy,
                             const ProxyScale& scale) {
  require(mode != QueryMode::mixed, Errc::invalid_argument, "evaluation needs a fixed query mode");
  QuerySample s;
  s.record = r.index;
  s.mode = mode;
  s.geom = r.mesh_points;
  if (mode == QueryMode::occ_stage1) {
    stage1(r, all(r.occ_rand.points.rows()), all(r.occ_perturbed.points.rows()), proxy, scale, s);
    return s;
  }
  check_physics(r, norm);
  physics(r, mode, all(mode == QueryMode::mesh ? r.mesh_points.rows() : r.physics_points->rows()), *norm, s);
  return s;
}

ProxyScale compute_proxy_scale(std::span<const SampleRecord> records) {
  double sdf_sq = 0.0, sv_sq = 0.0;
  long n_sdf = 0, n_sv = 0;
  for (const auto& r : records) {
    for (const auto* d : {&r.dist_rand, &r.dist_perturbed}) {
      if (!*d) continue;
      const auto sdf = (*d)->sdf.cast<double>();
      sdf_sq += sdf.squaredNorm();
      n_sdf += sdf.size();
      sv_sq += (*d)->sv.cast<double>().squaredNorm();
      n_sv += (*d)->sv.size();
    }
  }
  require(n_sdf > 0, Errc::mismatch, "no SDF/SV samples in dataset (generate with stock.distance=true)");
  // Root-mean-square about zero keeps the sign boundary at zero.
  return {std::sqrt(sdf_sq / n_sdf), std::sqrt(sv_sq / n_sv)};
}

}  // namespace geopre::dataio
