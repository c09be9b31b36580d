#include "geopre/dataio/builders.hpp"

#include "geopre/common/error.hpp"
#include "geopre/common/parallel.hpp"
#include "geopre/common/rng.hpp"
#include "geopre/dataio/norm.hpp"
#include "geopre/geometry/fields.hpp"
#include "geopre/geometry/sampling.hpp"
#include "geopre/geometry/shapes.hpp"

#include <mutex>

namespace geopre::dataio {

namespace {

using geometry::GeometryInstance;
using geometry::PointSet;

StockConfig stock_from(const nlohmann::json& j) {
  StockConfig s;
  s.mesh_points = j.value("mesh_points", s.mesh_points);
  s.boundary_fraction = j.value("boundary_fraction", s.boundary_fraction);
  s.occ_rand = j.value("occ_rand", s.occ_rand);
  s.occ_perturbed = j.value("occ_perturbed", s.occ_perturbed);
  s.perturb_sigma = j.value("perturb_sigma", s.perturb_sigma);
  s.distance = j.value("distance", s.distance);
  s.mesh_covers = j.value("mesh_covers", s.mesh_covers);
  require(s.mesh_covers == "object" || s.mesh_covers == "domain", Errc::config,
          "mesh_covers must be 'object' or 'domain'");
  require(s.mesh_points >= 16 && s.occ_rand >= 1 && s.occ_perturbed >= 1, Errc::config, "stock sizes too small");
  require(s.perturb_sigma >= 0, Errc::config, "perturb_sigma must be non-negative");
  return s;
}

nlohmann::json stock_json(const StockConfig& s) {
  return {{"mesh_points", s.mesh_points}, {"boundary_fraction", s.boundary_fraction}, {"occ_rand", s.occ_rand},
          {"occ_perturbed", s.occ_perturbed}, {"perturb_sigma", s.perturb_sigma}, {"distance", s.distance},
          {"mesh_covers", s.mesh_covers}};
}

OccupancySamples label(const GeometryInstance& g, const FMatrix& points) {
  return {points, geometry::occupancy_field(g, to_double(points))};
}

DistanceSamples distances(const GeometryInstance& g, const FMatrix& points) {
  const auto d = geometry::distance_fields(g, to_double(points));
  return {d.sdf.cast<float>(), to_float(d.sv)};
}

// Mesh stock rounded to float32. In object mode, points that leave the
// occupancy-1 region through rounding are replaced from a fallback draw.
FMatrix mesh_stock(const GeometryInstance& g, const StockConfig& stock, std::uint64_t seed) {
  if (stock.mesh_covers == "domain")
    return to_float(geometry::mesh_points_domain(g, stock.mesh_points, stock.boundary_fraction, seed));
  FMatrix pts = to_float(geometry::mesh_points(g, stock.mesh_points, stock.boundary_fraction, seed));
  const geometry::OccupancyEvaluator occ(g);
  for (int attempt = 1;; ++attempt) {
    std::vector<int> bad;
    for (int i = 0; i < pts.rows(); ++i)
      if (!occ(pts.row(i).cast<double>().transpose())) bad.push_back(i);
    if (bad.empty()) return pts;
    require(attempt <= 8, Errc::degenerate_geometry, "mesh stock keeps leaving the region after rounding");
    const FMatrix extra = to_float(geometry::mesh_points(g, std::max<int>(16, static_cast<int>(bad.size())), 0.0,
                                                         derive_seed(seed, tag::retry, attempt)));
    for (std::size_t k = 0; k < bad.size(); ++k) pts.row(bad[k]) = extra.row(static_cast<Eigen::Index>(k));
  }
}

nlohmann::json interface_description(int type, std::uint64_t seed, double perturbation) {
  return {{"kind", "interface"}, {"type", type}, {"seed", seed}, {"perturbation", perturbation}};
}

nlohmann::json void_description(const std::string& prior, std::uint64_t seed, const StressGeoConfig& cfg) {
  return {{"kind", "void"},
          {"prior", prior},
          {"seed", seed},
          {"grf_amplitude", cfg.grf_amplitude},
          {"grf_corr_length", cfg.grf_corr_length},
          {"n_theta", cfg.n_theta}};
}

// Generates one record, regenerating the geometry with a derived seed when
// sampling or solving fails.
template <typename Make>
SampleRecord with_retries(std::uint64_t base_seed, int max_retries, const std::string& what, const LogFn& log,
                          std::mutex& log_mutex, Make&& make) {
  for (int attempt = 0;; ++attempt) {
    const std::uint64_t seed = attempt == 0 ? base_seed : derive_seed(base_seed, tag::retry, attempt);
    try {
      return make(seed);
    } catch (const Error& e) {
      if (attempt >= max_retries ||
          (e.code() != Errc::not_converged && e.code() != Errc::degenerate_geometry && e.code() != Errc::numerical))
        throw;
      if (log) {
        std::lock_guard lock(log_mutex);
        log(what + ": regenerating geometry after failure (" + e.what() + ")");
      }
    }
  }
}

void prepare_dir(const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "train");
  std::filesystem::create_directories(dir / "test");
}

}  // namespace

ElectrostaticsConfig electrostatics_config(const nlohmann::json& j) {
  ElectrostaticsConfig c;
  c.seed = j.value("seed", c.seed);
  c.train_count = j.value("train_count", c.train_count);
  c.train_physics = j.value("train_physics", c.train_physics);
  c.test_physics = j.value("test_physics", c.test_physics);
  c.test_geometry = j.value("test_geometry", c.test_geometry);
  c.grid = j.value("grid", c.grid);
  c.physics_queries = j.value("physics_queries", c.physics_queries);
  c.interface_perturbation = j.value("interface_perturbation", c.interface_perturbation);
  if (j.contains("materials")) {
    const auto& m = j["materials"];
    c.materials.eps_object = m.value("eps_object", c.materials.eps_object);
    c.materials.rho_object = m.value("rho_object", c.materials.rho_object);
    c.materials.eps_background = m.value("eps_background", c.materials.eps_background);
    c.materials.rho_background = m.value("rho_background", c.materials.rho_background);
  }
  c.stock = stock_from(j.value("stock", nlohmann::json::object()));
  c.k_norm = j.value("k_norm", c.k_norm);
  c.max_retries = j.value("max_retries", c.max_retries);
  c.threads = j.value("threads", c.threads);
  require(c.train_count >= 0 && c.train_physics >= 0 && c.train_physics <= c.train_count, Errc::config,
          "train_physics must lie in [0, train_count]");
  require(c.test_physics >= 0 && c.test_geometry >= 0, Errc::config, "test counts must be non-negative");
  require(c.grid >= 65, Errc::config, "grid must be at least 65");
  require(c.physics_queries >= 1, Errc::config, "physics_queries must be positive");
  require(c.materials.eps_object > 0 && c.materials.eps_background > 0, Errc::config, "permittivity must be positive");
  return c;
}

StressGeoConfig stress_geo_config(const nlohmann::json& j) {
  StressGeoConfig c;
  c.seed = j.value("seed", c.seed);
  for (const auto& row : j.value("rows", nlohmann::json::array())) {
    VoidRow r;
    r.prior = row.at("prior").get<std::string>();
    geometry::VoidPrior::parse(r.prior);
    r.train = row.value("train", r.train);
    r.test = row.value("test", r.test);
    require(r.train >= 0 && r.test >= 0, Errc::config, "row counts must be non-negative");
    c.rows.push_back(r);
  }
  c.grf_amplitude = j.value("grf_amplitude", c.grf_amplitude);
  c.grf_corr_length = j.value("grf_corr_length", c.grf_corr_length);
  c.n_theta = j.value("n_theta", c.n_theta);
  c.stock = stock_from(j.value("stock", nlohmann::json::object()));
  c.max_retries = j.value("max_retries", c.max_retries);
  c.threads = j.value("threads", c.threads);
  require(c.grf_amplitude >= 0 && c.grf_corr_length > 0, Errc::config, "invalid GRF parameters");
  return c;
}

std::vector<RecordPlan> electrostatics_train_plan(int count, int physics) {
  // Type-1 records number max(physics, ceil(count/2)); types alternate while
  // both remain, and physics goes to the first type-1 records.
  const int type1 = std::max(physics, (count + 1) / 2);
  const int type2 = count - type1;
  std::vector<RecordPlan> plan;
  plan.reserve(count);
  int t1 = 0, t2 = 0;
  for (int i = 0; i < count; ++i) {
    const bool pick1 = t2 >= type2 || (i % 2 == 0 && t1 < type1);
    if (pick1) {
      plan.push_back({1, t1 < physics});
      ++t1;
    } else {
      plan.push_back({2, false});
      ++t2;
    }
  }
  return plan;
}

solver::GridField solve_for_geometry(const GeometryInstance& g, int grid, const solver::MaterialValues& materials) {
  return solver::solve_poisson(solver::rasterize_materials(g, grid, materials));
}

SampleRecord make_geometry_record(const GeometryInstance& g, const StockConfig& stock, std::uint64_t record_seed) {
  SampleRecord r;
  r.prior_tag = g.prior_tag;
  r.mesh_points = mesh_stock(g, stock, derive_seed(record_seed, tag::mesh));
  r.mesh_occupancy = geometry::occupancy_field(g, to_double(r.mesh_points));

  r.occ_rand = label(g, to_float(geometry::sample_uniform_points(geometry::Domain::unit_square(), stock.occ_rand,
                                                                 derive_seed(record_seed, tag::occ_rand))));
  PointSet base(stock.occ_perturbed, 2);
  for (int i = 0; i < stock.occ_perturbed; ++i)
    base.row(i) = r.mesh_points.row(i % r.mesh_points.rows()).cast<double>();
  r.occ_perturbed = label(g, to_float(geometry::perturb_points(base, stock.perturb_sigma, derive_seed(record_seed, tag::occ_pert))));
  if (stock.distance) {
    r.dist_rand = distances(g, r.occ_rand.points);
    r.dist_perturbed = distances(g, r.occ_perturbed.points);
  }
  return r;
}

DatasetManifest build_electrostatics_dataset(const std::filesystem::path& dir, const ElectrostaticsConfig& cfg,
                                             const LogFn& log) {
  prepare_dir(dir);
  DatasetManifest m;
  m.kind = "electrostatics";
  m.seed = cfg.seed;
  m.k_norm = cfg.k_norm;
  m.config = {{"seed", cfg.seed},
              {"train_count", cfg.train_count},
              {"train_physics", cfg.train_physics},
              {"test_physics", cfg.test_physics},
              {"test_geometry", cfg.test_geometry},
              {"grid", cfg.grid},
              {"physics_queries", cfg.physics_queries},
              {"interface_perturbation", cfg.interface_perturbation},
              {"materials",
               {{"eps_object", cfg.materials.eps_object},
                {"rho_object", cfg.materials.rho_object},
                {"eps_background", cfg.materials.eps_background},
                {"rho_background", cfg.materials.rho_background}}},
              {"stock", stock_json(cfg.stock)},
              {"k_norm", cfg.k_norm}};

  struct Job {
    std::string split;
    int index;
    RecordPlan plan;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  const auto train_plan = electrostatics_train_plan(cfg.train_count, cfg.train_physics);
  for (int i = 0; i < cfg.train_count; ++i) jobs.push_back({"train", i, train_plan[i], derive_seed(cfg.seed, tag::geometry, i)});
  const std::uint64_t test_seed = derive_seed(cfg.seed, tag::test_split);
  for (int i = 0; i < cfg.test_physics + cfg.test_geometry; ++i) {
    const bool physics = i < cfg.test_physics;
    jobs.push_back({"test", i, {physics ? 1 : 2, physics}, derive_seed(test_seed, tag::geometry, i)});
  }

  std::mutex log_mutex;
  std::vector<std::string> priors(jobs.size());
  parallel_for(static_cast<int>(jobs.size()), cfg.threads, [&](int k) {
    const Job& job = jobs[k];
    const std::string name = record_file(job.split, job.index);
    SampleRecord rec = with_retries(job.seed, cfg.max_retries, name, log, log_mutex, [&](std::uint64_t seed) {
      geometry::InterfaceOptions opts;
      opts.perturbation = cfg.interface_perturbation;
      const auto g = geometry::make_interface_geometry(job.plan.type, seed, opts);
      SampleRecord r = make_geometry_record(g, cfg.stock, seed);
      r.geometry = interface_description(job.plan.type, seed, cfg.interface_perturbation);
      if (job.plan.physics) {
        const auto phi = solve_for_geometry(g, cfg.grid, cfg.materials);
        r.physics_mesh = FMatrix(solver::interp_bilinear(phi, to_double(r.mesh_points)).cast<float>());
        const FMatrix q = to_float(geometry::sample_uniform_points(geometry::Domain::unit_square(),
                                                                   cfg.physics_queries,
                                                                   derive_seed(seed, tag::physics_query)));
        r.physics_points = q;
        r.physics_values = FMatrix(solver::interp_bilinear(phi, to_double(q)).cast<float>());
        r.physics_occupancy = geometry::occupancy_field(g, to_double(q));
      }
      return r;
    });
    rec.index = job.index;
    rec.split = job.split;
    priors[k] = rec.prior_tag;
    write_record(dir / name, rec);
    if (log && (job.index + 1) % 100 == 0) {
      std::lock_guard lock(log_mutex);
      log(job.split + ": " + std::to_string(job.index + 1) + " records");
    }
  });

  for (std::size_t k = 0; k < jobs.size(); ++k) {
    ManifestEntry e{record_file(jobs[k].split, jobs[k].index), jobs[k].plan.physics, priors[k]};
    (jobs[k].split == "train" ? m.train : m.test).push_back(std::move(e));
  }

  if (cfg.train_physics >= cfg.k_norm && cfg.train_physics > 0) {
    std::vector<SampleRecord> first;
    for (const auto& e : m.train) {
      if (!e.physics) continue;
      first.push_back(read_record(dir / e.file));
      if (static_cast<int>(first.size()) == cfg.k_norm) break;
    }
    write_norm_stats(dir / "norm.json", compute_norm_stats(first, cfg.k_norm));
    m.norm_file = "norm.json";
  } else if (log && cfg.train_physics > 0) {
    log("fewer physics records than k_norm; norm.json not written");
  }
  write_manifest(dir, m);
  return m;
}

DatasetManifest build_stress_geometry_dataset(const std::filesystem::path& dir, const StressGeoConfig& cfg,
                                              const LogFn& log) {
  prepare_dir(dir);
  DatasetManifest m;
  m.kind = "stress_geo";
  m.seed = cfg.seed;
  auto rows = nlohmann::json::array();
  for (const auto& r : cfg.rows) rows.push_back({{"prior", r.prior}, {"train", r.train}, {"test", r.test}});
  m.config = {{"seed", cfg.seed},
              {"rows", rows},
              {"grf_amplitude", cfg.grf_amplitude},
              {"grf_corr_length", cfg.grf_corr_length},
              {"n_theta", cfg.n_theta},
              {"stock", stock_json(cfg.stock)}};

  struct Job {
    std::string split;
    int index;
    std::string prior;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  int n_train = 0, n_test = 0;
  const std::uint64_t test_seed = derive_seed(cfg.seed, tag::test_split);
  for (const auto& row : cfg.rows) {
    for (int i = 0; i < row.train; ++i, ++n_train)
      jobs.push_back({"train", n_train, row.prior, derive_seed(cfg.seed, tag::geometry, n_train)});
    for (int i = 0; i < row.test; ++i, ++n_test)
      jobs.push_back({"test", n_test, row.prior, derive_seed(test_seed, tag::geometry, n_test)});
  }

  std::mutex log_mutex;
  parallel_for(static_cast<int>(jobs.size()), cfg.threads, [&](int k) {
    const Job& job = jobs[k];
    const std::string name = record_file(job.split, job.index);
    SampleRecord rec = with_retries(job.seed, cfg.max_retries, name, log, log_mutex, [&](std::uint64_t seed) {
      const auto g = geometry::make_void_geometry(geometry::VoidPrior::parse(job.prior),
                                                  {cfg.grf_amplitude, cfg.grf_corr_length}, cfg.n_theta, seed);
      SampleRecord r = make_geometry_record(g, cfg.stock, seed);
      r.geometry = void_description(job.prior, seed, cfg);
      return r;
    });
    rec.index = job.index;
    rec.split = job.split;
    write_record(dir / name, rec);
  });

  for (const auto& job : jobs) {
    ManifestEntry e{record_file(job.split, job.index), false, geometry::VoidPrior::parse(job.prior).tag()};
    (job.split == "train" ? m.train : m.test).push_back(std::move(e));
  }
  std::sort(m.train.begin(), m.train.end(), [](const auto& a, const auto& b) { return a.file < b.file; });
  std::sort(m.test.begin(), m.test.end(), [](const auto& a, const auto& b) { return a.file < b.file; });
  write_manifest(dir, m);
  return m;
}

}  // namespace geopre::dataio
