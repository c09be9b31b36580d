#include <doctest.h>

#include "geopre/common/error.hpp"
#include "geopre/dataio/batch.hpp"
#include "geopre/dataio/builders.hpp"
#include "geopre/dataio/dataset.hpp"
#include "geopre/geometry/fields.hpp"

#include <filesystem>
#include <fstream>
#include <set>

using namespace geopre;
using namespace geopre::dataio;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("geopre_test_" + name);
  fs::remove_all(p);
  return p;
}

ElectrostaticsConfig tiny_electro() {
  ElectrostaticsConfig c;
  c.seed = 5;
  c.train_count = 6;
  c.train_physics = 2;
  c.test_physics = 1;
  c.test_geometry = 1;
  c.grid = 65;
  c.physics_queries = 256;
  c.stock.mesh_points = 128;
  c.stock.occ_rand = 200;
  c.stock.occ_perturbed = 128;
  c.stock.distance = true;
  c.k_norm = 2;
  c.threads = 1;
  return c;
}

Errc code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return Errc::invalid_argument;
}

}  // namespace

TEST_CASE("train plan") {
  const auto plan = electrostatics_train_plan(2000, 400);
  int phys = 0, t1 = 0;
  for (std::size_t i = 0; i < plan.size(); ++i) {
    phys += plan[i].physics;
    t1 += plan[i].type == 1;
    if (plan[i].physics) CHECK(plan[i].type == 1);
  }
  CHECK(phys == 400);
  CHECK(t1 == 1000);
  CHECK(plan[798].physics);
  CHECK(!plan[800].physics);
  for (const auto& p : electrostatics_train_plan(40, 40)) CHECK(p.physics);
}

TEST_CASE("electrostatics dataset build, reload and regenerate") {
  const auto dir = scratch("electro");
  const auto cfg = tiny_electro();
  const auto m = build_electrostatics_dataset(dir, cfg);
  CHECK(m.train_physics() == 2);
  CHECK(m.train_geometry() == 4);
  CHECK(m.test_physics() == 1);
  CHECK(m.test_geometry() == 1);

  const auto ds = Dataset::open(dir);
  REQUIRE(ds.norm().has_value());
  for (const auto& r : ds.train()) {
    for (auto o : r.mesh_occupancy) CHECK(o == 1);
    if (!r.has_physics()) continue;
    // Regeneration from the stored description reproduces geometry and labels.
    const auto g = rebuild_geometry(r.geometry);
    const auto again = make_geometry_record(g, cfg.stock, r.geometry.at("seed").get<std::uint64_t>());
    CHECK(again.mesh_points == r.mesh_points);
    CHECK(again.occ_rand.values == r.occ_rand.values);
    const auto phi = solve_for_geometry(g, cfg.grid, cfg.materials);
    const FMatrix expect = solver::interp_bilinear(phi, to_double(r.mesh_points)).cast<float>();
    CHECK(expect == *r.physics_mesh);
    const auto q = geometry::occupancy_field(g, to_double(*r.physics_points));
    CHECK(q == r.physics_occupancy);
  }

  // Normalised pooled values have zero mean and unit std.
  const auto& n = *ds.norm();
  double s = 0, sq = 0;
  long cnt = 0;
  for (const auto& r : ds.train()) {
    if (!r.has_physics()) continue;
    for (const auto* v : {&*r.physics_mesh, &*r.physics_values})
      for (Eigen::Index i = 0; i < v->size(); ++i) {
        const double z = n.normalize((*v)(i));
        s += z;
        sq += z * z;
        ++cnt;
      }
  }
  CHECK(std::abs(s / cnt) < 1e-9);
  CHECK(std::abs(std::sqrt(sq / cnt) - 1.0) < 1e-9);

  const auto c1 = dataset_checksum(dir);
  const auto dir2 = scratch("electro2");
  build_electrostatics_dataset(dir2, cfg);
  CHECK(dataset_checksum(dir2) == c1);
  fs::remove_all(dir);
  fs::remove_all(dir2);
}

TEST_CASE("degenerate split carries physics everywhere") {
  auto cfg = tiny_electro();
  cfg.train_count = 2;
  cfg.train_physics = 2;
  const auto dir = scratch("allphys");
  const auto m = build_electrostatics_dataset(dir, cfg);
  CHECK(m.train_geometry() == 0);
  fs::remove_all(dir);
}

TEST_CASE("stress geometry dataset") {
  StressGeoConfig cfg;
  cfg.seed = 3;
  cfg.rows = {{"ellipse_a0.3_b0.15", 3, 1}, {"rectangle_a0.15_b0.3", 2, 1}};
  cfg.stock.mesh_points = 64;
  cfg.stock.occ_rand = 64;
  cfg.stock.occ_perturbed = 64;
  cfg.threads = 1;
  const auto dir = scratch("stress");
  const auto m = build_stress_geometry_dataset(dir, cfg);
  CHECK(m.train.size() == 5);
  CHECK(m.test.size() == 2);
  CHECK(m.train[0].prior_tag == "ellipse_a0.30_b0.15");
  CHECK(m.train[4].prior_tag == "rectangle_a0.15_b0.30");
  const auto ds = Dataset::open(dir);
  for (const auto& r : ds.train()) {
    CHECK(!r.has_physics());
    for (auto o : r.mesh_occupancy) CHECK(o == 1);
  }
  fs::remove_all(dir);

  StressGeoConfig empty;
  const auto edir = scratch("stress_empty");
  const auto em = build_stress_geometry_dataset(edir, empty);
  CHECK(em.train.empty());
  CHECK(read_manifest(edir).train.empty());
  fs::remove_all(edir);
}

TEST_CASE("record roundtrip and corruption codes") {
  const auto dir = scratch("roundtrip");
  const auto m = build_electrostatics_dataset(dir, tiny_electro());
  const auto path = dir / m.train[0].file;
  const auto bytes = read_file(path);
  const auto r = read_record(path);
  write_record(dir / "copy.rec", r);
  CHECK(read_file(dir / "copy.rec") == bytes);

  auto cut = bytes;
  cut.pop_back();
  CHECK(code_of([&] { decode_container(cut, kRecordMagic, kRecordVersion); }) == Errc::checksum);
  CHECK(code_of([&] { decode_container(std::span(bytes).first(10), kRecordMagic, kRecordVersion); }) == Errc::truncated);
  CHECK(code_of([&] { decode_container(bytes, kRecordMagic, kRecordVersion + 1); }) == Errc::format_version);
  auto flipped = bytes;
  flipped[bytes.size() / 2] ^= std::byte{1};
  CHECK(code_of([&] { decode_container(flipped, kRecordMagic, kRecordVersion); }) == Errc::checksum);

  auto j = to_json(read_manifest(dir));
  j["train"][0]["file"] = (dir / "train/00000.rec").string();
  CHECK_THROWS(manifest_from_json(j));
  j["train"][0]["file"] = "../train/00000.rec";
  CHECK_THROWS(manifest_from_json(j));
  fs::remove_all(dir);
}

TEST_CASE("norm stats") {
  auto rec = [](std::int64_t idx, std::vector<float> vals) {
    SampleRecord r;
    r.index = idx;
    r.physics_mesh = FMatrix::Map(vals.data(), static_cast<Eigen::Index>(vals.size()), 1);
    r.physics_points = FMatrix::Zero(0, 2);
    r.physics_values = FMatrix::Zero(0, 1);
    return r;
  };
  std::vector<SampleRecord> rs = {rec(0, {0.f, 2.f}), rec(1, {2.f, 0.f})};
  const auto n = compute_norm_stats(rs, 2);
  CHECK(n.mean == 1.0);
  CHECK(n.std == 1.0);
  CHECK(std::abs(n.denormalize(n.normalize(0.123456789)) - 0.123456789) < 1e-12);
  std::vector<SampleRecord> flat = {rec(0, {3.f, 3.f})};
  CHECK_THROWS(compute_norm_stats(flat, 1));
  CHECK_THROWS(compute_norm_stats(rs, 3));
  // Records beyond the first k_norm do not matter, whatever their order.
  rs.push_back(rec(5, {100.f}));
  rs.push_back(rec(4, {-7.f}));
  const auto n2 = compute_norm_stats(rs, 2);
  CHECK(n2.mean == n.mean);
  CHECK(n2.std == n.std);
}

TEST_CASE("query batches") {
  const auto dir = scratch("batch");
  auto cfg = tiny_electro();
  build_electrostatics_dataset(dir, cfg);
  const auto ds = Dataset::open(dir);
  std::vector<const SampleRecord*> recs;
  for (const auto& r : ds.train()) recs.push_back(&r);

  const BatchCounts counts{128, 100, 100, 300};
  const auto b1 = make_query_batch(recs, QueryMode::occ_stage1, counts, nullptr, 9);
  for (const auto& s : b1.samples) {
    CHECK(s.geom.rows() == 128);
    CHECK(s.queries.rows() == 200);
    CHECK(s.targets.rows() == 200);
    CHECK(((s.targets.array() == 0.f) || (s.targets.array() == 1.f)).all());
  }
  const auto b2 = make_query_batch(recs, QueryMode::occ_stage1, counts, nullptr, 9);
  CHECK(b1.samples[2].queries == b2.samples[2].queries);

  std::vector<const SampleRecord*> phys;
  for (const auto* r : recs)
    if (r->has_physics()) phys.push_back(r);
  const auto& norm = *ds.norm();
  const auto mb = make_query_batch(phys, QueryMode::mesh, counts, &norm, 4);
  for (const auto& s : mb.samples) {
    CHECK(s.queries.cols() == 3);
    CHECK((s.queries.col(2).array() == 1.f).all());
  }
  const auto rb = make_query_batch(phys, QueryMode::random, counts, &norm, 4);
  CHECK(rb.samples[0].queries.rows() == 300);
  CHECK_THROWS(make_query_batch(recs, QueryMode::random, counts, &norm, 4));

  const auto sdf = make_query_sample(*recs[0], QueryMode::occ_stage1, counts, nullptr, 1, ProxyTask::sdf,
                                     compute_proxy_scale(ds.train()));
  CHECK(sdf.targets.cols() == 1);
  const auto sv = make_query_sample(*recs[0], QueryMode::occ_stage1, counts, nullptr, 1, ProxyTask::sv);
  CHECK(sv.targets.cols() == 2);

  const auto idx = draw_indices(10, 10, 3);
  CHECK(std::set<int>(idx.begin(), idx.end()).size() == 10);
  CHECK(draw_indices(10, 25, 3).size() == 25);
  fs::remove_all(dir);
}
