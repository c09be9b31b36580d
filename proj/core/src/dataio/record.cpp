#include "geopre/dataio/record.hpp"

#include "geopre/common/error.hpp"
#include "geopre/geometry/shapes.hpp"

namespace geopre::dataio {

namespace {

NamedArray f32(const std::string& name, const FMatrix& m) {
  return NamedArray::from<float>(name, DType::f32, {m.rows(), m.cols()}, std::span<const float>(m.data(), m.size()));
}

NamedArray u8(const std::string& name, const Bits& b) {
  return NamedArray::from<std::uint8_t>(name, DType::u8, {static_cast<std::int64_t>(b.size())}, b);
}

FMatrix get_f32(const Container& c, const std::string& name) {
  const auto& a = c.array(name);
  require(a.shape.size() == 2, Errc::mismatch, "array '" + name + "' is not two-dimensional");
  const auto v = a.as<float>();
  FMatrix m(a.shape[0], a.shape[1]);
  std::copy(v.begin(), v.end(), m.data());
  return m;
}

std::optional<FMatrix> get_opt(const Container& c, const std::string& name) {
  if (!c.find(name)) return std::nullopt;
  return get_f32(c, name);
}

}  // namespace

FMatrix to_float(const geometry::PointSet& p) { return p.cast<float>(); }

geometry::PointSet to_double(const FMatrix& p) {
  require(p.cols() == 2, Errc::mismatch, "point array must have two columns");
  return p.cast<double>();
}

Container to_container(const SampleRecord& r) {
  Container c;
  c.meta = {{"index", r.index}, {"split", r.split}, {"geometry", r.geometry}, {"prior_tag", r.prior_tag},
            {"has_physics", r.has_physics()}};
  c.arrays.push_back(f32("mesh_points", r.mesh_points));
  c.arrays.push_back(u8("mesh_occupancy", r.mesh_occupancy));
  if (r.has_physics()) {
    c.arrays.push_back(f32("physics_mesh", *r.physics_mesh));
    c.arrays.push_back(f32("physics_points", *r.physics_points));
    c.arrays.push_back(f32("physics_values", *r.physics_values));
    c.arrays.push_back(u8("physics_occupancy", r.physics_occupancy));
  }
  c.arrays.push_back(f32("occ_rand_points", r.occ_rand.points));
  c.arrays.push_back(u8("occ_rand_values", r.occ_rand.values));
  c.arrays.push_back(f32("occ_perturbed_points", r.occ_perturbed.points));
  c.arrays.push_back(u8("occ_perturbed_values", r.occ_perturbed.values));
  if (r.dist_rand) {
    c.arrays.push_back(f32("sdf_rand", r.dist_rand->sdf));
    c.arrays.push_back(f32("sv_rand", r.dist_rand->sv));
  }
  if (r.dist_perturbed) {
    c.arrays.push_back(f32("sdf_perturbed", r.dist_perturbed->sdf));
    c.arrays.push_back(f32("sv_perturbed", r.dist_perturbed->sv));
  }
  if (r.globals) c.arrays.push_back(f32("globals", *r.globals));
  return c;
}

SampleRecord from_container(const Container& c) {
  SampleRecord r;
  r.index = c.meta.at("index").get<std::int64_t>();
  r.split = c.meta.at("split").get<std::string>();
  r.geometry = c.meta.at("geometry");
  r.prior_tag = c.meta.at("prior_tag").get<std::string>();
  r.mesh_points = get_f32(c, "mesh_points");
  r.mesh_occupancy = c.array("mesh_occupancy").as<std::uint8_t>();
  if (c.meta.at("has_physics").get<bool>()) {
    r.physics_mesh = get_f32(c, "physics_mesh");
    r.physics_points = get_f32(c, "physics_points");
    r.physics_values = get_f32(c, "physics_values");
    r.physics_occupancy = c.array("physics_occupancy").as<std::uint8_t>();
  }
  r.occ_rand = {get_f32(c, "occ_rand_points"), c.array("occ_rand_values").as<std::uint8_t>()};
  r.occ_perturbed = {get_f32(c, "occ_perturbed_points"), c.array("occ_perturbed_values").as<std::uint8_t>()};
  if (c.find("sdf_rand")) r.dist_rand = DistanceSamples{get_f32(c, "sdf_rand"), get_f32(c, "sv_rand")};
  if (c.find("sdf_perturbed"))
    r.dist_perturbed = DistanceSamples{get_f32(c, "sdf_perturbed"), get_f32(c, "sv_perturbed")};
  r.globals = get_opt(c, "globals");
  return r;
}

void write_record(const std::filesystem::path& path, const SampleRecord& r) {
  write_container(path, kRecordMagic, kRecordVersion, to_container(r));
}

SampleRecord read_record(const std::filesystem::path& path) {
  return from_container(read_container(path, kRecordMagic, kRecordVersion));
}

geometry::GeometryInstance rebuild_geometry(const nlohmann::json& d) {
  const auto kind = d.at("kind").get<std::string>();
  const auto seed = d.at("seed").get<std::uint64_t>();
  if (kind == "interface") {
    geometry::InterfaceOptions opts;
    opts.perturbation = d.value("perturbation", opts.perturbation);
    return geometry::make_interface_geometry(d.at("type").get<int>(), seed, opts);
  }
  if (kind == "void") {
    const geometry::GrfParams grf{d.at("grf_amplitude").get<double>(), d.at("grf_corr_length").get<double>()};
    return geometry::make_void_geometry(geometry::VoidPrior::parse(d.at("prior").get<std::string>()), grf,
                                        d.value("n_theta", geometry::kVoidThetaSamples), seed);
  }
  fail(Errc::mismatch, "unknown geometry kind '" + kind + "'");
}

}  // namespace geopre::dataio
