#include <doctest.h>

#include "../support/attention_oracle.hpp"
#include "../support/gradcheck.hpp"
#include "geopre/nn/checkpoint.hpp"
#include "geopre/nn/layers.hpp"
#include "geopre/nn/optim.hpp"

#include <cmath>
#include <filesystem>
#include <random>

using namespace geopre::nn;
using M = Matrix<double>;

namespace {

M randn(int r, int c, std::uint64_t seed, double s = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, s);
  M m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

// Reduces an arbitrary output to a scalar with a fixed random projection so
// every output entry contributes a distinct weight.
Var<double> project(Var<double> y, std::uint64_t seed = 9) {
  Tape<double>& t = *y.tape;
  return sum(mul(y, t.constant(randn(static_cast<int>(y.rows()), static_cast<int>(y.cols()), seed))));
}

}  // namespace

TEST_CASE("op gradients match finite differences") {
  ParameterSet<double> ps;
  auto& a = ps.add("a", "a", randn(4, 3, 1));
  auto& b = ps.add("b", "b", randn(3, 5, 2));
  auto& c = ps.add("c", "c", randn(4, 3, 3));
  auto& r = ps.add("r", "r", randn(1, 3, 4));
  auto& d = ps.add("d", "d", randn(4, 1, 5).cwiseAbs().array() + 0.5);
  auto& g = ps.add("g", "g", randn(1, 3, 6));
  auto& bias = ps.add("bias", "bias", randn(1, 4, 7));

  const std::vector<std::pair<std::string, gradcheck::LossFn>> cases = {
      {"matmul", [&](Tape<double>& t) { return project(matmul(t.param(a), t.param(b))); }},
      {"matmul_nt", [&](Tape<double>& t) { return project(matmul_nt(t.param(a), t.param(c))); }},
      {"matmul_tn", [&](Tape<double>& t) { return project(matmul_tn(t.param(a), t.param(c))); }},
      {"linear", [&](Tape<double>& t) { return project(linear(t.param(c), transpose(t.param(a)), t.param(bias))); }},
      {"add_sub_mul", [&](Tape<double>& t) {
         return project(mul(add(t.param(a), t.param(c)), sub(t.param(a), scale(t.param(c), 0.3))));
       }},
      {"exp_gelu", [&](Tape<double>& t) { return project(gelu(exp(scale(t.param(a), 0.5)))); }},
      {"add_row", [&](Tape<double>& t) { return project(add_row(t.param(a), t.param(r))); }},
      {"slice_concat", [&](Tape<double>& t) {
         auto x = t.param(a);
         return project(concat_cols(std::vector<Var<double>>{slice_cols(x, 1, 2), t.param(c), slice_cols(x, 0, 1)}));
       }},
      {"layer_norm", [&](Tape<double>& t) { return project(layer_norm(t.param(a), t.param(g), t.param(r))); }},
      {"softmax_rows", [&](Tape<double>& t) { return project(softmax_rows(t.param(a))); }},
      {"softmax_cols", [&](Tape<double>& t) { return project(softmax_cols(t.param(a))); }},
      {"sums", [&](Tape<double>& t) {
         auto x = t.param(a);
         return add(project(col_sum(x)), project(row_sum(x), 3));
       }},
      {"div_rows", [&](Tape<double>& t) { return project(div_rows(t.param(a), t.param(d))); }},
      {"mean", [&](Tape<double>& t) { return mean(mul(t.param(a), t.param(c))); }},
      {"bce", [&](Tape<double>& t) {
         M tg = (randn(4, 3, 11).array() > 0).cast<double>();
         return bce_with_logits(t.param(a), tg);
       }},
      {"mse", [&](Tape<double>& t) { return mse(t.param(a), randn(4, 3, 12)); }},
      {"rel_l2", [&](Tape<double>& t) { return rel_l2(t.param(a), randn(4, 3, 13)); }},
      {"kl", [&](Tape<double>& t) { return kl_standard_normal(t.param(a), scale(t.param(c), 0.2)); }},
  };
  for (const auto& [name, fn] : cases) {
    CAPTURE(name);
    CHECK(gradcheck::worst(gradcheck::group_errors(ps, fn)) < 1e-6);
  }
}

TEST_CASE("loss formulas") {
  Tape<double> t(false);
  M zero = M::Zero(1, 1);
  M one = M::Ones(1, 1);
  CHECK(std::abs(bce_with_logits(t.constant(zero), one).value()(0, 0) - std::log(2.0)) < 1e-12);
  CHECK(std::abs(kl_standard_normal(t.constant(M::Ones(2, 3)), t.constant(M::Zero(2, 3))).value()(0, 0) - 0.5) < 1e-12);
  CHECK(kl_standard_normal(t.constant(M::Zero(2, 3)), t.constant(M::Zero(2, 3))).value()(0, 0) == 0.0);
  const M tg = randn(5, 1, 3);
  CHECK(rel_l2(t.constant(M::Zero(5, 1)), tg).value()(0, 0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(rel_l2(t.constant(tg), tg).value()(0, 0) == 0.0);
  CHECK(rel_l2(t.constant(2 * tg), tg).value()(0, 0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(std::abs(rel_l2(t.constant(3.7 * (tg + M::Ones(5, 1))), M(3.7 * tg)).value()(0, 0) -
                 rel_l2(t.constant(M(tg + M::Ones(5, 1))), tg).value()(0, 0)) < 1e-12);
  CHECK_THROWS(rel_l2(t.constant(tg), M(M::Zero(5, 1))));
}

TEST_CASE("linear attention matches direct summation") {
  const M q = randn(5, 8, 21), k = randn(5, 8, 22), v = randn(5, 8, 23);
  for (int heads : {1, 2}) {
    Tape<double> t(false);
    const M got = linear_attention_core(t.constant(q), t.constant(k), t.constant(v), heads).value();
    const int dh = 8 / heads;
    for (int h = 0; h < heads; ++h) {
      const M ref = oracle::naive_linear(q.middleCols(h * dh, dh), k.middleCols(h * dh, dh), v.middleCols(h * dh, dh));
      CHECK((got.middleCols(h * dh, dh) - ref).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
  Tape<double> t(false);
  const M v1 = randn(1, 8, 3);
  const M single = linear_attention_core(t.constant(randn(6, 8, 1)), t.constant(randn(1, 8, 2)), t.constant(v1), 2).value();
  for (int i = 0; i < 6; ++i) CHECK((single.row(i) - v1).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("layer gradients") {
  ParameterSet<double> ps;
  Builder<double> b1(ps, "attn", 1);
  Builder<double> b2(ps, "ff", 2);
  AttentionBlock<double> cross(b1, "cross", 8, 2, AttentionKind::softmax, false, 6);
  AttentionBlock<double> lin(b1, "lin", 8, 2, AttentionKind::linear, true);
  FeedForward<double> ff(b2, "ff", 8, 2);
  Mlp<double> mlp(b2, "mlp", {3, 8, 8});
  const M x = randn(5, 3, 4), ctx = randn(7, 6, 5);
  auto loss = [&](Tape<double>& t) {
    auto h = mlp(t, t.constant(x));
    h = cross(t, h, t.constant(ctx));
    h = lin(t, h);
    h = ff(t, h);
    return project(h);
  };
  CHECK(gradcheck::worst(gradcheck::group_errors(ps, loss)) < 1e-6);
}

TEST_CASE("cosine schedule") {
  CHECK(lr_schedule(0, 100, 1e-3, 1e-6) == doctest::Approx(1e-3).epsilon(1e-12));
  CHECK(lr_schedule(100, 100, 1e-3, 1e-6) == 1e-6);
  CHECK(std::abs(lr_schedule(50, 100, 1e-3, 1e-6) - 5.005e-4) < 1e-12);
  CHECK_THROWS(lr_schedule(101, 100, 1e-3, 1e-6));
}

TEST_CASE("adamw and clipping") {
  ParameterSet<float> ps;
  auto& w = ps.add("w", "g", Matrix<float>::Constant(1, 2, 1.0f));
  ps.zero_grad();
  w.grad << 3.0f, 4.0f;
  CHECK(clip_grad_norm(ps, 1.0) == doctest::Approx(5.0));
  CHECK(grad_norm(ps) == doctest::Approx(1.0).epsilon(1e-6));
  AdamW<float> opt({0.9, 0.999, 1e-8, 0.0});
  opt.step(ps, 0.1);
  // first Adam step moves each coordinate by lr * sign(g)
  CHECK(w.value(0, 0) == doctest::Approx(0.9).epsilon(1e-5));
  CHECK(w.value(0, 1) == doctest::Approx(0.9).epsilon(1e-5));
}

TEST_CASE("checkpoint round trip is bit exact") {
  ParameterSet<float> a, b;
  Builder<float> ba(a, "x", 3), bb(b, "x", 4);
  Linear<float> la(ba, "l", 5, 7), lb(bb, "l", 5, 7);
  const auto path = std::filesystem::temp_directory_path() / "geopre_ckpt_test.ckpt";
  save_checkpoint(path, a, {{{"width", 7}}, 12, "test"});
  CHECK(parameter_digest(a) != parameter_digest(b));
  const auto info = load_checkpoint(path, b);
  CHECK(info.step == 12);
  CHECK(info.config["width"] == 7);
  CHECK(parameter_digest(a) == parameter_digest(b));
  for (auto& p : a) CHECK(p.value == b.at(p.name).value);
  std::filesystem::remove(path);
}
