#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "panelode/error.hpp"
#include "panelode/nn.hpp"
#include "panelode/params.hpp"
#include "panelode/tape.hpp"

using namespace panelode;
using ad::Tape;
using ad::Var;

namespace {

mat_t random_mat(std::mt19937& rng, index_t r, index_t c, scalar_t scale = 1.0) {
  std::uniform_real_distribution<scalar_t> dist(-scale, scale);
  mat_t m(r, c);
  for (index_t i = 0; i < r; ++i) {
    for (index_t j = 0; j < c; ++j) m(i, j) = dist(rng);
  }
  return m;
}

struct GruMats {
  mat_t wz, uz, bz, wr, ur, br, wh, uh, bh;
};

GruMats random_gru(std::mt19937& rng, index_t in, index_t hidden, scalar_t scale = 0.8) {
  return {random_mat(rng, in, hidden, scale),     random_mat(rng, hidden, hidden, scale),
          random_mat(rng, 1, hidden, scale),      random_mat(rng, in, hidden, scale),
          random_mat(rng, hidden, hidden, scale), random_mat(rng, 1, hidden, scale),
          random_mat(rng, in, hidden, scale),     random_mat(rng, hidden, hidden, scale),
          random_mat(rng, 1, hidden, scale)};
}

GruMats zero_gru(index_t in, index_t hidden) {
  return {mat_t::Zero(in, hidden),     mat_t::Zero(hidden, hidden), mat_t::Zero(1, hidden),
          mat_t::Zero(in, hidden),     mat_t::Zero(hidden, hidden), mat_t::Zero(1, hidden),
          mat_t::Zero(in, hidden),     mat_t::Zero(hidden, hidden), mat_t::Zero(1, hidden)};
}

nn::GruViews bind_gru(Tape& t, const GruMats& g) {
  return {t.leaf(g.wz), t.leaf(g.uz), t.leaf(g.bz), t.leaf(g.wr), t.leaf(g.ur),
          t.leaf(g.br), t.leaf(g.wh), t.leaf(g.uh), t.leaf(g.bh)};
}

// Independent scalar recomputation of the gate equations, element by element,
// with plain doubles and index loops. No Eigen, no tape.
std::vector<double> gru_step_oracle(const GruMats& g, const std::vector<double>& x,
                                    const std::vector<double>& h) {
  const std::size_t hidden = static_cast<std::size_t>(g.uz.rows());
  auto sigmoid = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  auto affine = [&](const mat_t& w, const mat_t& u, const mat_t& b, std::size_t j,
                    const std::vector<double>& hh) {
    double acc = b(0, static_cast<index_t>(j));
    for (std::size_t i = 0; i < x.size(); ++i) {
      acc += x[i] * w(static_cast<index_t>(i), static_cast<index_t>(j));
    }
    for (std::size_t i = 0; i < hidden; ++i) {
      acc += hh[i] * u(static_cast<index_t>(i), static_cast<index_t>(j));
    }
    return acc;
  };

  std::vector<double> out(hidden);
  for (std::size_t j = 0; j < hidden; ++j) {
    const double zj = sigmoid(affine(g.wz, g.uz, g.bz, j, h));
    const double rj = sigmoid(affine(g.wr, g.ur, g.br, j, h));
    std::vector<double> rh(hidden);
    for (std::size_t i = 0; i < hidden; ++i) {
      // r is componentwise; recompute r_i for the candidate term
      const double ri = sigmoid(affine(g.wr, g.ur, g.br, i, h));
      rh[i] = ri * h[i];
    }
    double cand = g.bh(0, static_cast<index_t>(j));
    for (std::size_t i = 0; i < x.size(); ++i) {
      cand += x[i] * g.wh(static_cast<index_t>(i), static_cast<index_t>(j));
    }
    for (std::size_t i = 0; i < hidden; ++i) {
      cand += rh[i] * g.uh(static_cast<index_t>(i), static_cast<index_t>(j));
    }
    cand = std::tanh(cand);
    out[j] = (1.0 - zj) * h[j] + zj * cand;
  }
  return out;
}

}  // namespace

TEST_CASE("mlp_forward: zero tanh net maps everything to zero") {
  Tape t;
  nn::MlpViews mlp;
  mlp.weights = {t.leaf(mat_t::Zero(3, 4)), t.leaf(mat_t::Zero(4, 2))};
  mlp.biases = {t.leaf(mat_t::Zero(1, 4)), t.leaf(mat_t::Zero(1, 2))};
  mlp.activations = {nn::Activation::kTanh, nn::Activation::kTanh};
  Var y = nn::mlp_forward(t, mlp, t.leaf(mat_t::Random(1, 3)));
  CHECK(t.value(y).isZero());
}

TEST_CASE("mlp_forward: identity layer passes x through") {
  Tape t;
  nn::MlpViews mlp;
  mlp.weights = {t.leaf(mat_t::Identity(3, 3))};
  mlp.biases = {t.leaf(mat_t::Zero(1, 3))};
  mlp.activations = {nn::Activation::kNone};
  const mat_t x = (mat_t(1, 3) << 0.3, -1.2, 7.0).finished();
  Var y = nn::mlp_forward(t, mlp, t.leaf(x));
  CHECK(t.value(y) == x);
}

TEST_CASE("mlp_forward: 1->1 sigmoid net, w=2 b=1 at x=0") {
  Tape t;
  nn::MlpViews mlp;
  mlp.weights = {t.leaf(mat_t::Constant(1, 1, 2.0))};
  mlp.biases = {t.leaf(mat_t::Constant(1, 1, 1.0))};
  mlp.activations = {nn::Activation::kSigmoid};
  Var y = nn::mlp_forward(t, mlp, t.leaf(mat_t::Zero(1, 1)));
  const scalar_t expected = 1.0 / (1.0 + std::exp(-1.0));  // closed form
  CHECK(expected == doctest::Approx(0.731059).epsilon(1e-6));
  CHECK(t.value(y)(0, 0) == doctest::Approx(expected).epsilon(1e-15));
}

TEST_CASE("mlp_forward: width mismatch is a shape error") {
  Tape t;
  nn::MlpViews mlp;
  mlp.weights = {t.leaf(mat_t::Zero(3, 2))};
  mlp.biases = {t.leaf(mat_t::Zero(1, 2))};
  mlp.activations = {nn::Activation::kNone};
  CHECK_THROWS_AS(nn::mlp_forward(t, mlp, t.leaf(mat_t::Zero(1, 4))), Error);
}

TEST_CASE("mlp_forward with sigmoid output stays inside (0,1)") {
  std::mt19937 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    Tape t;
    nn::MlpViews mlp;
    mlp.weights = {t.leaf(random_mat(rng, 4, 8, 0.5)), t.leaf(random_mat(rng, 8, 2, 0.5))};
    mlp.biases = {t.leaf(random_mat(rng, 1, 8, 0.5)), t.leaf(random_mat(rng, 1, 2, 0.5))};
    mlp.activations = {nn::Activation::kRelu, nn::Activation::kSigmoid};
    Var y = nn::mlp_forward(t, mlp, t.leaf(random_mat(rng, 1, 4, 2.0)));
    const mat_t& v = t.value(y);
    CHECK(v.minCoeff() > 0.0);
    CHECK(v.maxCoeff() < 1.0);
  }
}

TEST_CASE("gru_step: all-zero parameters halve the hidden state") {
  Tape t;
  nn::GruViews gru = bind_gru(t, zero_gru(1, 1));
  Var h = nn::gru_step(t, gru, t.leaf(mat_t::Zero(1, 1)), t.leaf(mat_t::Ones(1, 1)));
  // z = sigmoid(0) = 0.5, hcand = tanh(0) = 0 -> h' = 0.5
  CHECK(t.value(h)(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("gru_step: closed update gate freezes the hidden state") {
  std::mt19937 rng(21);
  GruMats mats = random_gru(rng, 3, 4);
  mats.bz = mat_t::Constant(1, 4, -50.0);  // z ~ 2e-22
  const mat_t h_prev = random_mat(rng, 1, 4);

  Tape t;
  nn::GruViews gru = bind_gru(t, mats);
  Var h = nn::gru_step(t, gru, t.leaf(random_mat(rng, 1, 3)), t.leaf(h_prev));
  CHECK((t.value(h) - h_prev).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("gru_step matches the independent scalar oracle") {
  std::mt19937 rng(42);
  const GruMats mats = random_gru(rng, 2, 2);
  const std::vector<double> x = {0.3, -0.7};
  const std::vector<double> h = {0.9, -0.4};

  const std::vector<double> expected = gru_step_oracle(mats, x, h);

  Tape t;
  nn::GruViews gru = bind_gru(t, mats);
  Var out = nn::gru_step(t, gru, t.leaf((mat_t(1, 2) << x[0], x[1]).finished()),
                         t.leaf((mat_t(1, 2) << h[0], h[1]).finished()));
  for (index_t j = 0; j < 2; ++j) {
    CHECK(t.value(out)(0, j) == doctest::Approx(expected[static_cast<std::size_t>(j)])
                                    .epsilon(1e-14));
  }
}

TEST_CASE("gru_step passes grad_check on random small shapes") {
  std::mt19937 rng(33);
  const GruMats mats = random_gru(rng, 2, 3, 0.5);
  auto builder = [&](Tape& t, const std::vector<Var>& in) {
    nn::GruViews gru = bind_gru(t, mats);
    return nn::gru_step(t, gru, in[0], in[1]);
  };
  CHECK(ad::grad_check(builder, {random_mat(rng, 1, 2), random_mat(rng, 1, 3)}, 1e-5) < 1e-5);
}

TEST_CASE("mlp_forward passes grad_check on random small shapes") {
  std::mt19937 rng(55);
  const mat_t w0 = random_mat(rng, 3, 5, 0.7);
  const mat_t b0 = random_mat(rng, 1, 5, 0.3);
  const mat_t w1 = random_mat(rng, 5, 2, 0.7);
  const mat_t b1 = random_mat(rng, 1, 2, 0.3);
  auto builder = [&](Tape& t, const std::vector<Var>& in) {
    nn::MlpViews mlp;
    mlp.weights = {t.leaf(w0), t.leaf(w1)};
    mlp.biases = {t.leaf(b0), t.leaf(b1)};
    mlp.activations = {nn::Activation::kTanh, nn::Activation::kSigmoid};
    return nn::mlp_forward(t, mlp, in[0]);
  };
  CHECK(ad::grad_check(builder, {random_mat(rng, 1, 3)}, 1e-5) < 1e-5);
}

TEST_CASE("embed_lookup passes grad_check over the table") {
  std::mt19937 rng(56);
  auto builder = [](Tape& t, const std::vector<Var>& in) {
    return nn::embed_lookup(t, in[0], 2);
  };
  CHECK(ad::grad_check(builder, {random_mat(rng, 4, 3)}, 1e-5) < 1e-5);
}

TEST_CASE("gru_encode: length-1 sequence equals a single step") {
  std::mt19937 rng(5);
  const GruMats mats = random_gru(rng, 2, 3);
  const mat_t x = random_mat(rng, 1, 2);
  const mat_t h0 = random_mat(rng, 1, 3);

  Tape t;
  nn::GruViews gru = bind_gru(t, mats);
  Var folded = nn::gru_encode(t, gru, {t.leaf(x)}, t.leaf(h0));
  Var single = nn::gru_step(t, gru, t.leaf(x), t.leaf(h0));
  CHECK(t.value(folded) == t.value(single));
}

TEST_CASE("gru_encode: zero parameters halve h0 once per element") {
  Tape t;
  nn::GruViews gru = bind_gru(t, zero_gru(1, 1));
  std::vector<Var> seq = {t.leaf(mat_t::Zero(1, 1)), t.leaf(mat_t::Ones(1, 1)),
                          t.leaf(mat_t::Constant(1, 1, -0.5))};
  Var h = nn::gru_encode(t, gru, seq, t.leaf(mat_t::Ones(1, 1)));
  CHECK(t.value(h)(0, 0) == doctest::Approx(std::pow(0.5, 3)).epsilon(1e-15));
}

TEST_CASE("gru_encode: length-3 fold equals the manual unroll") {
  std::mt19937 rng(6);
  const GruMats mats = random_gru(rng, 2, 3);
  const std::vector<mat_t> xs = {random_mat(rng, 1, 2), random_mat(rng, 1, 2),
                                 random_mat(rng, 1, 2)};
  const mat_t h0 = random_mat(rng, 1, 3);

  Tape t;
  nn::GruViews gru = bind_gru(t, mats);
  Var folded =
      nn::gru_encode(t, gru, {t.leaf(xs[0]), t.leaf(xs[1]), t.leaf(xs[2])}, t.leaf(h0));
  Var h = t.leaf(h0);
  for (const mat_t& x : xs) h = nn::gru_step(t, gru, t.leaf(x), h);
  CHECK(t.value(folded) == t.value(h));
}

TEST_CASE("gru_encode rejects an empty sequence") {
  Tape t;
  nn::GruViews gru = bind_gru(t, zero_gru(1, 1));
  CHECK_THROWS_AS(nn::gru_encode(t, gru, {}, t.leaf(mat_t::Ones(1, 1))), Error);
}

TEST_CASE("embed_lookup returns the requested row") {
  Tape t;
  Var table = t.leaf(mat_t::Identity(5, 5));
  Var e3 = nn::embed_lookup(t, table, 3);
  CHECK(t.value(e3) == mat_t::Identity(5, 5).row(3));
  CHECK_THROWS_AS(nn::embed_lookup(t, table, 5), Error);
  CHECK_THROWS_AS(nn::embed_lookup(t, table, -1), Error);
}

TEST_CASE("embed_lookup gradient lands only in the selected row") {
  std::mt19937 rng(77);
  Tape t;
  const mat_t table = random_mat(rng, 4, 3);
  Var tv = t.leaf(table);
  Var e2 = nn::embed_lookup(t, tv, 2);
  const mat_t cot = random_mat(rng, 1, 3);
  ad::GradientMap g = t.vjp(e2, cot);
  const mat_t gt = *g.find(tv);
  CHECK(gt.row(2) == cot.row(0));
  CHECK(gt.topRows(2).isZero());
  CHECK(gt.row(3).isZero());
}

TEST_CASE("two lookups of the same row accumulate gradients") {
  Tape t;
  Var tv = t.leaf(mat_t::Zero(3, 2));
  Var sum = t.add(nn::embed_lookup(t, tv, 1), nn::embed_lookup(t, tv, 1));
  ad::GradientMap g = t.vjp(sum, mat_t::Ones(1, 2));
  const mat_t gt = *g.find(tv);
  CHECK(gt(1, 0) == 2.0);
  CHECK(gt(1, 1) == 2.0);
  CHECK(gt.row(0).isZero());
  CHECK(gt.row(2).isZero());
}

TEST_CASE("init_params: deterministic, bounded, seed-sensitive") {
  auto make_store = [] {
    ParamStore s;
    s.add_view("w", 100, 7, ViewRole::kWeight);  // fan_in = 100
    s.add_view("b", 1, 7, ViewRole::kBias);
    s.add_view("e", 5, 4, ViewRole::kEmbedding);
    return s;
  };

  ParamStore a = make_store();
  ParamStore b = make_store();
  init_params(a, 12345);
  init_params(b, 12345);
  CHECK(a.flat() == b.flat());

  ParamStore c = make_store();
  init_params(c, 12346);
  CHECK(a.flat() != c.flat());

  CHECK(a.read(0).cwiseAbs().maxCoeff() <= 0.1);  // 1/sqrt(100)
  CHECK(a.read(1).isZero());
  CHECK(a.read(2).cwiseAbs().maxCoeff() > 0.0);
}
