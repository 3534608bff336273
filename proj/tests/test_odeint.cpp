#include <doctest.h>

#include <cmath>

#include "panelode/error.hpp"
#include "panelode/odeint.hpp"

using namespace panelode;
using ode::DynamicsFn;
using ode::Method;
using ode::Solution;
using ode::SolverConfig;

namespace {

vec_t scalar_state(scalar_t v) { return vec_t::Constant(1, v); }

const DynamicsFn kZero = [](scalar_t, const vec_t& z) { return vec_t::Zero(z.size()).eval(); };
const DynamicsFn kIdentityGrowth = [](scalar_t, const vec_t& z) { return z; };
const DynamicsFn kDecay = [](scalar_t, const vec_t& z) { return (-z).eval(); };

}  // namespace

TEST_CASE("euler_solve: constant dynamics keep the state") {
  const vec_t z0 = (vec_t(2) << 3.5, -1.25).finished();
  Solution sol = ode::euler_solve(kZero, z0, 0.0, 2.0, 17);
  CHECK(sol.states.back() == z0);
  CHECK(sol.stats.n_fevals == 17);
}

TEST_CASE("euler_solve: dz/dt = 1 integrates exactly") {
  const DynamicsFn one = [](scalar_t, const vec_t&) { return vec_t::Ones(1).eval(); };
  Solution sol4 = ode::euler_solve(one, vec_t::Zero(1), 0.0, 1.0, 4);
  CHECK(sol4.states.back()[0] == 1.0);  // exact: h is a power of two
  Solution sol1000 = ode::euler_solve(one, vec_t::Zero(1), 0.0, 1.0, 1000);
  CHECK(sol1000.states.back()[0] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("euler_solve: dz/dt = z over [0,1] equals the compound product") {
  const long n = 1000;
  // closed-form oracle: (1 + 1/n)^n
  const scalar_t oracle = std::pow(1.0 + 1.0 / static_cast<scalar_t>(n), n);
  CHECK(oracle == doctest::Approx(2.716924).epsilon(1e-6));  // frozen
  Solution sol = ode::euler_solve(kIdentityGrowth, scalar_state(1.0), 0.0, 1.0, n);
  CHECK(sol.states.back()[0] == doctest::Approx(oracle).epsilon(1e-12));
}

TEST_CASE("euler_solve supports backward time") {
  // dz/dt = z backward from 1: z(0) = product of (1 - 1/n)
  const long n = 500;
  Solution sol = ode::euler_solve(kIdentityGrowth, scalar_state(1.0), 1.0, 0.0, n);
  const scalar_t oracle = std::pow(1.0 - 1.0 / static_cast<scalar_t>(n), n);
  CHECK(sol.states.back()[0] == doctest::Approx(oracle).epsilon(1e-12));
}

TEST_CASE("euler_solve: global error is Theta(1/n)") {
  auto err = [](long n) {
    Solution sol = ode::euler_solve(kIdentityGrowth, scalar_state(1.0), 0.0, 1.0, n);
    return std::abs(sol.states.back()[0] - std::exp(1.0));
  };
  const scalar_t ratio = err(1000) / err(2000);
  CHECK(ratio > 1.8);
  CHECK(ratio < 2.2);
}

TEST_CASE("euler_solve rejects bad step counts and non-finite states") {
  CHECK_THROWS_AS(ode::euler_solve(kZero, scalar_state(1.0), 0.0, 1.0, 0), Error);
  const DynamicsFn blow_up = [](scalar_t, const vec_t& z) { return (z * 1e300).eval(); };
  CHECK_THROWS_AS(ode::euler_solve(blow_up, scalar_state(1e300), 0.0, 1.0, 3), Error);
}

TEST_CASE("dopri5_step: zero dynamics give a zero error estimate") {
  ode::StepResult r = ode::dopri5_step(kZero, 0.0, scalar_state(4.0), 0.5);
  CHECK(r.z_next[0] == 4.0);
  CHECK(r.error.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("dopri5_step on dz/dt = z matches the degree-5 Taylor truncation") {
  const scalar_t h = 0.1;
  ode::StepResult r = ode::dopri5_step(kIdentityGrowth, 0.0, scalar_state(1.0), h);
  // symbolic oracle: sum_{k=0..5} h^k / k!
  scalar_t taylor5 = 0.0, term = 1.0;
  for (int k = 0; k <= 5; ++k) {
    taylor5 += term;
    term *= h / static_cast<scalar_t>(k + 1);
  }
  const scalar_t gap = std::abs(r.z_next[0] - taylor5);
  CHECK(gap < std::pow(h, 6.0));  // O(h^6) residual
  CHECK(gap < 1e-8);
  CHECK(std::abs(r.z_next[0] - std::exp(h)) < 1e-9);
}

TEST_CASE("dopri5_step: error estimate vanishes on dz/dt = t") {
  const DynamicsFn ramp = [](scalar_t t, const vec_t& z) {
    return vec_t::Constant(z.size(), t).eval();
  };
  ode::StepResult r = ode::dopri5_step(ramp, 0.3, scalar_state(0.2), 0.4);
  CHECK(r.error.cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("dopri5_step: halving the step shrinks the error estimate ~2^5") {
  auto estimate = [](scalar_t h) {
    return std::abs(ode::dopri5_step(kIdentityGrowth, 0.0, scalar_state(1.0), h).error[0]);
  };
  const scalar_t ratio = estimate(0.1) / estimate(0.05);
  CHECK(ratio > 24.0);
  CHECK(ratio < 40.0);
}

TEST_CASE("dopri5_solve: exponential decay within 1e-3 relative at default tolerances") {
  SolverConfig cfg;  // rtol 1e-3, atol 1e-4
  Solution sol = ode::dopri5_solve(kDecay, scalar_state(1.0), 0.0, 1.0, cfg);
  const scalar_t expected = std::exp(-1.0);
  CHECK(std::abs(sol.states.back()[0] - expected) / expected < 1e-3);
  CHECK(sol.stats.n_fevals == 6 * (sol.stats.n_accepted + sol.stats.n_rejected) + 1);
  CHECK(sol.stats.n_fevals <= 7 * (sol.stats.n_accepted + sol.stats.n_rejected) + 1);
}

TEST_CASE("dopri5_solve: harmonic oscillator returns home after one period") {
  const DynamicsFn osc = [](scalar_t, const vec_t& z) {
    return (vec_t(2) << z[1], -z[0]).finished();
  };
  const vec_t z0 = (vec_t(2) << 1.0, 0.0).finished();
  SolverConfig cfg;
  Solution sol = ode::dopri5_solve(osc, z0, 0.0, 2.0 * M_PI, cfg);
  const vec_t& zf = sol.states.back();
  CHECK(std::abs(zf.norm() - 1.0) < 1e-3);  // radius drift
  CHECK(std::abs(zf[0] - 1.0) < 5e-3);
  CHECK(std::abs(zf[1]) < 5e-3);
}

TEST_CASE("dopri5_solve: empty interval returns z0 with zero steps") {
  SolverConfig cfg;
  Solution sol = ode::dopri5_solve(kIdentityGrowth, scalar_state(3.0), 0.7, 0.7, cfg);
  CHECK(sol.states.back()[0] == 3.0);
  CHECK(sol.stats.n_accepted == 0);
  CHECK(sol.stats.n_fevals == 0);
}

TEST_CASE("dopri5_solve: tightening rtol never hurts on exponential decay") {
  scalar_t prev_err = std::numeric_limits<scalar_t>::infinity();
  for (scalar_t rtol : {1e-3, 1e-4, 1e-5, 1e-6, 1e-7}) {
    SolverConfig cfg;
    cfg.rtol = rtol;
    cfg.atol = rtol * 0.1;
    Solution sol = ode::dopri5_solve(kDecay, scalar_state(1.0), 0.0, 1.0, cfg);
    const scalar_t err = std::abs(sol.states.back()[0] - std::exp(-1.0));
    CHECK(err <= prev_err);
    prev_err = err;
  }
}

TEST_CASE("dopri5_solve: backward then forward returns to the start") {
  const DynamicsFn linear = [](scalar_t, const vec_t& z) {
    return (vec_t(2) << -0.3 * z[0] + z[1], -z[0] - 0.3 * z[1]).finished();
  };
  const vec_t z0 = (vec_t(2) << 0.8, -0.5).finished();
  SolverConfig cfg;
  Solution fwd = ode::dopri5_solve(linear, z0, 0.0, 1.0, cfg);
  Solution back = ode::dopri5_solve(linear, fwd.states.back(), 1.0, 0.0, cfg);
  const scalar_t bound = 10.0 * (cfg.atol + cfg.rtol * z0.norm());
  CHECK((back.states.back() - z0).norm() < bound);
}

TEST_CASE("dopri5_solve: max_steps and blow-ups raise solver errors") {
  SolverConfig cfg;
  cfg.max_steps = 3;
  CHECK_THROWS_AS(ode::dopri5_solve(kDecay, vec_t::Constant(1, 1.0), 0.0, 100.0, cfg), Error);

  const DynamicsFn pole = [](scalar_t t, const vec_t& z) {
    return vec_t::Constant(z.size(), 1.0 / (1.0 - t)).eval();
  };
  SolverConfig cfg2;
  cfg2.max_steps = 100000;
  CHECK_THROWS_AS(ode::dopri5_solve(pole, scalar_state(0.0), 0.0, 2.0, cfg2), Error);
}

TEST_CASE("dopri5_solve validates its config") {
  SolverConfig cfg;
  cfg.rtol = 0.0;
  CHECK_THROWS_AS(ode::dopri5_solve(kZero, scalar_state(0.0), 0.0, 1.0, cfg), Error);
  cfg = SolverConfig{};
  cfg.safety = 1.0;
  CHECK_THROWS_AS(ode::dopri5_solve(kZero, scalar_state(0.0), 0.0, 1.0, cfg), Error);
}

TEST_CASE("solve_at: querying t0 returns z0 unchanged") {
  SolverConfig cfg;
  Solution sol = ode::solve_at(kIdentityGrowth, scalar_state(2.0), 0.5, {0.5}, cfg);
  CHECK(sol.states.size() == 1);
  CHECK(sol.states[0][0] == 2.0);
  CHECK(sol.stats.n_fevals == 0);
}

TEST_CASE("solve_at: exponential growth hits e^t at each query time") {
  SolverConfig cfg;
  Solution sol = ode::solve_at(kIdentityGrowth, scalar_state(1.0), 0.0, {0.0, 0.5, 1.0}, cfg);
  REQUIRE(sol.states.size() == 3);
  CHECK(sol.states[0][0] == 1.0);
  CHECK(std::abs(sol.states[1][0] - std::exp(0.5)) / std::exp(0.5) < cfg.rtol);
  CHECK(std::abs(sol.states[2][0] - std::exp(1.0)) / std::exp(1.0) < cfg.rtol);
}

TEST_CASE("solve_at: segmented integration agrees with a single shot") {
  SolverConfig cfg;
  Solution segmented =
      ode::solve_at(kIdentityGrowth, scalar_state(1.0), 0.0, {0.25, 0.5, 0.75, 1.0}, cfg);
  Solution single = ode::dopri5_solve(kIdentityGrowth, scalar_state(1.0), 0.0, 1.0, cfg);
  const scalar_t tol = 2.0 * (cfg.atol + cfg.rtol * std::exp(1.0));
  CHECK(std::abs(segmented.states.back()[0] - single.states.back()[0]) < tol);
}

TEST_CASE("solve_at rejects unsorted or early query times") {
  SolverConfig cfg;
  CHECK_THROWS_AS(ode::solve_at(kZero, scalar_state(0.0), 0.0, {0.5, 0.25}, cfg), Error);
  CHECK_THROWS_AS(ode::solve_at(kZero, scalar_state(0.0), 0.0, {-0.5}, cfg), Error);
  CHECK_THROWS_AS(ode::solve_at(kZero, scalar_state(0.0), 0.0, {}, cfg), Error);
}

TEST_CASE("solve_at in euler mode uses the configured step count per segment") {
  SolverConfig cfg;
  cfg.method = Method::kEuler;
  cfg.euler_steps = 100;
  Solution sol = ode::solve_at(kIdentityGrowth, scalar_state(1.0), 0.0, {0.5, 1.0}, cfg);
  CHECK(sol.stats.n_fevals == 200);
  const scalar_t oracle =
      std::pow(1.0 + 0.5 / 100.0, 100) * std::pow(1.0 + 0.5 / 100.0, 100);
  CHECK(sol.states.back()[0] == doctest::Approx(oracle).epsilon(1e-12));
}

TEST_CASE("dynamics returning the wrong shape is a shape error") {
  const DynamicsFn bad = [](scalar_t, const vec_t&) { return vec_t::Zero(3).eval(); };
  SolverConfig cfg;
  CHECK_THROWS_AS(ode::dopri5_solve(bad, scalar_state(1.0), 0.0, 1.0, cfg), Error);
}
