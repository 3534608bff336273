#include "panelode/odeint.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "panelode/error.hpp"

namespace panelode::ode {
namespace {

// Dormand-Prince 5(4) tableau.
constexpr scalar_t kC[7] = {0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0};
constexpr scalar_t kA2[] = {1.0 / 5.0};
constexpr scalar_t kA3[] = {3.0 / 40.0, 9.0 / 40.0};
constexpr scalar_t kA4[] = {44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0};
constexpr scalar_t kA5[] = {19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0,
                            -212.0 / 729.0};
constexpr scalar_t kA6[] = {9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0,
                            -5103.0 / 18656.0};
// 5th-order weights; also row 7 of the tableau (FSAL).
constexpr scalar_t kB5[] = {35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0,
                            -2187.0 / 6784.0, 11.0 / 84.0, 0.0};
constexpr scalar_t kB4[] = {5179.0 / 57600.0, 0.0,           7571.0 / 16695.0, 393.0 / 640.0,
                            -92097.0 / 339200.0, 187.0 / 2100.0, 1.0 / 40.0};

vec_t eval_dynamics(const DynamicsFn& f, scalar_t t, const vec_t& z, const char* phase) {
  vec_t out = f(t, z);
  if (out.size() != z.size()) {
    fail(ErrorKind::kShape, std::string(phase) + ": dynamics returned length " +
                                std::to_string(out.size()) + " for state length " +
                                std::to_string(z.size()));
  }
  return out;
}

scalar_t error_norm(const vec_t& err, const vec_t& z, const vec_t& z_next, scalar_t rtol,
                    scalar_t atol) {
  scalar_t acc = 0.0;
  for (index_t i = 0; i < err.size(); ++i) {
    const scalar_t scale = atol + rtol * std::max(std::abs(z[i]), std::abs(z_next[i]));
    const scalar_t r = err[i] / scale;
    acc += r * r;
  }
  return std::sqrt(acc / static_cast<scalar_t>(err.size()));
}

}  // namespace

void SolverConfig::validate() const {
  if (!(rtol > 0.0) || !(atol > 0.0)) fail(ErrorKind::kUsage, "solver: rtol and atol must be > 0");
  if (!(safety > 0.0 && safety < 1.0)) fail(ErrorKind::kUsage, "solver: safety must be in (0,1)");
  if (max_steps < 1) fail(ErrorKind::kUsage, "solver: max_steps must be >= 1");
  if (euler_steps < 1) fail(ErrorKind::kUsage, "solver: euler_steps must be >= 1");
}

SolverStats& SolverStats::operator+=(const SolverStats& o) {
  n_accepted += o.n_accepted;
  n_rejected += o.n_rejected;
  n_fevals += o.n_fevals;
  return *this;
}

Solution euler_solve(const DynamicsFn& f, const vec_t& z0, scalar_t t0, scalar_t t1,
                     long n_steps) {
  if (n_steps < 1) fail(ErrorKind::kUsage, "euler_solve: n_steps must be >= 1");
  const scalar_t h = (t1 - t0) / static_cast<scalar_t>(n_steps);

  Solution sol;
  sol.times.reserve(static_cast<std::size_t>(n_steps) + 1);
  sol.states.reserve(static_cast<std::size_t>(n_steps) + 1);
  sol.times.push_back(t0);
  sol.states.push_back(z0);

  vec_t z = z0;
  for (long k = 0; k < n_steps; ++k) {
    const scalar_t t = t0 + h * static_cast<scalar_t>(k);
    z += h * eval_dynamics(f, t, z, "euler_solve");
    ++sol.stats.n_fevals;
    if (!z.allFinite()) {
      fail(ErrorKind::kNotFinite, "euler_solve: non-finite state at step " + std::to_string(k));
    }
    ++sol.stats.n_accepted;
    sol.times.push_back(k + 1 == n_steps ? t1 : t0 + h * static_cast<scalar_t>(k + 1));
    sol.states.push_back(z);
  }
  return sol;
}

StepResult dopri5_step(const DynamicsFn& f, scalar_t t, const vec_t& z, scalar_t h,
                       const vec_t* f0) {
  if (h == 0.0) fail(ErrorKind::kUsage, "dopri5_step: h must be nonzero");

  vec_t k[7];
  k[0] = f0 ? *f0 : eval_dynamics(f, t, z, "dopri5_step");
  k[1] = eval_dynamics(f, t + kC[1] * h, z + h * (kA2[0] * k[0]), "dopri5_step");
  k[2] = eval_dynamics(f, t + kC[2] * h, z + h * (kA3[0] * k[0] + kA3[1] * k[1]), "dopri5_step");
  k[3] = eval_dynamics(f, t + kC[3] * h,
                       z + h * (kA4[0] * k[0] + kA4[1] * k[1] + kA4[2] * k[2]), "dopri5_step");
  k[4] = eval_dynamics(
      f, t + kC[4] * h,
      z + h * (kA5[0] * k[0] + kA5[1] * k[1] + kA5[2] * k[2] + kA5[3] * k[3]), "dopri5_step");
  k[5] = eval_dynamics(f, t + kC[5] * h,
                       z + h * (kA6[0] * k[0] + kA6[1] * k[1] + kA6[2] * k[2] + kA6[3] * k[3] +
                                kA6[4] * k[4]),
                       "dopri5_step");

  StepResult r;
  r.z_next = z + h * (kB5[0] * k[0] + kB5[2] * k[2] + kB5[3] * k[3] + kB5[4] * k[4] +
                      kB5[5] * k[5]);
  k[6] = eval_dynamics(f, t + h, r.z_next, "dopri5_step");
  r.f_last = k[6];

  r.error = h * ((kB5[0] - kB4[0]) * k[0] + (kB5[2] - kB4[2]) * k[2] +
                 (kB5[3] - kB4[3]) * k[3] + (kB5[4] - kB4[4]) * k[4] +
                 (kB5[5] - kB4[5]) * k[5] + (kB5[6] - kB4[6]) * k[6]);

  for (const vec_t& stage : k) {
    if (!stage.allFinite()) fail(ErrorKind::kNotFinite, "dopri5_step: non-finite stage");
  }
  return r;
}

Solution dopri5_solve(const DynamicsFn& f, const vec_t& z0, scalar_t t0, scalar_t t1,
                      const SolverConfig& config) {
  config.validate();

  Solution sol;
  if (t1 == t0) {
    sol.times = {t1};
    sol.states = {z0};
    return sol;
  }

  const scalar_t dir = t1 > t0 ? 1.0 : -1.0;
  const scalar_t span = std::abs(t1 - t0);
  scalar_t h = (config.initial_step > 0.0 ? config.initial_step : 1e-2 * span) * dir;

  scalar_t t = t0;
  vec_t z = z0;
  vec_t k1 = eval_dynamics(f, t, z, "dopri5_solve");
  sol.stats.n_fevals = 1;

  while ((t1 - t) * dir > 0.0) {
    if (sol.stats.n_accepted + sol.stats.n_rejected >= config.max_steps) {
      fail(ErrorKind::kSolver, "dopri5_solve: max_steps exceeded at t=" + std::to_string(t));
    }
    if (std::abs(h) < 1e-14 * span) {
      fail(ErrorKind::kSolver, "dopri5_solve: step underflow at t=" + std::to_string(t));
    }
    if ((t + h - t1) * dir > 0.0) {
      h = t1 - t;  // do not overshoot; k1 is unaffected
    }

    StepResult step = dopri5_step(f, t, z, h, &k1);
    sol.stats.n_fevals += 6;
    const scalar_t err = error_norm(step.error, z, step.z_next, config.rtol, config.atol);

    if (err <= 1.0) {
      t = (t + h - t1) * dir >= 0.0 ? t1 : t + h;
      z = std::move(step.z_next);
      k1 = std::move(step.f_last);
      ++sol.stats.n_accepted;
    } else {
      ++sol.stats.n_rejected;
    }

    const scalar_t factor =
        err == 0.0 ? 5.0 : std::clamp(config.safety * std::pow(err, -0.2), 0.2, 5.0);
    h *= factor;
  }

  sol.times = {t1};
  sol.states = {std::move(z)};
  return sol;
}

Solution solve_at(const DynamicsFn& f, const vec_t& z0, scalar_t t0,
                  const std::vector<scalar_t>& times, const SolverConfig& config) {
  config.validate();
  if (times.empty()) fail(ErrorKind::kUsage, "solve_at: empty query list");
  if (times.front() < t0) {
    fail(ErrorKind::kUsage, "solve_at: first query time precedes t0");
  }
  for (std::size_t i = 1; i < times.size(); ++i) {
    if (times[i] < times[i - 1]) fail(ErrorKind::kUsage, "solve_at: unsorted times");
  }

  Solution sol;
  sol.times = times;
  sol.states.reserve(times.size());

  scalar_t t = t0;
  vec_t z = z0;
  for (scalar_t tq : times) {
    if (tq != t) {
      Solution seg = config.method == Method::kEuler
                         ? euler_solve(f, z, t, tq, config.euler_steps)
                         : dopri5_solve(f, z, t, tq, config);
      z = seg.states.back();
      t = tq;
      sol.stats += seg.stats;
    }
    sol.states.push_back(z);
  }
  return sol;
}

}  // namespace panelode::ode
