#pragma once

#include <functional>
#include <vector>

#include "panelode/types.hpp"

namespace panelode::ode {

/// Pure dynamics callback; the output must have the shape of z.
using DynamicsFn = std::function<vec_t(scalar_t t, const vec_t& z)>;

enum class Method { kEuler, kDopri5 };

struct SolverConfig {
  Method method = Method::kDopri5;
  scalar_t rtol = 1e-3;
  scalar_t atol = 1e-4;
  scalar_t initial_step = 0.0;  // magnitude; 0 selects 1e-2 * |t1 - t0|
  long max_steps = 100000;      // bounds accepted + rejected attempts
  scalar_t safety = 0.9;
  long euler_steps = 100;       // fixed-step count per segment in kEuler mode

  void validate() const;
};

struct SolverStats {
  long n_accepted = 0;
  long n_rejected = 0;
  long n_fevals = 0;

  SolverStats& operator+=(const SolverStats& o);
};

/// states[i] is the solution at times[i]. Every state is an exact solver
/// endpoint; there is no dense-output interpolation.
struct Solution {
  std::vector<scalar_t> times;
  std::vector<vec_t> states;
  SolverStats stats;
};

/// Fixed-step forward Euler over [t0, t1] (t1 < t0 allowed). Returns the full
/// grid of n_steps + 1 states, including z0.
Solution euler_solve(const DynamicsFn& f, const vec_t& z0, scalar_t t0, scalar_t t1,
                     long n_steps);

struct StepResult {
  vec_t z_next;  // 5th-order solution
  vec_t error;   // elementwise difference to the embedded 4th-order solution
  vec_t f_last;  // stage 7 = f(t + h, z_next), reusable as the next step's k1
};

/// One 7-stage Dormand-Prince step. `f0` optionally supplies f(t, z) so the
/// first-same-as-last stage of the previous step is reused.
StepResult dopri5_step(const DynamicsFn& f, scalar_t t, const vec_t& z, scalar_t h,
                       const vec_t* f0 = nullptr);

/// Adaptive integration to t1; the returned Solution holds the final state
/// only. A step is accepted when the RMS of the componentwise scaled error
/// is at most 1; the next step is h * safety * err^(-1/5), clipped to
/// [0.2 h, 5 h].
Solution dopri5_solve(const DynamicsFn& f, const vec_t& z0, scalar_t t0, scalar_t t1,
                      const SolverConfig& config);

/// Integrates segment by segment through `times` (sorted ascending,
/// times[0] >= t0), restarting at every query time so each output is an
/// exact endpoint. Dispatches on config.method.
Solution solve_at(const DynamicsFn& f, const vec_t& z0, scalar_t t0,
                  const std::vector<scalar_t>& times, const SolverConfig& config);

}  // namespace panelode::ode
