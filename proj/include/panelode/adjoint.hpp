#pragma once

#include <functional>
#include <vector>

#include "panelode/odeint.hpp"
#include "panelode/tape.hpp"
#include "panelode/types.hpp"

namespace panelode::adjoint {

/// Dynamics assembled from tape primitives so that one taped forward plus
/// one vjp call yields both a . df/dz and a . df/dtheta per evaluation.
///
/// `build` receives the state as a (1 x dim) row leaf and one leaf per theta
/// view; theta entries are borrowed, never copied, for the lifetime of one
/// evaluation tape.
struct TapedDynamics {
  std::function<ad::Var(ad::Tape&, scalar_t t, ad::Var z, const std::vector<ad::Var>& theta)>
      build;
  std::vector<mat_t> theta;
  index_t dim = 0;

  index_t theta_size() const;

  /// Plain value evaluation through a scratch tape (same code path as the
  /// differentiated one).
  vec_t eval(scalar_t t, const vec_t& z) const;
  ode::DynamicsFn as_dynamics_fn() const;
};

struct GradResult {
  std::vector<mat_t> dtheta;  // one tensor per theta view, same shapes
  vec_t dtheta_flat;          // row-major concatenation of dtheta
  vec_t dz0;
  ode::SolverStats stats;
};

/// Gradients through the solver via the augmented state [z; a; g] integrated
/// from t1 down to t0; a(t1) is the supplied loss cotangent and g(t1) = 0.
/// Returns g(t0) as dL/dtheta and a(t0) as dL/dz0. Memory stays constant in
/// the number of steps: each evaluation's tape is dropped immediately.
///
/// kDopri5 integrates the continuous augmented system adaptively. kEuler
/// walks the exact discrete adjoint of the forward Euler grid (euler_steps
/// steps), reconstructing states backward by fixed-point reversal, so it
/// matches bptt_gradients on the same grid to solver reversal tolerance.
GradResult adjoint_backward(const TapedDynamics& f, const vec_t& z_t1, const vec_t& a_t1,
                            scalar_t t1, scalar_t t0, const ode::SolverConfig& config);

/// Reference path: unrolls forward Euler on one tape and backpropagates
/// through every step. Memory grows linearly with n_steps; step counts above
/// kBpttStepCap are refused rather than exhausting the tape.
inline constexpr long kBpttStepCap = 1000000;

GradResult bptt_gradients(const TapedDynamics& f, const vec_t& z0, scalar_t t0, scalar_t t1,
                          long n_steps, const vec_t& loss_cotangent);

/// Seed of the backward pass for the MSE objective: 2 (pred - target) / n.
mat_t loss_output_cotangent(const mat_t& pred, const mat_t& target, long n_total);

}  // namespace panelode::adjoint
