#include "panelode/adjoint.hpp"

#include <cmath>
#include <string>
#include <utility>

#include "panelode/error.hpp"

namespace panelode::adjoint {
namespace {

mat_t as_row(const vec_t& v) {
  mat_t row(1, v.size());
  row.row(0) = v.transpose();
  return row;
}

vec_t as_vec(const mat_t& row) {
  return row.reshaped().eval();
}

struct TapedEval {
  vec_t f_value;
  vec_t a_df_dz;             // cotangent . df/dz, length dim
  std::vector<mat_t> a_df_dtheta;  // per theta view
};

/// One taped forward of f plus one vjp with cotangent `a`.
TapedEval eval_with_vjp(const TapedDynamics& f, scalar_t t, const vec_t& z, const vec_t& a) {
  ad::Tape tape;
  tape.reserve(24 + 4 * f.theta.size());
  ad::Var zv = tape.leaf(as_row(z));
  std::vector<ad::Var> theta_vars;
  theta_vars.reserve(f.theta.size());
  for (const mat_t& th : f.theta) {
    theta_vars.push_back(tape.borrowed_leaf(&th));
  }
  ad::Var out = f.build(tape, t, zv, theta_vars);
  const mat_t& out_val = tape.value(out);
  if (out_val.rows() != 1 || out_val.cols() != f.dim) {
    fail(ErrorKind::kShape, "taped dynamics produced shape " + std::to_string(out_val.rows()) +
                                "x" + std::to_string(out_val.cols()) + ", expected 1x" +
                                std::to_string(f.dim));
  }

  TapedEval r;
  r.f_value = as_vec(out_val);
  ad::GradientMap grads = tape.vjp(out, as_row(a));
  r.a_df_dz = as_vec(grads.at_or_zero(zv, 1, f.dim));
  r.a_df_dtheta.reserve(f.theta.size());
  for (std::size_t i = 0; i < f.theta.size(); ++i) {
    r.a_df_dtheta.push_back(
        grads.at_or_zero(theta_vars[i], f.theta[i].rows(), f.theta[i].cols()));
  }
  return r;
}

vec_t flatten_views(const std::vector<mat_t>& views, index_t total) {
  vec_t flat(total);
  index_t at = 0;
  for (const mat_t& v : views) {
    for (index_t r = 0; r < v.rows(); ++r) {
      for (index_t c = 0; c < v.cols(); ++c) flat[at++] = v(r, c);
    }
  }
  return flat;
}

std::vector<mat_t> unflatten_views(const vec_t& flat, const std::vector<mat_t>& like) {
  std::vector<mat_t> views;
  views.reserve(like.size());
  index_t at = 0;
  for (const mat_t& shape : like) {
    mat_t v(shape.rows(), shape.cols());
    for (index_t r = 0; r < v.rows(); ++r) {
      for (index_t c = 0; c < v.cols(); ++c) v(r, c) = flat[at++];
    }
    views.push_back(std::move(v));
  }
  return views;
}

GradResult continuous_adjoint(const TapedDynamics& f, const vec_t& z_t1, const vec_t& a_t1,
                              scalar_t t1, scalar_t t0, const ode::SolverConfig& config) {
  const index_t dim = f.dim;
  const index_t n_theta = f.theta_size();

  // S = [z; a; g]
  vec_t s0(2 * dim + n_theta);
  s0.head(dim) = z_t1;
  s0.segment(dim, dim) = a_t1;
  s0.tail(n_theta).setZero();

  auto aug_rhs = [&](scalar_t t, const vec_t& s) {
    const vec_t z = s.head(dim);
    const vec_t a = s.segment(dim, dim);
    TapedEval e = eval_with_vjp(f, t, z, a);
    vec_t ds(s.size());
    ds.head(dim) = e.f_value;
    ds.segment(dim, dim) = -e.a_df_dz;
    ds.tail(n_theta) = -flatten_views(e.a_df_dtheta, n_theta);
    return ds;
  };

  ode::Solution sol = ode::dopri5_solve(aug_rhs, s0, t1, t0, config);
  const vec_t& s_end = sol.states.back();

  GradResult r;
  r.dz0 = s_end.segment(dim, dim);
  r.dtheta_flat = s_end.tail(n_theta);
  r.dtheta = unflatten_views(r.dtheta_flat, f.theta);
  r.stats = sol.stats;
  return r;
}

/// Exact discrete adjoint of the forward Euler grid. States are recovered
/// in reverse by fixed-point iteration on z_{k+1} = z_k + h f(t_k, z_k).
GradResult discrete_euler_adjoint(const TapedDynamics& f, const vec_t& z_t1, const vec_t& a_t1,
                                  scalar_t t1, scalar_t t0, const ode::SolverConfig& config) {
  const long n = config.euler_steps;
  const scalar_t h = (t1 - t0) / static_cast<scalar_t>(n);
  const index_t n_theta = f.theta_size();

  GradResult r;
  r.dz0 = a_t1;
  r.dtheta_flat = vec_t::Zero(n_theta);
  r.stats.n_accepted = n;

  vec_t z = z_t1;
  for (long k = n - 1; k >= 0; --k) {
    const scalar_t t_k = t0 + h * static_cast<scalar_t>(k);

    vec_t z_prev = z - h * f.eval(t_k, z);
    ++r.stats.n_fevals;
    for (int iter = 0; iter < 100; ++iter) {
      vec_t next = z - h * f.eval(t_k, z_prev);
      ++r.stats.n_fevals;
      const scalar_t delta = (next - z_prev).norm();
      z_prev = std::move(next);
      if (delta <= 1e-14 * (1.0 + z_prev.norm())) break;
      if (iter == 99) {
        fail(ErrorKind::kSolver,
             "euler step reversal did not converge at step " + std::to_string(k));
      }
    }

    TapedEval e = eval_with_vjp(f, t_k, z_prev, r.dz0);
    ++r.stats.n_fevals;
    r.dtheta_flat += h * flatten_views(e.a_df_dtheta, n_theta);
    r.dz0 += h * e.a_df_dz;
    z = std::move(z_prev);

    if (!r.dz0.allFinite() || !r.dtheta_flat.allFinite()) {
      fail(ErrorKind::kNotFinite, "non-finite adjoint at step " + std::to_string(k));
    }
  }

  r.dtheta = unflatten_views(r.dtheta_flat, f.theta);
  return r;
}

}  // namespace

index_t TapedDynamics::theta_size() const {
  index_t total = 0;
  for (const mat_t& v : theta) total += v.size();
  return total;
}

vec_t TapedDynamics::eval(scalar_t t, const vec_t& z) const {
  ad::Tape tape;
  tape.reserve(24 + 4 * theta.size());
  ad::Var zv = tape.leaf(as_row(z));
  std::vector<ad::Var> theta_vars;
  theta_vars.reserve(theta.size());
  for (const mat_t& th : theta) theta_vars.push_back(tape.borrowed_leaf(&th));
  ad::Var out = build(tape, t, zv, theta_vars);
  return as_vec(tape.value(out));
}

ode::DynamicsFn TapedDynamics::as_dynamics_fn() const {
  return [this](scalar_t t, const vec_t& z) { return eval(t, z); };
}

GradResult adjoint_backward(const TapedDynamics& f, const vec_t& z_t1, const vec_t& a_t1,
                            scalar_t t1, scalar_t t0, const ode::SolverConfig& config) {
  if (a_t1.size() != z_t1.size() || z_t1.size() != f.dim) {
    fail(ErrorKind::kShape, "adjoint_backward: cotangent length " + std::to_string(a_t1.size()) +
                                " does not match state length " + std::to_string(z_t1.size()));
  }
  try {
    if (t1 == t0) {
      GradResult r;
      r.dz0 = a_t1;
      r.dtheta_flat = vec_t::Zero(f.theta_size());
      r.dtheta = unflatten_views(r.dtheta_flat, f.theta);
      return r;
    }
    return config.method == ode::Method::kEuler
               ? discrete_euler_adjoint(f, z_t1, a_t1, t1, t0, config)
               : continuous_adjoint(f, z_t1, a_t1, t1, t0, config);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kSolver) {
      // tag the phase; strip the category token the inner what() starts with
      std::string inner = e.what();
      const std::string prefix = std::string(to_string(ErrorKind::kSolver)) + ": ";
      if (inner.rfind(prefix, 0) == 0) inner = inner.substr(prefix.size());
      fail(ErrorKind::kSolver, "backward: " + inner);
    }
    throw;
  }
}

GradResult bptt_gradients(const TapedDynamics& f, const vec_t& z0, scalar_t t0, scalar_t t1,
                          long n_steps, const vec_t& loss_cotangent) {
  if (n_steps < 1) fail(ErrorKind::kUsage, "bptt_gradients: n_steps must be >= 1");
  if (n_steps > kBpttStepCap) {
    fail(ErrorKind::kSolver, "bptt_gradients: " + std::to_string(n_steps) +
                                 " steps would exhaust the tape (cap " +
                                 std::to_string(kBpttStepCap) + ")");
  }
  if (loss_cotangent.size() != f.dim) {
    fail(ErrorKind::kShape, "bptt_gradients: cotangent length mismatch");
  }
  const scalar_t h = (t1 - t0) / static_cast<scalar_t>(n_steps);

  ad::Tape tape;
  tape.reserve(static_cast<std::size_t>(n_steps) * 24 + 8);
  std::vector<ad::Var> theta_vars;
  theta_vars.reserve(f.theta.size());
  for (const mat_t& th : f.theta) theta_vars.push_back(tape.borrowed_leaf(&th));

  ad::Var z0v = tape.leaf(as_row(z0));
  ad::Var z = z0v;
  for (long k = 0; k < n_steps; ++k) {
    const scalar_t t_k = t0 + h * static_cast<scalar_t>(k);
    ad::Var fz = f.build(tape, t_k, z, theta_vars);
    z = tape.add(z, tape.scale(fz, h));
  }

  ad::GradientMap grads = tape.vjp(z, as_row(loss_cotangent));

  GradResult r;
  r.dz0 = as_vec(grads.at_or_zero(z0v, 1, f.dim));
  r.dtheta.reserve(f.theta.size());
  for (std::size_t i = 0; i < f.theta.size(); ++i) {
    r.dtheta.push_back(grads.at_or_zero(theta_vars[i], f.theta[i].rows(), f.theta[i].cols()));
  }
  r.dtheta_flat = flatten_views(r.dtheta, f.theta_size());
  r.stats.n_accepted = n_steps;
  r.stats.n_fevals = n_steps;
  return r;
}

mat_t loss_output_cotangent(const mat_t& pred, const mat_t& target, long n_total) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols()) {
    fail(ErrorKind::kShape, "loss_output_cotangent: shape mismatch");
  }
  if (n_total < 1) fail(ErrorKind::kUsage, "loss_output_cotangent: n_total must be >= 1");
  return 2.0 * (pred - target) / static_cast<scalar_t>(n_total);
}

}  // namespace panelode::adjoint
