#include "panelode/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "panelode/adjoint.hpp"
#include "panelode/data.hpp"
#include "panelode/error.hpp"
#include "panelode/model.hpp"
#include "panelode/nn.hpp"
#include "panelode/odeint.hpp"

namespace panelode::gradcheck {
namespace {

scalar_t rel_err(scalar_t a, scalar_t b) {
  return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

scalar_t max_rel_err(const vec_t& a, const vec_t& b) {
  scalar_t worst = 0.0;
  for (index_t i = 0; i < a.size(); ++i) worst = std::max(worst, rel_err(a[i], b[i]));
  return worst;
}

ode::SolverConfig tight_solver() {
  ode::SolverConfig cfg;
  cfg.rtol = 1e-9;
  cfg.atol = 1e-11;
  return cfg;
}

mat_t random_mat(std::mt19937_64& rng, index_t r, index_t c, scalar_t scale) {
  std::uniform_real_distribution<scalar_t> dist(-scale, scale);
  mat_t m(r, c);
  for (index_t i = 0; i < r; ++i) {
    for (index_t j = 0; j < c; ++j) m(i, j) = dist(rng);
  }
  return m;
}

/// Random one-hidden-layer tanh MLP as taped dynamics (state dim 3, hidden 8).
adjoint::TapedDynamics random_mlp_dynamics(std::mt19937_64& rng) {
  adjoint::TapedDynamics dyn;
  dyn.dim = 3;
  dyn.theta = {random_mat(rng, 3, 8, 0.6), random_mat(rng, 1, 8, 0.2),
               random_mat(rng, 8, 3, 0.6), random_mat(rng, 1, 3, 0.2)};
  dyn.build = [](ad::Tape& tape, scalar_t, ad::Var z, const std::vector<ad::Var>& theta) {
    ad::Var h = tape.tanh(tape.add(tape.matmul(z, theta[0]), theta[1]));
    return tape.add(tape.matmul(h, theta[2]), theta[3]);
  };
  return dyn;
}

void check_closed_form(Report& report) {
  adjoint::TapedDynamics dyn;
  dyn.dim = 1;
  dyn.theta = {mat_t::Constant(1, 1, 0.5)};
  dyn.build = [](ad::Tape& tape, scalar_t, ad::Var z, const std::vector<ad::Var>& theta) {
    return tape.mul(z, theta[0]);
  };

  const ode::SolverConfig cfg = tight_solver();
  vec_t z0 = vec_t::Ones(1);
  const vec_t z1 = ode::dopri5_solve(dyn.as_dynamics_fn(), z0, 0.0, 1.0, cfg).states.back();
  adjoint::GradResult gr = adjoint::adjoint_backward(dyn, z1, vec_t::Ones(1), 1.0, 0.0, cfg);

  report.closed_form_value = gr.dtheta_flat[0];
  report.closed_form_expected = std::exp(0.5);
  report.closed_form_rel_err =
      std::abs(gr.dtheta_flat[0] - report.closed_form_expected) / report.closed_form_expected;
}

void check_adjoint_vs_bptt(Report& report, std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ 0xadb0c5u);
  adjoint::TapedDynamics dyn = random_mlp_dynamics(rng);

  std::uniform_real_distribution<scalar_t> dist(-1.0, 1.0);
  vec_t z0(3), cot(3);
  for (index_t i = 0; i < 3; ++i) {
    z0[i] = dist(rng);
    cot[i] = dist(rng);
  }

  const long n_steps = 200;
  adjoint::GradResult bptt = adjoint::bptt_gradients(dyn, z0, 0.0, 1.0, n_steps, cot);

  const vec_t z1 = ode::euler_solve(dyn.as_dynamics_fn(), z0, 0.0, 1.0, n_steps).states.back();
  ode::SolverConfig cfg;
  cfg.method = ode::Method::kEuler;
  cfg.euler_steps = n_steps;
  adjoint::GradResult adj = adjoint::adjoint_backward(dyn, z1, cot, 1.0, 0.0, cfg);

  report.adjoint_vs_bptt = std::max(max_rel_err(adj.dtheta_flat, bptt.dtheta_flat),
                                    max_rel_err(adj.dz0, bptt.dz0));
}

void check_model_fd(Report& report, std::uint64_t seed, bool sabotage_sign) {
  model::PovertyModel model(model::ModelConfig::tiny());
  model.init(seed);
  const data::IndicatorPanel panel = data::synth_panel(model.config().n_districts, seed);
  const ode::SolverConfig cfg = tight_solver();

  model::LossGrads analytic = model.loss_and_gradients(panel, cfg);
  if (sabotage_sign) {
    // flip the gradients that came through the backward ODE
    for (int v = 0; v < model.params().view_count(); ++v) {
      const ViewInfo& info = model.params().view(v);
      if (info.name.rfind("dyn.", 0) == 0) {
        analytic.grad.segment(info.offset, info.rows * info.cols) *= -1.0;
      }
    }
  }

  const scalar_t eps = 1e-5;
  vec_t fd(model.params().size());
  vec_t& flat = model.params().flat();
  for (index_t i = 0; i < flat.size(); ++i) {
    const scalar_t saved = flat[i];
    flat[i] = saved + eps;
    const scalar_t up = model.batch_loss(panel, cfg).loss;
    flat[i] = saved - eps;
    const scalar_t down = model.batch_loss(panel, cfg).loss;
    flat[i] = saved;
    fd[i] = (up - down) / (2.0 * eps);
  }

  auto group_of = [](const std::string& name) -> std::string {
    if (name.rfind("enc.", 0) == 0) return "encoder";
    if (name.rfind("dyn.", 0) == 0) return "dynamics";
    if (name.rfind("dec.", 0) == 0) return "decoder";
    return "embeddings";
  };

  report.fd_groups = {{"encoder", 0.0}, {"dynamics", 0.0}, {"decoder", 0.0}, {"embeddings", 0.0}};
  for (int v = 0; v < model.params().view_count(); ++v) {
    const ViewInfo& info = model.params().view(v);
    const std::string group = group_of(info.name);
    for (index_t k = info.offset; k < info.offset + info.rows * info.cols; ++k) {
      const scalar_t err = rel_err(analytic.grad[k], fd[k]);
      for (GroupError& ge : report.fd_groups) {
        if (ge.group == group) ge.max_rel_err = std::max(ge.max_rel_err, err);
      }
    }
  }
}

}  // namespace

bool Report::pass(scalar_t threshold) const {
  if (closed_form_rel_err > threshold || adjoint_vs_bptt > threshold) return false;
  for (const GroupError& g : fd_groups) {
    if (g.max_rel_err > threshold) return false;
  }
  return true;
}

std::string Report::to_text() const {
  char buf[160];
  std::string out;
  std::snprintf(buf, sizeof(buf),
                "closed form dz/dt = theta*z: dL/dtheta = %.6f (expected %.6f, rel err %.3e)\n",
                closed_form_value, closed_form_expected, closed_form_rel_err);
  out += buf;
  std::snprintf(buf, sizeof(buf), "backward ode vs unrolled euler backprop: max rel err %.3e\n",
                adjoint_vs_bptt);
  out += buf;
  for (const GroupError& g : fd_groups) {
    std::snprintf(buf, sizeof(buf), "finite differences, %-10s: max rel err %.3e\n",
                  g.group.c_str(), g.max_rel_err);
    out += buf;
  }
  return out;
}

Report run(std::uint64_t seed, bool sabotage_sign) {
  Report report;
  check_closed_form(report);
  check_adjoint_vs_bptt(report, seed);
  check_model_fd(report, seed, sabotage_sign);
  return report;
}

}  // namespace panelode::gradcheck
