#include "panelode/train.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "panelode/error.hpp"

namespace panelode::train {

void TrainConfig::validate() const {
  if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0)) {
    fail(ErrorKind::kUsage, "train: betas must lie in (0,1)");
  }
  if (!(eps > 0.0)) fail(ErrorKind::kUsage, "train: eps must be > 0");
  if (epochs < 1) fail(ErrorKind::kUsage, "train: epochs must be >= 1");
  if (!(lr_max >= lr_min)) fail(ErrorKind::kUsage, "train: lr_max must be >= lr_min");
  if (weight_decay < 0.0) fail(ErrorKind::kUsage, "train: weight_decay must be >= 0");
}

AdamState::AdamState(std::int64_t n, const TrainConfig& cfg)
    : m(vec_t::Zero(n)), v(vec_t::Zero(n)), beta1(cfg.beta1), beta2(cfg.beta2), eps(cfg.eps) {}

scalar_t cosine_lr(const TrainConfig& cfg, long epoch) {
  if (epoch < 0 || epoch > cfg.epochs) {
    fail(ErrorKind::kUsage, "cosine_lr: epoch out of [0, epochs]");
  }
  const scalar_t phase =
      M_PI * static_cast<scalar_t>(epoch) / static_cast<scalar_t>(cfg.epochs);
  return cfg.lr_min + 0.5 * (cfg.lr_max - cfg.lr_min) * (1.0 + std::cos(phase));
}

void adam_step(AdamState& state, ParamStore& params, const vec_t& grads, scalar_t lr,
               scalar_t weight_decay, bool decoupled) {
  vec_t& p = params.flat();
  if (grads.size() != p.size() || state.m.size() != p.size()) {
    fail(ErrorKind::kShape, "adam_step: gradient length does not match parameters");
  }
  for (index_t i = 0; i < grads.size(); ++i) {
    if (!std::isfinite(grads[i])) {
      const int view = params.view_at_offset(i);
      fail(ErrorKind::kNotFinite,
           "adam_step: non-finite gradient in view '" +
               (view >= 0 ? params.view(view).name : std::string("?")) + "'");
    }
  }

  ++state.t;
  const vec_t g = decoupled ? grads : (grads + weight_decay * p).eval();
  state.m = state.beta1 * state.m + (1.0 - state.beta1) * g;
  state.v = state.beta2 * state.v + (1.0 - state.beta2) * g.cwiseProduct(g);

  const scalar_t bc1 = 1.0 - std::pow(state.beta1, static_cast<scalar_t>(state.t));
  const scalar_t bc2 = 1.0 - std::pow(state.beta2, static_cast<scalar_t>(state.t));
  const vec_t m_hat = state.m / bc1;
  const vec_t v_hat = state.v / bc2;

  if (decoupled) {
    p -= lr * weight_decay * p;
  }
  p -= lr * (m_hat.array() / (v_hat.array().sqrt() + state.eps)).matrix();
}

TrainLog fit(model::PovertyModel& model, const data::IndicatorPanel& panel,
             const TrainConfig& cfg, const ode::SolverConfig& solver) {
  cfg.validate();
  solver.validate();
  panel.validate();

  AdamState state(model.params().size(), cfg);
  TrainLog log;
  log.records.reserve(static_cast<std::size_t>(cfg.epochs));

  using clock = std::chrono::steady_clock;
  for (long epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto start = clock::now();
    model::LossGrads lg = model.loss_and_gradients(panel, solver);
    if (!std::isfinite(lg.loss) || lg.loss > 1e3) {
      fail(ErrorKind::kSolver,
           "fit: diverged at epoch " + std::to_string(epoch + 1) + " with loss " +
               std::to_string(lg.loss));
    }
    const scalar_t lr = cosine_lr(cfg, epoch);
    adam_step(state, model.params(), lg.grad, lr, cfg.weight_decay, cfg.decoupled_weight_decay);
    const auto stop = clock::now();
    const long wall_ms =
        std::chrono::duration_cast<std::chrono::milliseconds>(stop - start).count();
    log.records.push_back({epoch + 1, lg.loss, lr, wall_ms});
  }
  return log;
}

void TrainLog::write_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::kIo, "cannot open for writing: " + path);
  out << "epoch,loss,lr,wall_ms\n";
  char buf[96];
  for (const EpochRecord& r : records) {
    std::snprintf(buf, sizeof(buf), "%ld,%.17g,%.17g,%ld\n", r.epoch, r.loss, r.lr, r.wall_ms);
    out << buf;
  }
  if (!out) fail(ErrorKind::kIo, "short write: " + path);
}

}  // namespace panelode::train
