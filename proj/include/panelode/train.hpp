#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "panelode/data.hpp"
#include "panelode/model.hpp"
#include "panelode/odeint.hpp"
#include "panelode/params.hpp"
#include "panelode/types.hpp"

namespace panelode::train {

struct TrainConfig {
  scalar_t lr_max = 1e-3;
  scalar_t lr_min = 0.0;
  scalar_t weight_decay = 1e-5;
  long epochs = 1000;
  scalar_t beta1 = 0.9;
  scalar_t beta2 = 0.999;
  scalar_t eps = 1e-8;
  std::uint64_t seed = 0;
  bool decoupled_weight_decay = false;

  void validate() const;
};

struct AdamState {
  vec_t m;
  vec_t v;
  long t = 0;
  scalar_t beta1 = 0.9;
  scalar_t beta2 = 0.999;
  scalar_t eps = 1e-8;

  AdamState(std::int64_t n, const TrainConfig& cfg);
};

struct EpochRecord {
  long epoch;  // 1-based
  scalar_t loss;
  scalar_t lr;
  long wall_ms;
};

struct TrainLog {
  std::vector<EpochRecord> records;

  /// CSV columns: epoch,loss,lr,wall_ms
  void write_csv(const std::string& path) const;
};

/// lr_min + 0.5 (lr_max - lr_min) (1 + cos(pi epoch / epochs)).
scalar_t cosine_lr(const TrainConfig& cfg, long epoch);

/// One Adam update on the flat parameter vector. Weight decay is coupled L2
/// added to the gradient unless cfg asked for the decoupled variant.
void adam_step(AdamState& state, ParamStore& params, const vec_t& grads, scalar_t lr,
               scalar_t weight_decay, bool decoupled);

/// Full-batch training: loss + gradients, then Adam with the cosine schedule,
/// for cfg.epochs epochs. Deterministic given the seed. Aborts when the loss
/// exceeds 1e3 or turns non-finite.
TrainLog fit(model::PovertyModel& model, const data::IndicatorPanel& panel,
             const TrainConfig& cfg, const ode::SolverConfig& solver);

}  // namespace panelode::train
