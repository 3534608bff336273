#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "panelode/adjoint.hpp"
#include "panelode/data.hpp"
#include "panelode/odeint.hpp"
#include "panelode/params.hpp"
#include "panelode/tape.hpp"
#include "panelode/types.hpp"

namespace panelode::model {

struct ModelConfig {
  index_t n_districts = 30;
  index_t n_indicators = 6;
  index_t embed_dim = 16;
  index_t latent_dim = 8;
  index_t encoder_hidden = 64;
  std::vector<index_t> dynamics_hidden = {64, 64};  // tanh between layers
  std::vector<index_t> decoder_hidden = {64, 64};   // relu between layers, sigmoid output
  bool reverse_encoder = false;  // feed the observed sequence last-to-first
  bool readout_bias = true;
  bool time_in_dynamics = false;  // append t to the dynamics input

  void validate() const;
  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);

  /// Shrunken setup used by the gradient self-check.
  static ModelConfig tiny();
};

struct BatchLoss {
  scalar_t loss = 0.0;
  long n_points = 0;
  std::vector<mat_t> residuals;    // per district, masked cells zero
  std::vector<mat_t> predictions;  // per district, (n_times x n_indicators)
  ode::SolverStats stats;
};

struct LossGrads {
  scalar_t loss = 0.0;
  long n_points = 0;
  vec_t grad;  // flat, aligned with the parameter store layout
  ode::SolverStats stats;
};

/// Encoder -> latent ODE -> decoder with per-district embeddings. All
/// parameters live in one flat store; forward passes borrow materialized
/// views, so concurrent evaluation against frozen parameters is safe.
class PovertyModel {
 public:
  explicit PovertyModel(ModelConfig cfg);

  void init(std::uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  /// Closed-form parameter count; asserted against the store at construction.
  std::int64_t param_count() const;

  /// GRU over [x(t_j); e_d] rows (masked cells already zeroed), then a linear
  /// readout to the latent dimension.
  vec_t encode(const mat_t& series, index_t district) const;

  /// dz/dt at z for the given district.
  vec_t dynamics(const vec_t& z, index_t district) const;

  /// Indicator reconstruction from a latent state; every component in (0,1).
  vec_t decode(const vec_t& z, index_t district) const;

  /// encode -> integrate from t=0 -> decode at each query time. The solve
  /// restarts at every anchor time as well, so queries that coincide with
  /// anchors reproduce anchored reconstructions bit-exactly.
  mat_t trajectory(index_t district, const mat_t& series,
                   const std::vector<scalar_t>& query_times,
                   const std::vector<scalar_t>& anchor_times,
                   const ode::SolverConfig& solver) const;

  /// Mean squared error over unmasked cells at the panel's observation times.
  BatchLoss batch_loss(const data::IndicatorPanel& panel, const ode::SolverConfig& solver) const;

  /// Full gradient: encoder, decoder and embeddings by tape backprop; the
  /// dynamics parameters (plus the embedding's trajectory contribution) by
  /// the backward augmented ODE, segment by segment through the observation
  /// times.
  LossGrads loss_and_gradients(const data::IndicatorPanel& panel,
                               const ode::SolverConfig& solver) const;

  /// District embedding matrix (n_districts x embed_dim).
  mat_t embedding_matrix() const;

  void save(const std::string& path) const;
  static PovertyModel load(const std::string& path);

 private:
  struct Layout {
    int gru_w_z, gru_u_z, gru_b_z;
    int gru_w_r, gru_u_r, gru_b_r;
    int gru_w_h, gru_u_h, gru_b_h;
    int readout_w;
    int readout_b;  // -1 when disabled
    std::vector<int> dyn_w, dyn_b;
    std::vector<int> dec_w, dec_b;
    int embed;
  };

  index_t encoder_input_dim() const;
  index_t dynamics_input_dim() const;
  std::vector<index_t> dynamics_dims() const;  // incl. input and output
  std::vector<index_t> decoder_dims() const;

  struct Bound {
    std::vector<std::pair<int, ad::Var>> views;  // (store view, tape leaf)
    ad::Var at(int view) const;
  };

  Bound bind(ad::Tape& tape, const std::vector<mat_t>& cache,
             const std::vector<int>& view_ids) const;
  std::vector<int> encoder_view_ids() const;
  std::vector<int> decoder_view_ids() const;

  ad::Var encode_on_tape(ad::Tape& tape, const Bound& bound, const mat_t& series,
                         index_t district) const;
  ad::Var decode_on_tape(ad::Tape& tape, const Bound& bound, ad::Var z_row,
                         index_t district) const;
  adjoint::TapedDynamics make_dynamics(const std::vector<mat_t>& cache, index_t district) const;

  struct ForwardDistrict {
    vec_t z0;
    std::vector<vec_t> latents;
    mat_t predictions;
    ode::SolverStats stats;
  };
  ForwardDistrict forward_district(const std::vector<mat_t>& cache, index_t district,
                                   const mat_t& series, const std::vector<scalar_t>& times,
                                   const ode::SolverConfig& solver) const;

  void scatter_tape_grads(const Bound& bound, const ad::GradientMap& grads, vec_t& out) const;

  ModelConfig cfg_;
  ParamStore params_;
  Layout layout_;
};

}  // namespace panelode::model
