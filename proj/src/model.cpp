#include "panelode/model.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include <nlohmann/json.hpp>

#include "panelode/error.hpp"
#include "panelode/nn.hpp"

namespace panelode::model {
namespace {

mat_t as_row(const vec_t& v) {
  mat_t row(1, v.size());
  row.row(0) = v.transpose();
  return row;
}

vec_t as_vec(const mat_t& row) { return row.reshaped().eval(); }

std::vector<index_t> to_dims(const nlohmann::json& j) {
  return j.get<std::vector<index_t>>();
}

}  // namespace

void ModelConfig::validate() const {
  const bool ok = n_districts > 0 && n_indicators > 0 && embed_dim > 0 && latent_dim > 0 &&
                  encoder_hidden > 0 &&
                  std::all_of(dynamics_hidden.begin(), dynamics_hidden.end(),
                              [](index_t h) { return h > 0; }) &&
                  std::all_of(decoder_hidden.begin(), decoder_hidden.end(),
                              [](index_t h) { return h > 0; });
  if (!ok) fail(ErrorKind::kUsage, "model config: all dimensions must be positive");
}

nlohmann::json ModelConfig::to_json() const {
  return {{"n_districts", n_districts},
          {"n_indicators", n_indicators},
          {"embed_dim", embed_dim},
          {"latent_dim", latent_dim},
          {"encoder_hidden", encoder_hidden},
          {"dynamics_hidden", dynamics_hidden},
          {"decoder_hidden", decoder_hidden},
          {"reverse_encoder", reverse_encoder},
          {"readout_bias", readout_bias},
          {"time_in_dynamics", time_in_dynamics}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  ModelConfig cfg;
  cfg.n_districts = j.value("n_districts", cfg.n_districts);
  cfg.n_indicators = j.value("n_indicators", cfg.n_indicators);
  cfg.embed_dim = j.value("embed_dim", cfg.embed_dim);
  cfg.latent_dim = j.value("latent_dim", cfg.latent_dim);
  cfg.encoder_hidden = j.value("encoder_hidden", cfg.encoder_hidden);
  if (j.contains("dynamics_hidden")) cfg.dynamics_hidden = to_dims(j.at("dynamics_hidden"));
  if (j.contains("decoder_hidden")) cfg.decoder_hidden = to_dims(j.at("decoder_hidden"));
  cfg.reverse_encoder = j.value("reverse_encoder", cfg.reverse_encoder);
  cfg.readout_bias = j.value("readout_bias", cfg.readout_bias);
  cfg.time_in_dynamics = j.value("time_in_dynamics", cfg.time_in_dynamics);
  cfg.validate();
  return cfg;
}

ModelConfig ModelConfig::tiny() {
  ModelConfig cfg;
  cfg.n_districts = 2;
  cfg.embed_dim = 4;
  cfg.latent_dim = 3;
  cfg.encoder_hidden = 8;
  cfg.dynamics_hidden = {8};
  cfg.decoder_hidden = {8};
  return cfg;
}

index_t PovertyModel::encoder_input_dim() const { return cfg_.n_indicators + cfg_.embed_dim; }

index_t PovertyModel::dynamics_input_dim() const {
  return cfg_.latent_dim + cfg_.embed_dim + (cfg_.time_in_dynamics ? 1 : 0);
}

std::vector<index_t> PovertyModel::dynamics_dims() const {
  std::vector<index_t> dims = {dynamics_input_dim()};
  dims.insert(dims.end(), cfg_.dynamics_hidden.begin(), cfg_.dynamics_hidden.end());
  dims.push_back(cfg_.latent_dim);
  return dims;
}

std::vector<index_t> PovertyModel::decoder_dims() const {
  std::vector<index_t> dims = {cfg_.latent_dim + cfg_.embed_dim};
  dims.insert(dims.end(), cfg_.decoder_hidden.begin(), cfg_.decoder_hidden.end());
  dims.push_back(cfg_.n_indicators);
  return dims;
}

PovertyModel::PovertyModel(ModelConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  const index_t in = encoder_input_dim();
  const index_t h = cfg_.encoder_hidden;

  auto add_w = [&](std::string name, index_t r, index_t c) {
    return params_.add_view(std::move(name), r, c, ViewRole::kWeight);
  };
  auto add_b = [&](std::string name, index_t c) {
    return params_.add_view(std::move(name), 1, c, ViewRole::kBias);
  };

  layout_.gru_w_z = add_w("enc.gru.w_z", in, h);
  layout_.gru_u_z = add_w("enc.gru.u_z", h, h);
  layout_.gru_b_z = add_b("enc.gru.b_z", h);
  layout_.gru_w_r = add_w("enc.gru.w_r", in, h);
  layout_.gru_u_r = add_w("enc.gru.u_r", h, h);
  layout_.gru_b_r = add_b("enc.gru.b_r", h);
  layout_.gru_w_h = add_w("enc.gru.w_h", in, h);
  layout_.gru_u_h = add_w("enc.gru.u_h", h, h);
  layout_.gru_b_h = add_b("enc.gru.b_h", h);
  layout_.readout_w = add_w("enc.readout.w", h, cfg_.latent_dim);
  layout_.readout_b = cfg_.readout_bias ? add_b("enc.readout.b", cfg_.latent_dim) : -1;

  const std::vector<index_t> dyn = dynamics_dims();
  for (std::size_t k = 0; k + 1 < dyn.size(); ++k) {
    layout_.dyn_w.push_back(add_w("dyn.w" + std::to_string(k), dyn[k], dyn[k + 1]));
    layout_.dyn_b.push_back(add_b("dyn.b" + std::to_string(k), dyn[k + 1]));
  }
  const std::vector<index_t> dec = decoder_dims();
  for (std::size_t k = 0; k + 1 < dec.size(); ++k) {
    layout_.dec_w.push_back(add_w("dec.w" + std::to_string(k), dec[k], dec[k + 1]));
    layout_.dec_b.push_back(add_b("dec.b" + std::to_string(k), dec[k + 1]));
  }
  layout_.embed =
      params_.add_view("embed.table", cfg_.n_districts, cfg_.embed_dim, ViewRole::kEmbedding);

  if (params_.size() != param_count()) {
    fail(ErrorKind::kUsage, "model: parameter layout disagrees with the closed-form count");
  }
}

void PovertyModel::init(std::uint64_t seed) { init_params(params_, seed); }

std::int64_t PovertyModel::param_count() const {
  const std::int64_t in = encoder_input_dim();
  const std::int64_t h = cfg_.encoder_hidden;
  std::int64_t total = 3 * (in * h + h * h + h);
  total += h * cfg_.latent_dim + (cfg_.readout_bias ? cfg_.latent_dim : 0);
  auto mlp_count = [](const std::vector<index_t>& dims) {
    std::int64_t n = 0;
    for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
      n += static_cast<std::int64_t>(dims[k]) * dims[k + 1] + dims[k + 1];
    }
    return n;
  };
  total += mlp_count(dynamics_dims());
  total += mlp_count(decoder_dims());
  total += static_cast<std::int64_t>(cfg_.n_districts) * cfg_.embed_dim;
  return total;
}

ad::Var PovertyModel::Bound::at(int view) const {
  for (const auto& [v, var] : views) {
    if (v == view) return var;
  }
  fail(ErrorKind::kUsage, "model: view is not bound on this tape");
}

PovertyModel::Bound PovertyModel::bind(ad::Tape& tape, const std::vector<mat_t>& cache,
                                       const std::vector<int>& view_ids) const {
  Bound bound;
  bound.views.reserve(view_ids.size());
  for (int v : view_ids) {
    bound.views.emplace_back(v, tape.borrowed_leaf(&cache[static_cast<std::size_t>(v)]));
  }
  return bound;
}

std::vector<int> PovertyModel::encoder_view_ids() const {
  std::vector<int> ids = {layout_.gru_w_z, layout_.gru_u_z, layout_.gru_b_z,
                          layout_.gru_w_r, layout_.gru_u_r, layout_.gru_b_r,
                          layout_.gru_w_h, layout_.gru_u_h, layout_.gru_b_h,
                          layout_.readout_w};
  if (layout_.readout_b >= 0) ids.push_back(layout_.readout_b);
  ids.push_back(layout_.embed);
  return ids;
}

std::vector<int> PovertyModel::decoder_view_ids() const {
  std::vector<int> ids;
  for (std::size_t k = 0; k < layout_.dec_w.size(); ++k) {
    ids.push_back(layout_.dec_w[k]);
    ids.push_back(layout_.dec_b[k]);
  }
  ids.push_back(layout_.embed);
  return ids;
}

ad::Var PovertyModel::encode_on_tape(ad::Tape& tape, const Bound& bound, const mat_t& series,
                                     index_t district) const {
  if (series.rows() < 1 || series.cols() != cfg_.n_indicators) {
    fail(ErrorKind::kShape, "encode: series must be (T x " + std::to_string(cfg_.n_indicators) +
                                ") with T >= 1");
  }
  nn::GruViews gru{bound.at(layout_.gru_w_z), bound.at(layout_.gru_u_z),
                   bound.at(layout_.gru_b_z), bound.at(layout_.gru_w_r),
                   bound.at(layout_.gru_u_r), bound.at(layout_.gru_b_r),
                   bound.at(layout_.gru_w_h), bound.at(layout_.gru_u_h),
                   bound.at(layout_.gru_b_h)};
  ad::Var e = nn::embed_lookup(tape, bound.at(layout_.embed), district);

  std::vector<ad::Var> inputs;
  inputs.reserve(static_cast<std::size_t>(series.rows()));
  for (index_t t = 0; t < series.rows(); ++t) {
    const index_t row = cfg_.reverse_encoder ? series.rows() - 1 - t : t;
    inputs.push_back(tape.concat(tape.leaf(series.row(row)), e));
  }
  ad::Var h0 = tape.leaf(mat_t::Zero(1, cfg_.encoder_hidden));
  ad::Var h = nn::gru_encode(tape, gru, inputs, h0);
  ad::Var z0 = tape.matmul(h, bound.at(layout_.readout_w));
  if (layout_.readout_b >= 0) z0 = tape.add(z0, bound.at(layout_.readout_b));
  return z0;
}

ad::Var PovertyModel::decode_on_tape(ad::Tape& tape, const Bound& bound, ad::Var z_row,
                                     index_t district) const {
  ad::Var e = nn::embed_lookup(tape, bound.at(layout_.embed), district);
  ad::Var x = tape.concat(z_row, e);
  nn::MlpViews mlp;
  for (std::size_t k = 0; k < layout_.dec_w.size(); ++k) {
    mlp.weights.push_back(bound.at(layout_.dec_w[k]));
    mlp.biases.push_back(bound.at(layout_.dec_b[k]));
    mlp.activations.push_back(k + 1 < layout_.dec_w.size() ? nn::Activation::kRelu
                                                           : nn::Activation::kSigmoid);
  }
  return nn::mlp_forward(tape, mlp, x);
}

adjoint::TapedDynamics PovertyModel::make_dynamics(const std::vector<mat_t>& cache,
                                                   index_t district) const {
  if (district < 0 || district >= cfg_.n_districts) {
    fail(ErrorKind::kUsage, "dynamics: district index out of range");
  }
  adjoint::TapedDynamics dyn;
  dyn.dim = cfg_.latent_dim;
  // theta order: [w0, b0, w1, b1, ..., e_d]; the trailing embedding row makes
  // the trajectory's contribution to the district embedding flow through the
  // backward ODE like any other dynamics parameter.
  for (std::size_t k = 0; k < layout_.dyn_w.size(); ++k) {
    dyn.theta.push_back(cache[static_cast<std::size_t>(layout_.dyn_w[k])]);
    dyn.theta.push_back(cache[static_cast<std::size_t>(layout_.dyn_b[k])]);
  }
  dyn.theta.push_back(
      cache[static_cast<std::size_t>(layout_.embed)].row(district));

  const std::size_t n_layers = layout_.dyn_w.size();
  const bool with_time = cfg_.time_in_dynamics;
  dyn.build = [n_layers, with_time](ad::Tape& tape, scalar_t t, ad::Var z,
                                    const std::vector<ad::Var>& theta) {
    ad::Var x = tape.concat(z, theta.back());
    if (with_time) {
      x = tape.concat(x, tape.leaf(mat_t::Constant(1, 1, t)));
    }
    nn::MlpViews mlp;
    for (std::size_t k = 0; k < n_layers; ++k) {
      mlp.weights.push_back(theta[2 * k]);
      mlp.biases.push_back(theta[2 * k + 1]);
      mlp.activations.push_back(k + 1 < n_layers ? nn::Activation::kTanh
                                                 : nn::Activation::kNone);
    }
    return nn::mlp_forward(tape, mlp, x);
  };
  return dyn;
}

vec_t PovertyModel::encode(const mat_t& series, index_t district) const {
  const std::vector<mat_t> cache = params_.materialize();
  ad::Tape tape;
  Bound bound = bind(tape, cache, encoder_view_ids());
  return as_vec(tape.value(encode_on_tape(tape, bound, series, district)));
}

vec_t PovertyModel::dynamics(const vec_t& z, index_t district) const {
  if (z.size() != cfg_.latent_dim) fail(ErrorKind::kShape, "dynamics: latent length mismatch");
  const std::vector<mat_t> cache = params_.materialize();
  return make_dynamics(cache, district).eval(0.0, z);
}

vec_t PovertyModel::decode(const vec_t& z, index_t district) const {
  if (z.size() != cfg_.latent_dim) fail(ErrorKind::kShape, "decode: latent length mismatch");
  const std::vector<mat_t> cache = params_.materialize();
  ad::Tape tape;
  Bound bound = bind(tape, cache, decoder_view_ids());
  ad::Var z_row = tape.leaf(as_row(z));
  return as_vec(tape.value(decode_on_tape(tape, bound, z_row, district)));
}

mat_t PovertyModel::trajectory(index_t district, const mat_t& series,
                               const std::vector<scalar_t>& query_times,
                               const std::vector<scalar_t>& anchor_times,
                               const ode::SolverConfig& solver) const {
  if (query_times.empty()) fail(ErrorKind::kUsage, "trajectory: no query times");
  for (std::size_t i = 1; i < query_times.size(); ++i) {
    if (query_times[i] < query_times[i - 1]) {
      fail(ErrorKind::kUsage, "trajectory: query times must be sorted");
    }
  }
  if (query_times.front() < 0.0) {
    fail(ErrorKind::kUsage, "trajectory: query time precedes the time origin");
  }

  std::vector<scalar_t> merged = anchor_times;
  merged.insert(merged.end(), query_times.begin(), query_times.end());
  std::sort(merged.begin(), merged.end());
  merged.erase(std::unique(merged.begin(), merged.end()), merged.end());

  const std::vector<mat_t> cache = params_.materialize();
  vec_t z0;
  {
    ad::Tape tape;
    Bound bound = bind(tape, cache, encoder_view_ids());
    z0 = as_vec(tape.value(encode_on_tape(tape, bound, series, district)));
  }
  adjoint::TapedDynamics dyn = make_dynamics(cache, district);
  ode::Solution sol = ode::solve_at(dyn.as_dynamics_fn(), z0, 0.0, merged, solver);

  mat_t out(static_cast<index_t>(query_times.size()), cfg_.n_indicators);
  ad::Tape tape;
  Bound bound = bind(tape, cache, decoder_view_ids());
  for (std::size_t q = 0; q < query_times.size(); ++q) {
    const auto it = std::lower_bound(merged.begin(), merged.end(), query_times[q]);
    const std::size_t at = static_cast<std::size_t>(it - merged.begin());
    ad::Var z_row = tape.leaf(as_row(sol.states[at]));
    out.row(static_cast<index_t>(q)) =
        tape.value(decode_on_tape(tape, bound, z_row, district)).row(0);
  }
  return out;
}

PovertyModel::ForwardDistrict PovertyModel::forward_district(
    const std::vector<mat_t>& cache, index_t district, const mat_t& series,
    const std::vector<scalar_t>& times, const ode::SolverConfig& solver) const {
  ForwardDistrict fwd;
  {
    ad::Tape tape;
    Bound bound = bind(tape, cache, encoder_view_ids());
    fwd.z0 = as_vec(tape.value(encode_on_tape(tape, bound, series, district)));
  }
  adjoint::TapedDynamics dyn = make_dynamics(cache, district);
  ode::Solution sol = ode::solve_at(dyn.as_dynamics_fn(), fwd.z0, 0.0, times, solver);
  fwd.stats = sol.stats;
  fwd.latents = std::move(sol.states);

  fwd.predictions.resize(static_cast<index_t>(times.size()), cfg_.n_indicators);
  ad::Tape tape;
  Bound bound = bind(tape, cache, decoder_view_ids());
  for (std::size_t j = 0; j < fwd.latents.size(); ++j) {
    ad::Var z_row = tape.leaf(as_row(fwd.latents[j]));
    fwd.predictions.row(static_cast<index_t>(j)) =
        tape.value(decode_on_tape(tape, bound, z_row, district)).row(0);
  }
  return fwd;
}

BatchLoss PovertyModel::batch_loss(const data::IndicatorPanel& panel,
                                   const ode::SolverConfig& solver) const {
  panel.validate();
  if (panel.n_districts() != cfg_.n_districts || panel.n_indicators() != cfg_.n_indicators) {
    fail(ErrorKind::kShape, "batch_loss: panel axes do not match the model config");
  }
  BatchLoss out;
  out.n_points = panel.unmasked_count();
  if (out.n_points == 0) fail(ErrorKind::kData, "batch_loss: no unmasked observations");

  const std::vector<mat_t> cache = params_.materialize();
  const std::vector<scalar_t> times = panel.normalized_times();

  scalar_t sum_sq = 0.0;
  for (index_t d = 0; d < panel.n_districts(); ++d) {
    ForwardDistrict fwd = forward_district(cache, d, panel.masked_series(d), times, solver);
    out.stats += fwd.stats;
    const mask_t& m = panel.mask[static_cast<std::size_t>(d)];
    mat_t res = m.select(fwd.predictions - panel.values[static_cast<std::size_t>(d)], 0.0);
    sum_sq += res.squaredNorm();
    out.residuals.push_back(std::move(res));
    out.predictions.push_back(std::move(fwd.predictions));
  }
  out.loss = sum_sq / static_cast<scalar_t>(out.n_points);
  return out;
}

void PovertyModel::scatter_tape_grads(const Bound& bound, const ad::GradientMap& grads,
                                      vec_t& out) const {
  for (const auto& [view, var] : bound.views) {
    if (const mat_t* g = grads.find(var)) {
      params_.scatter_add(view, *g, out);
    }
  }
}

LossGrads PovertyModel::loss_and_gradients(const data::IndicatorPanel& panel,
                                           const ode::SolverConfig& solver) const {
  panel.validate();
  if (panel.n_districts() != cfg_.n_districts || panel.n_indicators() != cfg_.n_indicators) {
    fail(ErrorKind::kShape, "loss_and_gradients: panel axes do not match the model config");
  }
  LossGrads out;
  out.n_points = panel.unmasked_count();
  if (out.n_points == 0) fail(ErrorKind::kData, "loss_and_gradients: no unmasked observations");
  out.grad = vec_t::Zero(params_.size());

  const std::vector<mat_t> cache = params_.materialize();
  const std::vector<scalar_t> times = panel.normalized_times();
  const std::size_t n_times = times.size();

  scalar_t sum_sq = 0.0;
  for (index_t d = 0; d < panel.n_districts(); ++d) {
    const mat_t series = panel.masked_series(d);
    const mask_t& mask = panel.mask[static_cast<std::size_t>(d)];
    const mat_t& target = panel.values[static_cast<std::size_t>(d)];

    // encoder forward, kept alive for the backward sweep
    ad::Tape enc_tape;
    Bound enc_bound = bind(enc_tape, cache, encoder_view_ids());
    ad::Var z0v = encode_on_tape(enc_tape, enc_bound, series, d);
    const vec_t z0 = as_vec(enc_tape.value(z0v));

    adjoint::TapedDynamics dyn = make_dynamics(cache, d);
    ode::Solution sol = ode::solve_at(dyn.as_dynamics_fn(), z0, 0.0, times, solver);
    out.stats += sol.stats;

    // decoder losses and per-observation latent cotangents
    std::vector<vec_t> lambdas(n_times);
    for (std::size_t j = 0; j < n_times; ++j) {
      ad::Tape dec_tape;
      Bound dec_bound = bind(dec_tape, cache, decoder_view_ids());
      ad::Var z_row = dec_tape.leaf(as_row(sol.states[j]));
      ad::Var xhat = decode_on_tape(dec_tape, dec_bound, z_row, d);

      const mat_t pred = dec_tape.value(xhat);
      mat_t res = mat_t::Zero(1, cfg_.n_indicators);
      for (index_t k = 0; k < cfg_.n_indicators; ++k) {
        if (mask(static_cast<index_t>(j), k)) {
          res(0, k) = pred(0, k) - target(static_cast<index_t>(j), k);
        }
      }
      sum_sq += res.squaredNorm();

      const mat_t cot = 2.0 * res / static_cast<scalar_t>(out.n_points);
      ad::GradientMap grads = dec_tape.vjp(xhat, cot);
      scatter_tape_grads(dec_bound, grads, out.grad);
      lambdas[j] = as_vec(grads.at_or_zero(z_row, 1, cfg_.latent_dim));
    }

    // backward augmented ODE, segment by segment through observation times,
    // injecting each observation's cotangent at its time
    vec_t a = lambdas[n_times - 1];
    vec_t g_theta = vec_t::Zero(dyn.theta_size());
    for (std::size_t seg = n_times - 1; seg >= 1; --seg) {
      if (times[seg] != times[seg - 1]) {
        adjoint::GradResult gr =
            adjoint::adjoint_backward(dyn, sol.states[seg], a, times[seg], times[seg - 1], solver);
        out.stats += gr.stats;
        a = gr.dz0;
        g_theta += gr.dtheta_flat;
      }
      a += lambdas[seg - 1];
    }

    // scatter dynamics gradients; the trailing theta view is the embedding row
    index_t at = 0;
    for (std::size_t k = 0; k < layout_.dyn_w.size(); ++k) {
      for (int view : {layout_.dyn_w[k], layout_.dyn_b[k]}) {
        const ViewInfo& info = params_.view(view);
        const index_t n = info.rows * info.cols;
        out.grad.segment(info.offset, n) += g_theta.segment(at, n);
        at += n;
      }
    }
    {
      const ViewInfo& info = params_.view(layout_.embed);
      out.grad.segment(info.offset + d * cfg_.embed_dim, cfg_.embed_dim) +=
          g_theta.segment(at, cfg_.embed_dim);
      at += cfg_.embed_dim;
    }

    // encoder backward with the accumulated latent cotangent
    ad::GradientMap enc_grads = enc_tape.vjp(z0v, as_row(a));
    scatter_tape_grads(enc_bound, enc_grads, out.grad);
  }

  out.loss = sum_sq / static_cast<scalar_t>(out.n_points);
  return out;
}

mat_t PovertyModel::embedding_matrix() const { return params_.read(layout_.embed); }

void PovertyModel::save(const std::string& path) const {
  nlohmann::json meta;
  meta["config"] = cfg_.to_json();
  save_checkpoint(params_, meta, path);
}

PovertyModel PovertyModel::load(const std::string& path) {
  Checkpoint ckpt = load_checkpoint(path);
  if (!ckpt.meta.contains("config")) {
    fail(ErrorKind::kData, "checkpoint is missing the model config: " + path);
  }
  PovertyModel model(ModelConfig::from_json(ckpt.meta.at("config")));
  if (model.params_.size() != ckpt.params.size()) {
    fail(ErrorKind::kData, "checkpoint parameter count does not match its config: " + path);
  }
  for (int i = 0; i < model.params_.view_count(); ++i) {
    const ViewInfo& expect = model.params_.view(i);
    const int found = ckpt.params.view_index(expect.name);
    if (found < 0) fail(ErrorKind::kData, "checkpoint is missing tensor '" + expect.name + "'");
    const ViewInfo& got = ckpt.params.view(found);
    if (got.rows != expect.rows || got.cols != expect.cols) {
      fail(ErrorKind::kData, "checkpoint tensor '" + expect.name + "' has the wrong shape");
    }
    model.params_.write(i, ckpt.params.read(found));
  }
  return model;
}

}  // namespace panelode::model
