#pragma once

#include <vector>

#include "panelode/tape.hpp"
#include "panelode/types.hpp"

namespace panelode::nn {

enum class Activation { kNone, kTanh, kRelu, kSigmoid };

/// Affine stack over row-vector inputs: layer k computes act_k(x * W_k + b_k),
/// with W_k shaped (in x out) and b_k shaped (1 x out).
struct MlpViews {
  std::vector<ad::Var> weights;
  std::vector<ad::Var> biases;
  std::vector<Activation> activations;
};

/// Gate parameters of one GRU cell, as tape leaves. W_* are (input x hidden),
/// U_* are (hidden x hidden), b_* are (1 x hidden) rows.
struct GruViews {
  ad::Var w_z, u_z, b_z;
  ad::Var w_r, u_r, b_r;
  ad::Var w_h, u_h, b_h;
};

ad::Var apply_activation(ad::Tape& tape, Activation act, ad::Var x);

ad::Var mlp_forward(ad::Tape& tape, const MlpViews& mlp, ad::Var x);

/// z = sigmoid(x W_z + h U_z + b_z)
/// r = sigmoid(x W_r + h U_r + b_r)
/// hcand = tanh(x W_h + (r . h) U_h + b_h)
/// h' = (1 - z) . h + z . hcand
ad::Var gru_step(ad::Tape& tape, const GruViews& gru, ad::Var x_t, ad::Var h_prev);

/// Left fold of gru_step over the sequence in increasing index order.
ad::Var gru_encode(ad::Tape& tape, const GruViews& gru, const std::vector<ad::Var>& sequence,
                   ad::Var h0);

/// Differentiable row lookup: returns row `district` of an (N_d x E) table.
ad::Var embed_lookup(ad::Tape& tape, ad::Var table, index_t district);

}  // namespace panelode::nn
