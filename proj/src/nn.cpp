#include "panelode/nn.hpp"

#include "panelode/error.hpp"

namespace panelode::nn {

ad::Var apply_activation(ad::Tape& tape, Activation act, ad::Var x) {
  switch (act) {
    case Activation::kNone: return x;
    case Activation::kTanh: return tape.tanh(x);
    case Activation::kRelu: return tape.relu(x);
    case Activation::kSigmoid: return tape.sigmoid(x);
  }
  return x;
}

ad::Var mlp_forward(ad::Tape& tape, const MlpViews& mlp, ad::Var x) {
  if (mlp.weights.size() != mlp.biases.size() ||
      mlp.weights.size() != mlp.activations.size()) {
    fail(ErrorKind::kUsage, "mlp_forward: layer lists out of sync");
  }
  ad::Var h = x;
  for (std::size_t k = 0; k < mlp.weights.size(); ++k) {
    h = tape.add(tape.matmul(h, mlp.weights[k]), mlp.biases[k]);
    h = apply_activation(tape, mlp.activations[k], h);
  }
  return h;
}

ad::Var gru_step(ad::Tape& tape, const GruViews& gru, ad::Var x_t, ad::Var h_prev) {
  ad::Var z = tape.sigmoid(
      tape.add(tape.add(tape.matmul(x_t, gru.w_z), tape.matmul(h_prev, gru.u_z)), gru.b_z));
  ad::Var r = tape.sigmoid(
      tape.add(tape.add(tape.matmul(x_t, gru.w_r), tape.matmul(h_prev, gru.u_r)), gru.b_r));
  ad::Var hcand = tape.tanh(tape.add(
      tape.add(tape.matmul(x_t, gru.w_h), tape.matmul(tape.mul(r, h_prev), gru.u_h)), gru.b_h));
  // h' = h - z.h + z.hcand
  return tape.add(tape.sub(h_prev, tape.mul(z, h_prev)), tape.mul(z, hcand));
}

ad::Var gru_encode(ad::Tape& tape, const GruViews& gru, const std::vector<ad::Var>& sequence,
                   ad::Var h0) {
  if (sequence.empty()) {
    fail(ErrorKind::kUsage, "gru_encode: empty sequence");
  }
  ad::Var h = h0;
  for (ad::Var x : sequence) {
    h = gru_step(tape, gru, x, h);
  }
  return h;
}

ad::Var embed_lookup(ad::Tape& tape, ad::Var table, index_t district) {
  const mat_t& t = tape.value(table);
  if (district < 0 || district >= t.rows()) {
    fail(ErrorKind::kUsage,
         "embed_lookup: district index " + std::to_string(district) + " out of range [0, " +
             std::to_string(t.rows()) + ")");
  }
  return tape.slice(table, district, 1, 0, t.cols());
}

}  // namespace panelode::nn
