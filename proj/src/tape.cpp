#include "panelode/tape.hpp"

#include <atomic>
#include <cmath>
#include <string>

#include "panelode/error.hpp"

namespace panelode::ad {
namespace {

std::atomic<std::int64_t> g_live_bytes{0};
std::atomic<std::int64_t> g_peak_bytes{0};

void track_alloc(std::int64_t bytes) {
  const std::int64_t live = g_live_bytes.fetch_add(bytes) + bytes;
  std::int64_t peak = g_peak_bytes.load();
  while (live > peak && !g_peak_bytes.compare_exchange_weak(peak, live)) {
  }
}

void track_free(std::int64_t bytes) { g_live_bytes.fetch_sub(bytes); }

std::string shape_of(const mat_t& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void check_finite(const char* op, const mat_t& m) {
  if (!m.allFinite()) {
    fail(ErrorKind::kNotFinite, std::string(op) + ": non-finite result");
  }
}

}  // namespace

std::int64_t MemoryStats::live_bytes() { return g_live_bytes.load(); }
std::int64_t MemoryStats::peak_bytes() { return g_peak_bytes.load(); }
void MemoryStats::reset_peak() { g_peak_bytes.store(g_live_bytes.load()); }

void GradientMap::add(std::int32_t id, mat_t grad) {
  entries_.emplace_back(id, std::move(grad));
}

const mat_t* GradientMap::find(Var v) const {
  for (const auto& [id, grad] : entries_) {
    if (id == v.id) return &grad;
  }
  return nullptr;
}

mat_t GradientMap::at_or_zero(Var v, index_t rows, index_t cols) const {
  if (const mat_t* g = find(v)) return *g;
  return mat_t::Zero(rows, cols);
}

Tape::Tape(Tape&& other) noexcept
    : nodes_(std::move(other.nodes_)), owned_bytes_(other.owned_bytes_) {
  other.nodes_.clear();
  other.owned_bytes_ = 0;
}

Tape& Tape::operator=(Tape&& other) noexcept {
  if (this != &other) {
    track_free(owned_bytes_);
    nodes_ = std::move(other.nodes_);
    owned_bytes_ = other.owned_bytes_;
    other.nodes_.clear();
    other.owned_bytes_ = 0;
  }
  return *this;
}

Tape::~Tape() { track_free(owned_bytes_); }

Var Tape::push(TapeNode node) {
  const std::int64_t bytes =
      node.borrowed ? 0 : static_cast<std::int64_t>(node.value.size()) * sizeof(scalar_t);
  nodes_.push_back(std::move(node));
  owned_bytes_ += bytes;
  track_alloc(bytes);
  return Var{static_cast<std::int32_t>(nodes_.size() - 1)};
}

const TapeNode& Tape::node(Var v) const {
  if (v.id < 0 || v.id >= static_cast<std::int32_t>(nodes_.size())) {
    fail(ErrorKind::kShape, "tape: invalid node handle");
  }
  return nodes_[static_cast<std::size_t>(v.id)];
}

const mat_t& Tape::value(Var v) const {
  const TapeNode& n = node(v);
  return n.borrowed ? *n.borrowed : n.value;
}

Var Tape::leaf(mat_t value) {
  check_finite("leaf", value);
  TapeNode n;
  n.kind = OpKind::kLeaf;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::borrowed_leaf(const mat_t* value) {
  TapeNode n;
  n.kind = OpKind::kLeaf;
  n.borrowed = value;
  return push(std::move(n));
}

Var Tape::matmul(Var a, Var b) {
  const mat_t& va = value(a);
  const mat_t& vb = value(b);
  if (va.cols() != vb.rows()) {
    fail(ErrorKind::kShape, "matmul: incompatible shapes " + shape_of(va) + " * " + shape_of(vb));
  }
  TapeNode n;
  n.kind = OpKind::kMatMul;
  n.in0 = a.id;
  n.in1 = b.id;
  n.value.noalias() = va * vb;
  check_finite("matmul", n.value);
  return push(std::move(n));
}

Var Tape::add(Var a, Var b) {
  const mat_t& va = value(a);
  const mat_t& vb = value(b);
  TapeNode n;
  n.kind = OpKind::kAdd;
  n.in0 = a.id;
  n.in1 = b.id;
  if (va.rows() == vb.rows() && va.cols() == vb.cols()) {
    n.value = va + vb;
  } else if (vb.rows() == 1 && vb.cols() == va.cols()) {
    // bias row broadcast onto each row of a
    n.value = va.rowwise() + vb.row(0);
  } else {
    fail(ErrorKind::kShape, "add: incompatible shapes " + shape_of(va) + " + " + shape_of(vb));
  }
  check_finite("add", n.value);
  return push(std::move(n));
}

Var Tape::mul(Var a, Var b) {
  const mat_t& va = value(a);
  const mat_t& vb = value(b);
  if (va.rows() != vb.rows() || va.cols() != vb.cols()) {
    fail(ErrorKind::kShape, "mul: incompatible shapes " + shape_of(va) + " * " + shape_of(vb));
  }
  TapeNode n;
  n.kind = OpKind::kMul;
  n.in0 = a.id;
  n.in1 = b.id;
  n.value = va.cwiseProduct(vb);
  check_finite("mul", n.value);
  return push(std::move(n));
}

Var Tape::tanh(Var a) {
  TapeNode n;
  n.kind = OpKind::kTanh;
  n.in0 = a.id;
  n.value = value(a).array().tanh();
  check_finite("tanh", n.value);
  return push(std::move(n));
}

Var Tape::sigmoid(Var a) {
  TapeNode n;
  n.kind = OpKind::kSigmoid;
  n.in0 = a.id;
  n.value = (1.0 / (1.0 + (-value(a).array()).exp()));
  check_finite("sigmoid", n.value);
  return push(std::move(n));
}

Var Tape::relu(Var a) {
  TapeNode n;
  n.kind = OpKind::kRelu;
  n.in0 = a.id;
  n.value = value(a).cwiseMax(0.0);
  check_finite("relu", n.value);
  return push(std::move(n));
}

Var Tape::concat(Var a, Var b) {
  const mat_t& va = value(a);
  const mat_t& vb = value(b);
  if (va.rows() != vb.rows()) {
    fail(ErrorKind::kShape, "concat: row mismatch " + shape_of(va) + " | " + shape_of(vb));
  }
  TapeNode n;
  n.kind = OpKind::kConcat;
  n.in0 = a.id;
  n.in1 = b.id;
  n.value.resize(va.rows(), va.cols() + vb.cols());
  n.value << va, vb;
  return push(std::move(n));
}

Var Tape::slice(Var a, index_t r0, index_t nr, index_t c0, index_t nc) {
  const mat_t& va = value(a);
  if (r0 < 0 || c0 < 0 || nr <= 0 || nc <= 0 || r0 + nr > va.rows() || c0 + nc > va.cols()) {
    fail(ErrorKind::kShape, "slice: block out of range for " + shape_of(va));
  }
  TapeNode n;
  n.kind = OpKind::kSlice;
  n.in0 = a.id;
  n.r0 = r0;
  n.nr = nr;
  n.c0 = c0;
  n.nc = nc;
  n.value = va.block(r0, c0, nr, nc);
  return push(std::move(n));
}

Var Tape::scale(Var a, scalar_t alpha) {
  if (!std::isfinite(alpha)) fail(ErrorKind::kNotFinite, "scale: non-finite factor");
  TapeNode n;
  n.kind = OpKind::kScale;
  n.in0 = a.id;
  n.alpha = alpha;
  n.value = value(a) * alpha;
  check_finite("scale", n.value);
  return push(std::move(n));
}

Var Tape::reduce_sum(Var a) {
  TapeNode n;
  n.kind = OpKind::kReduceSum;
  n.in0 = a.id;
  n.value = mat_t::Constant(1, 1, value(a).sum());
  check_finite("reduce_sum", n.value);
  return push(std::move(n));
}

Var Tape::square(Var a) {
  TapeNode n;
  n.kind = OpKind::kSquare;
  n.in0 = a.id;
  n.value = value(a).array().square();
  check_finite("square", n.value);
  return push(std::move(n));
}

GradientMap Tape::vjp(Var output, const mat_t& cotangent) const {
  const mat_t& out = value(output);
  if (out.rows() != cotangent.rows() || out.cols() != cotangent.cols()) {
    fail(ErrorKind::kShape, "vjp: cotangent shape " + shape_of(cotangent) +
                                " does not match output " + shape_of(out));
  }

  std::vector<mat_t> grad(static_cast<std::size_t>(output.id) + 1);
  auto accum = [&](std::int32_t id, auto&& expr) {
    mat_t& g = grad[static_cast<std::size_t>(id)];
    if (g.size() == 0) {
      g = expr;
    } else {
      g += expr;
    }
  };

  grad[static_cast<std::size_t>(output.id)] = cotangent;

  GradientMap result;
  for (std::int32_t i = output.id; i >= 0; --i) {
    mat_t& g = grad[static_cast<std::size_t>(i)];
    if (g.size() == 0) continue;
    const TapeNode& n = nodes_[static_cast<std::size_t>(i)];
    const Var v{i};
    switch (n.kind) {
      case OpKind::kLeaf:
        result.add(i, std::move(g));
        break;
      case OpKind::kMatMul:
        accum(n.in0, g * value(Var{n.in1}).transpose());
        accum(n.in1, value(Var{n.in0}).transpose() * g);
        break;
      case OpKind::kAdd: {
        accum(n.in0, g);
        const mat_t& vb = value(Var{n.in1});
        if (vb.rows() == g.rows()) {
          accum(n.in1, g);
        } else {
          accum(n.in1, g.colwise().sum());
        }
        break;
      }
      case OpKind::kMul:
        accum(n.in0, g.cwiseProduct(value(Var{n.in1})));
        accum(n.in1, g.cwiseProduct(value(Var{n.in0})));
        break;
      case OpKind::kTanh:
        accum(n.in0, (g.array() * (1.0 - value(v).array().square())).matrix());
        break;
      case OpKind::kSigmoid: {
        const auto y = value(v).array();
        accum(n.in0, (g.array() * y * (1.0 - y)).matrix());
        break;
      }
      case OpKind::kRelu:
        accum(n.in0,
              (g.array() * (value(Var{n.in0}).array() > 0.0).cast<scalar_t>()).matrix());
        break;
      case OpKind::kConcat: {
        const index_t ca = value(Var{n.in0}).cols();
        accum(n.in0, g.leftCols(ca));
        accum(n.in1, g.rightCols(g.cols() - ca));
        break;
      }
      case OpKind::kSlice: {
        const mat_t& vin = value(Var{n.in0});
        mat_t padded = mat_t::Zero(vin.rows(), vin.cols());
        padded.block(n.r0, n.c0, n.nr, n.nc) = g;
        accum(n.in0, std::move(padded));
        break;
      }
      case OpKind::kScale:
        accum(n.in0, g * n.alpha);
        break;
      case OpKind::kReduceSum: {
        const mat_t& vin = value(Var{n.in0});
        accum(n.in0, mat_t::Constant(vin.rows(), vin.cols(), g(0, 0)));
        break;
      }
      case OpKind::kSquare:
        accum(n.in0, 2.0 * g.cwiseProduct(value(Var{n.in0})));
        break;
    }
    if (n.kind != OpKind::kLeaf) {
      g.resize(0, 0);  // release as soon as the node has been processed
    }
  }
  return result;
}

ForwardResult forward(const GraphBuilder& builder, const std::vector<mat_t>& inputs) {
  ForwardResult r;
  r.inputs.reserve(inputs.size());
  for (const mat_t& x : inputs) {
    r.inputs.push_back(r.tape.leaf(x));
  }
  r.output = builder(r.tape, r.inputs);
  return r;
}

scalar_t grad_check(const GraphBuilder& builder, const std::vector<mat_t>& point, scalar_t eps) {
  if (!(eps > 0.0 && eps <= 1e-2)) {
    fail(ErrorKind::kUsage, "grad_check: eps must lie in (0, 1e-2]");
  }

  auto scalar_output = [&](Tape& tape, const std::vector<Var>& in) {
    Var out = builder(tape, in);
    const mat_t& v = tape.value(out);
    return (v.rows() == 1 && v.cols() == 1) ? out : tape.reduce_sum(out);
  };

  ForwardResult fwd = forward(scalar_output, point);
  GradientMap grads = fwd.tape.vjp(fwd.output, mat_t::Ones(1, 1));

  auto eval_at = [&](const std::vector<mat_t>& x) {
    ForwardResult r = forward(scalar_output, x);
    return r.value()(0, 0);
  };

  scalar_t max_err = 0.0;
  std::vector<mat_t> probe = point;
  for (std::size_t k = 0; k < point.size(); ++k) {
    const mat_t analytic =
        grads.at_or_zero(fwd.inputs[k], point[k].rows(), point[k].cols());
    for (index_t i = 0; i < point[k].rows(); ++i) {
      for (index_t j = 0; j < point[k].cols(); ++j) {
        const scalar_t saved = probe[k](i, j);
        probe[k](i, j) = saved + eps;
        const scalar_t up = eval_at(probe);
        probe[k](i, j) = saved - eps;
        const scalar_t down = eval_at(probe);
        probe[k](i, j) = saved;
        if (!std::isfinite(up) || !std::isfinite(down)) {
          fail(ErrorKind::kNotFinite, "grad_check: non-finite value at input " +
                                          std::to_string(k) + " coordinate (" +
                                          std::to_string(i) + "," + std::to_string(j) + ")");
        }
        const scalar_t fd = (up - down) / (2.0 * eps);
        const scalar_t a = analytic(i, j);
        const scalar_t err =
            std::abs(a - fd) / std::max({1.0, std::abs(a), std::abs(fd)});
        max_err = std::max(max_err, err);
      }
    }
  }
  return max_err;
}

}  // namespace panelode::ad
