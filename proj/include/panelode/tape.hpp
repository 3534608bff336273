#pragma once

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "panelode/types.hpp"

namespace panelode::ad {

/// Handle to a node on a Tape. Only meaningful for the tape that issued it.
struct Var {
  std::int32_t id = -1;
  bool valid() const { return id >= 0; }
};

/// Closed primitive set. Every op has one hand-written backward rule.
enum class OpKind : std::uint8_t {
  kLeaf,
  kMatMul,
  kAdd,        // same shape, or a (1 x n) bias row added to each row
  kMul,        // elementwise product
  kTanh,
  kSigmoid,
  kRelu,
  kConcat,     // column-wise: [a b]
  kSlice,      // rectangular block
  kScale,      // multiply by a fixed scalar
  kReduceSum,  // sum of all elements, 1x1 result
  kSquare,
};

struct TapeNode {
  OpKind kind = OpKind::kLeaf;
  std::int32_t in0 = -1;
  std::int32_t in1 = -1;
  mat_t value;                      // forward result; empty for borrowed leaves
  const mat_t* borrowed = nullptr;  // non-owning leaf payload
  scalar_t alpha = 0.0;             // kScale factor
  index_t r0 = 0, nr = 0, c0 = 0, nc = 0;  // kSlice block
};

/// Cotangents for leaf nodes, keyed by node id. Absent entries mean zero.
class GradientMap {
 public:
  void add(std::int32_t id, mat_t grad);
  const mat_t* find(Var v) const;
  mat_t at_or_zero(Var v, index_t rows, index_t cols) const;
  std::size_t size() const { return entries_.size(); }

 private:
  std::vector<std::pair<std::int32_t, mat_t>> entries_;
};

/// Process-wide accounting of bytes retained by live tapes. Used to assert
/// the constant-memory behaviour of the backward ODE pass.
struct MemoryStats {
  static std::int64_t live_bytes();
  static std::int64_t peak_bytes();
  static void reset_peak();
};

/// Define-by-run tape: ops evaluate eagerly and append one node each, so the
/// node order is already topological. Single-threaded per tape; distinct
/// tapes may run on distinct threads.
class Tape {
 public:
  Tape() = default;
  Tape(Tape&& other) noexcept;
  Tape& operator=(Tape&& other) noexcept;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  ~Tape();

  Var leaf(mat_t value);
  /// Non-owning leaf: caller guarantees the payload stays alive and finite
  /// for the tape's lifetime. Avoids copying parameter matrices per pass.
  Var borrowed_leaf(const mat_t* value);

  Var matmul(Var a, Var b);
  Var add(Var a, Var b);
  Var mul(Var a, Var b);
  Var tanh(Var a);
  Var sigmoid(Var a);
  Var relu(Var a);
  Var concat(Var a, Var b);
  Var slice(Var a, index_t r0, index_t nr, index_t c0, index_t nc);
  Var scale(Var a, scalar_t alpha);
  Var reduce_sum(Var a);
  Var square(Var a);

  /// a - b, lowered to add(a, scale(b, -1)).
  Var sub(Var a, Var b) { return add(a, scale(b, -1.0)); }

  const mat_t& value(Var v) const;
  std::size_t size() const { return nodes_.size(); }
  void reserve(std::size_t n) { nodes_.reserve(n); }

  /// Reverse sweep from `output`, visiting each node at most once. Returns
  /// the cotangent of every leaf that `output` depends on.
  GradientMap vjp(Var output, const mat_t& cotangent) const;

 private:
  Var push(TapeNode node);
  const TapeNode& node(Var v) const;

  std::vector<TapeNode> nodes_;
  std::int64_t owned_bytes_ = 0;
};

/// A function assembled from tape primitives; re-run per evaluation point.
using GraphBuilder = std::function<Var(Tape&, const std::vector<Var>&)>;

struct ForwardResult {
  Tape tape;
  std::vector<Var> inputs;
  Var output;

  const mat_t& value() const { return tape.value(output); }
};

/// Runs `builder` over owned leaf copies of `inputs`.
ForwardResult forward(const GraphBuilder& builder, const std::vector<mat_t>& inputs);

/// Compares vjp output against central finite differences, coordinate by
/// coordinate, over every input. Non-scalar outputs are summed first.
/// Returns max over coordinates of |a - b| / max(1, |a|, |b|).
scalar_t grad_check(const GraphBuilder& builder, const std::vector<mat_t>& point, scalar_t eps);

}  // namespace panelode::ad
