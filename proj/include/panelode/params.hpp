#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "panelode/types.hpp"

namespace panelode {

/// Initialization class of a view; decides how init_params fills it.
enum class ViewRole { kWeight, kBias, kEmbedding };

struct ViewInfo {
  std::string name;
  index_t rows = 0;
  index_t cols = 0;
  std::int64_t offset = 0;  // element offset into the flat vector
  ViewRole role = ViewRole::kWeight;
};

/// One flat parameter vector with named matrix views. Views are stored
/// row-major and back to back, in registration order; the same layout is
/// used for gradients and for the checkpoint payload.
class ParamStore {
 public:
  int add_view(std::string name, index_t rows, index_t cols, ViewRole role);

  int view_index(std::string_view name) const;  // -1 when absent
  const ViewInfo& view(int idx) const { return views_[static_cast<std::size_t>(idx)]; }
  int view_count() const { return static_cast<int>(views_.size()); }
  std::int64_t size() const { return total_; }

  vec_t& flat() { return flat_; }
  const vec_t& flat() const { return flat_; }

  mat_t read(int idx) const;
  void write(int idx, const mat_t& value);

  /// Materializes every view; the result is what tapes borrow during a pass.
  std::vector<mat_t> materialize() const;

  /// Adds a per-view gradient into a flat gradient vector at this layout.
  void scatter_add(int idx, const mat_t& grad, vec_t& out) const;

  /// Locates the view containing flat element `offset`; -1 when out of range.
  int view_at_offset(std::int64_t offset) const;

 private:
  std::vector<ViewInfo> views_;
  std::int64_t total_ = 0;
  vec_t flat_;
};

/// Weights ~ uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) with fan_in = rows,
/// biases zero, embeddings ~ normal(0, 0.1). Deterministic given seed.
void init_params(ParamStore& store, std::uint64_t seed);

/// Checkpoint file: one JSON header line {format, meta, tensors:[{name, shape,
/// offset, role}]} followed by the raw little-endian float64 payload.
void save_checkpoint(const ParamStore& store, const nlohmann::json& meta,
                     const std::string& path);

struct Checkpoint {
  ParamStore params;
  nlohmann::json meta;
};

Checkpoint load_checkpoint(const std::string& path);

}  // namespace panelode
