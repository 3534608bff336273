#include "panelode/params.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <random>

#include <nlohmann/json.hpp>

#include "panelode/error.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint payload is little-endian float64");

namespace panelode {

int ParamStore::add_view(std::string name, index_t rows, index_t cols, ViewRole role) {
  if (rows <= 0 || cols <= 0) {
    fail(ErrorKind::kUsage, "param view '" + name + "' must have positive extents");
  }
  if (view_index(name) >= 0) {
    fail(ErrorKind::kUsage, "duplicate param view '" + name + "'");
  }
  ViewInfo info{std::move(name), rows, cols, total_, role};
  total_ += static_cast<std::int64_t>(rows) * cols;
  views_.push_back(std::move(info));
  flat_.conservativeResize(total_);
  flat_.tail(static_cast<index_t>(views_.back().rows * views_.back().cols)).setZero();
  return static_cast<int>(views_.size()) - 1;
}

int ParamStore::view_index(std::string_view name) const {
  for (std::size_t i = 0; i < views_.size(); ++i) {
    if (views_[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

mat_t ParamStore::read(int idx) const {
  const ViewInfo& v = view(idx);
  mat_t out(v.rows, v.cols);
  const scalar_t* src = flat_.data() + v.offset;
  for (index_t r = 0; r < v.rows; ++r) {
    for (index_t c = 0; c < v.cols; ++c) {
      out(r, c) = src[r * v.cols + c];
    }
  }
  return out;
}

void ParamStore::write(int idx, const mat_t& value) {
  const ViewInfo& v = view(idx);
  if (value.rows() != v.rows || value.cols() != v.cols) {
    fail(ErrorKind::kShape, "param view '" + v.name + "' expects " + std::to_string(v.rows) +
                                "x" + std::to_string(v.cols));
  }
  scalar_t* dst = flat_.data() + v.offset;
  for (index_t r = 0; r < v.rows; ++r) {
    for (index_t c = 0; c < v.cols; ++c) {
      dst[r * v.cols + c] = value(r, c);
    }
  }
}

std::vector<mat_t> ParamStore::materialize() const {
  std::vector<mat_t> out;
  out.reserve(views_.size());
  for (int i = 0; i < view_count(); ++i) {
    out.push_back(read(i));
  }
  return out;
}

void ParamStore::scatter_add(int idx, const mat_t& grad, vec_t& out) const {
  const ViewInfo& v = view(idx);
  if (grad.rows() != v.rows || grad.cols() != v.cols) {
    fail(ErrorKind::kShape, "gradient for view '" + v.name + "' has wrong shape");
  }
  if (out.size() != total_) {
    fail(ErrorKind::kShape, "flat gradient vector has wrong length");
  }
  scalar_t* dst = out.data() + v.offset;
  for (index_t r = 0; r < v.rows; ++r) {
    for (index_t c = 0; c < v.cols; ++c) {
      dst[r * v.cols + c] += grad(r, c);
    }
  }
}

int ParamStore::view_at_offset(std::int64_t offset) const {
  for (int i = 0; i < view_count(); ++i) {
    const ViewInfo& v = views_[static_cast<std::size_t>(i)];
    if (offset >= v.offset && offset < v.offset + static_cast<std::int64_t>(v.rows * v.cols)) {
      return i;
    }
  }
  return -1;
}

void init_params(ParamStore& store, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (int i = 0; i < store.view_count(); ++i) {
    const ViewInfo& v = store.view(i);
    mat_t m(v.rows, v.cols);
    switch (v.role) {
      case ViewRole::kWeight: {
        const scalar_t bound = 1.0 / std::sqrt(static_cast<scalar_t>(v.rows));
        std::uniform_real_distribution<scalar_t> dist(-bound, bound);
        for (index_t r = 0; r < v.rows; ++r) {
          for (index_t c = 0; c < v.cols; ++c) m(r, c) = dist(rng);
        }
        break;
      }
      case ViewRole::kBias:
        m.setZero();
        break;
      case ViewRole::kEmbedding: {
        std::normal_distribution<scalar_t> dist(0.0, 0.1);
        for (index_t r = 0; r < v.rows; ++r) {
          for (index_t c = 0; c < v.cols; ++c) m(r, c) = dist(rng);
        }
        break;
      }
    }
    store.write(i, m);
  }
}

namespace {

const char* role_name(ViewRole role) {
  switch (role) {
    case ViewRole::kWeight: return "weight";
    case ViewRole::kBias: return "bias";
    case ViewRole::kEmbedding: return "embedding";
  }
  return "weight";
}

ViewRole role_from(const std::string& s) {
  if (s == "bias") return ViewRole::kBias;
  if (s == "embedding") return ViewRole::kEmbedding;
  return ViewRole::kWeight;
}

}  // namespace

void save_checkpoint(const ParamStore& store, const nlohmann::json& meta,
                     const std::string& path) {
  nlohmann::json header;
  header["format"] = "panelode-checkpoint-v1";
  header["meta"] = meta;
  nlohmann::json tensors = nlohmann::json::array();
  for (int i = 0; i < store.view_count(); ++i) {
    const ViewInfo& v = store.view(i);
    tensors.push_back({{"name", v.name},
                       {"shape", {v.rows, v.cols}},
                       {"offset", v.offset},
                       {"role", role_name(v.role)}});
  }
  header["tensors"] = std::move(tensors);

  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::kIo, "cannot open checkpoint for writing: " + path);
  out << header.dump() << '\n';
  out.write(reinterpret_cast<const char*>(store.flat().data()),
            static_cast<std::streamsize>(store.size() * sizeof(scalar_t)));
  if (!out) fail(ErrorKind::kIo, "short write to checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "no such file: " + path);
  std::string header_line;
  if (!std::getline(in, header_line)) {
    fail(ErrorKind::kData, "checkpoint header missing: " + path);
  }
  nlohmann::json header = nlohmann::json::parse(header_line, nullptr, false);
  if (header.is_discarded() || header.value("format", "") != "panelode-checkpoint-v1") {
    fail(ErrorKind::kData, "not a panelode checkpoint: " + path);
  }

  Checkpoint ckpt;
  ckpt.meta = header.value("meta", nlohmann::json::object());
  for (const auto& t : header.at("tensors")) {
    const auto shape = t.at("shape");
    const int idx = ckpt.params.add_view(t.at("name").get<std::string>(),
                                         shape.at(0).get<index_t>(), shape.at(1).get<index_t>(),
                                         role_from(t.value("role", "weight")));
    if (ckpt.params.view(idx).offset != t.at("offset").get<std::int64_t>()) {
      fail(ErrorKind::kData, "checkpoint tensor offsets are not contiguous: " + path);
    }
  }
  in.read(reinterpret_cast<char*>(ckpt.params.flat().data()),
          static_cast<std::streamsize>(ckpt.params.size() * sizeof(scalar_t)));
  if (in.gcount() != static_cast<std::streamsize>(ckpt.params.size() * sizeof(scalar_t))) {
    fail(ErrorKind::kData, "checkpoint payload truncated: " + path);
  }
  if (!ckpt.params.flat().allFinite()) {
    fail(ErrorKind::kNotFinite, "checkpoint payload contains non-finite values: " + path);
  }
  return ckpt;
}

}  // namespace panelode
