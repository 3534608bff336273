#include "panelode/pca.hpp"

#include <cmath>
#include <random>

#include "panelode/error.hpp"

namespace panelode::pca {
namespace {

vec_t power_iterate(const mat_t& cov, int max_iter, scalar_t tol, scalar_t* eigval,
                    std::mt19937_64& rng) {
  std::normal_distribution<scalar_t> dist(0.0, 1.0);
  vec_t v(cov.rows());
  for (index_t i = 0; i < v.size(); ++i) v[i] = dist(rng);
  v.normalize();

  scalar_t rayleigh = v.dot(cov * v);
  for (int it = 0; it < max_iter; ++it) {
    vec_t w = cov * v;
    const scalar_t norm = w.norm();
    if (norm == 0.0) {
      *eigval = 0.0;
      return v;
    }
    v = w / norm;
    const scalar_t next = v.dot(cov * v);
    const bool converged = std::abs(next - rayleigh) < tol;
    rayleigh = next;
    if (converged) break;
  }
  *eigval = rayleigh;
  return v;
}

}  // namespace

Pca2 top2(const mat_t& x, int max_iter, scalar_t tol) {
  if (x.rows() < 2 || x.cols() < 1) {
    fail(ErrorKind::kUsage, "pca: need at least two rows and one column");
  }

  const mat_t centered = x.rowwise() - x.colwise().mean();
  const mat_t cov = centered.transpose() * centered / static_cast<scalar_t>(x.rows() - 1);

  Pca2 out;
  std::mt19937_64 rng(0x9e3779b97f4a7c15ULL);  // fixed start; results are deterministic
  out.component1 = power_iterate(cov, max_iter, tol, &out.eigval1, rng);

  const scalar_t floor = 1e-12 * std::max(1.0, out.eigval1);
  if (out.eigval1 <= 1e-14) {
    // all rows equal after centering: both projections are zero
    out.degenerate = true;
    out.component1.setZero();
    out.component1[0] = 1.0;
    out.component2 = vec_t::Zero(x.cols());
    if (x.cols() > 1) out.component2[1] = 1.0;
    out.eigval1 = out.eigval2 = 0.0;
    out.scores = mat_t::Zero(x.rows(), 2);
    return out;
  }

  const mat_t deflated = cov - out.eigval1 * (out.component1 * out.component1.transpose());
  out.component2 = power_iterate(deflated, max_iter, tol, &out.eigval2, rng);
  // re-orthogonalize against component1 to wash out deflation round-off
  out.component2 -= out.component1.dot(out.component2) * out.component1;
  const scalar_t n2 = out.component2.norm();
  if (out.eigval2 <= floor || n2 == 0.0) {
    out.degenerate = true;
    out.component2 = vec_t::Zero(x.cols());
    out.eigval2 = 0.0;
  } else {
    out.component2 /= n2;
  }

  // deterministic sign: largest-magnitude coordinate is positive
  for (vec_t* comp : {&out.component1, &out.component2}) {
    index_t arg = 0;
    comp->cwiseAbs().maxCoeff(&arg);
    if ((*comp)[arg] < 0.0) *comp = -*comp;
  }

  out.scores.resize(x.rows(), 2);
  out.scores.col(0) = centered * out.component1;
  out.scores.col(1) = out.degenerate ? vec_t::Zero(x.rows()).eval()
                                     : (centered * out.component2).eval();
  return out;
}

}  // namespace panelode::pca
