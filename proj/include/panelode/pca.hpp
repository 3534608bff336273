#pragma once

#include "panelode/types.hpp"

namespace panelode::pca {

struct Pca2 {
  vec_t component1;  // unit vectors in feature space, orthonormal
  vec_t component2;
  scalar_t eigval1 = 0.0;
  scalar_t eigval2 = 0.0;
  mat_t scores;  // (n x 2) projection of the centered rows
  bool degenerate = false;  // covariance rank < 2; pc2 forced to zero
};

/// Top-2 principal components of the rows of `x` by iterated power method
/// with deflation; stops after `max_iter` iterations or when the Rayleigh
/// quotient changes by less than `tol`. Deterministic.
Pca2 top2(const mat_t& x, int max_iter = 200, scalar_t tol = 1e-10);

}  // namespace panelode::pca
