#pragma once

#include <Eigen/Dense>

namespace panelode {

using scalar_t = double;
using index_t = Eigen::Index;

/// Column vector of doubles; the carrier for solver states and flat parameters.
using vec_t = Eigen::VectorXd;

/// Dense matrix of doubles. Row vectors (1 x n) carry per-sample features.
using mat_t = Eigen::MatrixXd;

using mask_t = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

}  // namespace panelode
