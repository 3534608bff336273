#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "panelode/types.hpp"

namespace panelode::gradcheck {

struct GroupError {
  std::string group;    // encoder | dynamics | decoder | embeddings
  scalar_t max_rel_err = 0.0;
};

/// Result of the shrunken-config gradient suite: the analytic gradients of
/// the end-to-end loss against central finite differences, the backward-ODE
/// gradients against unrolled backpropagation on the same Euler grid, and
/// the scalar closed-form benchmark dz/dt = theta z.
struct Report {
  std::vector<GroupError> fd_groups;
  scalar_t adjoint_vs_bptt = 0.0;
  scalar_t closed_form_value = 0.0;     // computed dL/dtheta
  scalar_t closed_form_expected = 0.0;  // e^0.5
  scalar_t closed_form_rel_err = 0.0;

  bool pass(scalar_t threshold) const;
  std::string to_text() const;
};

/// `sabotage_sign` negates the backward-ODE gradients before comparison;
/// test-only hook proving the suite can fail.
Report run(std::uint64_t seed, bool sabotage_sign = false);

}  // namespace panelode::gradcheck
