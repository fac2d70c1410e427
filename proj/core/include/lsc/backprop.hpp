#pragma once

#include <vector>

#include "lsc/cells.hpp"
#include "lsc/matrix.hpp"
#include "lsc/stack.hpp"

namespace lsc {

struct StackGradients {
  std::vector<CellParams> layers;  // same tensor layout as the run's params
  Matrix readout;                  // empty when the stack has no readout
  bool has_readout = false;
};

// Reverse-mode sweep over a recorded run: one adjoint vector per layer,
// walked backward through time. output_grads[t-1] is d loss / d output(t).
StackGradients reverse_gradient(const StackRun& run, const std::vector<Vec>& output_grads);

}  // namespace lsc
