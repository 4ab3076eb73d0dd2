#pragma once

#include <functional>
#include <string>
#include <vector>

#include "msrnet/autograd.hpp"

namespace msrnet {

/// Verifies analytic gradients against central finite differences.
///
/// `loss_fn` must rebuild the graph and return the scalar loss; it is called
/// repeatedly while the checked tensors are perturbed in place. For large
/// tensors a deterministic random subset of coordinates is probed
/// (`samples_per_tensor`); small tensors are checked exhaustively.
struct GradCheckResult {
  double max_rel_err = 0.0;
  std::string worst;  // "tensor[idx]" of the worst coordinate
  int coords_checked = 0;
  bool ok(double tol) const { return max_rel_err < tol; }
};

GradCheckResult check_gradients(const std::function<Var()>& loss_fn,
                                const std::vector<std::pair<std::string, Var>>& tensors,
                                double step = 1e-5, int samples_per_tensor = 12,
                                std::uint64_t seed = 0x5eed);

}  // namespace msrnet
