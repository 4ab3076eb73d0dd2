#include "msrnet/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "msrnet/rng.hpp"

namespace msrnet {

GradCheckResult check_gradients(const std::function<Var()>& loss_fn,
                                const std::vector<std::pair<std::string, Var>>& tensors,
                                double step, int samples_per_tensor, std::uint64_t seed) {
  // One analytic pass; grads stay attached to the leaf nodes.
  for (const auto& [name, v] : tensors) v->grad = Tensor();
  Var loss = loss_fn();
  backward(loss);

  GradCheckResult res;
  Rng rng(seed);
  for (const auto& [name, v] : tensors) {
    Tensor analytic = v->grad.numel() == v->value.numel() ? v->grad : Tensor(v->value.shape());
    const std::size_t n = v->value.numel();
    std::vector<std::size_t> coords;
    if (n <= static_cast<std::size_t>(samples_per_tensor)) {
      for (std::size_t i = 0; i < n; ++i) coords.push_back(i);
    } else {
      for (int i = 0; i < samples_per_tensor; ++i) coords.push_back(rng.below(n));
      std::sort(coords.begin(), coords.end());
      coords.erase(std::unique(coords.begin(), coords.end()), coords.end());
    }
    for (std::size_t idx : coords) {
      double saved = v->value[idx];
      v->value[idx] = saved + step;
      double f_plus = loss_fn()->value[0];
      v->value[idx] = saved - step;
      double f_minus = loss_fn()->value[0];
      v->value[idx] = saved;
      double fd = (f_plus - f_minus) / (2.0 * step);
      double an = analytic[idx];
      double denom = std::max({std::abs(fd), std::abs(an), 1e-6});
      double rel = std::abs(fd - an) / denom;
      ++res.coords_checked;
      if (rel > res.max_rel_err) {
        res.max_rel_err = rel;
        res.worst = name + "[" + std::to_string(idx) + "]";
      }
    }
  }
  return res;
}

}  // namespace msrnet
