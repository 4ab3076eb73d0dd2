#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "msrnet/tensor.hpp"

namespace msrnet {

struct Node;
using Var = std::shared_ptr<Node>;

/// One value in the dynamic compute graph. Ops allocate a fresh node per call,
/// so a forward pass owns its whole tape and frees it when the root goes out
/// of scope. Graph construction never mutates existing nodes, which keeps
/// concurrent read-only forwards through a shared model safe.
struct Node {
  Tensor value;
  Tensor grad;  // allocated on demand during backward
  bool requires_grad = false;
  std::vector<Var> inputs;
  // Reads this->grad and accumulates into inputs' grads.
  std::function<void(Node&)> backward_fn;

  Tensor& ensure_grad() {
    if (grad.numel() != value.numel()) grad = Tensor(value.shape());
    return grad;
  }
};

/// Leaf that participates in gradients (parameters, probed inputs).
inline Var make_param(Tensor v) {
  auto n = std::make_shared<Node>();
  n->value = std::move(v);
  n->requires_grad = true;
  return n;
}

/// Leaf excluded from gradients (data, targets).
inline Var make_const(Tensor v) {
  auto n = std::make_shared<Node>();
  n->value = std::move(v);
  n->requires_grad = false;
  return n;
}

/// Interior op node. backward_fn is dropped when no input needs gradients.
inline Var make_op(Tensor out, std::vector<Var> inputs, std::function<void(Node&)> backward_fn) {
  auto n = std::make_shared<Node>();
  n->value = std::move(out);
  for (const auto& in : inputs) {
    if (in && in->requires_grad) {
      n->requires_grad = true;
      break;
    }
  }
  if (n->requires_grad) {
    n->inputs = std::move(inputs);
    n->backward_fn = std::move(backward_fn);
  }
  return n;
}

/// Reverse-mode sweep from root. A scalar root is seeded with 1; a non-scalar
/// root must have grad preseeded by the caller.
void backward(const Var& root);

/// Clears gradients of the given nodes (typically parameters between steps).
void zero_grads(const std::vector<Var>& vars);

}  // namespace msrnet
