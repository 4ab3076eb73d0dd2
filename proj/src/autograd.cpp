#include "msrnet/autograd.hpp"

#include <unordered_set>

namespace msrnet {

void backward(const Var& root) {
  require(root != nullptr, "backward: null root");
  require(root->requires_grad, "backward: root does not require gradients");
  if (root->grad.numel() != root->value.numel()) {
    require(root->value.numel() == 1, "backward: non-scalar root needs a preseeded grad");
    root->ensure_grad()[0] = 1.0;
  }

  // Iterative post-order DFS; topological order comes out in `order`.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root.get(), 0);
  seen.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next_child] = stack.back();
    if (next_child < node->inputs.size()) {
      Node* child = node->inputs[next_child].get();
      ++next_child;
      if (child && child->requires_grad && !seen.count(child)) {
        seen.insert(child);
        stack.emplace_back(child, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn && n->grad.numel() == n->value.numel()) n->backward_fn(*n);
  }
}

void zero_grads(const std::vector<Var>& vars) {
  for (const auto& v : vars) {
    if (v) v->grad = Tensor();
  }
}

}  // namespace msrnet
