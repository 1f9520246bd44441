#include "pmrnet/autograd.hpp"

#include <unordered_set>
#include <utility>

namespace pmrnet {

namespace {
thread_local bool g_grad_enabled = true;
thread_local KinkTrace* g_kink_trace = nullptr;

template <typename T>
std::vector<Node<T>*> topological_order(const Var<T>& root) {
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> seen;
  // Iterative post-order DFS; graphs can be deep enough to matter.
  std::vector<std::pair<Node<T>*, std::size_t>> stack;
  stack.emplace_back(root.get(), 0);
  seen.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node<T>* child = node->inputs[next++].get();
      if (child && seen.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  return order;
}
}  // namespace

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) {
  g_grad_enabled = false;
}
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_enabled() { return g_grad_enabled; }

template <typename T>
void backward(const Var<T>& root) {
  if (!root->requires_grad) return;
  auto order = topological_order(root);
  root->grad_buffer().fill(T(1));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* node = *it;
    if (node->backward && node->grad.shape() == node->value.shape()) {
      node->backward(*node);
    }
  }
}

template <typename T>
std::map<std::string, std::size_t> count_ops(const Var<T>& root) {
  std::map<std::string, std::size_t> counts;
  for (Node<T>* node : topological_order(root)) ++counts[node->op];
  return counts;
}

void KinkTrace::mix(std::uint64_t value) {
  // FNV-1a over the 8 bytes of value.
  for (int i = 0; i < 8; ++i) {
    hash_ ^= (value >> (8 * i)) & 0xffU;
    hash_ *= 1099511628211ULL;
  }
}

ScopedKinkTrace::ScopedKinkTrace(KinkTrace& trace) : previous_(g_kink_trace) {
  g_kink_trace = &trace;
}
ScopedKinkTrace::~ScopedKinkTrace() { g_kink_trace = previous_; }

KinkTrace* active_kink_trace() { return g_kink_trace; }

template void backward<float>(const Var<float>&);
template void backward<double>(const Var<double>&);
template void backward<long double>(const Var<long double>&);
template std::map<std::string, std::size_t> count_ops<float>(const Var<float>&);
template std::map<std::string, std::size_t> count_ops<double>(const Var<double>&);
template std::map<std::string, std::size_t> count_ops<long double>(const Var<long double>&);

}  // namespace pmrnet
