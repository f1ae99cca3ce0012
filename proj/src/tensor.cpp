#include "pc2dae/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>
#include <unordered_set>

namespace pc2dae::ad {

namespace {

std::atomic<std::uint64_t> g_next_seq{1};
thread_local bool g_grad_enabled = true;
thread_local bool g_frozen_stats = false;
thread_local bool g_debug_checks = false;

}  // namespace

Index shape_size(const Shape& shape) {
  Index n = 1;
  for (Index d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

void Node::accumulate(const Array& g) {
  if (grad.size() == 0) {
    grad = g;
  } else {
    grad += g;
  }
}

bool GradMode::enabled() { return g_grad_enabled; }
void GradMode::set_enabled(bool on) { g_grad_enabled = on; }

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

FrozenStatsGuard::FrozenStatsGuard() : prev_(g_frozen_stats) {
  g_frozen_stats = true;
}
FrozenStatsGuard::~FrozenStatsGuard() { g_frozen_stats = prev_; }
bool FrozenStatsGuard::active() { return g_frozen_stats; }

void set_debug_checks(bool on) { g_debug_checks = on; }
bool debug_checks_enabled() { return g_debug_checks; }

void check_finite(const char* op_name, const Array& values) {
  if (!g_debug_checks) return;
  if (!values.isFinite().all()) {
    throw numeric_error(std::string("non-finite value produced by op '") +
                        op_name + "'");
  }
}

namespace {

NodePtr new_node(Shape shape, Array value, bool requires_grad) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  node->requires_grad = requires_grad;
  node->seq = g_next_seq.fetch_add(1, std::memory_order_relaxed);
  return node;
}

}  // namespace

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  Index n = shape_size(shape);
  return wrap(new_node(std::move(shape), Array::Zero(n), requires_grad));
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  Index n = shape_size(shape);
  return wrap(
      new_node(std::move(shape), Array::Constant(n, value), requires_grad));
}

Tensor Tensor::from_array(Shape shape, Array values, bool requires_grad) {
  if (shape_size(shape) != values.size()) {
    throw shape_error("from_array: shape " + shape_str(shape) + " expects " +
                      std::to_string(shape_size(shape)) + " values, got " +
                      std::to_string(values.size()));
  }
  return wrap(new_node(std::move(shape), std::move(values), requires_grad));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from_array({1}, Array::Constant(1, value), requires_grad);
}

double Tensor::item() const {
  if (size() != 1) {
    throw shape_error("item: tensor has " + std::to_string(size()) +
                      " elements, expected 1");
  }
  return node_->value(0);
}

const Array& Tensor::grad() const {
  if (!node_->has_grad()) {
    node_->grad = Array::Zero(node_->value.size());
  }
  return node_->grad;
}

void Tensor::zero_grad() {
  if (node_->has_grad()) node_->grad.setZero();
}

Tensor make_op_result(Shape shape, Array value, std::vector<NodePtr> parents,
                      std::function<void(Node&)> backward_fn) {
  bool rg = false;
  if (GradMode::enabled()) {
    for (const auto& p : parents) rg = rg || p->requires_grad;
  }
  auto node = new_node(std::move(shape), std::move(value), rg);
  if (rg) {
    node->parents = std::move(parents);
    node->backward_fn = std::move(backward_fn);
  }
  return Tensor::wrap(node);
}

void backward(const Tensor& root) {
  if (!root.defined()) throw shape_error("backward: undefined tensor");
  if (root.size() != 1) {
    throw shape_error("backward: root must be scalar, got shape " +
                      shape_str(root.shape()));
  }
  if (!root.requires_grad()) return;

  // Collect the reachable grad-requiring subgraph.
  std::vector<Node*> nodes;
  std::unordered_set<Node*> seen;
  std::vector<Node*> stack{root.node().get()};
  seen.insert(root.node().get());
  while (!stack.empty()) {
    Node* n = stack.back();
    stack.pop_back();
    nodes.push_back(n);
    for (const auto& p : n->parents) {
      if (p->requires_grad && seen.insert(p.get()).second) {
        stack.push_back(p.get());
      }
    }
  }

  // Decreasing creation order is a topological order: an op can only
  // consume nodes created before it.
  std::sort(nodes.begin(), nodes.end(),
            [](const Node* a, const Node* b) { return a->seq > b->seq; });

  root.node()->accumulate(Array::Ones(1));
  for (Node* n : nodes) {
    if (n->backward_fn && n->has_grad()) n->backward_fn(*n);
  }
}

}  // namespace pc2dae::ad
