#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "pc2dae/common.hpp"

namespace pc2dae::ad {

using Index = Eigen::Index;
using Shape = std::vector<Index>;
// Flat row-major storage; the shape vector carries the logical layout.
using Array = Eigen::ArrayXd;

Index shape_size(const Shape& shape);
std::string shape_str(const Shape& shape);

struct Node;
using NodePtr = std::shared_ptr<Node>;

// One vertex of the define-by-run graph. Nodes carry a creation sequence
// number; backward replays closures in decreasing sequence order, which is
// a valid topological order because an op can only consume already-built
// nodes.
struct Node {
  Shape shape;
  Array value;
  Array grad;  // allocated lazily on first accumulation
  bool requires_grad = false;
  std::uint64_t seq = 0;
  std::vector<NodePtr> parents;
  // Consumes this node's grad and accumulates into the parents' grads.
  std::function<void(Node&)> backward_fn;

  bool has_grad() const { return grad.size() > 0; }
  void accumulate(const Array& g);
};

// Thread-local switch controlling whether ops record backward closures.
class GradMode {
 public:
  static bool enabled();
  static void set_enabled(bool on);
};

// RAII scope that disables graph recording (inference mode).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

// While active, normalization statistics (mean/variance in group_norm) are
// treated as constants in backward. The receptive-field probe relies on
// this: with statistic gradients live, a single output step couples to the
// whole window through the shared mean and the probe would report the
// window length instead of the convolutional span.
class FrozenStatsGuard {
 public:
  FrozenStatsGuard();
  ~FrozenStatsGuard();
  FrozenStatsGuard(const FrozenStatsGuard&) = delete;
  FrozenStatsGuard& operator=(const FrozenStatsGuard&) = delete;

  static bool active();

 private:
  bool prev_;
};

// Value-semantics handle over a shared graph node.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from_array(Shape shape, Array values,
                           bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  int ndim() const { return static_cast<int>(node_->shape.size()); }
  Index dim(int i) const { return node_->shape[static_cast<size_t>(i)]; }
  Index size() const { return node_->value.size(); }

  const Array& values() const { return node_->value; }
  // In-place access for optimizer updates on leaves. Graphs are rebuilt
  // every step, so mutating a leaf between steps is safe.
  Array& mutable_values() { return node_->value; }
  double item() const;

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }
  const Array& grad() const;
  void zero_grad();

  NodePtr node() const { return node_; }
  static Tensor wrap(NodePtr node) {
    Tensor t;
    t.node_ = std::move(node);
    return t;
  }

 private:
  NodePtr node_;
};

// Creates a node for an op result. requires_grad is inherited from the
// parents and masked by GradMode.
Tensor make_op_result(Shape shape, Array value, std::vector<NodePtr> parents,
                      std::function<void(Node&)> backward_fn);

// Reverse pass from a scalar root; seeds d(root)/d(root) = 1.
void backward(const Tensor& root);

// When enabled, ops raise numeric_error on non-finite values in their
// results. Off by default; costs one pass over each op output.
void set_debug_checks(bool on);
bool debug_checks_enabled();
void check_finite(const char* op_name, const Array& values);

}  // namespace pc2dae::ad
