#pragma once

#include <array>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "seqcr/tensor.hpp"

namespace seqcr::nn {

struct Node {
  Tensor value;
  Tensor grad;  // allocated lazily, same shape as value
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward_fn;

  Tensor& grad_buffer();
};

/// Handle to a value in a reverse-mode computation graph. Copies share the node.
class Var {
 public:
  Var() = default;
  explicit Var(Tensor value, bool requires_grad = false);

  const Tensor& value() const { return node_->value; }
  Tensor& mutable_value() { return node_->value; }
  const Tensor& grad() const { return node_->grad; }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }
  const std::vector<int>& shape() const { return node_->value.shape(); }
  bool defined() const { return static_cast<bool>(node_); }
  void zero_grad() { node_->grad = Tensor(); }
  double item() const;

  const std::shared_ptr<Node>& node() const { return node_; }
  bool same_node(const Var& other) const { return node_ == other.node_; }

  /// Builds a graph node; drops the inputs when none of them needs a gradient
  /// or graph recording is disabled.
  static Var make(Tensor value, std::vector<Var> inputs, std::function<void(Node&)> backward_fn);

 private:
  std::shared_ptr<Node> node_;
};

/// Accumulates d(root)/d(leaf) into every reachable leaf that requires a gradient.
/// `root` must hold a single element.
void backward(const Var& root);

/// Disables graph recording on this thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};
bool grad_enabled();

struct ConvGeometry {
  std::array<int, 3> kernel{3, 3, 3};  // (time, height, width)
  std::array<int, 3> stride{1, 1, 1};
  std::array<int, 3> padding{1, 1, 1};
};

// Ops on (C, T, H, W) activations unless stated otherwise.

/// weight: (Cout, Cin, kt, kh, kw); bias: (Cout). Zero padding.
Var conv3d(const Var& x, const Var& weight, const Var& bias, const ConvGeometry& g);
Var relu(const Var& x);
Var leaky_relu(const Var& x, double slope);
Var sigmoid(const Var& x);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var scale(const Var& x, double factor);
/// Elementwise product with a constant tensor of identical shape.
Var mul_const(const Var& x, const Tensor& c);
/// Product with a constant (T, H, W) or (H, W) mask broadcast over channels (and time).
Var mul_mask(const Var& x, const Tensor& mask);
Var concat_channels(std::span<const Var> parts);
/// Joins (C, 1, H, W) pieces along time.
Var stack_time(std::span<const Var> frames);
Var slice_time(const Var& x, int t0, int length);
Var slice_channels(const Var& x, int c0, int count);
/// Nearest-neighbour spatial upsampling by an integer factor; time is untouched.
Var upsample_spatial(const Var& x, int factor);
/// Crops or zero-pads spatially to (H, W) anchored at the origin.
Var fit_spatial(const Var& x, int height, int width);
Var reshape(const Var& x, std::vector<int> shape);

// Scalar reductions.
Var mean(const Var& x);
Var sum(const Var& x);
/// Mean of |a - b| over all entries.
Var mean_abs_diff(const Var& a, const Var& b);
/// Mean of (a - b)^2 over all entries.
Var mean_sq_diff(const Var& a, const Var& b);
/// Weighted sum of scalars.
Var weighted_sum(std::span<const Var> scalars, std::span<const double> weights);

}  // namespace seqcr::nn
