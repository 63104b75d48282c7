#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace protoaudio::ad {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_string(const Shape& shape);

struct TensorNode;
using NodePtr = std::shared_ptr<TensorNode>;

/// Backward rule of a recorded op. Receives the op's output node, whose
/// `grad` is populated, and accumulates into the parents' gradients.
using BackwardFn = std::function<void(TensorNode& out)>;

struct TensorNode {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until a gradient is accumulated
  bool requires_grad = false;
  std::vector<NodePtr> parents;
  BackwardFn backward;  // empty for leaves

  /// Allocates `grad` (zero-filled) when absent and returns it.
  std::vector<double>& grad_buffer();
};

/// Shared handle to a node of the computation graph. Copies alias the same
/// storage; use clone() for a deep copy.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(NodePtr node) : node_(std::move(node)) {}

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> data, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const noexcept { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t dim(std::size_t i) const { return node_->shape.at(i); }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t size() const { return node_->data.size(); }

  std::span<const double> data() const { return node_->data; }
  std::span<double> mutable_data() { return node_->data; }
  double item() const;

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool flag) { node_->requires_grad = flag; }
  bool has_grad() const { return !node_->grad.empty(); }
  std::span<const double> grad() const { return node_->grad; }
  std::span<double> mutable_grad() { return node_->grad; }
  void zero_grad();

  /// Deep copy of shape and data as a fresh leaf.
  Tensor clone() const;

  const NodePtr& node() const { return node_; }

 private:
  NodePtr node_;
};

/// Disables graph recording on the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled() noexcept;

/// Builds an op output. The graph edge is recorded only when grad mode is on
/// and some parent requires a gradient. Throws if `data` holds NaN or Inf.
Tensor make_result(Shape shape, std::vector<double> data, const std::vector<Tensor>& parents,
                   BackwardFn backward);

// Elementwise and reductions.
Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor sum(const Tensor& x);
Tensor relu(const Tensor& x);

/// Cross-correlation. input [B,Cin,H,W], weight [Cout,Cin,kh,kw], bias [Cout].
Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, std::size_t stride = 1,
              std::size_t pad = 0);

/// 2x2 max pooling with stride 2; H and W must be even. Ties go to the first
/// element in row-major window order.
Tensor maxpool2(const Tensor& x);

/// [B,C,H,W] -> [B,C].
Tensor global_avg_pool(const Tensor& x);

/// x [B,D], w [E,D], b [E] -> [B,E].
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);

/// Accumulates d(loss)/d(t) into every requires_grad tensor reachable from
/// `loss`. Leaf gradients accumulate across calls; intermediate buffers are
/// reset on every call.
void backward(const Tensor& loss);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  long step_count = 0;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState for_param(const Tensor& param, const AdamConfig& cfg = {});
};

/// One bias-corrected Adam update per parameter, then zeroes the gradients.
/// Throws if any parameter has no gradient.
void adam_step(std::span<Tensor> params, std::span<AdamState> states);

}  // namespace protoaudio::ad
