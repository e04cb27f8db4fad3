#pragma once

// Minimal reverse-mode automatic differentiation over dense row-major
// float64 arrays.
//
// Every op returns a fresh Tensor. When at least one input requires a
// gradient (and no NoGradGuard is active) the result records its inputs and
// a backward closure. Tensor::backward() linearizes the recorded graph into
// a tape in topological order and replays it in reverse, accumulating each
// edge's contribution exactly once.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace hit {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

struct Node;
using NodePtr = std::shared_ptr<Node>;
using BackwardFn = std::function<void(Node& self)>;

struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until a backward pass touches the node
  bool requires_grad = false;
  std::vector<NodePtr> inputs;
  BackwardFn backward;
  const char* op = "leaf";

  // Lazily sized, zero-initialized gradient buffer.
  std::vector<double>& grad_buffer();
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(NodePtr node) : node_(std::move(node)) {}

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double value);

  // Builds an op result. `backward` is attached only when some input needs
  // a gradient and gradient recording is enabled.
  static Tensor from_op(const char* op, Shape shape, std::vector<double> values,
                        std::vector<Tensor> inputs, BackwardFn backward);

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const;
  std::size_t dim() const { return shape().size(); }
  std::size_t size(std::size_t axis) const;
  std::size_t numel() const;
  bool requires_grad() const;

  std::span<const double> data() const;
  // Only meaningful for leaves (parameters); ops never mutate their inputs.
  std::span<double> mutable_data();
  bool has_grad() const;
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad();

  double item() const;
  double operator[](std::size_t flat) const { return data()[flat]; }

  // Seeds d(self)/d(self) = 1; self must hold exactly one element.
  void backward() const;

  Tensor detach() const;

  const NodePtr& node() const { return node_; }

 private:
  NodePtr node_;
};

// Disables graph recording on the current thread for its lifetime.
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

// Topologically ordered list of graph nodes reachable from `root` that
// participate in differentiation. Inputs always precede their consumers.
std::vector<Node*> build_tape(const Tensor& root);

// --- linear algebra ---------------------------------------------------------

// [m,k] x [k,n] -> [m,n]. No broadcasting.
Tensor matmul(const Tensor& a, const Tensor& b);
// [B,m,k] x [B,k,n] -> [B,m,n].
Tensor bmm(const Tensor& a, const Tensor& b);
// Swaps the last two axes (rank >= 2).
Tensor transpose(const Tensor& a);

// --- elementwise ------------------------------------------------------------

// Binary ops broadcast with trailing-dimension alignment.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

Tensor neg(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor square(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);
Tensor sqrt(const Tensor& x);
Tensor abs(const Tensor& x);
Tensor sin(const Tensor& x);
Tensor cos(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor softplus(const Tensor& x);
Tensor scale(const Tensor& x, double factor);
Tensor add_scalar(const Tensor& x, double value);

// Forward identity, contributes nothing to x's gradient.
Tensor stop_gradient(const Tensor& x);

Tensor operator+(const Tensor& a, const Tensor& b);
Tensor operator-(const Tensor& a, const Tensor& b);
Tensor operator*(const Tensor& a, const Tensor& b);
Tensor operator/(const Tensor& a, const Tensor& b);
Tensor operator-(const Tensor& x);
Tensor operator*(double s, const Tensor& x);
Tensor operator*(const Tensor& x, double s);
Tensor operator+(const Tensor& x, double s);
Tensor operator-(const Tensor& x, double s);
Tensor operator-(double s, const Tensor& x);

// --- reductions ---------------------------------------------------------------

Tensor reduce_sum(const Tensor& x);
Tensor reduce_sum(const Tensor& x, std::size_t axis, bool keepdim = false);
Tensor reduce_mean(const Tensor& x);
Tensor reduce_mean(const Tensor& x, std::size_t axis, bool keepdim = false);
// Ties resolve to the lowest index; the subgradient goes there only.
Tensor reduce_max(const Tensor& x);
Tensor reduce_max(const Tensor& x, std::size_t axis, bool keepdim = false);
Tensor reduce_min(const Tensor& x, std::size_t axis, bool keepdim = false);

// Stabilized log-sum-exp over the last axis.
Tensor logsumexp(const Tensor& x);
// Softmax over the last axis (rows of a matrix).
Tensor softmax_rows(const Tensor& x);

// --- shape manipulation -------------------------------------------------------

Tensor reshape(const Tensor& x, Shape shape);
Tensor broadcast_to(const Tensor& x, const Shape& shape);
Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
Tensor slice(const Tensor& x, std::size_t axis, std::size_t begin, std::size_t end);

// Mean of the rows of x[M,D] grouped by segment id; empty segments are zero.
Tensor segment_mean(const Tensor& x, std::span<const std::size_t> segment,
                    std::size_t num_segments);

}  // namespace hit
