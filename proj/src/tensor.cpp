#include "hit/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "hit/errors.hpp"

namespace hit {

namespace {

thread_local bool t_grad_enabled = true;

std::vector<std::size_t> strides_of(const Shape& shape) {
  std::vector<std::size_t> strides(shape.size(), 1);
  for (std::size_t d = shape.size(); d-- > 1;) strides[d - 1] = strides[d] * shape[d];
  return strides;
}

Shape broadcast_shape(const Shape& a, const Shape& b, const char* op) {
  const std::size_t rank = std::max(a.size(), b.size());
  Shape out(rank, 1);
  for (std::size_t i = 0; i < rank; ++i) {
    const std::size_t da = i < rank - a.size() ? 1 : a[i - (rank - a.size())];
    const std::size_t db = i < rank - b.size() ? 1 : b[i - (rank - b.size())];
    if (da != db && da != 1 && db != 1) {
      throw DimensionError(std::string(op) + ": cannot broadcast " + shape_str(a) + " with " +
                           shape_str(b));
    }
    out[i] = da == 1 ? db : da;
  }
  return out;
}

// Strides of `in` viewed through the broadcast shape `out` (0 on expanded axes).
std::vector<std::size_t> broadcast_strides(const Shape& in, const Shape& out) {
  std::vector<std::size_t> strides(out.size(), 0);
  const auto own = strides_of(in);
  const std::size_t offset = out.size() - in.size();
  for (std::size_t i = 0; i < in.size(); ++i) {
    if (in[i] == out[i + offset] && in[i] != 1) strides[i + offset] = own[i];
  }
  return strides;
}

// Calls f(out_index, a_index, b_index) for every element of `out`.
template <class F>
void for_each_broadcast(const Shape& out, const std::vector<std::size_t>& sa,
                        const std::vector<std::size_t>& sb, F&& f) {
  const std::size_t n = shape_numel(out);
  if (n == 0) return;
  const std::size_t rank = out.size();
  std::vector<std::size_t> idx(rank, 0);
  std::size_t ia = 0;
  std::size_t ib = 0;
  for (std::size_t i = 0; i < n; ++i) {
    f(i, ia, ib);
    for (std::size_t d = rank; d-- > 0;) {
      ++idx[d];
      ia += sa[d];
      ib += sb[d];
      if (idx[d] < out[d]) break;
      ia -= sa[d] * out[d];
      ib -= sb[d] * out[d];
      idx[d] = 0;
    }
  }
}

struct AxisSplit {
  std::size_t outer = 1;
  std::size_t n = 1;
  std::size_t inner = 1;
};

AxisSplit split_at(const Shape& shape, std::size_t axis) {
  AxisSplit s;
  for (std::size_t d = 0; d < axis; ++d) s.outer *= shape[d];
  s.n = shape[axis];
  for (std::size_t d = axis + 1; d < shape.size(); ++d) s.inner *= shape[d];
  return s;
}

Shape reduced_shape(const Shape& shape, std::size_t axis, bool keepdim) {
  Shape out = shape;
  if (keepdim) {
    out[axis] = 1;
  } else {
    out.erase(out.begin() + static_cast<std::ptrdiff_t>(axis));
  }
  return out;
}

void check_axis(const Tensor& x, std::size_t axis, const char* op) {
  if (axis >= x.dim()) {
    throw DimensionError(std::string(op) + ": axis " + std::to_string(axis) +
                         " out of range for shape " + shape_str(x.shape()));
  }
}

template <class Fwd, class Deriv>
Tensor unary(const char* name, const Tensor& x, Fwd fwd, Deriv deriv) {
  const auto xs = x.data();
  std::vector<double> out(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) out[i] = fwd(xs[i]);
  return Tensor::from_op(name, x.shape(), std::move(out), {x}, [deriv](Node& self) {
    auto& in = *self.inputs[0];
    auto& g = in.grad_buffer();
    for (std::size_t i = 0; i < self.data.size(); ++i) {
      g[i] += self.grad[i] * deriv(in.data[i], self.data[i]);
    }
  });
}

// da/db are partial derivatives given (a, b, out).
template <class Fwd, class Da, class Db>
Tensor binary(const char* name, const Tensor& a, const Tensor& b, Fwd fwd, Da da, Db db) {
  const auto ad = a.data();
  const auto bd = b.data();
  if (a.shape() == b.shape()) {
    std::vector<double> out(ad.size());
    for (std::size_t i = 0; i < ad.size(); ++i) out[i] = fwd(ad[i], bd[i]);
    return Tensor::from_op(name, a.shape(), std::move(out), {a, b}, [da, db](Node& self) {
      auto& na = *self.inputs[0];
      auto& nb = *self.inputs[1];
      if (na.requires_grad) {
        auto& g = na.grad_buffer();
        for (std::size_t i = 0; i < self.data.size(); ++i)
          g[i] += self.grad[i] * da(na.data[i], nb.data[i], self.data[i]);
      }
      if (nb.requires_grad) {
        auto& g = nb.grad_buffer();
        for (std::size_t i = 0; i < self.data.size(); ++i)
          g[i] += self.grad[i] * db(na.data[i], nb.data[i], self.data[i]);
      }
    });
  }
  Shape out_shape = broadcast_shape(a.shape(), b.shape(), name);
  auto sa = broadcast_strides(a.shape(), out_shape);
  auto sb = broadcast_strides(b.shape(), out_shape);
  std::vector<double> out(shape_numel(out_shape));
  for_each_broadcast(out_shape, sa, sb, [&](std::size_t i, std::size_t ia, std::size_t ib) {
    out[i] = fwd(ad[ia], bd[ib]);
  });
  return Tensor::from_op(
      name, out_shape, std::move(out), {a, b},
      [da, db, sa = std::move(sa), sb = std::move(sb)](Node& self) {
        auto& na = *self.inputs[0];
        auto& nb = *self.inputs[1];
        if (na.requires_grad) {
          auto& g = na.grad_buffer();
          for_each_broadcast(self.shape, sa, sb, [&](std::size_t i, std::size_t ia, std::size_t ib) {
            g[ia] += self.grad[i] * da(na.data[ia], nb.data[ib], self.data[i]);
          });
        }
        if (nb.requires_grad) {
          auto& g = nb.grad_buffer();
          for_each_broadcast(self.shape, sa, sb, [&](std::size_t i, std::size_t ia, std::size_t ib) {
            g[ib] += self.grad[i] * db(na.data[ia], nb.data[ib], self.data[i]);
          });
        }
      });
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

// --- Node / Tensor ------------------------------------------------------------

std::vector<double>& Node::grad_buffer() {
  if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
  return grad;
}

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const std::size_t n = shape_numel(shape);
  return from(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  if (shape_numel(shape) != values.size()) {
    throw DimensionError("tensor: shape " + shape_str(shape) + " does not match " +
                         std::to_string(values.size()) + " values");
  }
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->data = std::move(values);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value) { return from({}, {value}); }

Tensor Tensor::from_op(const char* op, Shape shape, std::vector<double> values,
                       std::vector<Tensor> inputs, BackwardFn backward) {
  Tensor out = from(std::move(shape), std::move(values));
  out.node_->op = op;
  if (!t_grad_enabled) return out;
  const bool any = std::any_of(inputs.begin(), inputs.end(),
                               [](const Tensor& t) { return t.requires_grad(); });
  if (!any) return out;
  out.node_->requires_grad = true;
  out.node_->inputs.reserve(inputs.size());
  for (auto& t : inputs) out.node_->inputs.push_back(t.node_);
  out.node_->backward = std::move(backward);
  return out;
}

const Shape& Tensor::shape() const { return node_->shape; }

std::size_t Tensor::size(std::size_t axis) const {
  if (axis >= dim()) throw DimensionError("size: axis out of range for " + shape_str(shape()));
  return shape()[axis];
}

std::size_t Tensor::numel() const { return node_->data.size(); }
bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }
std::span<const double> Tensor::data() const { return node_->data; }
std::span<double> Tensor::mutable_data() { return node_->data; }
bool Tensor::has_grad() const { return node_ && node_->grad.size() == node_->data.size(); }
std::span<const double> Tensor::grad() const { return node_->grad; }
std::span<double> Tensor::mutable_grad() { return node_->grad_buffer(); }

void Tensor::zero_grad() {
  if (node_) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

double Tensor::item() const {
  if (numel() != 1) throw DimensionError("item: tensor has shape " + shape_str(shape()));
  return node_->data[0];
}

Tensor Tensor::detach() const { return Tensor::from(shape(), node_->data); }

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }
bool grad_enabled() { return t_grad_enabled; }

std::vector<Node*> build_tape(const Tensor& root) {
  std::vector<Node*> order;
  if (!root.requires_grad()) return order;
  std::unordered_set<Node*> visited;
  // Iterative post-order DFS; pair = (node, next input to visit).
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root.node().get(), 0);
  visited.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (child->requires_grad && visited.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  return order;
}

void Tensor::backward() const {
  if (numel() != 1) {
    throw DimensionError("backward: expected a single-element tensor, got " + shape_str(shape()));
  }
  if (!requires_grad()) return;
  const auto tape = build_tape(*this);
  for (Node* n : tape) {
    if (n->backward) n->grad.assign(n->data.size(), 0.0);
  }
  node_->grad_buffer()[0] += 1.0;
  for (auto it = tape.rbegin(); it != tape.rend(); ++it) {
    Node* n = *it;
    if (n->backward && !n->grad.empty()) n->backward(*n);
  }
}

// --- linear algebra ---------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.dim() != 2 || b.dim() != 2 || a.shape()[1] != b.shape()[0]) {
    throw DimensionError("matmul: incompatible shapes " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
  }
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  const auto ad = a.data();
  const auto bd = b.data();
  std::vector<double> out(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double* row = out.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ad[i * k + p];
      if (av == 0.0) continue;
      const double* brow = bd.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += av * brow[j];
    }
  }
  return Tensor::from_op("matmul", {m, n}, std::move(out), {a, b}, [m, k, n](Node& self) {
    auto& na = *self.inputs[0];
    auto& nb = *self.inputs[1];
    const double* g = self.grad.data();
    if (na.requires_grad) {
      auto& ga = na.grad_buffer();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          double acc = 0.0;
          const double* brow = nb.data.data() + p * n;
          const double* grow = g + i * n;
          for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
          ga[i * k + p] += acc;
        }
    }
    if (nb.requires_grad) {
      auto& gb = nb.grad_buffer();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          const double av = na.data[i * k + p];
          if (av == 0.0) continue;
          const double* grow = g + i * n;
          double* gbrow = gb.data() + p * n;
          for (std::size_t j = 0; j < n; ++j) gbrow[j] += av * grow[j];
        }
    }
  });
}

Tensor bmm(const Tensor& a, const Tensor& b) {
  if (a.dim() != 3 || b.dim() != 3 || a.shape()[0] != b.shape()[0] ||
      a.shape()[2] != b.shape()[1]) {
    throw DimensionError("bmm: incompatible shapes " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
  }
  const std::size_t batch = a.shape()[0], m = a.shape()[1], k = a.shape()[2], n = b.shape()[2];
  const auto ad = a.data();
  const auto bd = b.data();
  std::vector<double> out(batch * m * n, 0.0);
  for (std::size_t s = 0; s < batch; ++s) {
    const double* as = ad.data() + s * m * k;
    const double* bs = bd.data() + s * k * n;
    double* os = out.data() + s * m * n;
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t p = 0; p < k; ++p) {
        const double av = as[i * k + p];
        for (std::size_t j = 0; j < n; ++j) os[i * n + j] += av * bs[p * n + j];
      }
  }
  return Tensor::from_op("bmm", {batch, m, n}, std::move(out), {a, b},
                         [batch, m, k, n](Node& self) {
                           auto& na = *self.inputs[0];
                           auto& nb = *self.inputs[1];
                           for (std::size_t s = 0; s < batch; ++s) {
                             const double* g = self.grad.data() + s * m * n;
                             const double* as = na.data.data() + s * m * k;
                             const double* bs = nb.data.data() + s * k * n;
                             if (na.requires_grad) {
                               double* ga = na.grad_buffer().data() + s * m * k;
                               for (std::size_t i = 0; i < m; ++i)
                                 for (std::size_t p = 0; p < k; ++p) {
                                   double acc = 0.0;
                                   for (std::size_t j = 0; j < n; ++j)
                                     acc += g[i * n + j] * bs[p * n + j];
                                   ga[i * k + p] += acc;
                                 }
                             }
                             if (nb.requires_grad) {
                               double* gb = nb.grad_buffer().data() + s * k * n;
                               for (std::size_t i = 0; i < m; ++i)
                                 for (std::size_t p = 0; p < k; ++p) {
                                   const double av = as[i * k + p];
                                   for (std::size_t j = 0; j < n; ++j)
                                     gb[p * n + j] += av * g[i * n + j];
                                 }
                             }
                           }
                         });
}

Tensor transpose(const Tensor& a) {
  if (a.dim() < 2) throw DimensionError("transpose: rank < 2 for " + shape_str(a.shape()));
  Shape out_shape = a.shape();
  const std::size_t r = a.dim();
  const std::size_t rows = out_shape[r - 2], cols = out_shape[r - 1];
  std::swap(out_shape[r - 2], out_shape[r - 1]);
  const std::size_t batch = a.numel() / std::max<std::size_t>(rows * cols, 1);
  const auto ad = a.data();
  std::vector<double> out(ad.size());
  for (std::size_t s = 0; s < batch; ++s)
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j)
        out[s * rows * cols + j * rows + i] = ad[s * rows * cols + i * cols + j];
  return Tensor::from_op("transpose", out_shape, std::move(out), {a},
                         [batch, rows, cols](Node& self) {
                           auto& g = self.inputs[0]->grad_buffer();
                           for (std::size_t s = 0; s < batch; ++s)
                             for (std::size_t i = 0; i < rows; ++i)
                               for (std::size_t j = 0; j < cols; ++j)
                                 g[s * rows * cols + i * cols + j] +=
                                     self.grad[s * rows * cols + j * rows + i];
                         });
}

// --- elementwise ------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  return binary(
      "add", a, b, [](double x, double y) { return x + y; },
      [](double, double, double) { return 1.0; }, [](double, double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary(
      "sub", a, b, [](double x, double y) { return x - y; },
      [](double, double, double) { return 1.0; }, [](double, double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary(
      "mul", a, b, [](double x, double y) { return x * y; },
      [](double, double y, double) { return y; }, [](double x, double, double) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
  return binary(
      "div", a, b, [](double x, double y) { return x / y; },
      [](double, double y, double) { return 1.0 / y; },
      [](double, double y, double out) { return -out / y; });
}

Tensor neg(const Tensor& x) {
  return unary("neg", x, [](double v) { return -v; }, [](double, double) { return -1.0; });
}

Tensor relu(const Tensor& x) {
  return unary(
      "relu", x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor square(const Tensor& x) {
  return unary("square", x, [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

Tensor exp(const Tensor& x) {
  return unary("exp", x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& x) {
  return unary("log", x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Tensor sqrt(const Tensor& x) {
  return unary(
      "sqrt", x, [](double v) { return std::sqrt(v); }, [](double, double y) { return 0.5 / y; });
}

Tensor abs(const Tensor& x) {
  return unary(
      "abs", x, [](double v) { return std::fabs(v); },
      [](double v, double) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
}

Tensor sin(const Tensor& x) {
  return unary("sin", x, [](double v) { return std::sin(v); }, [](double v, double) { return std::cos(v); });
}

Tensor cos(const Tensor& x) {
  return unary("cos", x, [](double v) { return std::cos(v); }, [](double v, double) { return -std::sin(v); });
}

Tensor sigmoid(const Tensor& x) {
  return unary("sigmoid", x, stable_sigmoid, [](double, double y) { return y * (1.0 - y); });
}

Tensor softplus(const Tensor& x) {
  return unary(
      "softplus", x,
      [](double v) { return v > 0.0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v)); },
      [](double v, double) { return stable_sigmoid(v); });
}

Tensor scale(const Tensor& x, double factor) {
  return unary(
      "scale", x, [factor](double v) { return v * factor; },
      [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& x, double value) {
  return unary(
      "add_scalar", x, [value](double v) { return v + value; }, [](double, double) { return 1.0; });
}

Tensor stop_gradient(const Tensor& x) {
  return Tensor::from(x.shape(), std::vector<double>(x.data().begin(), x.data().end()));
}

Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
Tensor operator-(const Tensor& x) { return neg(x); }
Tensor operator*(double s, const Tensor& x) { return scale(x, s); }
Tensor operator*(const Tensor& x, double s) { return scale(x, s); }
Tensor operator+(const Tensor& x, double s) { return add_scalar(x, s); }
Tensor operator-(const Tensor& x, double s) { return add_scalar(x, -s); }
Tensor operator-(double s, const Tensor& x) { return add_scalar(neg(x), s); }

// --- reductions ---------------------------------------------------------------

Tensor reduce_sum(const Tensor& x) {
  const auto xd = x.data();
  double acc = 0.0;
  for (double v : xd) acc += v;
  return Tensor::from_op("reduce_sum", {}, {acc}, {x}, [](Node& self) {
    auto& g = self.inputs[0]->grad_buffer();
    for (double& v : g) v += self.grad[0];
  });
}

Tensor reduce_sum(const Tensor& x, std::size_t axis, bool keepdim) {
  check_axis(x, axis, "reduce_sum");
  const auto sp = split_at(x.shape(), axis);
  const auto xd = x.data();
  std::vector<double> out(sp.outer * sp.inner, 0.0);
  for (std::size_t o = 0; o < sp.outer; ++o)
    for (std::size_t i = 0; i < sp.n; ++i)
      for (std::size_t j = 0; j < sp.inner; ++j)
        out[o * sp.inner + j] += xd[(o * sp.n + i) * sp.inner + j];
  return Tensor::from_op("reduce_sum", reduced_shape(x.shape(), axis, keepdim), std::move(out), {x},
                         [sp](Node& self) {
                           auto& g = self.inputs[0]->grad_buffer();
                           for (std::size_t o = 0; o < sp.outer; ++o)
                             for (std::size_t i = 0; i < sp.n; ++i)
                               for (std::size_t j = 0; j < sp.inner; ++j)
                                 g[(o * sp.n + i) * sp.inner + j] += self.grad[o * sp.inner + j];
                         });
}

Tensor reduce_mean(const Tensor& x) {
  if (x.numel() == 0) throw DimensionError("reduce_mean: empty tensor");
  return scale(reduce_sum(x), 1.0 / static_cast<double>(x.numel()));
}

Tensor reduce_mean(const Tensor& x, std::size_t axis, bool keepdim) {
  check_axis(x, axis, "reduce_mean");
  if (x.shape()[axis] == 0) throw DimensionError("reduce_mean: empty reduction axis");
  return scale(reduce_sum(x, axis, keepdim), 1.0 / static_cast<double>(x.shape()[axis]));
}

Tensor reduce_max(const Tensor& x) {
  const auto xd = x.data();
  if (xd.empty()) throw DimensionError("reduce_max: empty tensor");
  std::size_t best = 0;
  for (std::size_t i = 1; i < xd.size(); ++i)
    if (xd[i] > xd[best]) best = i;
  return Tensor::from_op("reduce_max", {}, {xd[best]}, {x}, [best](Node& self) {
    self.inputs[0]->grad_buffer()[best] += self.grad[0];
  });
}

Tensor reduce_max(const Tensor& x, std::size_t axis, bool keepdim) {
  check_axis(x, axis, "reduce_max");
  const auto sp = split_at(x.shape(), axis);
  if (sp.n == 0) throw DimensionError("reduce_max: empty reduction axis");
  const auto xd = x.data();
  std::vector<double> out(sp.outer * sp.inner);
  std::vector<std::size_t> arg(sp.outer * sp.inner, 0);
  for (std::size_t o = 0; o < sp.outer; ++o)
    for (std::size_t j = 0; j < sp.inner; ++j) {
      std::size_t best = 0;
      double bv = xd[o * sp.n * sp.inner + j];
      for (std::size_t i = 1; i < sp.n; ++i) {
        const double v = xd[(o * sp.n + i) * sp.inner + j];
        if (v > bv) {
          bv = v;
          best = i;
        }
      }
      out[o * sp.inner + j] = bv;
      arg[o * sp.inner + j] = best;
    }
  return Tensor::from_op("reduce_max", reduced_shape(x.shape(), axis, keepdim), std::move(out), {x},
                         [sp, arg = std::move(arg)](Node& self) {
                           auto& g = self.inputs[0]->grad_buffer();
                           for (std::size_t o = 0; o < sp.outer; ++o)
                             for (std::size_t j = 0; j < sp.inner; ++j) {
                               const std::size_t k = o * sp.inner + j;
                               g[(o * sp.n + arg[k]) * sp.inner + j] += self.grad[k];
                             }
                         });
}

Tensor reduce_min(const Tensor& x, std::size_t axis, bool keepdim) {
  return neg(reduce_max(neg(x), axis, keepdim));
}

Tensor logsumexp(const Tensor& x) {
  if (x.dim() == 0 || x.shape().back() == 0) {
    throw DimensionError("logsumexp: empty reduction axis in " + shape_str(x.shape()));
  }
  const std::size_t h = x.shape().back();
  const std::size_t rows = x.numel() / h;
  const auto xd = x.data();
  std::vector<double> out(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = xd.data() + r * h;
    const double m = *std::max_element(row, row + h);
    double s = 0.0;
    for (std::size_t i = 0; i < h; ++i) s += std::exp(row[i] - m);
    out[r] = m + std::log(s);
  }
  Shape out_shape(x.shape().begin(), x.shape().end() - 1);
  return Tensor::from_op("logsumexp", out_shape, std::move(out), {x}, [h, rows](Node& self) {
    auto& in = *self.inputs[0];
    auto& g = in.grad_buffer();
    for (std::size_t r = 0; r < rows; ++r) {
      const double gr = self.grad[r];
      if (gr == 0.0) continue;
      for (std::size_t i = 0; i < h; ++i)
        g[r * h + i] += gr * std::exp(in.data[r * h + i] - self.data[r]);
    }
  });
}

Tensor softmax_rows(const Tensor& x) {
  if (x.dim() == 0 || x.shape().back() == 0) {
    throw DimensionError("softmax_rows: empty row in " + shape_str(x.shape()));
  }
  const std::size_t n = x.shape().back();
  const std::size_t rows = x.numel() / n;
  const auto xd = x.data();
  std::vector<double> out(xd.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = xd.data() + r * n;
    double m = row[0];
    for (std::size_t i = 0; i < n; ++i) {
      if (std::isnan(row[i])) throw NumericError("softmax_rows: NaN input in row " + std::to_string(r));
      m = std::max(m, row[i]);
    }
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      out[r * n + i] = std::exp(row[i] - m);
      s += out[r * n + i];
    }
    for (std::size_t i = 0; i < n; ++i) out[r * n + i] /= s;
  }
  return Tensor::from_op("softmax_rows", x.shape(), std::move(out), {x}, [n, rows](Node& self) {
    auto& g = self.inputs[0]->grad_buffer();
    for (std::size_t r = 0; r < rows; ++r) {
      const double* y = self.data.data() + r * n;
      const double* gy = self.grad.data() + r * n;
      double dot = 0.0;
      for (std::size_t i = 0; i < n; ++i) dot += gy[i] * y[i];
      for (std::size_t i = 0; i < n; ++i) g[r * n + i] += y[i] * (gy[i] - dot);
    }
  });
}

// --- shape manipulation -------------------------------------------------------

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw DimensionError("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
  }
  return Tensor::from_op("reshape", std::move(shape),
                         std::vector<double>(x.data().begin(), x.data().end()), {x}, [](Node& self) {
                           auto& g = self.inputs[0]->grad_buffer();
                           for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
                         });
}

Tensor broadcast_to(const Tensor& x, const Shape& shape) {
  if (broadcast_shape(x.shape(), shape, "broadcast_to") != shape) {
    throw DimensionError("broadcast_to: cannot broadcast " + shape_str(x.shape()) + " to " +
                         shape_str(shape));
  }
  auto sx = broadcast_strides(x.shape(), shape);
  std::vector<std::size_t> none(shape.size(), 0);
  const auto xd = x.data();
  std::vector<double> out(shape_numel(shape));
  for_each_broadcast(shape, sx, none, [&](std::size_t i, std::size_t ix, std::size_t) { out[i] = xd[ix]; });
  return Tensor::from_op("broadcast_to", shape, std::move(out), {x},
                         [sx = std::move(sx), none = std::move(none)](Node& self) {
                           auto& g = self.inputs[0]->grad_buffer();
                           for_each_broadcast(self.shape, sx, none,
                                              [&](std::size_t i, std::size_t ix, std::size_t) {
                                                g[ix] += self.grad[i];
                                              });
                         });
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw DimensionError("concat: no inputs");
  const Shape& ref = parts.front().shape();
  if (axis >= ref.size()) throw DimensionError("concat: axis out of range for " + shape_str(ref));
  Shape out_shape = ref;
  out_shape[axis] = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    bool ok = s.size() == ref.size();
    for (std::size_t d = 0; ok && d < s.size(); ++d) ok = d == axis || s[d] == ref[d];
    if (!ok) {
      throw DimensionError("concat: incompatible shapes " + shape_str(ref) + " and " + shape_str(s));
    }
    out_shape[axis] += s[axis];
  }
  const auto sp = split_at(out_shape, axis);
  std::vector<std::size_t> widths;
  std::vector<double> out(shape_numel(out_shape));
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const std::size_t w = p.shape()[axis];
    const auto pd = p.data();
    for (std::size_t o = 0; o < sp.outer; ++o)
      std::copy_n(pd.data() + o * w * sp.inner, w * sp.inner,
                  out.data() + (o * sp.n + offset) * sp.inner);
    widths.push_back(w);
    offset += w;
  }
  return Tensor::from_op("concat", out_shape, std::move(out), parts,
                         [sp, widths = std::move(widths)](Node& self) {
                           std::size_t offset = 0;
                           for (std::size_t k = 0; k < widths.size(); ++k) {
                             const std::size_t w = widths[k];
                             auto& in = *self.inputs[k];
                             if (in.requires_grad) {
                               auto& g = in.grad_buffer();
                               for (std::size_t o = 0; o < sp.outer; ++o)
                                 for (std::size_t i = 0; i < w * sp.inner; ++i)
                                   g[o * w * sp.inner + i] +=
                                       self.grad[(o * sp.n + offset) * sp.inner + i];
                             }
                             offset += w;
                           }
                         });
}

Tensor slice(const Tensor& x, std::size_t axis, std::size_t begin, std::size_t end) {
  check_axis(x, axis, "slice");
  if (begin > end || end > x.shape()[axis]) {
    throw DimensionError("slice: range [" + std::to_string(begin) + "," + std::to_string(end) +
                         ") invalid for axis " + std::to_string(axis) + " of " + shape_str(x.shape()));
  }
  const auto sp = split_at(x.shape(), axis);
  const std::size_t w = end - begin;
  Shape out_shape = x.shape();
  out_shape[axis] = w;
  const auto xd = x.data();
  std::vector<double> out(sp.outer * w * sp.inner);
  for (std::size_t o = 0; o < sp.outer; ++o)
    std::copy_n(xd.data() + (o * sp.n + begin) * sp.inner, w * sp.inner,
                out.data() + o * w * sp.inner);
  return Tensor::from_op("slice", out_shape, std::move(out), {x}, [sp, w, begin](Node& self) {
    auto& g = self.inputs[0]->grad_buffer();
    for (std::size_t o = 0; o < sp.outer; ++o)
      for (std::size_t i = 0; i < w * sp.inner; ++i)
        g[(o * sp.n + begin) * sp.inner + i] += self.grad[o * w * sp.inner + i];
  });
}

Tensor segment_mean(const Tensor& x, std::span<const std::size_t> segment, std::size_t num_segments) {
  if (x.dim() != 2 || x.shape()[0] != segment.size()) {
    throw DimensionError("segment_mean: expected [" + std::to_string(segment.size()) +
                         "xD] rows, got " + shape_str(x.shape()));
  }
  const std::size_t m = x.shape()[0], d = x.shape()[1];
  std::vector<double> counts(num_segments, 0.0);
  for (std::size_t s : segment) {
    if (s >= num_segments) throw DimensionError("segment_mean: segment id out of range");
    counts[s] += 1.0;
  }
  const auto xd = x.data();
  std::vector<double> out(num_segments * d, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < d; ++j) out[segment[i] * d + j] += xd[i * d + j];
  for (std::size_t s = 0; s < num_segments; ++s)
    if (counts[s] > 0.0)
      for (std::size_t j = 0; j < d; ++j) out[s * d + j] /= counts[s];
  std::vector<std::size_t> seg(segment.begin(), segment.end());
  return Tensor::from_op("segment_mean", {num_segments, d}, std::move(out), {x},
                         [d, seg = std::move(seg), counts = std::move(counts)](Node& self) {
                           auto& g = self.inputs[0]->grad_buffer();
                           for (std::size_t i = 0; i < seg.size(); ++i) {
                             const double inv = 1.0 / counts[seg[i]];
                             for (std::size_t j = 0; j < d; ++j)
                               g[i * d + j] += self.grad[seg[i] * d + j] * inv;
                           }
                         });
}

}  // namespace hit
