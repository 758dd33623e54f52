#include "lsd/tensor.hpp"

#include <cblas.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_set>
#include <utility>

#include "lsd/errors.hpp"

namespace lsd {

namespace {

#ifdef NDEBUG
bool g_finite_checks = false;
#else
bool g_finite_checks = true;
#endif

using detail::Node;
using NodePtr = std::shared_ptr<Node>;

void require(bool ok, const std::string& what) {
  if (!ok) throw ContractError(what);
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  require(a.defined() && b.defined(), std::string(op) + ": undefined operand");
  if (a.shape() != b.shape()) {
    throw ContractError(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  }
}

void require_rank(const char* op, const Tensor& a, std::size_t rank) {
  require(a.defined(), std::string(op) + ": undefined operand");
  if (a.rank() != rank) {
    throw ContractError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got shape " +
                        to_string(a.shape()));
  }
}

Tensor make_result(const char* op, Shape shape, std::vector<double> value, std::vector<NodePtr> parents,
                   std::function<void(Node&)> backward) {
  if (g_finite_checks) {
    for (double v : value) {
      if (!std::isfinite(v)) throw ContractError(std::string(op) + ": produced a non-finite value");
    }
  }
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  const bool needs_grad =
      std::any_of(parents.begin(), parents.end(), [](const NodePtr& p) { return p->requires_grad; });
  if (needs_grad) {
    node->requires_grad = true;
    node->parents = std::move(parents);
    node->backward = std::move(backward);
  }
  return Tensor(std::move(node));
}

// Elementwise unary op with derivative expressed through input x and output y.
template <typename Fwd, typename Deriv>
Tensor unary(const char* op, const Tensor& a, Fwd fwd, Deriv deriv) {
  require(a.defined(), std::string(op) + ": undefined operand");
  const auto in = a.data();
  std::vector<double> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = fwd(in[i]);
  return make_result(op, a.shape(), std::move(out), {a.node()}, [deriv](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    auto& g = p.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * deriv(p.value[i], self.value[i]);
  });
}

double sigmoid_scalar(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? ", " : "") << shape[i];
  os << ')';
  return os.str();
}

std::vector<double>& detail::Node::grad_buffer() {
  if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
  return grad;
}

void set_finite_checks(bool enabled) { g_finite_checks = enabled; }
bool finite_checks() { return g_finite_checks; }

// ---------------------------------------------------------------------------
// Tensor

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  for (std::size_t d : shape) require(d > 0, "tensor dimensions must be positive, got " + to_string(shape));
  const std::size_t n = numel(shape);
  return from(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  for (std::size_t d : shape) require(d > 0, "tensor dimensions must be positive, got " + to_string(shape));
  if (numel(shape) != values.size()) {
    throw ContractError("tensor data length " + std::to_string(values.size()) + " does not match shape " +
                        to_string(shape));
  }
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value, bool requires_grad) { return from({}, {value}, requires_grad); }

const Shape& Tensor::shape() const {
  require(defined(), "use of undefined tensor");
  return node_->shape;
}

std::size_t Tensor::dim(std::size_t axis) const {
  require(axis < rank(), "axis " + std::to_string(axis) + " out of range for shape " + to_string(shape()));
  return node_->shape[axis];
}

std::size_t Tensor::size() const { return defined() ? node_->value.size() : 0; }

std::span<const double> Tensor::data() const {
  require(defined(), "use of undefined tensor");
  return node_->value;
}

std::span<double> Tensor::mutable_data() {
  require(defined(), "use of undefined tensor");
  return node_->value;
}

double Tensor::item() const {
  require(size() == 1, "item() requires a single-element tensor, got shape " + to_string(shape()));
  return node_->value[0];
}

bool Tensor::requires_grad() const { return defined() && node_->requires_grad; }

void Tensor::set_requires_grad(bool flag) {
  require(defined(), "use of undefined tensor");
  require(node_->is_leaf(), "requires_grad can only be changed on leaf tensors");
  node_->requires_grad = flag;
}

bool Tensor::has_grad() const { return defined() && node_->grad.size() == node_->value.size(); }

std::span<const double> Tensor::grad() const {
  require(has_grad(), "tensor has no gradient");
  return node_->grad;
}

void Tensor::zero_grad() {
  if (defined()) node_->grad.clear();
}

void Tensor::backward() const {
  require(defined(), "backward on undefined tensor");
  if (size() != 1) throw ContractError("backward requires a scalar loss, got shape " + to_string(shape()));
  if (!node_->requires_grad) return;

  // Iterative post-order DFS restricted to nodes that need gradients.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack{{node_.get(), 0}};
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (Node* n : order) {
    if (!n->is_leaf()) n->grad.assign(n->value.size(), 0.0);
  }
  node_->grad_buffer()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->is_leaf()) continue;
    n->backward(*n);
    n->grad.clear();
    n->grad.shrink_to_fit();
  }
}

Tensor Tensor::detach() const {
  require(defined(), "detach of undefined tensor");
  return from(node_->shape, node_->value, false);
}

// ---------------------------------------------------------------------------
// Elementwise

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape("add", a, b);
  std::vector<double> out(a.size());
  const auto x = a.data();
  const auto y = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + y[i];
  return make_result("add", a.shape(), std::move(out), {a.node(), b.node()}, [](Node& self) {
    for (auto& p : self.parents) {
      if (!p->requires_grad) continue;
      auto& g = p->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape("sub", a, b);
  std::vector<double> out(a.size());
  const auto x = a.data();
  const auto y = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] - y[i];
  return make_result("sub", a.shape(), std::move(out), {a.node(), b.node()}, [](Node& self) {
    const double sign[2] = {1.0, -1.0};
    for (std::size_t k = 0; k < 2; ++k) {
      Node& p = *self.parents[k];
      if (!p.requires_grad) continue;
      auto& g = p.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += sign[k] * self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape("mul", a, b);
  std::vector<double> out(a.size());
  const auto x = a.data();
  const auto y = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * y[i];
  return make_result("mul", a.shape(), std::move(out), {a.node(), b.node()}, [](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    if (pa.requires_grad) {
      auto& g = pa.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pb.value[i];
    }
    if (pb.requires_grad) {
      auto& g = pb.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pa.value[i];
    }
  });
}

Tensor scale(const Tensor& a, double s) {
  return unary("scale", a, [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Tensor add_scalar(const Tensor& a, double s) {
  return unary("add_scalar", a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

// ---------------------------------------------------------------------------
// Linear algebra

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank("matmul", a, 2);
  require_rank("matmul", b, 2);
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw ContractError("matmul: shape mismatch " + to_string(a.shape()) + " x " + to_string(b.shape()));
  }
  std::vector<double> out(m * n, 0.0);
  cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, m, n, k, 1.0, a.data().data(), k, b.data().data(), n,
              0.0, out.data(), n);
  return make_result("matmul", {m, n}, std::move(out), {a.node(), b.node()}, [m, k, n](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    if (pa.requires_grad) {
      cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasTrans, m, k, n, 1.0, self.grad.data(), n, pb.value.data(), n,
                  1.0, pa.grad_buffer().data(), k);
    }
    if (pb.requires_grad) {
      cblas_dgemm(CblasRowMajor, CblasTrans, CblasNoTrans, k, n, m, 1.0, pa.value.data(), k, self.grad.data(), n,
                  1.0, pb.grad_buffer().data(), n);
    }
  });
}

Tensor affine(const Tensor& x, const Tensor& w, const Tensor& bias) {
  require_rank("affine", x, 2);
  require_rank("affine", w, 2);
  require_rank("affine", bias, 1);
  const std::size_t batch = x.dim(0), in = x.dim(1), out_dim = w.dim(1);
  if (w.dim(0) != in || bias.dim(0) != out_dim) {
    throw ContractError("affine: shape mismatch x" + to_string(x.shape()) + " w" + to_string(w.shape()) + " b" +
                        to_string(bias.shape()));
  }
  std::vector<double> out(batch * out_dim);
  const auto b = bias.data();
  for (std::size_t r = 0; r < batch; ++r) std::copy(b.begin(), b.end(), out.begin() + r * out_dim);
  cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, batch, out_dim, in, 1.0, x.data().data(), in,
              w.data().data(), out_dim, 1.0, out.data(), out_dim);
  return make_result("affine", {batch, out_dim}, std::move(out), {x.node(), w.node(), bias.node()},
                     [batch, in, out_dim](Node& self) {
                       Node& px = *self.parents[0];
                       Node& pw = *self.parents[1];
                       Node& pb = *self.parents[2];
                       if (px.requires_grad) {
                         cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasTrans, batch, in, out_dim, 1.0,
                                     self.grad.data(), out_dim, pw.value.data(), out_dim, 1.0,
                                     px.grad_buffer().data(), in);
                       }
                       if (pw.requires_grad) {
                         cblas_dgemm(CblasRowMajor, CblasTrans, CblasNoTrans, in, out_dim, batch, 1.0,
                                     px.value.data(), in, self.grad.data(), out_dim, 1.0,
                                     pw.grad_buffer().data(), out_dim);
                       }
                       if (pb.requires_grad) {
                         auto& g = pb.grad_buffer();
                         for (std::size_t r = 0; r < batch; ++r) {
                           for (std::size_t j = 0; j < out_dim; ++j) g[j] += self.grad[r * out_dim + j];
                         }
                       }
                     });
}

// ---------------------------------------------------------------------------
// Nonlinearities

Tensor silu(const Tensor& a) {
  return unary(
      "silu", a, [](double x) { return x * sigmoid_scalar(x); },
      [](double x, double) {
        const double s = sigmoid_scalar(x);
        return s * (1.0 + x * (1.0 - s));
      });
}

Tensor sigmoid(const Tensor& a) {
  return unary("sigmoid", a, sigmoid_scalar, [](double, double y) { return y * (1.0 - y); });
}

Tensor softplus(const Tensor& a) {
  return unary(
      "softplus", a, [](double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); },
      [](double x, double) { return sigmoid_scalar(x); });
}

Tensor exp(const Tensor& a) {
  return unary("exp", a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
  return unary("log", a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
  require(lo <= hi, "clamp: lo > hi");
  return unary(
      "clamp", a, [lo, hi](double x) { return std::clamp(x, lo, hi); },
      [lo, hi](double x, double) { return (x > lo && x < hi) ? 1.0 : 0.0; });
}

// ---------------------------------------------------------------------------
// Shape manipulation

Tensor reshape(const Tensor& a, Shape shape) {
  require(a.defined(), "reshape: undefined operand");
  if (numel(shape) != a.size()) {
    throw ContractError("reshape: cannot view " + to_string(a.shape()) + " as " + to_string(shape));
  }
  std::vector<double> out(a.data().begin(), a.data().end());
  return make_result("reshape", std::move(shape), std::move(out), {a.node()}, [](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    auto& g = p.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

Tensor concat(const Tensor& a, const Tensor& b) {
  require_rank("concat", a, 2);
  require_rank("concat", b, 2);
  if (a.dim(0) != b.dim(0)) {
    throw ContractError("concat: row mismatch " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  }
  const std::size_t rows = a.dim(0), ca = a.dim(1), cb = b.dim(1), c = ca + cb;
  std::vector<double> out(rows * c);
  const auto x = a.data();
  const auto y = b.data();
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(x.begin() + r * ca, ca, out.begin() + r * c);
    std::copy_n(y.begin() + r * cb, cb, out.begin() + r * c + ca);
  }
  return make_result("concat", {rows, c}, std::move(out), {a.node(), b.node()}, [rows, ca, cb, c](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    for (std::size_t r = 0; r < rows; ++r) {
      if (pa.requires_grad) {
        auto& g = pa.grad_buffer();
        for (std::size_t j = 0; j < ca; ++j) g[r * ca + j] += self.grad[r * c + j];
      }
      if (pb.requires_grad) {
        auto& g = pb.grad_buffer();
        for (std::size_t j = 0; j < cb; ++j) g[r * cb + j] += self.grad[r * c + ca + j];
      }
    }
  });
}

Tensor gather_rows(const Tensor& table, const std::vector<std::size_t>& rows) {
  require_rank("gather_rows", table, 2);
  require(!rows.empty(), "gather_rows: empty index list");
  const std::size_t n = table.dim(0), cols = table.dim(1);
  for (std::size_t r : rows) {
    if (r >= n) {
      throw ContractError("gather_rows: index " + std::to_string(r) + " out of range for table " +
                          to_string(table.shape()));
    }
  }
  std::vector<double> out(rows.size() * cols);
  const auto t = table.data();
  for (std::size_t i = 0; i < rows.size(); ++i) std::copy_n(t.begin() + rows[i] * cols, cols, out.begin() + i * cols);
  return make_result("gather_rows", {rows.size(), cols}, std::move(out), {table.node()}, [rows, cols](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    auto& g = p.grad_buffer();
    for (std::size_t i = 0; i < rows.size(); ++i) {
      for (std::size_t j = 0; j < cols; ++j) g[rows[i] * cols + j] += self.grad[i * cols + j];
    }
  });
}

// ---------------------------------------------------------------------------
// Reductions

Tensor sum(const Tensor& a) {
  require(a.defined(), "sum: undefined operand");
  const auto x = a.data();
  const double total = std::accumulate(x.begin(), x.end(), 0.0);
  return make_result("sum", {}, {total}, {a.node()}, [](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    auto& g = p.grad_buffer();
    for (double& v : g) v += self.grad[0];
  });
}

Tensor mean(const Tensor& a) {
  require(a.defined(), "mean: undefined operand");
  return scale(sum(a), 1.0 / static_cast<double>(a.size()));
}

Tensor row_sum(const Tensor& a) {
  require_rank("row_sum", a, 2);
  const std::size_t rows = a.dim(0), cols = a.dim(1);
  std::vector<double> out(rows, 0.0);
  const auto x = a.data();
  for (std::size_t r = 0; r < rows; ++r) {
    out[r] = std::accumulate(x.begin() + r * cols, x.begin() + (r + 1) * cols, 0.0);
  }
  return make_result("row_sum", {rows}, std::move(out), {a.node()}, [rows, cols](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    auto& g = p.grad_buffer();
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t j = 0; j < cols; ++j) g[r * cols + j] += self.grad[r];
    }
  });
}

Tensor sq_norm(const Tensor& a) {
  require(a.defined(), "sq_norm: undefined operand");
  const auto x = a.data();
  double total = 0.0;
  for (double v : x) total += v * v;
  return make_result("sq_norm", {}, {total}, {a.node()}, [](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    auto& g = p.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += 2.0 * p.value[i] * self.grad[0];
  });
}

}  // namespace lsd
