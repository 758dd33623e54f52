#pragma once

// Dense float64 tensors with reverse-mode differentiation.
//
// A Tensor is a cheap handle to a graph node. Values are immutable once the
// node is created (parameters are the exception: the optimizer writes them in
// place through mutable_data()). Any op whose inputs require a gradient records
// a backward closure; backward() on a scalar walks the graph in reverse
// topological order and accumulates into every leaf that requires a gradient.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace lsd {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  bool is_leaf() const { return !backward; }
  std::vector<double>& grad_buffer();
};

}  // namespace detail

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t dim(std::size_t axis) const;
  std::size_t rank() const { return shape().size(); }
  std::size_t size() const;

  std::span<const double> data() const;
  /// In-place access for optimizers and parameter loading.
  std::span<double> mutable_data();
  double item() const;
  double operator[](std::size_t i) const { return data()[i]; }

  bool requires_grad() const;
  void set_requires_grad(bool flag);
  bool has_grad() const;
  std::span<const double> grad() const;
  void zero_grad();

  /// Reverse pass from a scalar. Leaf gradients accumulate across calls.
  void backward() const;

  /// Same values, no graph history, no gradient requirement.
  Tensor detach() const;
  Tensor clone() const { return detach(); }

  const std::shared_ptr<detail::Node>& node() const { return node_; }
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<detail::Node> node_;
};

/// When enabled, every op checks its output for NaN/Inf and throws ContractError.
/// Enabled by default in builds without NDEBUG.
void set_finite_checks(bool enabled);
bool finite_checks();

// Elementwise (identical shapes).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);

// Linear algebra. Matrices are row-major rank-2 tensors.
Tensor matmul(const Tensor& a, const Tensor& b);
/// x[B,in] * w[in,out] + bias[out].
Tensor affine(const Tensor& x, const Tensor& w, const Tensor& bias);

// Nonlinearities.
Tensor silu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor softplus(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
/// Gradient passes only where lo < a < hi.
Tensor clamp(const Tensor& a, double lo, double hi);

// Shape manipulation.
Tensor reshape(const Tensor& a, Shape shape);
/// Concatenate two rank-2 tensors along columns.
Tensor concat(const Tensor& a, const Tensor& b);
/// Rows of a rank-2 table selected by index; rows may repeat.
Tensor gather_rows(const Tensor& table, const std::vector<std::size_t>& rows);

// Reductions.
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
/// Rank-2 [B,n] -> [B].
Tensor row_sum(const Tensor& a);
Tensor sq_norm(const Tensor& a);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator*(double s, const Tensor& a) { return scale(a, s); }

}  // namespace lsd
