#pragma once

// Dense float64 tensors with define-by-run reverse-mode differentiation.
//
// A Tensor is a cheap handle onto a shared graph node. Operations build a
// fresh node per call and, when any operand requires a gradient, record the
// edge together with a backward rule. Calling backward() on a scalar walks
// the graph once and accumulates d(loss)/d(leaf) into every leaf that
// requires a gradient.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace wasecom {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Thrown when operand shapes do not conform.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

namespace detail {
struct Node;
}

class Tensor {
 public:
  Tensor();

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values,
                     bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t size() const;
  std::size_t dim(std::size_t axis) const;

  std::span<const double> data() const;
  /// Writable view of the payload. Only leaves may be written; mutating an
  /// interior node would silently invalidate its recorded backward rule.
  std::span<double> mutable_data();
  double item() const;
  std::vector<double> to_vector() const;

  bool requires_grad() const;
  void set_requires_grad(bool flag);
  bool is_leaf() const;
  const char* op_name() const;

  bool has_grad() const;
  /// Accumulated gradient; zeros when nothing has been accumulated yet.
  std::vector<double> grad() const;
  std::span<const double> grad_view() const;
  void zero_grad();

  /// Copy of the values with no graph history.
  Tensor detach() const;

  /// Reverse pass from this scalar. Throws std::logic_error if the graph
  /// rooted here was already differentiated.
  void backward() const;

  bool same_node(const Tensor& other) const { return node_ == other.node_; }
  bool defined() const { return static_cast<bool>(node_); }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node);
  friend class TensorAccess;

  std::shared_ptr<detail::Node> node_;
};

// Elementwise binary ops broadcast numpy-style (trailing dimensions aligned,
// size-1 dimensions stretched).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

Tensor operator+(const Tensor& a, const Tensor& b);
Tensor operator-(const Tensor& a, const Tensor& b);
Tensor operator*(const Tensor& a, const Tensor& b);
Tensor operator/(const Tensor& a, const Tensor& b);
Tensor operator-(const Tensor& a);

/// [m,k] x [k,n] -> [m,n]
Tensor matmul(const Tensor& a, const Tensor& b);

Tensor relu(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor exp(const Tensor& x);
/// Natural log; throws std::domain_error on non-positive input.
Tensor log(const Tensor& x);
/// Throws std::domain_error on negative input.
Tensor sqrt(const Tensor& x);
Tensor square(const Tensor& x);
Tensor neg(const Tensor& x);
Tensor scale(const Tensor& x, double factor);
Tensor add_scalar(const Tensor& x, double value);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
Tensor sum_axis(const Tensor& x, std::size_t axis, bool keepdim = false);
Tensor mean_axis(const Tensor& x, std::size_t axis, bool keepdim = false);
/// Stable log(sum(exp(x))) along one axis.
Tensor logsumexp(const Tensor& x, std::size_t axis, bool keepdim = false);
/// Log-softmax along the last axis.
Tensor log_softmax(const Tensor& x);

Tensor reshape(const Tensor& x, Shape shape);
/// Stacks equally shaped tensors along a new leading axis.
Tensor stack(std::span<const Tensor> parts);

/// Row gather: out[i] = x[i, index[i]] for a 2-D x.
Tensor pick(const Tensor& x, std::span<const std::uint32_t> index);
/// Table lookup: out[i, :] = table[ids[i], :].
Tensor embedding(const Tensor& table, std::span<const std::uint32_t> ids);

void backward(const Tensor& loss);

}  // namespace wasecom
