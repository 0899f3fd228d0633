#include "wasecom/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <sstream>
#include <unordered_set>
#include <utility>

namespace wasecom {

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  bool leaf = true;
  bool differentiated = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> inputs;
  // Reads self.grad and accumulates into the inputs that require a gradient.
  std::function<void(Node&)> rule;
};

}  // namespace detail

using detail::Node;
using NodePtr = std::shared_ptr<Node>;

class TensorAccess {
 public:
  static Node& node(const Tensor& t) {
    if (!t.node_) throw std::logic_error("operation on an undefined tensor");
    return *t.node_;
  }
  static const NodePtr& ptr(const Tensor& t) {
    node(t);
    return t.node_;
  }
  static Tensor wrap(NodePtr n) { return Tensor(std::move(n)); }
};

namespace {

Node& node_of(const Tensor& t) { return TensorAccess::node(t); }

std::vector<double>& grad_buffer(Node& n) {
  if (n.grad.empty()) n.grad.assign(n.value.size(), 0.0);
  return n.grad;
}

bool wants_grad(const NodePtr& n) { return n->requires_grad; }

Tensor make_result(const char* op, Shape shape, std::vector<double> value,
                   std::vector<NodePtr> inputs, std::function<void(Node&)> rule) {
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  n->op = op;
  n->leaf = false;
  if (std::any_of(inputs.begin(), inputs.end(), wants_grad)) {
    n->requires_grad = true;
    n->inputs = std::move(inputs);
    n->rule = std::move(rule);
  }
  return TensorAccess::wrap(std::move(n));
}

void check_shape(const Shape& shape) {
  for (auto d : shape) {
    if (d == 0) throw ShapeError("tensor dimensions must be positive, got " + shape_string(shape));
  }
  if (shape.empty()) throw ShapeError("tensor shape must have at least one dimension");
}

// Index maps from an output position to the operand positions it reads.
struct Broadcast {
  Shape out;
  bool same = false;
  std::vector<std::size_t> ia;
  std::vector<std::size_t> ib;
};

std::vector<std::size_t> broadcast_index(const Shape& in, const Shape& out) {
  const std::size_t r = out.size();
  const std::size_t offset = r - in.size();
  std::vector<std::size_t> stride(r, 0);
  std::size_t s = 1;
  for (std::size_t k = in.size(); k-- > 0;) {
    stride[k + offset] = in[k] == 1 ? 0 : s;
    s *= in[k];
  }
  const std::size_t total = numel(out);
  std::vector<std::size_t> index(total);
  std::vector<std::size_t> coord(r, 0);
  std::size_t pos = 0;
  for (std::size_t i = 0; i < total; ++i) {
    index[i] = pos;
    for (std::size_t k = r; k-- > 0;) {
      ++coord[k];
      pos += stride[k];
      if (coord[k] < out[k]) break;
      pos -= stride[k] * coord[k];
      coord[k] = 0;
    }
  }
  return index;
}

std::shared_ptr<const Broadcast> plan_broadcast(const char* op, const Shape& a, const Shape& b) {
  auto plan = std::make_shared<Broadcast>();
  if (a == b) {
    plan->out = a;
    plan->same = true;
    return plan;
  }
  const std::size_t r = std::max(a.size(), b.size());
  plan->out.assign(r, 1);
  for (std::size_t k = 0; k < r; ++k) {
    const std::size_t da = k < r - a.size() ? 1 : a[k - (r - a.size())];
    const std::size_t db = k < r - b.size() ? 1 : b[k - (r - b.size())];
    if (da != db && da != 1 && db != 1) {
      throw ShapeError(std::string(op) + ": shapes " + shape_string(a) + " and " +
                       shape_string(b) + " are not broadcast-compatible");
    }
    plan->out[k] = std::max(da, db);
  }
  plan->ia = broadcast_index(a, plan->out);
  plan->ib = broadcast_index(b, plan->out);
  return plan;
}

// f(a, b) -> out; da(a, b, out) and db(a, b, out) are the partials.
template <class F, class DA, class DB>
Tensor binary(const char* op, const Tensor& a, const Tensor& b, F f, DA da, DB db) {
  const Node& na = node_of(a);
  const Node& nb = node_of(b);
  auto plan = plan_broadcast(op, na.shape, nb.shape);
  const std::size_t n = numel(plan->out);
  std::vector<double> out(n);
  if (plan->same) {
    for (std::size_t i = 0; i < n; ++i) out[i] = f(na.value[i], nb.value[i]);
  } else {
    for (std::size_t i = 0; i < n; ++i) out[i] = f(na.value[plan->ia[i]], nb.value[plan->ib[i]]);
  }
  return make_result(op, plan->out, std::move(out), {TensorAccess::ptr(a), TensorAccess::ptr(b)},
                     [plan, da, db](Node& self) {
                       Node& xa = *self.inputs[0];
                       Node& xb = *self.inputs[1];
                       const std::size_t m = self.value.size();
                       if (xa.requires_grad) {
                         auto& g = grad_buffer(xa);
                         for (std::size_t i = 0; i < m; ++i) {
                           const std::size_t ja = plan->same ? i : plan->ia[i];
                           const std::size_t jb = plan->same ? i : plan->ib[i];
                           g[ja] += self.grad[i] * da(xa.value[ja], xb.value[jb], self.value[i]);
                         }
                       }
                       if (xb.requires_grad) {
                         auto& g = grad_buffer(xb);
                         for (std::size_t i = 0; i < m; ++i) {
                           const std::size_t ja = plan->same ? i : plan->ia[i];
                           const std::size_t jb = plan->same ? i : plan->ib[i];
                           g[jb] += self.grad[i] * db(xa.value[ja], xb.value[jb], self.value[i]);
                         }
                       }
                     });
}

// f(x) -> y; df(x, y) is dy/dx.
template <class F, class DF>
Tensor unary(const char* op, const Tensor& x, F f, DF df) {
  const Node& nx = node_of(x);
  std::vector<double> out(nx.value.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(nx.value[i]);
  return make_result(op, nx.shape, std::move(out), {TensorAccess::ptr(x)}, [df](Node& self) {
    Node& in = *self.inputs[0];
    auto& g = grad_buffer(in);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * df(in.value[i], self.value[i]);
  });
}

struct AxisSplit {
  std::size_t outer = 1;
  std::size_t n = 1;
  std::size_t inner = 1;
  Shape reduced;
};

AxisSplit split_axis(const char* op, const Shape& shape, std::size_t axis, bool keepdim) {
  if (axis >= shape.size()) {
    throw ShapeError(std::string(op) + ": axis " + std::to_string(axis) + " out of range for shape " +
                     shape_string(shape));
  }
  AxisSplit s;
  for (std::size_t k = 0; k < axis; ++k) s.outer *= shape[k];
  s.n = shape[axis];
  for (std::size_t k = axis + 1; k < shape.size(); ++k) s.inner *= shape[k];
  s.reduced = shape;
  if (keepdim) {
    s.reduced[axis] = 1;
  } else {
    s.reduced.erase(s.reduced.begin() + static_cast<std::ptrdiff_t>(axis));
    if (s.reduced.empty()) s.reduced = {1};
  }
  return s;
}

}  // namespace

std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

// ---------------------------------------------------------------------------
// Tensor handle

Tensor::Tensor() = default;
Tensor::Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  check_shape(shape);
  std::vector<double> v(numel(shape), value);
  return from(std::move(shape), std::move(v), requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  check_shape(shape);
  if (numel(shape) != values.size()) {
    throw ShapeError("tensor of shape " + shape_string(shape) + " needs " + std::to_string(numel(shape)) +
                     " values, got " + std::to_string(values.size()));
  }
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(values);
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

Tensor Tensor::scalar(double value, bool requires_grad) { return from({1}, {value}, requires_grad); }

const Shape& Tensor::shape() const { return node_of(*this).shape; }
std::size_t Tensor::size() const { return node_of(*this).value.size(); }

std::size_t Tensor::dim(std::size_t axis) const {
  const auto& s = shape();
  if (axis >= s.size()) throw ShapeError("dim: axis out of range for " + shape_string(s));
  return s[axis];
}

std::span<const double> Tensor::data() const { return node_of(*this).value; }

std::span<double> Tensor::mutable_data() {
  Node& n = node_of(*this);
  if (!n.leaf) throw std::logic_error(std::string("mutable_data: '") + n.op + "' is not a leaf tensor");
  return n.value;
}

double Tensor::item() const {
  const Node& n = node_of(*this);
  if (n.value.size() != 1) throw ShapeError("item: tensor of shape " + shape_string(n.shape) + " is not a scalar");
  return n.value[0];
}

std::vector<double> Tensor::to_vector() const { return node_of(*this).value; }

bool Tensor::requires_grad() const { return node_of(*this).requires_grad; }

void Tensor::set_requires_grad(bool flag) {
  Node& n = node_of(*this);
  if (!n.leaf) throw std::logic_error("set_requires_grad: only leaves carry a user-controlled flag");
  n.requires_grad = flag;
}

bool Tensor::is_leaf() const { return node_of(*this).leaf; }
const char* Tensor::op_name() const { return node_of(*this).op; }
bool Tensor::has_grad() const { return !node_of(*this).grad.empty(); }

std::vector<double> Tensor::grad() const {
  const Node& n = node_of(*this);
  if (n.grad.empty()) return std::vector<double>(n.value.size(), 0.0);
  return n.grad;
}

std::span<const double> Tensor::grad_view() const { return node_of(*this).grad; }

void Tensor::zero_grad() { node_of(*this).grad.clear(); }

Tensor Tensor::detach() const {
  const Node& n = node_of(*this);
  return from(n.shape, n.value, false);
}

void Tensor::backward() const {
  Node& root = node_of(*this);
  if (root.value.size() != 1) {
    throw ShapeError("backward: loss must be a scalar, got shape " + shape_string(root.shape));
  }
  if (root.differentiated) {
    throw std::logic_error("backward: this graph was already differentiated; rebuild the forward pass");
  }
  root.differentiated = true;
  if (!root.requires_grad) return;
  if (root.leaf) {
    grad_buffer(root)[0] += 1.0;
    return;
  }

  // Post-order DFS over the part of the graph that carries gradients.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{&root, 0}};
  seen.insert(&root);
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->inputs.size()) {
      Node* child = n->inputs[next++].get();
      if (child->requires_grad && !child->leaf && seen.insert(child).second) stack.emplace_back(child, 0);
      continue;
    }
    order.push_back(n);
    stack.pop_back();
  }
  for (Node* n : order) n->grad.assign(n->value.size(), 0.0);
  root.grad[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if ((*it)->rule) (*it)->rule(**it);
  }
}

void backward(const Tensor& loss) { loss.backward(); }

// ---------------------------------------------------------------------------
// Elementwise

Tensor add(const Tensor& a, const Tensor& b) {
  return binary(
      "add", a, b, [](double x, double y) { return x + y; }, [](double, double, double) { return 1.0; },
      [](double, double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary(
      "sub", a, b, [](double x, double y) { return x - y; }, [](double, double, double) { return 1.0; },
      [](double, double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary(
      "mul", a, b, [](double x, double y) { return x * y; }, [](double, double y, double) { return y; },
      [](double x, double, double) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
  return binary(
      "div", a, b, [](double x, double y) { return x / y; }, [](double, double y, double) { return 1.0 / y; },
      [](double, double y, double out) { return -out / y; });
}

Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
Tensor operator-(const Tensor& a) { return neg(a); }

Tensor relu(const Tensor& x) {
  return unary(
      "relu", x, [](double v) { return v > 0.0 ? v : 0.0; }, [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor tanh(const Tensor& x) {
  return unary(
      "tanh", x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor exp(const Tensor& x) {
  return unary(
      "exp", x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& x) {
  for (double v : x.data()) {
    if (!(v > 0.0)) throw std::domain_error("log: input must be positive, got " + std::to_string(v));
  }
  return unary(
      "log", x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Tensor sqrt(const Tensor& x) {
  for (double v : x.data()) {
    if (v < 0.0) throw std::domain_error("sqrt: input must be non-negative, got " + std::to_string(v));
  }
  return unary(
      "sqrt", x, [](double v) { return std::sqrt(v); }, [](double, double y) { return 0.5 / y; });
}

Tensor square(const Tensor& x) {
  return unary(
      "square", x, [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

Tensor neg(const Tensor& x) {
  return unary(
      "neg", x, [](double v) { return -v; }, [](double, double) { return -1.0; });
}

Tensor scale(const Tensor& x, double factor) {
  return unary(
      "scale", x, [factor](double v) { return v * factor; }, [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& x, double value) {
  return unary(
      "add_scalar", x, [value](double v) { return v + value; }, [](double, double) { return 1.0; });
}

// ---------------------------------------------------------------------------
// Linear algebra

Tensor matmul(const Tensor& a, const Tensor& b) {
  const Node& na = node_of(a);
  const Node& nb = node_of(b);
  if (na.shape.size() != 2 || nb.shape.size() != 2 || na.shape[1] != nb.shape[0]) {
    throw ShapeError("matmul: cannot multiply " + shape_string(na.shape) + " by " + shape_string(nb.shape));
  }
  const std::size_t m = na.shape[0], k = na.shape[1], n = nb.shape[1];
  std::vector<double> out(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double* row = out.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = na.value[i * k + p];
      const double* brow = nb.value.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += av * brow[j];
    }
  }
  return make_result("matmul", {m, n}, std::move(out), {TensorAccess::ptr(a), TensorAccess::ptr(b)},
                     [m, k, n](Node& self) {
                       Node& xa = *self.inputs[0];
                       Node& xb = *self.inputs[1];
                       const double* g = self.grad.data();
                       if (xa.requires_grad) {
                         // dA = dC * B^T
                         auto& ga = grad_buffer(xa);
                         for (std::size_t i = 0; i < m; ++i) {
                           for (std::size_t p = 0; p < k; ++p) {
                             const double* brow = xb.value.data() + p * n;
                             const double* grow = g + i * n;
                             double acc = 0.0;
                             for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
                             ga[i * k + p] += acc;
                           }
                         }
                       }
                       if (xb.requires_grad) {
                         // dB = A^T * dC
                         auto& gb = grad_buffer(xb);
                         for (std::size_t i = 0; i < m; ++i) {
                           const double* grow = g + i * n;
                           for (std::size_t p = 0; p < k; ++p) {
                             const double av = xa.value[i * k + p];
                             double* gbrow = gb.data() + p * n;
                             for (std::size_t j = 0; j < n; ++j) gbrow[j] += av * grow[j];
                           }
                         }
                       }
                     });
}

// ---------------------------------------------------------------------------
// Reductions

Tensor sum(const Tensor& x) {
  const Node& nx = node_of(x);
  double acc = 0.0;
  for (double v : nx.value) acc += v;
  return make_result("sum", {1}, {acc}, {TensorAccess::ptr(x)}, [](Node& self) {
    auto& g = grad_buffer(*self.inputs[0]);
    for (double& v : g) v += self.grad[0];
  });
}

Tensor mean(const Tensor& x) {
  const Node& nx = node_of(x);
  double acc = 0.0;
  for (double v : nx.value) acc += v;
  const double count = static_cast<double>(nx.value.size());
  return make_result("mean", {1}, {acc / count}, {TensorAccess::ptr(x)}, [count](Node& self) {
    auto& g = grad_buffer(*self.inputs[0]);
    const double share = self.grad[0] / count;
    for (double& v : g) v += share;
  });
}

namespace {

Tensor reduce_axis(const char* op, const Tensor& x, std::size_t axis, bool keepdim, bool average) {
  const Node& nx = node_of(x);
  const AxisSplit s = split_axis(op, nx.shape, axis, keepdim);
  std::vector<double> out(s.outer * s.inner, 0.0);
  const double count = static_cast<double>(s.n);
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      double acc = 0.0;
      for (std::size_t k = 0; k < s.n; ++k) acc += nx.value[(o * s.n + k) * s.inner + i];
      out[o * s.inner + i] = average ? acc / count : acc;
    }
  }
  return make_result(op, s.reduced, std::move(out), {TensorAccess::ptr(x)}, [s, average, count](Node& self) {
    auto& g = grad_buffer(*self.inputs[0]);
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t i = 0; i < s.inner; ++i) {
        const double up = average ? self.grad[o * s.inner + i] / count : self.grad[o * s.inner + i];
        for (std::size_t k = 0; k < s.n; ++k) g[(o * s.n + k) * s.inner + i] += up;
      }
    }
  });
}

}  // namespace

Tensor sum_axis(const Tensor& x, std::size_t axis, bool keepdim) {
  return reduce_axis("sum_axis", x, axis, keepdim, false);
}

Tensor mean_axis(const Tensor& x, std::size_t axis, bool keepdim) {
  return reduce_axis("mean_axis", x, axis, keepdim, true);
}

Tensor logsumexp(const Tensor& x, std::size_t axis, bool keepdim) {
  const Node& nx = node_of(x);
  const AxisSplit s = split_axis("logsumexp", nx.shape, axis, keepdim);
  std::vector<double> out(s.outer * s.inner);
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      double top = -std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < s.n; ++k) top = std::max(top, nx.value[(o * s.n + k) * s.inner + i]);
      double acc = 0.0;
      for (std::size_t k = 0; k < s.n; ++k) acc += std::exp(nx.value[(o * s.n + k) * s.inner + i] - top);
      out[o * s.inner + i] = top + std::log(acc);
    }
  }
  return make_result("logsumexp", s.reduced, std::move(out), {TensorAccess::ptr(x)}, [s](Node& self) {
    Node& in = *self.inputs[0];
    auto& g = grad_buffer(in);
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t i = 0; i < s.inner; ++i) {
        const double lse = self.value[o * s.inner + i];
        const double up = self.grad[o * s.inner + i];
        for (std::size_t k = 0; k < s.n; ++k) {
          const std::size_t j = (o * s.n + k) * s.inner + i;
          g[j] += up * std::exp(in.value[j] - lse);
        }
      }
    }
  });
}

Tensor log_softmax(const Tensor& x) {
  const Node& nx = node_of(x);
  const std::size_t cols = nx.shape.back();
  const std::size_t rows = nx.value.size() / cols;
  std::vector<double> out(nx.value.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = nx.value.data() + r * cols;
    const double top = *std::max_element(in, in + cols);
    double acc = 0.0;
    for (std::size_t c = 0; c < cols; ++c) acc += std::exp(in[c] - top);
    const double lse = top + std::log(acc);
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] = in[c] - lse;
  }
  return make_result("log_softmax", nx.shape, std::move(out), {TensorAccess::ptr(x)}, [rows, cols](Node& self) {
    auto& g = grad_buffer(*self.inputs[0]);
    for (std::size_t r = 0; r < rows; ++r) {
      double total = 0.0;
      for (std::size_t c = 0; c < cols; ++c) total += self.grad[r * cols + c];
      for (std::size_t c = 0; c < cols; ++c) {
        const std::size_t j = r * cols + c;
        g[j] += self.grad[j] - std::exp(self.value[j]) * total;
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Structural

Tensor reshape(const Tensor& x, Shape shape) {
  const Node& nx = node_of(x);
  check_shape(shape);
  if (numel(shape) != nx.value.size()) {
    throw ShapeError("reshape: cannot view " + shape_string(nx.shape) + " as " + shape_string(shape));
  }
  return make_result("reshape", std::move(shape), nx.value, {TensorAccess::ptr(x)}, [](Node& self) {
    auto& g = grad_buffer(*self.inputs[0]);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

Tensor stack(std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeError("stack: no tensors given");
  const Shape& base = parts.front().shape();
  const std::size_t each = numel(base);
  std::vector<double> out;
  out.reserve(each * parts.size());
  std::vector<NodePtr> inputs;
  for (const auto& p : parts) {
    if (p.shape() != base) {
      throw ShapeError("stack: shapes " + shape_string(base) + " and " + shape_string(p.shape()) + " differ");
    }
    auto d = p.data();
    out.insert(out.end(), d.begin(), d.end());
    inputs.push_back(TensorAccess::ptr(p));
  }
  Shape shape{parts.size()};
  shape.insert(shape.end(), base.begin(), base.end());
  return make_result("stack", std::move(shape), std::move(out), std::move(inputs), [each](Node& self) {
    for (std::size_t k = 0; k < self.inputs.size(); ++k) {
      Node& in = *self.inputs[k];
      if (!in.requires_grad) continue;
      auto& g = grad_buffer(in);
      for (std::size_t i = 0; i < each; ++i) g[i] += self.grad[k * each + i];
    }
  });
}

Tensor pick(const Tensor& x, std::span<const std::uint32_t> index) {
  const Node& nx = node_of(x);
  if (nx.shape.size() != 2 || nx.shape[0] != index.size()) {
    throw ShapeError("pick: need a [n,k] tensor with n == " + std::to_string(index.size()) + " indices, got " +
                     shape_string(nx.shape));
  }
  const std::size_t cols = nx.shape[1];
  std::vector<double> out(index.size());
  std::vector<std::uint32_t> idx(index.begin(), index.end());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    if (idx[r] >= cols) throw std::out_of_range("pick: index " + std::to_string(idx[r]) + " out of range");
    out[r] = nx.value[r * cols + idx[r]];
  }
  return make_result("pick", {idx.size()}, std::move(out), {TensorAccess::ptr(x)},
                     [idx = std::move(idx), cols](Node& self) {
                       auto& g = grad_buffer(*self.inputs[0]);
                       for (std::size_t r = 0; r < idx.size(); ++r) g[r * cols + idx[r]] += self.grad[r];
                     });
}

Tensor embedding(const Tensor& table, std::span<const std::uint32_t> ids) {
  const Node& nt = node_of(table);
  if (nt.shape.size() != 2) throw ShapeError("embedding: table must be [vocab,dim], got " + shape_string(nt.shape));
  if (ids.empty()) throw ShapeError("embedding: no ids given");
  const std::size_t vocab = nt.shape[0], width = nt.shape[1];
  std::vector<std::uint32_t> idx(ids.begin(), ids.end());
  std::vector<double> out(idx.size() * width);
  for (std::size_t r = 0; r < idx.size(); ++r) {
    if (idx[r] >= vocab) {
      throw std::out_of_range("embedding: token id " + std::to_string(idx[r]) + " >= vocab size " +
                              std::to_string(vocab));
    }
    std::copy_n(nt.value.data() + idx[r] * width, width, out.data() + r * width);
  }
  return make_result("embedding", {idx.size(), width}, std::move(out), {TensorAccess::ptr(table)},
                     [idx = std::move(idx), width](Node& self) {
                       auto& g = grad_buffer(*self.inputs[0]);
                       for (std::size_t r = 0; r < idx.size(); ++r) {
                         for (std::size_t c = 0; c < width; ++c) g[idx[r] * width + c] += self.grad[r * width + c];
                       }
                     });
}

}  // namespace wasecom
