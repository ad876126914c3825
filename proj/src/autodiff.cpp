#include "sargmax/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_map>
#include <utility>

namespace sargmax {

namespace detail {

struct Node {
  Shape shape;
  Array values;
  bool requires_grad = false;
  std::optional<Array> grad;
  // Producing record, or -1 for leaves.
  std::ptrdiff_t op_index = -1;
  std::weak_ptr<TapeImpl> tape;
};

// Receives the output gradient and writes into the slots of the inputs that
// require gradients (null slots are skipped).
using BackwardFn =
    std::function<void(const Array& grad_out, std::span<Array*> grad_in)>;

struct Record {
  OpKind kind;
  std::vector<std::shared_ptr<Node>> inputs;
  std::shared_ptr<Node> output;
  BackwardFn backward;
};

struct TapeImpl {
  std::vector<Record> records;
};

namespace {
thread_local std::shared_ptr<TapeImpl> active_tape;
}  // namespace

}  // namespace detail

struct TensorAccess {
  static const std::shared_ptr<detail::Node>& node(const Tensor& t) {
    return t.node_;
  }
  static Tensor wrap(std::shared_ptr<detail::Node> node) {
    return Tensor(std::move(node));
  }
};

namespace {

using detail::BackwardFn;
using detail::Node;

std::shared_ptr<Node> make_node(Shape shape, Array values) {
  if (static_cast<std::size_t>(values.size()) != shape_size(shape)) {
    throw ShapeError("value count " + std::to_string(values.size()) +
                     " does not match shape " + to_string(shape));
  }
  if (!values.allFinite()) {
    throw NumericError("non-finite value in tensor of shape " +
                       to_string(shape));
  }
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->values = std::move(values);
  return node;
}

// Builds the output tensor and records it when any input needs a gradient.
Tensor emit(OpKind kind, std::span<const Tensor> inputs, Shape shape,
            Array values, BackwardFn backward) {
  if (!values.allFinite()) {
    throw NumericError(std::string(op_name(kind)) +
                       " produced a non-finite value");
  }
  auto out = make_node(std::move(shape), std::move(values));
  const auto& tape = detail::active_tape;
  const bool needs_grad =
      tape && std::any_of(inputs.begin(), inputs.end(), [](const Tensor& t) {
        return t.requires_grad();
      });
  if (needs_grad) {
    detail::Record record{kind, {}, out, std::move(backward)};
    record.inputs.reserve(inputs.size());
    for (const auto& t : inputs) record.inputs.push_back(TensorAccess::node(t));
    out->requires_grad = true;
    out->op_index = static_cast<std::ptrdiff_t>(tape->records.size());
    out->tape = tape;
    tape->records.push_back(std::move(record));
  }
  return TensorAccess::wrap(std::move(out));
}

Tensor emit(OpKind kind, std::initializer_list<Tensor> inputs, Shape shape,
            Array values, BackwardFn backward) {
  return emit(kind, std::span<const Tensor>(inputs.begin(), inputs.size()),
              std::move(shape), std::move(values), std::move(backward));
}

// Splits a shape around `axis` into (outer, extent, inner) for strided loops.
struct AxisSplit {
  std::size_t outer = 1;
  std::size_t extent = 1;
  std::size_t inner = 1;
};

AxisSplit split_at(const Shape& shape, std::size_t axis) {
  if (axis >= shape.size()) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for " +
                     to_string(shape));
  }
  AxisSplit s;
  for (std::size_t d = 0; d < axis; ++d) s.outer *= shape[d];
  s.extent = shape[axis];
  for (std::size_t d = axis + 1; d < shape.size(); ++d) s.inner *= shape[d];
  return s;
}

Shape drop_axis(const Shape& shape, std::size_t axis) {
  Shape out = shape;
  out.erase(out.begin() + static_cast<std::ptrdiff_t>(axis));
  return out;
}

enum class Broadcast { kNone, kLeft, kRight };

// kLeft: `a` is the smaller operand and is tiled along b's leading dim.
Broadcast resolve_broadcast(const Shape& a, const Shape& b, OpKind kind) {
  if (a == b) return Broadcast::kNone;
  if (b.size() == a.size() + 1 && std::equal(a.begin(), a.end(), b.begin() + 1))
    return Broadcast::kLeft;
  if (a.size() == b.size() + 1 && std::equal(b.begin(), b.end(), a.begin() + 1))
    return Broadcast::kRight;
  throw ShapeError(std::string(op_name(kind)) + ": incompatible shapes " +
                   to_string(a) + " and " + to_string(b));
}

Array tile(const Array& small, std::size_t times) {
  return small.replicate(static_cast<Eigen::Index>(times), 1);
}

// Sums a [times * m] array down to [m].
Array fold(const Array& big, std::size_t m) {
  const auto times = static_cast<Eigen::Index>(big.size()) /
                     static_cast<Eigen::Index>(std::max<std::size_t>(m, 1));
  Eigen::Map<const Eigen::MatrixXd> view(big.data(),
                                         static_cast<Eigen::Index>(m), times);
  return view.rowwise().sum().array();
}

template <class Forward, class GradA, class GradB>
Tensor elementwise(OpKind kind, const Tensor& a, const Tensor& b,
                   Forward forward, GradA grad_a, GradB grad_b) {
  const Broadcast mode = resolve_broadcast(a.shape(), b.shape(), kind);
  Array av = a.values();
  Array bv = b.values();
  Shape shape = a.shape();
  if (mode == Broadcast::kLeft) {
    av = tile(av, b.shape().front());
    shape = b.shape();
  } else if (mode == Broadcast::kRight) {
    bv = tile(bv, a.shape().front());
  }
  Array out = forward(av, bv);
  const std::size_t a_size = a.size();
  const std::size_t b_size = b.size();
  return emit(kind, {a, b}, std::move(shape), std::move(out),
              [av, bv, mode, a_size, b_size, grad_a, grad_b](
                  const Array& g, std::span<Array*> slots) {
                if (slots[0]) {
                  Array ga = grad_a(g, av, bv);
                  *slots[0] += mode == Broadcast::kLeft ? fold(ga, a_size) : ga;
                }
                if (slots[1]) {
                  Array gb = grad_b(g, av, bv);
                  *slots[1] +=
                      mode == Broadcast::kRight ? fold(gb, b_size) : gb;
                }
              });
}

template <class Forward, class Derivative>
Tensor unary(OpKind kind, const Tensor& a, Forward forward,
             Derivative derivative) {
  const Array& x = a.values();
  Array y = forward(x);
  return emit(kind, {a}, a.shape(), y,
              [x, y, derivative](const Array& g, std::span<Array*> slots) {
                if (slots[0]) *slots[0] += g * derivative(x, y);
              });
}

using RowMajor =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::Map<const RowMajor> as_matrix(const Array& a, std::size_t rows,
                                     std::size_t cols) {
  return {a.data(), static_cast<Eigen::Index>(rows),
          static_cast<Eigen::Index>(cols)};
}

}  // namespace

// ---------------------------------------------------------------------------
// Shapes and naming

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

const char* op_name(OpKind kind) {
  switch (kind) {
    case OpKind::kAdd: return "add";
    case OpKind::kSubtract: return "subtract";
    case OpKind::kMultiply: return "multiply";
    case OpKind::kDivide: return "divide";
    case OpKind::kNegate: return "negate";
    case OpKind::kExp: return "exp";
    case OpKind::kLog: return "log";
    case OpKind::kPower: return "power";
    case OpKind::kSum: return "sum";
    case OpKind::kMean: return "mean";
    case OpKind::kMatMul: return "matmul";
    case OpKind::kRelu: return "relu";
    case OpKind::kSoftmax: return "softmax";
    case OpKind::kAbs: return "abs";
    case OpKind::kSquare: return "square";
    case OpKind::kConcat: return "concat";
    case OpKind::kIndexSelect: return "index_select";
    case OpKind::kBroadcast: return "broadcast";
    case OpKind::kReshape: return "reshape";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// Tensor

Tensor::Tensor() : Tensor(Shape{}, Array::Zero(1)) {}

Tensor::Tensor(Shape shape, Array values)
    : node_(make_node(std::move(shape), std::move(values))) {}

Tensor::Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

Tensor Tensor::scalar(double value) {
  return Tensor(Shape{}, Array::Constant(1, value));
}

Tensor Tensor::vector(std::initializer_list<double> values) {
  Array a(static_cast<Eigen::Index>(values.size()));
  std::copy(values.begin(), values.end(), a.data());
  return Tensor(Shape{values.size()}, std::move(a));
}

Tensor Tensor::vector(const Eigen::Ref<const Eigen::VectorXd>& values) {
  return Tensor(Shape{static_cast<std::size_t>(values.size())}, values.array());
}

Tensor Tensor::matrix(const Eigen::Ref<const Eigen::MatrixXd>& values) {
  RowMajor rm = values;
  return Tensor(Shape{static_cast<std::size_t>(values.rows()),
                      static_cast<std::size_t>(values.cols())},
                Eigen::Map<const Array>(rm.data(), rm.size()));
}

Tensor Tensor::zeros(Shape shape) { return full(std::move(shape), 0.0); }

Tensor Tensor::full(Shape shape, double value) {
  const auto n = static_cast<Eigen::Index>(shape_size(shape));
  return Tensor(std::move(shape), Array::Constant(n, value));
}

const Shape& Tensor::shape() const { return node_->shape; }
std::size_t Tensor::size() const {
  return static_cast<std::size_t>(node_->values.size());
}
const Array& Tensor::values() const { return node_->values; }

double Tensor::item() const {
  if (size() != 1) {
    throw ShapeError("item() on tensor of shape " + to_string(shape()));
  }
  return node_->values[0];
}

bool Tensor::requires_grad() const { return node_->requires_grad; }

Tensor& Tensor::requires_grad(bool enabled) {
  if (!is_leaf()) throw GraphError("requires_grad can only be set on leaves");
  node_->requires_grad = enabled;
  return *this;
}

bool Tensor::is_leaf() const { return node_->op_index < 0; }

const std::optional<Array>& Tensor::grad() const { return node_->grad; }

void Tensor::zero_grad() { node_->grad.reset(); }

void Tensor::assign(const Array& values) {
  if (!is_leaf()) throw GraphError("assign() on a non-leaf tensor");
  if (values.size() != node_->values.size()) {
    throw ShapeError("assign() with " + std::to_string(values.size()) +
                     " values into " + to_string(shape()));
  }
  if (!values.allFinite()) throw NumericError("assign() of non-finite values");
  node_->values = values;
}

Tensor Tensor::detach() const { return Tensor(shape(), values()); }

// ---------------------------------------------------------------------------
// Tape

GradientTape::GradientTape() : impl_(std::make_shared<detail::TapeImpl>()) {}
GradientTape::~GradientTape() = default;

std::size_t GradientTape::size() const { return impl_->records.size(); }

std::vector<OpKind> GradientTape::kinds() const {
  std::vector<OpKind> out;
  out.reserve(impl_->records.size());
  for (const auto& r : impl_->records) out.push_back(r.kind);
  return out;
}

RecordingScope::RecordingScope(GradientTape& tape)
    : previous_(std::exchange(detail::active_tape, tape.impl_)) {}

RecordingScope::~RecordingScope() { detail::active_tape = previous_; }

NoGradScope::NoGradScope()
    : previous_(std::exchange(detail::active_tape, nullptr)) {}

NoGradScope::~NoGradScope() { detail::active_tape = previous_; }

bool recording() { return detail::active_tape != nullptr; }

void backward(const Tensor& root) {
  const auto& root_node = TensorAccess::node(root);
  if (root.size() != 1) {
    throw ShapeError("backward() needs a scalar root, got " +
                     to_string(root.shape()));
  }
  auto tape = root_node->tape.lock();
  if (root_node->op_index < 0 || !tape) {
    throw GraphError("backward() root is not attached to a live tape");
  }

  // Per-pass buffers so that repeated passes only add their own contribution.
  std::unordered_map<const Node*, Array> buffers;
  buffers.emplace(root_node.get(), Array::Ones(1));
  std::vector<const Node*> touched{root_node.get()};

  for (auto k = root_node->op_index; k >= 0; --k) {
    const auto& record = tape->records[static_cast<std::size_t>(k)];
    const auto found = buffers.find(record.output.get());
    if (found == buffers.end()) continue;
    const Array grad_out = found->second;

    std::vector<Array> local(record.inputs.size());
    std::vector<Array*> slots(record.inputs.size(), nullptr);
    for (std::size_t i = 0; i < record.inputs.size(); ++i) {
      const auto& in = record.inputs[i];
      if (!in->requires_grad) continue;
      local[i] = Array::Zero(in->values.size());
      slots[i] = &local[i];
    }
    record.backward(grad_out, slots);
    for (std::size_t i = 0; i < record.inputs.size(); ++i) {
      if (!slots[i]) continue;
      const Node* in = record.inputs[i].get();
      auto [it, inserted] = buffers.try_emplace(in, std::move(local[i]));
      if (inserted) {
        touched.push_back(in);
      } else {
        it->second += local[i];
      }
    }
  }

  // Nodes are owned by the tape records, so the raw pointers stay valid.
  for (const Node* n : touched) {
    auto* node = const_cast<Node*>(n);
    const Array& g = buffers.at(n);
    if (node->grad) {
      *node->grad += g;
    } else {
      node->grad = g;
    }
  }
}

// ---------------------------------------------------------------------------
// Elementwise

Tensor add(const Tensor& a, const Tensor& b) {
  return elementwise(
      OpKind::kAdd, a, b, [](const Array& x, const Array& y) { return Array(x + y); },
      [](const Array& g, const Array&, const Array&) { return g; },
      [](const Array& g, const Array&, const Array&) { return g; });
}

Tensor subtract(const Tensor& a, const Tensor& b) {
  return elementwise(
      OpKind::kSubtract, a, b,
      [](const Array& x, const Array& y) { return Array(x - y); },
      [](const Array& g, const Array&, const Array&) { return g; },
      [](const Array& g, const Array&, const Array&) { return Array(-g); });
}

Tensor multiply(const Tensor& a, const Tensor& b) {
  return elementwise(
      OpKind::kMultiply, a, b,
      [](const Array& x, const Array& y) { return Array(x * y); },
      [](const Array& g, const Array&, const Array& y) { return Array(g * y); },
      [](const Array& g, const Array& x, const Array&) { return Array(g * x); });
}

Tensor divide(const Tensor& a, const Tensor& b) {
  if ((b.values() == 0.0).any()) throw NumericError("divide: division by zero");
  return elementwise(
      OpKind::kDivide, a, b,
      [](const Array& x, const Array& y) { return Array(x / y); },
      [](const Array& g, const Array&, const Array& y) { return Array(g / y); },
      [](const Array& g, const Array& x, const Array& y) {
        return Array(-g * x / (y * y));
      });
}

Tensor negate(const Tensor& a) {
  return unary(
      OpKind::kNegate, a, [](const Array& x) { return Array(-x); },
      [](const Array& x, const Array&) { return Array::Constant(x.size(), -1.0); });
}

Tensor exp(const Tensor& a) {
  return unary(
      OpKind::kExp, a, [](const Array& x) { return Array(x.exp()); },
      [](const Array&, const Array& y) { return y; });
}

Tensor log(const Tensor& a) {
  if ((a.values() <= 0.0).any()) {
    throw NumericError("log: argument must be positive");
  }
  return unary(
      OpKind::kLog, a, [](const Array& x) { return Array(x.log()); },
      [](const Array& x, const Array&) { return Array(x.inverse()); });
}

Tensor power(const Tensor& a, double exponent) {
  return unary(
      OpKind::kPower, a,
      [exponent](const Array& x) { return Array(x.pow(exponent)); },
      [exponent](const Array& x, const Array&) {
        return Array(exponent * x.pow(exponent - 1.0));
      });
}

Tensor relu(const Tensor& a) {
  return unary(
      OpKind::kRelu, a, [](const Array& x) { return Array(x.max(0.0)); },
      [](const Array& x, const Array&) {
        return Array((x > 0.0).cast<double>());
      });
}

Tensor abs(const Tensor& a) {
  return unary(
      OpKind::kAbs, a, [](const Array& x) { return Array(x.abs()); },
      [](const Array& x, const Array&) { return Array(x.sign()); });
}

Tensor square(const Tensor& a) {
  return unary(
      OpKind::kSquare, a, [](const Array& x) { return Array(x.square()); },
      [](const Array& x, const Array&) { return Array(2.0 * x); });
}

// ---------------------------------------------------------------------------
// Reductions

namespace {

Tensor reduce(OpKind kind, const Tensor& a, std::size_t axis, double scale) {
  const AxisSplit s = split_at(a.shape(), axis);
  const Array& x = a.values();
  Array out = Array::Zero(static_cast<Eigen::Index>(s.outer * s.inner));
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t k = 0; k < s.extent; ++k) {
      for (std::size_t i = 0; i < s.inner; ++i) {
        out[o * s.inner + i] += x[(o * s.extent + k) * s.inner + i];
      }
    }
  }
  out *= scale;
  return emit(kind, {a}, drop_axis(a.shape(), axis), std::move(out),
              [s, scale](const Array& g, std::span<Array*> slots) {
                if (!slots[0]) return;
                Array& ga = *slots[0];
                for (std::size_t o = 0; o < s.outer; ++o)
                  for (std::size_t k = 0; k < s.extent; ++k)
                    for (std::size_t i = 0; i < s.inner; ++i)
                      ga[(o * s.extent + k) * s.inner + i] +=
                          scale * g[o * s.inner + i];
              });
}

}  // namespace

Tensor sum(const Tensor& a, std::size_t axis) {
  return reduce(OpKind::kSum, a, axis, 1.0);
}

Tensor mean(const Tensor& a, std::size_t axis) {
  const AxisSplit s = split_at(a.shape(), axis);
  if (s.extent == 0) throw ShapeError("mean over an empty axis");
  return reduce(OpKind::kMean, a, axis, 1.0 / static_cast<double>(s.extent));
}

Tensor sum(const Tensor& a) { return sum(reshape(a, {a.size()}), 0); }

Tensor mean(const Tensor& a) { return mean(reshape(a, {a.size()}), 0); }

Tensor softmax(const Tensor& a, std::size_t axis) {
  const AxisSplit s = split_at(a.shape(), axis);
  const Array& x = a.values();
  Array y(x.size());
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      auto at = [&](std::size_t k) { return (o * s.extent + k) * s.inner + i; };
      double peak = -std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < s.extent; ++k) peak = std::max(peak, x[at(k)]);
      double total = 0.0;
      for (std::size_t k = 0; k < s.extent; ++k) {
        y[at(k)] = std::exp(x[at(k)] - peak);
        total += y[at(k)];
      }
      for (std::size_t k = 0; k < s.extent; ++k) y[at(k)] /= total;
    }
  }
  return emit(OpKind::kSoftmax, {a}, a.shape(), y,
              [s, y](const Array& g, std::span<Array*> slots) {
                if (!slots[0]) return;
                Array& ga = *slots[0];
                for (std::size_t o = 0; o < s.outer; ++o) {
                  for (std::size_t i = 0; i < s.inner; ++i) {
                    auto at = [&](std::size_t k) {
                      return (o * s.extent + k) * s.inner + i;
                    };
                    double dot = 0.0;
                    for (std::size_t k = 0; k < s.extent; ++k)
                      dot += g[at(k)] * y[at(k)];
                    for (std::size_t k = 0; k < s.extent; ++k)
                      ga[at(k)] += y[at(k)] * (g[at(k)] - dot);
                  }
                }
              });
}

// ---------------------------------------------------------------------------
// Linear algebra and structure

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() < 1 || a.rank() > 2 || b.rank() < 1 || b.rank() > 2) {
    throw ShapeError("matmul: operands must be rank 1 or 2, got " +
                     to_string(a.shape()) + " and " + to_string(b.shape()));
  }
  const std::size_t m = a.rank() == 2 ? a.shape()[0] : 1;
  const std::size_t k = a.shape().back();
  const std::size_t kb = b.shape()[0];
  const std::size_t n = b.rank() == 2 ? b.shape()[1] : 1;
  if (k != kb) {
    throw ShapeError("matmul: inner dimensions differ in " +
                     to_string(a.shape()) + " x " + to_string(b.shape()));
  }
  Shape shape;
  if (a.rank() == 2) shape.push_back(m);
  if (b.rank() == 2) shape.push_back(n);

  const Array av = a.values();
  const Array bv = b.values();
  RowMajor c = as_matrix(av, m, k) * as_matrix(bv, k, n);
  Array out = Eigen::Map<const Array>(c.data(), c.size());
  return emit(OpKind::kMatMul, {a, b}, std::move(shape), std::move(out),
              [av, bv, m, k, n](const Array& g, std::span<Array*> slots) {
                const auto gm = as_matrix(g, m, n);
                if (slots[0]) {
                  RowMajor ga = gm * as_matrix(bv, k, n).transpose();
                  *slots[0] += Eigen::Map<const Array>(ga.data(), ga.size());
                }
                if (slots[1]) {
                  RowMajor gb = as_matrix(av, m, k).transpose() * gm;
                  *slots[1] += Eigen::Map<const Array>(gb.data(), gb.size());
                }
              });
}

Tensor concat(std::span<const Tensor> parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const Shape& first = parts.front().shape();
  if (axis >= first.size()) throw ShapeError("concat: axis out of range");
  std::vector<AxisSplit> splits;
  Shape shape = first;
  shape[axis] = 0;
  for (const auto& p : parts) {
    if (p.rank() != first.size()) throw ShapeError("concat: rank mismatch");
    for (std::size_t d = 0; d < first.size(); ++d) {
      if (d != axis && p.shape()[d] != first[d]) {
        throw ShapeError("concat: shapes " + to_string(first) + " and " +
                         to_string(p.shape()) + " differ off-axis");
      }
    }
    splits.push_back(split_at(p.shape(), axis));
    shape[axis] += p.shape()[axis];
  }
  const AxisSplit total = split_at(shape, axis);
  Array out(static_cast<Eigen::Index>(shape_size(shape)));
  std::size_t offset = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const auto& s = splits[p];
    const Array& x = parts[p].values();
    for (std::size_t o = 0; o < s.outer; ++o)
      for (std::size_t k = 0; k < s.extent; ++k)
        for (std::size_t i = 0; i < s.inner; ++i)
          out[(o * total.extent + offset + k) * total.inner + i] =
              x[(o * s.extent + k) * s.inner + i];
    offset += s.extent;
  }
  return emit(OpKind::kConcat, parts, std::move(shape), std::move(out),
              [splits, total](const Array& g, std::span<Array*> slots) {
                std::size_t offset = 0;
                for (std::size_t p = 0; p < splits.size(); ++p) {
                  const auto& s = splits[p];
                  if (slots[p]) {
                    for (std::size_t o = 0; o < s.outer; ++o)
                      for (std::size_t k = 0; k < s.extent; ++k)
                        for (std::size_t i = 0; i < s.inner; ++i)
                          (*slots[p])[(o * s.extent + k) * s.inner + i] +=
                              g[(o * total.extent + offset + k) * total.inner +
                                i];
                  }
                  offset += s.extent;
                }
              });
}

Tensor index_select(const Tensor& a, std::size_t axis,
                    std::vector<std::size_t> indices) {
  const AxisSplit s = split_at(a.shape(), axis);
  for (auto idx : indices) {
    if (idx >= s.extent) {
      throw ShapeError("index_select: index " + std::to_string(idx) +
                       " out of range for " + to_string(a.shape()));
    }
  }
  Shape shape = a.shape();
  shape[axis] = indices.size();
  const std::size_t count = indices.size();
  const Array& x = a.values();
  Array out(static_cast<Eigen::Index>(s.outer * count * s.inner));
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t j = 0; j < count; ++j)
      for (std::size_t i = 0; i < s.inner; ++i)
        out[(o * count + j) * s.inner + i] =
            x[(o * s.extent + indices[j]) * s.inner + i];
  return emit(OpKind::kIndexSelect, {a}, std::move(shape), std::move(out),
              [s, indices = std::move(indices)](const Array& g,
                                                std::span<Array*> slots) {
                if (!slots[0]) return;
                const std::size_t count = indices.size();
                for (std::size_t o = 0; o < s.outer; ++o)
                  for (std::size_t j = 0; j < count; ++j)
                    for (std::size_t i = 0; i < s.inner; ++i)
                      (*slots[0])[(o * s.extent + indices[j]) * s.inner + i] +=
                          g[(o * count + j) * s.inner + i];
              });
}

Tensor broadcast(const Tensor& a, std::size_t leading) {
  Shape shape = a.shape();
  shape.insert(shape.begin(), leading);
  const std::size_t m = a.size();
  return emit(OpKind::kBroadcast, {a}, std::move(shape), tile(a.values(), leading),
              [m](const Array& g, std::span<Array*> slots) {
                if (slots[0]) *slots[0] += fold(g, m);
              });
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_size(shape) != a.size()) {
    throw ShapeError("reshape: cannot view " + to_string(a.shape()) + " as " +
                     to_string(shape));
  }
  return emit(OpKind::kReshape, {a}, std::move(shape), a.values(),
              [](const Array& g, std::span<Array*> slots) {
                if (slots[0]) *slots[0] += g;
              });
}

// ---------------------------------------------------------------------------

Tensor forward_op(OpKind kind, std::span<const Tensor> inputs,
                  const OpAttributes& attr) {
  auto need = [&](std::size_t n) {
    if (inputs.size() != n) {
      throw ShapeError(std::string(op_name(kind)) + " expects " +
                       std::to_string(n) + " inputs, got " +
                       std::to_string(inputs.size()));
    }
  };
  switch (kind) {
    case OpKind::kAdd: need(2); return add(inputs[0], inputs[1]);
    case OpKind::kSubtract: need(2); return subtract(inputs[0], inputs[1]);
    case OpKind::kMultiply: need(2); return multiply(inputs[0], inputs[1]);
    case OpKind::kDivide: need(2); return divide(inputs[0], inputs[1]);
    case OpKind::kNegate: need(1); return negate(inputs[0]);
    case OpKind::kExp: need(1); return exp(inputs[0]);
    case OpKind::kLog: need(1); return log(inputs[0]);
    case OpKind::kPower: need(1); return power(inputs[0], attr.exponent);
    case OpKind::kSum: need(1); return sum(inputs[0], attr.axis);
    case OpKind::kMean: need(1); return mean(inputs[0], attr.axis);
    case OpKind::kMatMul: need(2); return matmul(inputs[0], inputs[1]);
    case OpKind::kRelu: need(1); return relu(inputs[0]);
    case OpKind::kSoftmax: need(1); return softmax(inputs[0], attr.axis);
    case OpKind::kAbs: need(1); return abs(inputs[0]);
    case OpKind::kSquare: need(1); return square(inputs[0]);
    case OpKind::kConcat: return concat(inputs, attr.axis);
    case OpKind::kIndexSelect:
      need(1);
      return index_select(inputs[0], attr.axis, attr.indices);
    case OpKind::kBroadcast: need(1); return broadcast(inputs[0], attr.leading);
    case OpKind::kReshape: need(1); return reshape(inputs[0], attr.shape);
  }
  throw GraphError("unknown op kind");
}

}  // namespace sargmax
