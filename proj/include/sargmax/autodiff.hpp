#pragma once

// Minimal define-by-run reverse-mode automatic differentiation over dense
// row-major arrays of doubles.
//
// Usage:
//
//   GradientTape tape;
//   RecordingScope scope(tape);
//   Tensor x = Tensor::vector({1.0, 2.0}).requires_grad(true);
//   Tensor y = sum(square(x));
//   backward(y);           // x.grad() == [2, 4]
//
// Operations record onto the tape that is active on the calling thread, and
// only when at least one input requires a gradient. Without an active tape
// nothing is recorded and the forward values are identical.

#include <Eigen/Core>

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace sargmax {

using Shape = std::vector<std::size_t>;
using Array = Eigen::ArrayXd;

std::string to_string(const Shape& shape);
std::size_t shape_size(const Shape& shape);

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Log of a non-positive value, division by zero, or a non-finite result.
class NumericError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class GraphError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

enum class OpKind {
  kAdd,
  kSubtract,
  kMultiply,
  kDivide,
  kNegate,
  kExp,
  kLog,
  kPower,
  kSum,
  kMean,
  kMatMul,
  kRelu,
  kSoftmax,
  kAbs,
  kSquare,
  kConcat,
  kIndexSelect,
  kBroadcast,
  kReshape,
};

const char* op_name(OpKind kind);

namespace detail {
struct Node;
struct TapeImpl;
}  // namespace detail

class Tensor {
 public:
  // Rank-0 zero.
  Tensor();
  Tensor(Shape shape, Array values);

  static Tensor scalar(double value);
  static Tensor vector(std::initializer_list<double> values);
  static Tensor vector(const Eigen::Ref<const Eigen::VectorXd>& values);
  static Tensor matrix(const Eigen::Ref<const Eigen::MatrixXd>& values);
  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double value);

  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t size() const;
  const Array& values() const;
  double value(std::size_t flat_index) const { return values()[flat_index]; }
  // Only valid when size() == 1.
  double item() const;

  bool requires_grad() const;
  // Marks a leaf as trainable; returns *this for chaining.
  Tensor& requires_grad(bool enabled);
  bool is_leaf() const;
  const std::optional<Array>& grad() const;
  void zero_grad();

  // Overwrites the values of a leaf in place (optimizer updates).
  void assign(const Array& values);

  // Same values, no history, no gradient requirement.
  Tensor detach() const;

  // Identity of the underlying storage; copies of a Tensor share it.
  const void* id() const { return node_.get(); }

 private:
  friend struct TensorAccess;
  explicit Tensor(std::shared_ptr<detail::Node> node);
  std::shared_ptr<detail::Node> node_;
};

// Ordered record of operations executed while the tape was active.
class GradientTape {
 public:
  GradientTape();
  ~GradientTape();
  GradientTape(const GradientTape&) = delete;
  GradientTape& operator=(const GradientTape&) = delete;

  std::size_t size() const;
  // Kinds of the recorded operations in execution order.
  std::vector<OpKind> kinds() const;

 private:
  friend class RecordingScope;
  friend struct TensorAccess;
  std::shared_ptr<detail::TapeImpl> impl_;
};

// Makes `tape` the active tape of this thread for the scope's lifetime.
class RecordingScope {
 public:
  explicit RecordingScope(GradientTape& tape);
  ~RecordingScope();
  RecordingScope(const RecordingScope&) = delete;
  RecordingScope& operator=(const RecordingScope&) = delete;

 private:
  std::shared_ptr<detail::TapeImpl> previous_;
};

// Suspends recording for the scope's lifetime.
class NoGradScope {
 public:
  NoGradScope();
  ~NoGradScope();
  NoGradScope(const NoGradScope&) = delete;
  NoGradScope& operator=(const NoGradScope&) = delete;

 private:
  std::shared_ptr<detail::TapeImpl> previous_;
};

bool recording();

// Accumulates d(root)/d(t) into t.grad() for every requires-grad tensor t
// reachable from `root`. Repeated calls add up.
void backward(const Tensor& root);

// Extra arguments for the op kinds that need them.
struct OpAttributes {
  std::size_t axis = 0;
  double exponent = 1.0;
  std::vector<std::size_t> indices;
  std::size_t leading = 1;
  Shape shape;
};

// Generic entry point; dispatches to the free functions below.
Tensor forward_op(OpKind kind, std::span<const Tensor> inputs,
                  const OpAttributes& attributes = {});

// Elementwise binary ops accept equal shapes, or one operand whose shape is
// the other's with the leading dimension dropped (batch broadcast).
Tensor add(const Tensor& a, const Tensor& b);
Tensor subtract(const Tensor& a, const Tensor& b);
Tensor multiply(const Tensor& a, const Tensor& b);
Tensor divide(const Tensor& a, const Tensor& b);
Tensor negate(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor power(const Tensor& a, double exponent);
Tensor sum(const Tensor& a, std::size_t axis);
Tensor mean(const Tensor& a, std::size_t axis);
// [m,k]x[k,n], [k]x[k,n], [m,k]x[k] and [k]x[k].
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor relu(const Tensor& a);
Tensor softmax(const Tensor& a, std::size_t axis);
Tensor abs(const Tensor& a);
Tensor square(const Tensor& a);
Tensor concat(std::span<const Tensor> parts, std::size_t axis);
Tensor index_select(const Tensor& a, std::size_t axis,
                    std::vector<std::size_t> indices);
// [s...] -> [leading, s...]
Tensor broadcast(const Tensor& a, std::size_t leading);
Tensor reshape(const Tensor& a, Shape shape);

// Reduction over every element to a rank-0 tensor.
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) {
  return subtract(a, b);
}
inline Tensor operator*(const Tensor& a, const Tensor& b) {
  return multiply(a, b);
}
inline Tensor operator/(const Tensor& a, const Tensor& b) {
  return divide(a, b);
}
inline Tensor operator-(const Tensor& a) { return negate(a); }

inline Tensor operator*(const Tensor& a, double s) {
  return multiply(a, Tensor::full(a.shape(), s));
}
inline Tensor operator*(double s, const Tensor& a) { return a * s; }
inline Tensor operator+(const Tensor& a, double s) {
  return add(a, Tensor::full(a.shape(), s));
}
inline Tensor operator-(const Tensor& a, double s) {
  return subtract(a, Tensor::full(a.shape(), s));
}
inline Tensor operator/(const Tensor& a, double s) {
  return divide(a, Tensor::full(a.shape(), s));
}

}  // namespace sargmax
