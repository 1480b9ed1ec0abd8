#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace causalwalk::ad {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& s);
std::size_t shape_size(const Shape& s);

class Tape;

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> values;
  std::vector<double> grad;  // empty until first accumulation
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backprop;  // accumulates into parents' grad
  Tape* tape = nullptr;                 // owning tape for recorded op outputs
  const char* op = "leaf";

  std::vector<double>& ensure_grad();
};

}  // namespace detail

/// Dense row-major tensor of doubles. A cheap shared handle: copies alias the
/// same storage, so passing by value never duplicates data.
class Tensor {
 public:
  Tensor() = default;

  static Tensor constant(Shape shape, std::vector<double> values);
  static Tensor param(Shape shape, std::vector<double> values);
  static Tensor zeros(Shape shape);
  static Tensor scalar(double v);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t size() const { return node_->values.size(); }
  std::size_t rows() const;
  std::size_t cols() const;

  const std::vector<double>& values() const { return node_->values; }
  std::vector<double>& mutable_values() { return node_->values; }
  double item() const;  // requires size() == 1

  bool requires_grad() const { return node_->requires_grad; }
  bool has_grad() const { return !node_->grad.empty(); }
  const std::vector<double>& grad() const;
  void zero_grad();

  std::shared_ptr<detail::Node> node() const { return node_; }

 private:
  friend class Tape;
  explicit Tensor(std::shared_ptr<detail::Node> n) : node_(std::move(n)) {}
  std::shared_ptr<detail::Node> node_;

  friend Tensor make_op_output(const char* op, Shape shape,
                               std::vector<double> values,
                               std::vector<std::shared_ptr<detail::Node>> parents,
                               std::function<void(detail::Node&)> backprop);
};

/// Ordered record of one forward pass. Constructing a Tape activates it on the
/// current thread; its destructor restores the previous one. Ops record an
/// entry only while a tape is active and some input requires grad, so
/// evaluation without a live Tape is a pure value computation.
class Tape {
 public:
  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Reverse pass from a scalar loss recorded on this tape. Visits recorded
  /// nodes in reverse execution order (a reverse topological order) exactly
  /// once. Grads reachable from this tape are reset first, so each call
  /// yields exactly dloss/dtensor; reuse of a tensor within the graph still
  /// accumulates additively.
  void backward(const Tensor& loss);

  std::size_t size() const { return entries_.size(); }

  static Tape* active();

 private:
  friend Tensor make_op_output(const char* op, Shape shape,
                               std::vector<double> values,
                               std::vector<std::shared_ptr<detail::Node>> parents,
                               std::function<void(detail::Node&)> backprop);
  std::vector<std::shared_ptr<detail::Node>> entries_;
  Tape* previous_ = nullptr;
};

enum class OpKind {
  kMatmul,
  kAdd,
  kSub,
  kElementwiseMul,
  kConcat,
  kRowSoftmax,
  kSigmoid,
  kTanh,
  kRelu,
  kLog,
  kMean,
  kSum,
  kScalarMul,
  kEmbeddingSelect,
  kTranspose,
};

const char* op_kind_name(OpKind kind);

/// Generic dispatcher over the core op set. Attribute-carrying ops take their
/// attribute as a trailing tensor input: scalar-mul a 1-element scalar,
/// embedding-select a tensor of row indices. concat joins along axis 0.
Tensor apply(OpKind kind, const std::vector<Tensor>& inputs);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);  // elementwise
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor concat(const std::vector<Tensor>& parts, int axis = 0);
Tensor row_softmax(const Tensor& t);
/// Softmax per row restricted to entries whose mask byte is nonzero; masked
/// entries are exactly zero in the output. mask.size() == t.size().
Tensor masked_row_softmax(const Tensor& t, const std::vector<std::uint8_t>& mask);
Tensor sigmoid(const Tensor& t);
Tensor tanh(const Tensor& t);
Tensor relu(const Tensor& t);
Tensor log(const Tensor& t);
Tensor exp(const Tensor& t);
Tensor clamp_min(const Tensor& t, double floor);
Tensor mean(const Tensor& t);
Tensor sum(const Tensor& t);
Tensor scalar_mul(const Tensor& t, double c);
/// embedding-select: gather rows of a 2-D tensor (or elements of a 1-D one).
Tensor rows(const Tensor& t, const std::vector<std::size_t>& indices);
Tensor transpose(const Tensor& t);
Tensor reshape(const Tensor& t, Shape new_shape);

/// Central-difference check of a scalar-valued function against the tape
/// gradient. Returns max over coordinates of
/// |analytic - central| / (|analytic| + |central| + 1e-8).
double grad_check(const std::function<Tensor(const Tensor&)>& f, Tensor x,
                  double h);

}  // namespace causalwalk::ad
