#include "causalwalk/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace causalwalk::ad {

namespace {

thread_local Tape* g_active_tape = nullptr;

void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch (" +
                                shape_str(a.shape()) + " vs " +
                                shape_str(b.shape()) + ")");
  }
}

void check_rank2(const char* op, const Tensor& t) {
  if (t.shape().size() != 2) {
    throw std::invalid_argument(std::string(op) + ": expected rank-2 tensor, got " +
                                shape_str(t.shape()));
  }
}

// Inner matmul kernels, row-major. All accumulate into c.
void mm_acc(const double* a, const double* b, double* c, std::size_t m,
            std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    double* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = arow[p];
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
}

// c[m x k] += g[m x n] * b^T where b is k x n
void mm_acc_bt(const double* g, const double* b, double* c, std::size_t m,
               std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* grow = g + i * n;
    double* crow = c + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double* brow = b + p * n;
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
      crow[p] += acc;
    }
  }
}

// c[k x n] += a^T * g where a is m x k, g is m x n
void mm_acc_at(const double* a, const double* g, double* c, std::size_t m,
               std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    const double* grow = g + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = arow[p];
      double* crow = c + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aip * grow[j];
    }
  }
}

std::pair<std::size_t, std::size_t> row_view(const Shape& s, const char* op) {
  if (s.size() == 1) return {1, s[0]};
  if (s.size() == 2) return {s[0], s[1]};
  throw std::invalid_argument(std::string(op) + ": expected rank 1 or 2, got " +
                              shape_str(s));
}

}  // namespace

std::string shape_str(const Shape& s) {
  std::ostringstream out;
  out << "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out << "x";
    out << s[i];
  }
  out << "]";
  return out.str();
}

std::size_t shape_size(const Shape& s) {
  std::size_t n = 1;
  for (std::size_t d : s) n *= d;
  return n;
}

std::vector<double>& detail::Node::ensure_grad() {
  if (grad.empty()) grad.assign(values.size(), 0.0);
  return grad;
}

Tensor Tensor::constant(Shape shape, std::vector<double> values) {
  if (shape_size(shape) != values.size()) {
    throw std::invalid_argument("tensor: " + std::to_string(values.size()) +
                                " values for shape " + shape_str(shape));
  }
  auto n = std::make_shared<detail::Node>();
  n->shape = std::move(shape);
  n->values = std::move(values);
  return Tensor(std::move(n));
}

Tensor Tensor::param(Shape shape, std::vector<double> values) {
  Tensor t = constant(std::move(shape), std::move(values));
  t.node_->requires_grad = true;
  return t;
}

Tensor Tensor::zeros(Shape shape) {
  std::vector<double> v(shape_size(shape), 0.0);
  return constant(std::move(shape), std::move(v));
}

Tensor Tensor::scalar(double v) { return constant({1}, {v}); }

std::size_t Tensor::rows() const {
  check_rank2("rows()", *this);
  return node_->shape[0];
}

std::size_t Tensor::cols() const {
  check_rank2("cols()", *this);
  return node_->shape[1];
}

double Tensor::item() const {
  if (size() != 1) {
    throw std::invalid_argument("item(): tensor has shape " + shape_str(shape()));
  }
  return node_->values[0];
}

const std::vector<double>& Tensor::grad() const {
  if (node_->grad.empty()) {
    throw std::runtime_error("grad(): no gradient present (op=" +
                             std::string(node_->op) + ")");
  }
  return node_->grad;
}

void Tensor::zero_grad() { node_->grad.clear(); }

Tape::Tape() {
  previous_ = g_active_tape;
  g_active_tape = this;
}

Tape::~Tape() { g_active_tape = previous_; }

Tape* Tape::active() { return g_active_tape; }

void Tape::backward(const Tensor& loss) {
  if (loss.size() != 1) {
    throw std::invalid_argument("backward: loss must be scalar, got shape " +
                                shape_str(loss.shape()));
  }
  auto loss_node = loss.node();
  if (loss_node->tape != this) {
    throw std::invalid_argument("backward: loss is not recorded on this tape");
  }
  // Fresh pass: clear every grad this tape can touch so repeated backward
  // calls on the same tape give identical results instead of compounding.
  for (auto& n : entries_) {
    n->grad.clear();
    for (auto& p : n->parents) p->grad.clear();
  }
  loss_node->ensure_grad()[0] = 1.0;
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
    detail::Node& n = **it;
    if (n.grad.empty()) continue;  // not reachable from the loss
    n.backprop(n);
  }
}

Tensor make_op_output(const char* op, Shape shape, std::vector<double> values,
                      std::vector<std::shared_ptr<detail::Node>> parents,
                      std::function<void(detail::Node&)> backprop) {
  auto n = std::make_shared<detail::Node>();
  n->shape = std::move(shape);
  n->values = std::move(values);
  n->op = op;
  Tape* tape = Tape::active();
  bool needs_grad = false;
  if (tape) {
    for (const auto& p : parents) needs_grad = needs_grad || p->requires_grad;
  }
  if (needs_grad) {
    n->requires_grad = true;
    n->parents = std::move(parents);
    n->backprop = std::move(backprop);
    n->tape = tape;
    tape->entries_.push_back(n);
  }
  return Tensor(std::move(n));
}

namespace {

Tensor elementwise_binary(const char* op, const Tensor& a, const Tensor& b,
                          double (*fwd)(double, double), double da_coeff,
                          double db_coeff, bool product_rule) {
  check_same_shape(op, a, b);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = fwd(a.values()[i], b.values()[i]);
  auto an = a.node();
  auto bn = b.node();
  return make_op_output(
      op, a.shape(), std::move(out), {an, bn},
      [an, bn, da_coeff, db_coeff, product_rule](detail::Node& n) {
        if (an->requires_grad) {
          auto& ga = an->ensure_grad();
          for (std::size_t i = 0; i < n.grad.size(); ++i)
            ga[i] += n.grad[i] * (product_rule ? bn->values[i] : da_coeff);
        }
        if (bn->requires_grad) {
          auto& gb = bn->ensure_grad();
          for (std::size_t i = 0; i < n.grad.size(); ++i)
            gb[i] += n.grad[i] * (product_rule ? an->values[i] : db_coeff);
        }
      });
}

Tensor elementwise_unary(const char* op, const Tensor& t,
                         const std::function<double(double)>& fwd,
                         const std::function<double(double, double)>& dfn) {
  std::vector<double> out(t.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(t.values()[i]);
  auto tn = t.node();
  // dfn receives (input value, output value)
  return make_op_output(op, t.shape(), std::move(out), {tn},
                        [tn, dfn](detail::Node& n) {
                          auto& g = tn->ensure_grad();
                          for (std::size_t i = 0; i < n.grad.size(); ++i)
                            g[i] += n.grad[i] * dfn(tn->values[i], n.values[i]);
                        });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return elementwise_binary(
      "add", a, b, [](double x, double y) { return x + y; }, 1.0, 1.0, false);
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return elementwise_binary(
      "sub", a, b, [](double x, double y) { return x - y; }, 1.0, -1.0, false);
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return elementwise_binary(
      "elementwise-mul", a, b, [](double x, double y) { return x * y; }, 0.0,
      0.0, true);
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  check_rank2("matmul", a);
  check_rank2("matmul", b);
  if (a.cols() != b.rows()) {
    throw std::invalid_argument("matmul: shape mismatch (" + shape_str(a.shape()) +
                                " vs " + shape_str(b.shape()) + ")");
  }
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  std::vector<double> out(m * n, 0.0);
  mm_acc(a.values().data(), b.values().data(), out.data(), m, k, n);
  auto an = a.node();
  auto bn = b.node();
  return make_op_output("matmul", {m, n}, std::move(out), {an, bn},
                        [an, bn, m, k, n](detail::Node& node) {
                          if (an->requires_grad) {
                            mm_acc_bt(node.grad.data(), bn->values.data(),
                                      an->ensure_grad().data(), m, k, n);
                          }
                          if (bn->requires_grad) {
                            mm_acc_at(an->values.data(), node.grad.data(),
                                      bn->ensure_grad().data(), m, k, n);
                          }
                        });
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
  if (parts.empty()) throw std::invalid_argument("concat: no inputs");
  if (axis != 0 && axis != 1) throw std::invalid_argument("concat: axis must be 0 or 1");
  const std::size_t rank = parts[0].shape().size();
  if (rank == 1 && axis != 0)
    throw std::invalid_argument("concat: axis 1 on rank-1 tensors");
  for (const auto& p : parts) {
    if (p.shape().size() != rank)
      throw std::invalid_argument("concat: mixed ranks (" +
                                  shape_str(parts[0].shape()) + " vs " +
                                  shape_str(p.shape()) + ")");
  }

  Shape out_shape;
  std::vector<double> out;
  if (rank == 1) {
    std::size_t total = 0;
    for (const auto& p : parts) total += p.size();
    out_shape = {total};
    out.reserve(total);
    for (const auto& p : parts)
      out.insert(out.end(), p.values().begin(), p.values().end());
  } else if (axis == 0) {
    const std::size_t c = parts[0].cols();
    std::size_t r = 0;
    for (const auto& p : parts) {
      if (p.cols() != c)
        throw std::invalid_argument("concat: shape mismatch (" +
                                    shape_str(parts[0].shape()) + " vs " +
                                    shape_str(p.shape()) + ")");
      r += p.rows();
    }
    out_shape = {r, c};
    out.reserve(r * c);
    for (const auto& p : parts)
      out.insert(out.end(), p.values().begin(), p.values().end());
  } else {
    const std::size_t r = parts[0].rows();
    std::size_t c = 0;
    for (const auto& p : parts) {
      if (p.rows() != r)
        throw std::invalid_argument("concat: shape mismatch (" +
                                    shape_str(parts[0].shape()) + " vs " +
                                    shape_str(p.shape()) + ")");
      c += p.cols();
    }
    out_shape = {r, c};
    out.assign(r * c, 0.0);
    std::size_t col_off = 0;
    for (const auto& p : parts) {
      const std::size_t pc = p.cols();
      for (std::size_t i = 0; i < r; ++i)
        std::copy_n(p.values().data() + i * pc, pc,
                    out.data() + i * c + col_off);
      col_off += pc;
    }
  }

  std::vector<std::shared_ptr<detail::Node>> parents;
  parents.reserve(parts.size());
  for (const auto& p : parts) parents.push_back(p.node());
  auto parents_copy = parents;
  const std::size_t out_cols = rank == 2 ? out_shape[1] : 0;
  return make_op_output(
      "concat", std::move(out_shape), std::move(out), std::move(parents),
      [parents_copy, rank, axis, out_cols](detail::Node& n) {
        if (rank == 1 || axis == 0) {
          std::size_t off = 0;
          for (const auto& p : parents_copy) {
            const std::size_t sz = p->values.size();
            if (p->requires_grad) {
              auto& g = p->ensure_grad();
              for (std::size_t i = 0; i < sz; ++i) g[i] += n.grad[off + i];
            }
            off += sz;
          }
        } else {
          std::size_t col_off = 0;
          const std::size_t r = n.shape[0];
          for (const auto& p : parents_copy) {
            const std::size_t pc = p->shape[1];
            if (p->requires_grad) {
              auto& g = p->ensure_grad();
              for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < pc; ++j)
                  g[i * pc + j] += n.grad[i * out_cols + col_off + j];
            }
            col_off += pc;
          }
        }
      });
}

Tensor masked_row_softmax(const Tensor& t, const std::vector<std::uint8_t>& mask) {
  auto [r, c] = row_view(t.shape(), "row-softmax");
  if (mask.size() != t.size()) {
    throw std::invalid_argument("row-softmax: mask size " +
                                std::to_string(mask.size()) + " vs tensor " +
                                shape_str(t.shape()));
  }
  std::vector<double> out(t.size(), 0.0);
  for (std::size_t i = 0; i < r; ++i) {
    const double* in = t.values().data() + i * c;
    const std::uint8_t* m = mask.data() + i * c;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < c; ++j)
      if (m[j] && in[j] > mx) mx = in[j];
    if (mx == -std::numeric_limits<double>::infinity()) {
      throw std::invalid_argument("row-softmax: row " + std::to_string(i) +
                                  " has no unmasked entries");
    }
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j)
      if (m[j]) z += std::exp(in[j] - mx);
    for (std::size_t j = 0; j < c; ++j)
      if (m[j]) out[i * c + j] = std::exp(in[j] - mx) / z;
  }
  auto tn = t.node();
  return make_op_output(
      "row-softmax", t.shape(), std::move(out), {tn},
      [tn, r, c](detail::Node& n) {
        auto& g = tn->ensure_grad();
        for (std::size_t i = 0; i < r; ++i) {
          const double* y = n.values.data() + i * c;
          const double* gy = n.grad.data() + i * c;
          double dot = 0.0;
          for (std::size_t j = 0; j < c; ++j) dot += gy[j] * y[j];
          for (std::size_t j = 0; j < c; ++j)
            g[i * c + j] += y[j] * (gy[j] - dot);
        }
      });
}

Tensor row_softmax(const Tensor& t) {
  return masked_row_softmax(t, std::vector<std::uint8_t>(t.size(), 1));
}

Tensor sigmoid(const Tensor& t) {
  return elementwise_unary(
      "sigmoid", t, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor& t) {
  return elementwise_unary(
      "tanh", t, [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; });
}

Tensor relu(const Tensor& t) {
  return elementwise_unary(
      "relu", t, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor log(const Tensor& t) {
  return elementwise_unary(
      "log", t, [](double x) { return std::log(x); },
      [](double x, double) { return 1.0 / x; });
}

Tensor exp(const Tensor& t) {
  return elementwise_unary(
      "exp", t, [](double x) { return std::exp(x); },
      [](double, double y) { return y; });
}

Tensor clamp_min(const Tensor& t, double floor) {
  return elementwise_unary(
      "clamp-min", t, [floor](double x) { return x < floor ? floor : x; },
      [floor](double x, double) { return x < floor ? 0.0 : 1.0; });
}

Tensor mean(const Tensor& t) {
  const double inv = 1.0 / static_cast<double>(t.size());
  double acc = 0.0;
  for (double v : t.values()) acc += v;
  auto tn = t.node();
  return make_op_output("mean", {1}, {acc * inv}, {tn},
                        [tn, inv](detail::Node& n) {
                          auto& g = tn->ensure_grad();
                          const double gv = n.grad[0] * inv;
                          for (double& x : g) x += gv;
                        });
}

Tensor sum(const Tensor& t) {
  double acc = 0.0;
  for (double v : t.values()) acc += v;
  auto tn = t.node();
  return make_op_output("sum", {1}, {acc}, {tn}, [tn](detail::Node& n) {
    auto& g = tn->ensure_grad();
    const double gv = n.grad[0];
    for (double& x : g) x += gv;
  });
}

Tensor scalar_mul(const Tensor& t, double c) {
  std::vector<double> out(t.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = t.values()[i] * c;
  auto tn = t.node();
  return make_op_output("scalar-mul", t.shape(), std::move(out), {tn},
                        [tn, c](detail::Node& n) {
                          auto& g = tn->ensure_grad();
                          for (std::size_t i = 0; i < n.grad.size(); ++i)
                            g[i] += n.grad[i] * c;
                        });
}

Tensor rows(const Tensor& t, const std::vector<std::size_t>& indices) {
  const std::size_t rank = t.shape().size();
  if (rank != 1 && rank != 2)
    throw std::invalid_argument("embedding-select: expected rank 1 or 2, got " +
                                shape_str(t.shape()));
  const std::size_t r = t.shape()[0];
  const std::size_t c = rank == 2 ? t.shape()[1] : 1;
  for (std::size_t idx : indices) {
    if (idx >= r)
      throw std::invalid_argument("embedding-select: index " + std::to_string(idx) +
                                  " out of range for " + shape_str(t.shape()));
  }
  std::vector<double> out(indices.size() * c);
  for (std::size_t i = 0; i < indices.size(); ++i)
    std::copy_n(t.values().data() + indices[i] * c, c, out.data() + i * c);
  Shape out_shape = rank == 2 ? Shape{indices.size(), c} : Shape{indices.size()};
  auto tn = t.node();
  auto idx = indices;
  return make_op_output("embedding-select", std::move(out_shape), std::move(out),
                        {tn}, [tn, idx, c](detail::Node& n) {
                          auto& g = tn->ensure_grad();
                          for (std::size_t i = 0; i < idx.size(); ++i)
                            for (std::size_t j = 0; j < c; ++j)
                              g[idx[i] * c + j] += n.grad[i * c + j];
                        });
}

Tensor transpose(const Tensor& t) {
  check_rank2("transpose", t);
  const std::size_t r = t.rows(), c = t.cols();
  std::vector<double> out(r * c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = t.values()[i * c + j];
  auto tn = t.node();
  return make_op_output("transpose", {c, r}, std::move(out), {tn},
                        [tn, r, c](detail::Node& n) {
                          auto& g = tn->ensure_grad();
                          for (std::size_t i = 0; i < r; ++i)
                            for (std::size_t j = 0; j < c; ++j)
                              g[i * c + j] += n.grad[j * r + i];
                        });
}

Tensor reshape(const Tensor& t, Shape new_shape) {
  if (shape_size(new_shape) != t.size()) {
    throw std::invalid_argument("reshape: " + shape_str(t.shape()) + " to " +
                                shape_str(new_shape) + " changes element count");
  }
  auto tn = t.node();
  return make_op_output("reshape", std::move(new_shape),
                        std::vector<double>(t.values()), {tn},
                        [tn](detail::Node& n) {
                          auto& g = tn->ensure_grad();
                          for (std::size_t i = 0; i < n.grad.size(); ++i)
                            g[i] += n.grad[i];
                        });
}

const char* op_kind_name(OpKind kind) {
  switch (kind) {
    case OpKind::kMatmul: return "matmul";
    case OpKind::kAdd: return "add";
    case OpKind::kSub: return "sub";
    case OpKind::kElementwiseMul: return "elementwise-mul";
    case OpKind::kConcat: return "concat";
    case OpKind::kRowSoftmax: return "row-softmax";
    case OpKind::kSigmoid: return "sigmoid";
    case OpKind::kTanh: return "tanh";
    case OpKind::kRelu: return "relu";
    case OpKind::kLog: return "log";
    case OpKind::kMean: return "mean";
    case OpKind::kSum: return "sum";
    case OpKind::kScalarMul: return "scalar-mul";
    case OpKind::kEmbeddingSelect: return "embedding-select";
    case OpKind::kTranspose: return "transpose";
  }
  return "?";
}

Tensor apply(OpKind kind, const std::vector<Tensor>& inputs) {
  auto need = [&](std::size_t n) {
    if (inputs.size() != n) {
      throw std::invalid_argument(std::string(op_kind_name(kind)) + ": expected " +
                                  std::to_string(n) + " inputs, got " +
                                  std::to_string(inputs.size()));
    }
  };
  switch (kind) {
    case OpKind::kMatmul: need(2); return matmul(inputs[0], inputs[1]);
    case OpKind::kAdd: need(2); return add(inputs[0], inputs[1]);
    case OpKind::kSub: need(2); return sub(inputs[0], inputs[1]);
    case OpKind::kElementwiseMul: need(2); return mul(inputs[0], inputs[1]);
    case OpKind::kConcat: return concat(inputs, 0);
    case OpKind::kRowSoftmax: need(1); return row_softmax(inputs[0]);
    case OpKind::kSigmoid: need(1); return sigmoid(inputs[0]);
    case OpKind::kTanh: need(1); return tanh(inputs[0]);
    case OpKind::kRelu: need(1); return relu(inputs[0]);
    case OpKind::kLog: need(1); return log(inputs[0]);
    case OpKind::kMean: need(1); return mean(inputs[0]);
    case OpKind::kSum: need(1); return sum(inputs[0]);
    case OpKind::kScalarMul: {
      need(2);
      if (inputs[1].size() != 1)
        throw std::invalid_argument("scalar-mul: second input must be a scalar");
      return scalar_mul(inputs[0], inputs[1].item());
    }
    case OpKind::kEmbeddingSelect: {
      need(2);
      std::vector<std::size_t> idx;
      idx.reserve(inputs[1].size());
      for (double v : inputs[1].values()) {
        if (v < 0.0)
          throw std::invalid_argument("embedding-select: negative index");
        idx.push_back(static_cast<std::size_t>(v));
      }
      return rows(inputs[0], idx);
    }
    case OpKind::kTranspose: need(1); return transpose(inputs[0]);
  }
  throw std::invalid_argument("apply: unknown op kind");
}

double grad_check(const std::function<Tensor(const Tensor&)>& f, Tensor x,
                  double h) {
  if (h <= 0.0) throw std::invalid_argument("grad_check: h must be positive");
  std::vector<double> analytic;
  {
    Tape tape;
    Tensor y = f(x);
    if (y.size() != 1)
      throw std::invalid_argument("grad_check: f must be scalar-valued");
    if (!std::isfinite(y.item()))
      throw std::runtime_error("grad_check: non-finite function value");
    tape.backward(y);
    analytic = x.has_grad() ? x.grad() : std::vector<double>(x.size(), 0.0);
    x.zero_grad();
  }
  double worst = 0.0;
  auto& vals = x.mutable_values();
  for (std::size_t i = 0; i < vals.size(); ++i) {
    const double saved = vals[i];
    vals[i] = saved + h;
    const double up = f(x).item();
    vals[i] = saved - h;
    const double down = f(x).item();
    vals[i] = saved;
    if (!std::isfinite(up) || !std::isfinite(down))
      throw std::runtime_error("grad_check: non-finite function value");
    const double central = (up - down) / (2.0 * h);
    const double err = std::abs(analytic[i] - central) /
                       (std::abs(analytic[i]) + std::abs(central) + 1e-8);
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace causalwalk::ad
