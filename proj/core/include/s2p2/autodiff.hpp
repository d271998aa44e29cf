#pragma once

#include <complex>
#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <vector>

namespace s2p2::ad {

using cplx = std::complex<double>;

/// Dense row-major 2-D array of doubles. Complex tensors store interleaved
/// (re, im) pairs, so `data.size() == rows * cols * (is_complex ? 2 : 1)`.
struct Tensor {
  std::size_t rows = 0;
  std::size_t cols = 0;
  bool is_complex = false;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::size_t r, std::size_t c, bool complex = false)
      : rows(r), cols(c), is_complex(complex), data(r * c * (complex ? 2 : 1), 0.0) {}

  static Tensor full(std::size_t r, std::size_t c, double v);
  static Tensor from(std::size_t r, std::size_t c, std::vector<double> values,
                     bool complex = false);
  static Tensor scalar(double v) { return full(1, 1, v); }

  std::size_t numel() const noexcept { return rows * cols; }
  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  cplx* cdata() noexcept { return reinterpret_cast<cplx*>(data.data()); }
  const cplx* cdata() const noexcept { return reinterpret_cast<const cplx*>(data.data()); }
  cplx& c(std::size_t r, std::size_t col) { return cdata()[r * cols + col]; }
  cplx c(std::size_t r, std::size_t col) const { return cdata()[r * cols + col]; }
  double item() const;
  bool same_shape(const Tensor& o) const noexcept {
    return rows == o.rows && cols == o.cols && is_complex == o.is_complex;
  }
};

class Tape;

struct Node {
  Tensor value;
  Tensor grad;
  bool has_grad = false;  // set once an adjoint reaches the node
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;

  /// Adds `g` into this node's adjoint (allocating zeros on first use).
  void accumulate(const Tensor& g);
};

/// Handle to a value on a tape.
class Var {
 public:
  Var() = default;
  Var(std::shared_ptr<Node> node, Tape* tape) : node_(std::move(node)), tape_(tape) {}

  const Tensor& value() const { return node_->value; }
  std::size_t rows() const { return node_->value.rows; }
  std::size_t cols() const { return node_->value.cols; }
  bool is_complex() const { return node_->value.is_complex; }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  bool defined() const noexcept { return static_cast<bool>(node_); }
  Tape* tape() const noexcept { return tape_; }
  const std::shared_ptr<Node>& node() const noexcept { return node_; }

 private:
  std::shared_ptr<Node> node_;
  Tape* tape_ = nullptr;
};

/// Append-only record of differentiable operations. With recording off, ops
/// compute values only and intermediates are freed as soon as unreferenced.
class Tape {
 public:
  explicit Tape(bool recording = true) : recording_(recording) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// A parameter: receives an adjoint from backward().
  Var leaf(Tensor value);
  Var constant(Tensor value);

  /// Reverse sweep from a 1x1 real loss with seed 1.
  void backward(const Var& loss);
  /// Adjoint of `v`; zeros (same shape) when unreachable from the loss.
  Tensor grad(const Var& v) const;

  bool recording() const noexcept { return recording_; }
  std::size_t size() const noexcept { return nodes_.size(); }
  void clear() { nodes_.clear(); }

  /// Used by operations to register a result.
  Var record(Tensor value, std::vector<Var> inputs, std::function<void(Node&)> backward);

 private:
  bool recording_;
  std::vector<std::shared_ptr<Node>> nodes_;
};

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Elementwise ops broadcast an operand of shape (1, c), (r, 1) or (1, 1)
// against (r, c). Mixing real and complex operands yields a complex result.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);

/// a @ b, or a @ b^T when `transpose_b` (plain transpose, no conjugation).
Var matmul(const Var& a, const Var& b, bool transpose_b = false);

Var exp(const Var& a);
/// Throws std::domain_error for non-positive entries.
Var log(const Var& a);
Var softplus(const Var& a);
/// Exact erf form: x * Phi(x).
Var gelu(const Var& a);
/// Row-wise normalization over columns with affine gamma/beta of shape (1, c).
Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps = 1e-5);

Var sum(const Var& a);
Var mean(const Var& a);
/// (r, c) -> (r, 1).
Var row_sum(const Var& a);
/// Rows of `table` selected by `index`.
Var gather_rows(const Var& table, std::span<const std::size_t> index);
/// Rows [begin, begin + count).
Var slice_rows(const Var& a, std::size_t begin, std::size_t count);
/// Element (i, cols[i]) of each row, as (r, 1).
Var pick(const Var& a, std::span<const std::size_t> cols);
Var concat_rows(const Var& top, const Var& bottom);

/// Elementwise complex exponential of a complex tensor.
Var cexp(const Var& z);
Var real_part(const Var& z);
/// re + i*im; `im` may be undefined for a zero imaginary part.
Var complex_from_parts(const Var& re, const Var& im = {});

/// States of x_i = a_i * x_{i-1} + b_i (elementwise, i = 0..N-1) with x_{-1} = x0.
/// a, b: N x P complex; x0: 1 x P complex. One fused tape node whose backward
/// is itself a reverse scan.
Var scan(const Var& a, const Var& b, const Var& x0);

}  // namespace s2p2::ad
