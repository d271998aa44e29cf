#include "s2p2/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <type_traits>
#include <numbers>
#include <string>

#include "s2p2/scan.hpp"

namespace s2p2::ad {

namespace {

std::string shape_str(const Tensor& t) {
  return "(" + std::to_string(t.rows) + ", " + std::to_string(t.cols) + (t.is_complex ? ", c)" : ")");
}

cplx load(const Tensor& t, std::size_t k) {
  return t.is_complex ? t.cdata()[k] : cplx(t.data[k], 0.0);
}

std::size_t bidx(const Tensor& t, std::size_t i, std::size_t j) {
  return (t.rows == 1 ? 0 : i) * t.cols + (t.cols == 1 ? 0 : j);
}

std::size_t broadcast_dim(std::size_t x, std::size_t y, const Tensor& a, const Tensor& b) {
  if (x == y || y == 1) return x;
  if (x == 1) return y;
  throw ShapeError("cannot broadcast " + shape_str(a) + " with " + shape_str(b));
}

Var make(Tensor value, std::vector<Var> inputs, std::function<void(Node&)> backward) {
  Tape* tape = nullptr;
  for (const auto& v : inputs) {
    if (v.defined() && v.tape()) {
      tape = v.tape();
      break;
    }
  }
  if (tape) return tape->record(std::move(value), std::move(inputs), std::move(backward));
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  return Var(std::move(node), nullptr);
}

void require_real(const Var& v, const char* op) {
  if (v.is_complex()) throw ShapeError(std::string(op) + " expects a real tensor");
}

void require_complex(const Var& v, const char* op) {
  if (!v.is_complex()) throw ShapeError(std::string(op) + " expects a complex tensor");
}

// Sums a full-shape adjoint over broadcast dimensions of `like` and drops the
// imaginary part when `like` is real.
Tensor reduce_to(const Tensor& g, const Tensor& like) {
  Tensor out(like.rows, like.cols, like.is_complex);
  for (std::size_t i = 0; i < g.rows; ++i) {
    for (std::size_t j = 0; j < g.cols; ++j) {
      const std::size_t src = i * g.cols + j;
      const std::size_t dst = bidx(like, i, j);
      if (like.is_complex) {
        out.cdata()[dst] += load(g, src);
      } else {
        out.data[dst] += g.is_complex ? g.cdata()[src].real() : g.data[src];
      }
    }
  }
  return out;
}

template <class F>
Tensor zip(const Tensor& a, const Tensor& b, bool complex_out, F f) {
  const std::size_t r = broadcast_dim(a.rows, b.rows, a, b);
  const std::size_t c = broadcast_dim(a.cols, b.cols, a, b);
  Tensor out(r, c, complex_out);
  if (complex_out) {
    cplx* o = out.cdata();
    for (std::size_t i = 0; i < r; ++i) {
      for (std::size_t j = 0; j < c; ++j) o[i * c + j] = f(load(a, bidx(a, i, j)), load(b, bidx(b, i, j)));
    }
  } else {
    for (std::size_t i = 0; i < r; ++i) {
      for (std::size_t j = 0; j < c; ++j) out.data[i * c + j] = f(a.data[bidx(a, i, j)], b.data[bidx(b, i, j)]);
    }
  }
  return out;
}

template <class F>
Tensor map_real(const Tensor& a, F f) {
  Tensor out(a.rows, a.cols);
  for (std::size_t k = 0; k < a.numel(); ++k) out.data[k] = f(a.data[k]);
  return out;
}

// Keeps the real part when the target is real.
Tensor project(Tensor g, const Tensor& like) {
  if (like.is_complex || !g.is_complex) return g;
  Tensor out(g.rows, g.cols);
  for (std::size_t k = 0; k < g.numel(); ++k) out.data[k] = g.cdata()[k].real();
  return out;
}

void push(Node& self, std::size_t input, const Tensor& g) {
  auto& in = self.inputs[input];
  if (in->requires_grad) in->accumulate(g);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }
double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

double stable_softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }
double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Copies `count` rows of width `w` doubles.
void copy_rows(const Tensor& src, std::size_t src_row, Tensor& dst, std::size_t dst_row,
               std::size_t count) {
  const std::size_t w = src.cols * (src.is_complex ? 2 : 1);
  std::copy(src.data.begin() + src_row * w, src.data.begin() + (src_row + count) * w,
            dst.data.begin() + dst_row * w);
}

}  // namespace

// --- Tensor / Node / Tape ----------------------------------------------------

Tensor Tensor::full(std::size_t r, std::size_t c, double v) {
  Tensor t(r, c);
  std::fill(t.data.begin(), t.data.end(), v);
  return t;
}

Tensor Tensor::from(std::size_t r, std::size_t c, std::vector<double> values, bool complex) {
  if (values.size() != r * c * (complex ? 2 : 1)) {
    throw ShapeError("tensor data length does not match shape");
  }
  Tensor t;
  t.rows = r;
  t.cols = c;
  t.is_complex = complex;
  t.data = std::move(values);
  return t;
}

double Tensor::item() const {
  if (rows != 1 || cols != 1 || is_complex) throw ShapeError("item() needs a real 1x1 tensor");
  return data[0];
}

void Node::accumulate(const Tensor& g) {
  if (!g.same_shape(value)) {
    throw ShapeError("adjoint shape " + shape_str(g) + " does not match value " + shape_str(value));
  }
  if (!has_grad) {
    grad = g;
    has_grad = true;
    return;
  }
  for (std::size_t k = 0; k < grad.data.size(); ++k) grad.data[k] += g.data[k];
}

Var Tape::leaf(Tensor value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = recording_;
  return Var(std::move(node), this);
}

Var Tape::constant(Tensor value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  return Var(std::move(node), this);
}

Var Tape::record(Tensor value, std::vector<Var> inputs, std::function<void(Node&)> backward) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  if (recording_) {
    bool any = false;
    for (const auto& v : inputs) any = any || v.requires_grad();
    if (any) {
      node->requires_grad = true;
      node->inputs.reserve(inputs.size());
      for (auto& v : inputs) node->inputs.push_back(v.node());
      node->backward = std::move(backward);
      nodes_.push_back(node);
    }
  }
  return Var(std::move(node), this);
}

void Tape::backward(const Var& loss) {
  const Tensor& v = loss.value();
  if (v.rows != 1 || v.cols != 1 || v.is_complex) {
    throw ShapeError("backward() needs a real scalar loss, got " + shape_str(v));
  }
  if (!loss.requires_grad()) return;
  loss.node()->accumulate(Tensor::scalar(1.0));
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    Node& n = **it;
    if (n.has_grad && n.backward) n.backward(n);
  }
}

Tensor Tape::grad(const Var& v) const {
  if (v.node()->has_grad) return v.node()->grad;
  return Tensor(v.rows(), v.cols(), v.is_complex());
}

// --- elementwise -------------------------------------------------------------

// z = a + b:  g_a = sum_bcast(g),  g_b = sum_bcast(g)
Var add(const Var& a, const Var& b) {
  const bool c = a.is_complex() || b.is_complex();
  Tensor out = zip(a.value(), b.value(), c, [](auto x, auto y) { return x + y; });
  return make(std::move(out), {a, b}, [](Node& self) {
    push(self, 0, reduce_to(self.grad, self.inputs[0]->value));
    push(self, 1, reduce_to(self.grad, self.inputs[1]->value));
  });
}

// z = a - b:  g_a = sum_bcast(g),  g_b = -sum_bcast(g)
Var sub(const Var& a, const Var& b) {
  const bool c = a.is_complex() || b.is_complex();
  Tensor out = zip(a.value(), b.value(), c, [](auto x, auto y) { return x - y; });
  return make(std::move(out), {a, b}, [](Node& self) {
    push(self, 0, reduce_to(self.grad, self.inputs[0]->value));
    Tensor gb = reduce_to(self.grad, self.inputs[1]->value);
    for (double& x : gb.data) x = -x;
    push(self, 1, gb);
  });
}

// z = a * b:  g_a = sum_bcast(g conj(b)),  g_b = sum_bcast(g conj(a))
Var mul(const Var& a, const Var& b) {
  const bool c = a.is_complex() || b.is_complex();
  Tensor out = zip(a.value(), b.value(), c, [](auto x, auto y) { return x * y; });
  return make(std::move(out), {a, b}, [](Node& self) {
    const Tensor& av = self.inputs[0]->value;
    const Tensor& bv = self.inputs[1]->value;
    const bool cg = self.grad.is_complex;
    const auto times_conj = [&](const Tensor& other) {
      return zip(self.grad, other, cg, [](auto g, auto o) {
        if constexpr (std::is_same_v<decltype(o), cplx>) {
          return g * std::conj(o);
        } else {
          return g * o;
        }
      });
    };
    if (self.inputs[0]->requires_grad) push(self, 0, reduce_to(times_conj(bv), av));
    if (self.inputs[1]->requires_grad) push(self, 1, reduce_to(times_conj(av), bv));
  });
}

// z = s a:  g_a = s g
Var scale(const Var& a, double s) {
  Tensor out = a.value();
  for (double& x : out.data) x *= s;
  return make(std::move(out), {a}, [s](Node& self) {
    Tensor g = self.grad;
    for (double& x : g.data) x *= s;
    push(self, 0, g);
  });
}

// z = a + s:  g_a = g
Var add_scalar(const Var& a, double s) {
  Tensor out = a.value();
  const std::size_t stride = out.is_complex ? 2 : 1;
  for (std::size_t k = 0; k < out.data.size(); k += stride) out.data[k] += s;
  return make(std::move(out), {a}, [](Node& self) { push(self, 0, self.grad); });
}

// --- matmul ------------------------------------------------------------------

namespace {

// c (m x n) = a (m x k) b (k x n). Each output row accumulates over k in a
// fixed order, so a row's value does not depend on how many rows there are.
template <class T>
void gemm(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
  std::fill(c, c + m * n, T{});
  for (std::size_t i = 0; i < m; ++i) {
    T* ci = c + i * n;
    for (std::size_t l = 0; l < k; ++l) {
      const T ail = a[i * k + l];
      const T* bl = b + l * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += ail * bl[j];
    }
  }
}

// Dense row-major copy of op(t) where op is identity, transpose, conjugate,
// or conjugate transpose; promoted to complex when `complex` is set.
template <class T>
std::vector<T> dense(const Tensor& t, bool transpose, bool conjugate) {
  const std::size_t r = transpose ? t.cols : t.rows;
  const std::size_t c = transpose ? t.rows : t.cols;
  std::vector<T> out(r * c);
  for (std::size_t i = 0; i < t.rows; ++i) {
    for (std::size_t j = 0; j < t.cols; ++j) {
      const std::size_t dst = transpose ? j * c + i : i * c + j;
      if constexpr (std::is_same_v<T, cplx>) {
        const cplx v = load(t, i * t.cols + j);
        out[dst] = conjugate ? std::conj(v) : v;
      } else {
        out[dst] = t.data[i * t.cols + j];
      }
    }
  }
  return out;
}

// op(x) op(y) as a tensor; complex if either operand is.
Tensor product(const Tensor& x, bool tx, bool cx, const Tensor& y, bool ty, bool cy) {
  const std::size_t m = tx ? x.cols : x.rows;
  const std::size_t k = tx ? x.rows : x.cols;
  const std::size_t n = ty ? y.rows : y.cols;
  if (!x.is_complex && !y.is_complex) {
    Tensor out(m, n);
    const auto xs = dense<double>(x, tx, false);
    const auto ys = dense<double>(y, ty, false);
    gemm(xs.data(), ys.data(), out.data.data(), m, k, n);
    return out;
  }
  Tensor out(m, n, true);
  if (!x.is_complex) {
    // An interleaved k x n complex matrix is a real k x 2n matrix.
    const auto xs = dense<double>(x, tx, false);
    const auto ys = dense<cplx>(y, ty, cy);
    gemm(xs.data(), reinterpret_cast<const double*>(ys.data()), out.data.data(), m, k, 2 * n);
    return out;
  }
  const auto xs = dense<cplx>(x, tx, cx);
  if (!y.is_complex) {
    const auto ys = dense<double>(y, ty, false);
    double* c = out.data.data();
    for (std::size_t i = 0; i < m; ++i) {
      double* ci = c + 2 * i * n;
      for (std::size_t l = 0; l < k; ++l) {
        const double re = xs[i * k + l].real();
        const double im = xs[i * k + l].imag();
        const double* yl = ys.data() + l * n;
        for (std::size_t j = 0; j < n; ++j) {
          ci[2 * j] += re * yl[j];
          ci[2 * j + 1] += im * yl[j];
        }
      }
    }
    return out;
  }
  const auto ys = dense<cplx>(y, ty, cy);
  gemm(xs.data(), ys.data(), out.cdata(), m, k, n);
  return out;
}

}  // namespace

// Y = A B:    g_A = G B^H,      g_B = A^H G
// Y = A B^T:  g_A = G conj(B),  g_B = G^T conj(A)
Var matmul(const Var& a, const Var& b, bool transpose_b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const std::size_t inner_b = transpose_b ? bv.cols : bv.rows;
  if (av.cols != inner_b) {
    throw ShapeError("matmul shapes " + shape_str(av) + " and " + shape_str(bv) +
                     (transpose_b ? " (b transposed)" : ""));
  }
  Tensor out = product(av, false, false, bv, transpose_b, false);
  return make(std::move(out), {a, b}, [transpose_b](Node& self) {
    const Tensor& av = self.inputs[0]->value;
    const Tensor& bv = self.inputs[1]->value;
    const Tensor& g = self.grad;
    if (self.inputs[0]->requires_grad) {
      push(self, 0, project(product(g, false, false, bv, !transpose_b, true), av));
    }
    if (self.inputs[1]->requires_grad) {
      push(self, 1, project(transpose_b ? product(g, true, false, av, false, true)
                                        : product(av, true, true, g, false, false),
                            bv));
    }
  });
}

// --- real pointwise ----------------------------------------------------------

// y = exp(x):  g_x = g y
Var exp(const Var& a) {
  require_real(a, "exp");
  Tensor out = map_real(a.value(), [](double x) { return std::exp(x); });
  return make(std::move(out), {a}, [](Node& self) {
    Tensor g = self.grad;
    const Tensor& x = self.inputs[0]->value;
    for (std::size_t k = 0; k < g.data.size(); ++k) g.data[k] *= std::exp(x.data[k]);
    push(self, 0, g);
  });
}

// y = log(x):  g_x = g / x
Var log(const Var& a) {
  require_real(a, "log");
  for (double x : a.value().data) {
    if (!(x > 0.0)) throw std::domain_error("log of non-positive value " + std::to_string(x));
  }
  Tensor out = map_real(a.value(), [](double x) { return std::log(x); });
  return make(std::move(out), {a}, [](Node& self) {
    Tensor g = self.grad;
    const Tensor& x = self.inputs[0]->value;
    for (std::size_t k = 0; k < g.data.size(); ++k) g.data[k] /= x.data[k];
    push(self, 0, g);
  });
}

// y = log(1 + e^x):  g_x = g sigmoid(x)
Var softplus(const Var& a) {
  require_real(a, "softplus");
  Tensor out = map_real(a.value(), stable_softplus);
  return make(std::move(out), {a}, [](Node& self) {
    Tensor g = self.grad;
    const Tensor& x = self.inputs[0]->value;
    for (std::size_t k = 0; k < g.data.size(); ++k) g.data[k] *= sigmoid(x.data[k]);
    push(self, 0, g);
  });
}

// y = x Phi(x):  g_x = g (Phi(x) + x phi(x))
Var gelu(const Var& a) {
  require_real(a, "gelu");
  Tensor out = map_real(a.value(), [](double x) { return x * normal_cdf(x); });
  return make(std::move(out), {a}, [](Node& self) {
    Tensor g = self.grad;
    const Tensor& x = self.inputs[0]->value;
    for (std::size_t k = 0; k < g.data.size(); ++k) {
      const double v = x.data[k];
      g.data[k] *= normal_cdf(v) + v * normal_pdf(v);
    }
    push(self, 0, g);
  });
}

// Per row: xh = (x - mu) / sigma, y = gamma xh + beta.
//   g_gamma = sum_rows g xh,  g_beta = sum_rows g,
//   g_x = (gh - mean(gh) - xh mean(gh xh)) / sigma  with gh = g gamma.
Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps) {
  require_real(x, "layer_norm");
  const Tensor& xv = x.value();
  const std::size_t r = xv.rows;
  const std::size_t c = xv.cols;
  if (gamma.rows() != 1 || gamma.cols() != c || beta.rows() != 1 || beta.cols() != c) {
    throw ShapeError("layer_norm gamma/beta must be (1, " + std::to_string(c) + ")");
  }
  auto xhat = std::make_shared<Tensor>(r, c);
  auto inv_sigma = std::make_shared<std::vector<double>>(r);
  Tensor out(r, c);
  const auto& gv = gamma.value().data;
  const auto& bv = beta.value().data;
  for (std::size_t i = 0; i < r; ++i) {
    double mu = 0.0;
    for (std::size_t j = 0; j < c; ++j) mu += xv(i, j);
    mu /= static_cast<double>(c);
    double var = 0.0;
    for (std::size_t j = 0; j < c; ++j) var += (xv(i, j) - mu) * (xv(i, j) - mu);
    var /= static_cast<double>(c);
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_sigma)[i] = is;
    for (std::size_t j = 0; j < c; ++j) {
      const double h = (xv(i, j) - mu) * is;
      (*xhat)(i, j) = h;
      out(i, j) = gv[j] * h + bv[j];
    }
  }
  return make(std::move(out), {x, gamma, beta}, [xhat, inv_sigma](Node& self) {
    const Tensor& g = self.grad;
    const std::size_t r = g.rows;
    const std::size_t c = g.cols;
    const auto& gam = self.inputs[1]->value.data;
    Tensor gx(r, c);
    Tensor ggamma(1, c);
    Tensor gbeta(1, c);
    std::vector<double> gh(c);
    for (std::size_t i = 0; i < r; ++i) {
      double m1 = 0.0;
      double m2 = 0.0;
      for (std::size_t j = 0; j < c; ++j) {
        gh[j] = g(i, j) * gam[j];
        m1 += gh[j];
        m2 += gh[j] * (*xhat)(i, j);
        ggamma.data[j] += g(i, j) * (*xhat)(i, j);
        gbeta.data[j] += g(i, j);
      }
      m1 /= static_cast<double>(c);
      m2 /= static_cast<double>(c);
      for (std::size_t j = 0; j < c; ++j) {
        gx(i, j) = (gh[j] - m1 - (*xhat)(i, j) * m2) * (*inv_sigma)[i];
      }
    }
    push(self, 0, gx);
    push(self, 1, ggamma);
    push(self, 2, gbeta);
  });
}

// --- reductions and indexing -------------------------------------------------

// y = sum(a):  g_a = g 1
Var sum(const Var& a) {
  require_real(a, "sum");
  double s = 0.0;
  for (double x : a.value().data) s += x;
  return make(Tensor::scalar(s), {a}, [](Node& self) {
    const auto& v = self.inputs[0]->value;
    push(self, 0, Tensor::full(v.rows, v.cols, self.grad.data[0]));
  });
}

// y = sum(a) / n:  g_a = g / n
Var mean(const Var& a) {
  const double n = static_cast<double>(a.value().numel());
  if (n == 0) throw ShapeError("mean of an empty tensor");
  return scale(sum(a), 1.0 / n);
}

// y_i = sum_j a_ij:  g_a_ij = g_i
Var row_sum(const Var& a) {
  require_real(a, "row_sum");
  const Tensor& v = a.value();
  Tensor out(v.rows, 1);
  for (std::size_t i = 0; i < v.rows; ++i) {
    for (std::size_t j = 0; j < v.cols; ++j) out.data[i] += v(i, j);
  }
  return make(std::move(out), {a}, [](Node& self) {
    const auto& v = self.inputs[0]->value;
    Tensor g(v.rows, v.cols);
    for (std::size_t i = 0; i < v.rows; ++i) {
      for (std::size_t j = 0; j < v.cols; ++j) g(i, j) = self.grad.data[i];
    }
    push(self, 0, g);
  });
}

// y_i = table[index_i]:  g_table[index_i] += g_i
Var gather_rows(const Var& table, std::span<const std::size_t> index) {
  const Tensor& t = table.value();
  Tensor out(index.size(), t.cols, t.is_complex);
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= t.rows) {
      throw ShapeError("gather_rows index " + std::to_string(index[i]) + " out of range for " +
                       shape_str(t));
    }
    copy_rows(t, index[i], out, i, 1);
  }
  std::vector<std::size_t> idx(index.begin(), index.end());
  return make(std::move(out), {table}, [idx = std::move(idx)](Node& self) {
    const auto& t = self.inputs[0]->value;
    Tensor g(t.rows, t.cols, t.is_complex);
    const std::size_t w = t.cols * (t.is_complex ? 2 : 1);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      for (std::size_t j = 0; j < w; ++j) g.data[idx[i] * w + j] += self.grad.data[i * w + j];
    }
    push(self, 0, g);
  });
}

// y = a[begin : begin + count]:  g_a[begin : begin + count] = g
Var slice_rows(const Var& a, std::size_t begin, std::size_t count) {
  const Tensor& v = a.value();
  if (begin + count > v.rows) throw ShapeError("slice_rows out of range for " + shape_str(v));
  Tensor out(count, v.cols, v.is_complex);
  copy_rows(v, begin, out, 0, count);
  return make(std::move(out), {a}, [begin, count](Node& self) {
    const auto& v = self.inputs[0]->value;
    Tensor g(v.rows, v.cols, v.is_complex);
    copy_rows(self.grad, 0, g, begin, count);
    push(self, 0, g);
  });
}

// y_i = a[i, cols_i]:  g_a[i, cols_i] = g_i
Var pick(const Var& a, std::span<const std::size_t> cols) {
  require_real(a, "pick");
  const Tensor& v = a.value();
  if (cols.size() != v.rows) throw ShapeError("pick needs one column per row");
  Tensor out(v.rows, 1);
  for (std::size_t i = 0; i < v.rows; ++i) {
    if (cols[i] >= v.cols) throw ShapeError("pick column out of range");
    out.data[i] = v(i, cols[i]);
  }
  std::vector<std::size_t> idx(cols.begin(), cols.end());
  return make(std::move(out), {a}, [idx = std::move(idx)](Node& self) {
    const auto& v = self.inputs[0]->value;
    Tensor g(v.rows, v.cols);
    for (std::size_t i = 0; i < idx.size(); ++i) g(i, idx[i]) = self.grad.data[i];
    push(self, 0, g);
  });
}

// y = [top; bottom]:  g split by rows
Var concat_rows(const Var& top, const Var& bottom) {
  const Tensor& t = top.value();
  const Tensor& b = bottom.value();
  if (t.cols != b.cols || t.is_complex != b.is_complex) {
    throw ShapeError("concat_rows of " + shape_str(t) + " and " + shape_str(b));
  }
  Tensor out(t.rows + b.rows, t.cols, t.is_complex);
  copy_rows(t, 0, out, 0, t.rows);
  copy_rows(b, 0, out, t.rows, b.rows);
  return make(std::move(out), {top, bottom}, [](Node& self) {
    const auto& t = self.inputs[0]->value;
    const auto& b = self.inputs[1]->value;
    Tensor gt(t.rows, t.cols, t.is_complex);
    Tensor gb(b.rows, b.cols, b.is_complex);
    copy_rows(self.grad, 0, gt, 0, t.rows);
    copy_rows(self.grad, t.rows, gb, 0, b.rows);
    push(self, 0, gt);
    push(self, 1, gb);
  });
}

// --- complex -----------------------------------------------------------------

// w = e^z:  g_z = g conj(w)
Var cexp(const Var& z) {
  require_complex(z, "cexp");
  const Tensor& v = z.value();
  Tensor out(v.rows, v.cols, true);
  for (std::size_t k = 0; k < v.numel(); ++k) out.cdata()[k] = std::exp(v.cdata()[k]);
  return make(std::move(out), {z}, [](Node& self) {
    Tensor g = self.grad;
    for (std::size_t k = 0; k < g.numel(); ++k) g.cdata()[k] *= std::conj(self.value.cdata()[k]);
    push(self, 0, g);
  });
}

// y = Re z:  g_z = g + 0i
Var real_part(const Var& z) {
  require_complex(z, "real_part");
  const Tensor& v = z.value();
  Tensor out(v.rows, v.cols);
  for (std::size_t k = 0; k < v.numel(); ++k) out.data[k] = v.data[2 * k];
  return make(std::move(out), {z}, [](Node& self) {
    const auto& v = self.inputs[0]->value;
    Tensor g(v.rows, v.cols, true);
    for (std::size_t k = 0; k < v.numel(); ++k) g.data[2 * k] = self.grad.data[k];
    push(self, 0, g);
  });
}

// z = re + i im:  g_re = Re g,  g_im = Im g
Var complex_from_parts(const Var& re, const Var& im) {
  require_real(re, "complex_from_parts");
  const Tensor& r = re.value();
  if (im.defined()) {
    require_real(im, "complex_from_parts");
    if (im.rows() != r.rows || im.cols() != r.cols) {
      throw ShapeError("complex_from_parts parts differ in shape");
    }
  }
  Tensor out(r.rows, r.cols, true);
  for (std::size_t k = 0; k < r.numel(); ++k) {
    out.data[2 * k] = r.data[k];
    if (im.defined()) out.data[2 * k + 1] = im.value().data[k];
  }
  std::vector<Var> inputs{re};
  if (im.defined()) inputs.push_back(im);
  return make(std::move(out), std::move(inputs), [](Node& self) {
    const Tensor& g = self.grad;
    Tensor gr(g.rows, g.cols);
    Tensor gi(g.rows, g.cols);
    for (std::size_t k = 0; k < g.numel(); ++k) {
      gr.data[k] = g.data[2 * k];
      gi.data[k] = g.data[2 * k + 1];
    }
    push(self, 0, gr);
    if (self.inputs.size() > 1) push(self, 1, gi);
  });
}

// x_i = a_i x_{i-1} + b_i. With adjoint state G_i = g_i + conj(a_{i+1}) G_{i+1}
// (a reverse scan):  g_b_i = G_i,  g_a_i = G_i conj(x_{i-1}),  g_x0 = conj(a_0) G_0.
Var scan(const Var& a, const Var& b, const Var& x0) {
  require_complex(a, "scan");
  require_complex(b, "scan");
  require_complex(x0, "scan");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const std::size_t n = av.rows;
  const std::size_t p = av.cols;
  if (bv.rows != n || bv.cols != p || x0.rows() != 1 || x0.cols() != p) {
    throw ShapeError("scan shapes a " + shape_str(av) + ", b " + shape_str(bv) + ", x0 " +
                     shape_str(x0.value()));
  }
  Tensor out(n, p, true);
  linear_scan(av.cdata(), bv.cdata(), x0.value().cdata(), out.cdata(), n, p, default_scan_mode());
  return make(std::move(out), {a, b, x0}, [](Node& self) {
    const Tensor& av = self.inputs[0]->value;
    const Tensor& x0v = self.inputs[2]->value;
    const Tensor& xv = self.value;
    const std::size_t n = av.rows;
    const std::size_t p = av.cols;
    // Reverse time: A'_r = conj(a_{n-r}) (A'_0 unused), B'_r = g_{n-1-r}.
    Tensor ra(n, p, true);
    Tensor rb(n, p, true);
    for (std::size_t r = 0; r < n; ++r) {
      const std::size_t i = n - 1 - r;
      for (std::size_t j = 0; j < p; ++j) {
        ra.c(r, j) = r == 0 ? cplx{} : std::conj(av.c(i + 1, j));
        rb.c(r, j) = self.grad.c(i, j);
      }
    }
    Tensor rg(n, p, true);
    linear_scan(ra.cdata(), rb.cdata(), nullptr, rg.cdata(), n, p, default_scan_mode());
    Tensor gb(n, p, true);
    Tensor ga(n, p, true);
    Tensor gx0(1, p, true);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < p; ++j) {
        const cplx gi = rg.c(n - 1 - i, j);
        const cplx prev = i == 0 ? x0v.c(0, j) : xv.c(i - 1, j);
        gb.c(i, j) = gi;
        ga.c(i, j) = gi * std::conj(prev);
      }
    }
    if (n > 0) {
      for (std::size_t j = 0; j < p; ++j) gx0.c(0, j) = std::conj(av.c(0, j)) * gb.c(0, j);
    }
    push(self, 0, ga);
    push(self, 1, gb);
    push(self, 2, gx0);
  });
}

}  // namespace s2p2::ad
