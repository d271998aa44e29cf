#include "s2p2/llh.hpp"

#include <cmath>
#include <numbers>

#include "s2p2/events.hpp"

namespace s2p2 {

using ad::Tensor;
using ad::Var;
using cplx = std::complex<double>;

ZohMode parse_zoh_mode(std::string_view s) {
  if (s == "forward") return ZohMode::forward;
  if (s == "backward") return ZohMode::backward;
  throw ValidationError("unknown zoh mode '" + std::string(s) + "' (expected forward|backward)");
}

std::string to_string(ZohMode mode) { return mode == ZohMode::forward ? "forward" : "backward"; }

LLHLayerParams LLHLayerParams::init(std::size_t hidden, std::size_t state, bool input_dependent,
                                    ZohMode mode, Philox& rng) {
  if (hidden == 0 || state == 0) throw ValidationError("layer sizes must be positive");
  LLHLayerParams p;
  const double sd = std::sqrt(1.0 / static_cast<double>(state));
  const auto normal_complex = [&](std::size_t r, std::size_t c) {
    Tensor t(r, c, true);
    for (double& v : t.data) v = rng.normal(0.0, sd);
    return t;
  };
  p.rho = Tensor::full(1, state, std::log(0.5));
  p.theta = Tensor(1, state);
  for (std::size_t j = 0; j < state; ++j) p.theta.data[j] = std::numbers::pi * static_cast<double>(j);
  p.B = normal_complex(state, hidden);
  p.C = normal_complex(hidden, state);
  p.D = Tensor(1, hidden);
  p.E = normal_complex(state, hidden);
  p.x0 = Tensor(1, state, true);
  p.W_prime = Tensor(state, hidden);
  p.b_prime = Tensor::full(1, state, std::log(std::numbers::e - 1.0));
  p.input_dependent = input_dependent;
  p.zoh_mode = mode;
  return p;
}

std::vector<cplx> LLHLayerParams::lambda() const {
  std::vector<cplx> out(state());
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = {-std::exp(rho.data[j]), theta.data[j]};
  return out;
}

std::vector<std::pair<std::string, Tensor*>> LLHLayerParams::named(const std::string& prefix) {
  return {{prefix + "rho", &rho},     {prefix + "theta", &theta},     {prefix + "B", &B},
          {prefix + "C", &C},         {prefix + "D", &D},             {prefix + "E", &E},
          {prefix + "x0", &x0},       {prefix + "W_prime", &W_prime}, {prefix + "b_prime", &b_prime}};
}

void LLHLayerParams::validate() const {
  const std::size_t h = hidden();
  const std::size_t p = state();
  const auto check = [](const Tensor& t, std::size_t r, std::size_t c, bool complex,
                        const char* name) {
    if (t.rows != r || t.cols != c || t.is_complex != complex ||
        t.data.size() != r * c * (complex ? 2 : 1)) {
      throw ValidationError(std::string("layer parameter ") + name + " has the wrong shape");
    }
    for (double v : t.data) {
      if (!std::isfinite(v)) throw ValidationError(std::string("layer parameter ") + name + " is not finite");
    }
  };
  if (h == 0 || p == 0) throw ValidationError("layer sizes must be positive");
  check(rho, 1, p, false, "rho");
  check(theta, 1, p, false, "theta");
  check(B, p, h, true, "B");
  check(C, h, p, true, "C");
  check(D, 1, h, false, "D");
  check(E, p, h, true, "E");
  check(x0, 1, p, true, "x0");
  check(W_prime, p, h, false, "W_prime");
  check(b_prime, 1, p, false, "b_prime");
}

LLHLayerVars bind(const LLHLayerParams& params, ad::Tape& tape, bool trainable) {
  const auto put = [&](const Tensor& t) { return trainable ? tape.leaf(t) : tape.constant(t); };
  LLHLayerVars v;
  v.rho = put(params.rho);
  v.theta = put(params.theta);
  v.B = put(params.B);
  v.C = put(params.C);
  v.D = put(params.D);
  v.E = put(params.E);
  v.x0 = put(params.x0);
  v.W_prime = put(params.W_prime);
  v.b_prime = put(params.b_prime);
  v.input_dependent = params.input_dependent;
  v.zoh_mode = params.zoh_mode;
  v.lambda = ad::complex_from_parts(ad::scale(ad::exp(v.rho), -1.0), v.theta);
  return v;
}

std::vector<Tensor> gradients(const LLHLayerVars& v, const ad::Tape& tape) {
  return {tape.grad(v.rho), tape.grad(v.theta), tape.grad(v.B),
          tape.grad(v.C),   tape.grad(v.D),     tape.grad(v.E),
          tape.grad(v.x0),  tape.grad(v.W_prime), tape.grad(v.b_prime)};
}

Var input_scale(const LLHLayerVars& layer, const Var& u) {
  return ad::softplus(ad::add(ad::matmul(u, layer.W_prime, true), layer.b_prime));
}

Var decay(const LLHLayerVars& layer, const Var& scale, const Var& dt) {
  const Var rate = scale.defined() ? ad::mul(scale, layer.lambda) : layer.lambda;
  return ad::cexp(ad::mul(rate, dt));
}

Var evolve(const LLHLayerVars& layer, const Var& x, const Var& scale, const Var& delta,
           const Var& u_held) {
  const Var a = decay(layer, scale, delta);
  Var out = ad::mul(a, x);
  if (u_held.defined()) {
    out = ad::add(out, ad::mul(ad::add_scalar(a, -1.0), ad::matmul(u_held, layer.B, true)));
  }
  return out;
}

Var layer_output(const LLHLayerVars& layer, const Var& x, const Var& u) {
  Var y = ad::scale(ad::real_part(ad::matmul(x, layer.C, true)), 2.0);
  if (u.defined()) y = ad::add(y, ad::mul(u, layer.D));
  return y;
}

LayerScan scan_layer(const LLHLayerVars& layer, const Var& dt, const Var& impulses,
                     const Var& u_held, const Var& scale) {
  const Var a = decay(layer, scale, dt);
  Var b = impulses;
  if (u_held.defined()) {
    b = ad::add(ad::mul(ad::add_scalar(a, -1.0), ad::matmul(u_held, layer.B, true)), impulses);
  }
  LayerScan out;
  out.right = ad::scan(a, b, layer.x0);
  out.left = ad::sub(out.right, impulses);
  return out;
}

std::vector<cplx> effective_lambda(const LLHLayerParams& params, std::span<const double> u_prev) {
  auto lambda = params.lambda();
  if (!params.input_dependent) {
    if (!u_prev.empty()) throw ValidationError("u_prev given for an input-independent layer");
    return lambda;
  }
  const std::size_t h = params.hidden();
  if (u_prev.size() != h) throw ValidationError("u_prev must have one entry per hidden unit");
  for (std::size_t p = 0; p < lambda.size(); ++p) {
    double z = params.b_prime.data[p];
    for (std::size_t j = 0; j < h; ++j) z += params.W_prime.data[p * h + j] * u_prev[j];
    const double s = z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
    lambda[p] *= s;
  }
  return lambda;
}

Discretized discretize(std::span<const cplx> lambda, double dt) {
  if (!(dt >= 0.0)) throw ValidationError("dt must be >= 0");
  Discretized d;
  d.lambda_bar.resize(lambda.size());
  d.input_factor.resize(lambda.size());
  for (std::size_t p = 0; p < lambda.size(); ++p) {
    d.lambda_bar[p] = std::exp(lambda[p] * dt);
    d.input_factor[p] = d.lambda_bar[p] - 1.0;
  }
  return d;
}

LayerStates layer_forward(const LLHLayerParams& params, const Tensor& impulses,
                          const Tensor& u_left, std::span<const double> dt,
                          const Tensor& u_held) {
  const std::size_t n = dt.size();
  if (impulses.rows != n || u_left.rows != n || (u_held.numel() != 0 && u_held.rows != n)) {
    throw ValidationError("layer_forward inputs differ in length");
  }
  ad::Tape tape(false);
  const LLHLayerVars v = bind(params, tape, false);
  const Var dt_var = tape.constant(Tensor::from(n, 1, {dt.begin(), dt.end()}));
  const Var imp = tape.constant(impulses);
  const Var u = tape.constant(u_left);
  const Var held = u_held.numel() != 0 ? tape.constant(u_held) : u;
  Var scale;
  if (params.input_dependent && n > 0) {
    const Var zero = tape.constant(Tensor(1, u_left.cols));
    scale = input_scale(v, ad::concat_rows(zero, ad::slice_rows(u, 0, n - 1)));
  }
  const LayerScan states = scan_layer(v, dt_var, imp, held, scale);
  return {states.right.value(), states.left.value(), layer_output(v, states.left, u).value()};
}

std::vector<cplx> evolve_state(const LLHLayerParams& params, std::span<const cplx> x,
                               std::span<const double> u_held, std::span<const cplx> lambda,
                               double delta) {
  const std::size_t h = params.hidden();
  const std::size_t p = params.state();
  if (x.size() != p || lambda.size() != p || u_held.size() != h) {
    throw ValidationError("evolve_state size mismatch");
  }
  const auto d = discretize(lambda, delta);
  std::vector<cplx> out(p);
  for (std::size_t i = 0; i < p; ++i) {
    cplx drive{};
    for (std::size_t j = 0; j < h; ++j) drive += params.B.c(i, j) * u_held[j];
    out[i] = d.lambda_bar[i] * x[i] + d.input_factor[i] * drive;
  }
  return out;
}

}  // namespace s2p2
