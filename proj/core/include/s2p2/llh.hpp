#pragma once

#include <complex>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "s2p2/autodiff.hpp"
#include "s2p2/rng.hpp"

namespace s2p2 {

/// Which endpoint's input is held constant over an inter-event interval:
/// backward holds the current left limit u_{t_i-}, forward the previous right
/// limit u_{t_{i-1}}.
enum class ZohMode { forward, backward };

ZohMode parse_zoh_mode(std::string_view s);
std::string to_string(ZohMode mode);

/// One latent linear Hawkes layer in diagonal form.
///
/// Lambda_p = -exp(rho_p) + i theta_p. Complex tensors: B (P x H), C (H x P),
/// E (P x H), x0 (1 x P). Real: rho, theta, b_prime (1 x P), D (1 x H, the
/// diagonal passthrough), W_prime (P x H).
struct LLHLayerParams {
  ad::Tensor rho;
  ad::Tensor theta;
  ad::Tensor B;
  ad::Tensor C;
  ad::Tensor D;
  ad::Tensor E;
  ad::Tensor x0;
  ad::Tensor W_prime;
  ad::Tensor b_prime;
  bool input_dependent = true;
  ZohMode zoh_mode = ZohMode::backward;

  std::size_t hidden() const noexcept { return D.cols; }
  std::size_t state() const noexcept { return rho.cols; }

  /// rho = log 0.5, theta_p = pi p, B/C/E parts ~ N(0, 1/P), x0 = 0, D = 0,
  /// W' = 0 and b' = log(e - 1) so the input-dependent scale starts at 1.
  static LLHLayerParams init(std::size_t hidden, std::size_t state, bool input_dependent,
                             ZohMode mode, Philox& rng);

  std::vector<std::complex<double>> lambda() const;
  /// (name, tensor) pairs in a fixed order; names are prefixed.
  std::vector<std::pair<std::string, ad::Tensor*>> named(const std::string& prefix);
  void validate() const;
};

/// Parameters bound as leaves (or constants) on a tape.
struct LLHLayerVars {
  ad::Var rho, theta, B, C, D, E, x0, W_prime, b_prime;
  ad::Var lambda;  // 1 x P complex
  bool input_dependent = true;
  ZohMode zoh_mode = ZohMode::backward;
};

LLHLayerVars bind(const LLHLayerParams& params, ad::Tape& tape, bool trainable = true);
/// Adjoints of the bound leaves in the order of LLHLayerParams::named.
std::vector<ad::Tensor> gradients(const LLHLayerVars& vars, const ad::Tape& tape);

/// softplus(u W'^T + b'), rows x P.
ad::Var input_scale(const LLHLayerVars& layer, const ad::Var& u);
/// exp(scale * Lambda * dt) per row; `scale` may be undefined (unit scale).
ad::Var decay(const LLHLayerVars& layer, const ad::Var& scale, const ad::Var& dt);
/// x_{t+delta-} = abar x + (abar - 1) B~ u_held without impulse.
ad::Var evolve(const LLHLayerVars& layer, const ad::Var& x, const ad::Var& scale,
               const ad::Var& delta, const ad::Var& u_held);
/// y = 2 Re(C~ x) + D u.
ad::Var layer_output(const LLHLayerVars& layer, const ad::Var& x, const ad::Var& u);

struct LayerScan {
  ad::Var right;  // N x P
  ad::Var left;   // N x P
};

/// Right limits via the scan x_i = abar_i x_{i-1} + (abar_i - 1) B~ u_held_i + impulse_i.
/// dt: N x 1; impulses: N x P complex; u_held: N x H; scale: N x P or undefined.
LayerScan scan_layer(const LLHLayerVars& layer, const ad::Var& dt, const ad::Var& impulses,
                     const ad::Var& u_held, const ad::Var& scale);

// Value-only forms of the layer operations.

/// softplus(W' u + b') * Lambda when input dependent, Lambda otherwise.
std::vector<std::complex<double>> effective_lambda(const LLHLayerParams& params,
                                                   std::span<const double> u_prev);
struct Discretized {
  std::vector<std::complex<double>> lambda_bar;
  std::vector<std::complex<double>> input_factor;  // lambda_bar - 1
};
Discretized discretize(std::span<const std::complex<double>> lambda, double dt);

struct LayerStates {
  ad::Tensor right_limits;  // N x P complex
  ad::Tensor left_limits;   // N x P complex
  ad::Tensor outputs;       // N x H, y at left limits
};

/// Evaluates one layer on an event sequence. `u_held` defaults to `u_left`
/// (the backward convention) when empty; with input dependence, interval i
/// is conditioned on u_left[i - 1] and the first interval on u = 0.
LayerStates layer_forward(const LLHLayerParams& params, const ad::Tensor& impulses,
                          const ad::Tensor& u_left, std::span<const double> dt,
                          const ad::Tensor& u_held = {});

/// Left limit at t + delta from a right limit x with constant input u_held,
/// using `lambda` (the effective eigenvalues for the interval).
std::vector<std::complex<double>> evolve_state(const LLHLayerParams& params,
                                               std::span<const std::complex<double>> x,
                                               std::span<const double> u_held,
                                               std::span<const std::complex<double>> lambda,
                                               double delta);

}  // namespace s2p2
