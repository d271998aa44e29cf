#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <vector>

#include "s2p2/events.hpp"
#include "s2p2/intensity.hpp"

namespace s2p2 {

/// Multivariate exponential-kernel linear Hawkes process:
///   lambda^k(t) = nu_k + sum_{t_i < t} alpha[k][k_i] exp(-beta[k][k_i] (t - t_i)).
struct ExpHawkesParams {
  std::vector<double> nu;
  std::vector<std::vector<double>> alpha;
  std::vector<std::vector<double>> beta;

  std::size_t num_marks() const noexcept { return nu.size(); }
  /// Throws ValidationError on shape or sign violations.
  void validate() const;
  /// Spectral radius of alpha / beta (elementwise); < 1 for stationarity.
  double branching_ratio() const;

  static ExpHawkesParams univariate(double nu, double alpha, double beta);
};

/// Square-wave intensity `high` on the first `duty` fraction of each period and
/// `low` otherwise; `tail_rate` for t >= t_tail.
struct SquareWaveParams {
  double low = 0.0;
  double high = 1.0;
  double period = 2.0;
  double duty = 0.5;
  double tail_rate = 0.5;
  double t_tail = 7.0;

  void validate() const;
  double rate(double t) const noexcept;
  /// Closed-form integral of rate over [a, b].
  double integral(double a, double b) const noexcept;
  double max_rate() const noexcept;
};

/// lambda(t) = exp(a t - b N_{t-}).
struct SelfCorrectingParams {
  double a = 1.0;
  double b = 0.5;
  void validate() const;
};

/// Distractor (mark 0), trigger (mark 1) and delayed target (mark 2) process.
struct LongRangeParams {
  double distractor_rate = 1.0;
  double trigger_rate = 0.1;
  double delay_mean = 40.0;
  double delay_var = 0.1;
  double t_start = 0.0;
  double t_end = 100.0;

  void validate() const;
};

EventSequence simulate_hawkes(const ExpHawkesParams& params, double t_end, std::uint64_t seed,
                              std::uint64_t stream = 0);
EventSequence simulate_self_correcting(const SelfCorrectingParams& params, double t_end,
                                       std::uint64_t seed, std::uint64_t stream = 0);
EventSequence simulate_square_wave(const SquareWaveParams& params, double t_end,
                                   std::uint64_t seed, std::uint64_t stream = 0);
EventSequence simulate_long_range(const LongRangeParams& params, std::uint64_t seed,
                                  std::uint64_t stream = 0);

/// nu ~ U[0.1, 0.5], alpha ~ U[0.5, 0.8], beta ~ U[0.4, 1.2], iid per entry.
ExpHawkesParams random_hawkes_params(std::size_t num_marks, std::uint64_t seed);

/// Exact log-likelihood with the compensator in closed form.
double hawkes_loglik_oracle(const ExpHawkesParams& params, const EventSequence& seq);
double self_correcting_loglik_oracle(const SelfCorrectingParams& params, const EventSequence& seq);
double square_wave_loglik_oracle(const SquareWaveParams& params, const EventSequence& seq);
/// Targets are paired first-in-first-out with pending triggers; the target
/// intensity is the sum of delay hazards of unmatched triggers. Throws
/// ValidationError for marks >= 3. Returns -infinity for a target with no
/// pending trigger.
double longrange_loglik_oracle(const LongRangeParams& params, const EventSequence& seq);

/// Hazard and log-survival of the Normal(mean, var) delay distribution.
double normal_delay_hazard(double tau, double mean, double var);
double normal_delay_log_survival(double tau, double mean, double var);

/// Ground-truth intensities as IntensityModel implementations, for
/// calibration and likelihood-ratio checks.
std::unique_ptr<IntensityModel> make_hawkes_oracle(ExpHawkesParams params);
std::unique_ptr<IntensityModel> make_self_correcting_oracle(SelfCorrectingParams params);
std::unique_ptr<IntensityModel> make_square_wave_oracle(SquareWaveParams params);
std::unique_ptr<IntensityModel> make_long_range_oracle(LongRangeParams params);
/// Homogeneous Poisson with per-mark rates.
std::unique_ptr<IntensityModel> make_constant_intensity(std::vector<double> rates);

}  // namespace s2p2
