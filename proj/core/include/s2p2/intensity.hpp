#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "s2p2/events.hpp"

namespace s2p2 {

/// Row-major (times x marks) table of intensities.
struct IntensityMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  IntensityMatrix() = default;
  IntensityMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }
  double row_total(std::size_t r) const;
};

/// Log-likelihood split into event-time and mark terms: total = time_ll + mark_ll.
struct LogLikelihood {
  double total = 0.0;
  double time_ll = 0.0;   // sum_i log lambda_total(t_i) - integral
  double mark_ll = 0.0;   // sum_i log(lambda^{k_i}(t_i) / lambda_total(t_i))
  double integral = 0.0;  // compensator over the whole window
  std::size_t events = 0;
};

/// Builds the decomposition from left-limit intensities at the events.
LogLikelihood decompose_log_likelihood(const IntensityMatrix& at_events,
                                       std::span<const Mark> marks, double integral);

/// An intensity conditioned on one sequence's history.
///
/// `origin` 0 is the window start with no history; origin n (1-based) sits
/// just after event n. `evolve` returns the left-limit intensity at
/// t_origin + delta for each delta, assuming no further events, which is the
/// quantity needed by likelihoods, survival integrals and calibration.
class ConditionedIntensity {
 public:
  virtual ~ConditionedIntensity() = default;
  virtual std::size_t num_marks() const = 0;
  virtual std::size_t num_events() const = 0;
  virtual double origin_time(std::size_t origin) const = 0;
  virtual IntensityMatrix evolve(std::size_t origin, std::span<const double> deltas) const = 0;
};

class IntensityModel {
 public:
  virtual ~IntensityModel() = default;
  virtual std::size_t num_marks() const = 0;
  virtual std::unique_ptr<ConditionedIntensity> condition(const EventSequence& seq) const = 0;
  /// `stream` selects the random stream for Monte-Carlo estimators; exact
  /// models ignore it.
  virtual LogLikelihood log_likelihood(const EventSequence& seq, std::uint64_t stream = 0) const = 0;
};

/// Left-limit intensities at sorted times in the window (events at exactly
/// t are excluded from the history).
IntensityMatrix intensity_on_grid(const ConditionedIntensity& cond, std::span<const double> times);

}  // namespace s2p2
