#include "s2p2/intensity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace s2p2 {

double IntensityMatrix::row_total(std::size_t r) const {
  double total = 0.0;
  for (double v : row(r)) total += v;
  return total;
}

LogLikelihood decompose_log_likelihood(const IntensityMatrix& at_events,
                                       std::span<const Mark> marks, double integral) {
  if (at_events.rows != marks.size()) {
    throw std::invalid_argument("intensity rows and marks differ in length");
  }
  LogLikelihood out;
  out.integral = integral;
  out.events = marks.size();
  double log_total = 0.0;
  for (std::size_t i = 0; i < marks.size(); ++i) {
    const auto k = static_cast<std::size_t>(marks[i]);
    if (k >= at_events.cols) throw ValidationError("mark " + std::to_string(k) + " out of range");
    const double total = at_events.row_total(i);
    const double lk = std::log(at_events(i, k));
    const double lt = std::log(total);
    log_total += lt;
    out.mark_ll += lk - lt;
  }
  out.time_ll = log_total - integral;
  out.total = out.time_ll + out.mark_ll;
  return out;
}

IntensityMatrix intensity_on_grid(const ConditionedIntensity& cond, std::span<const double> times) {
  if (!std::is_sorted(times.begin(), times.end())) throw ValidationError("grid must be sorted");
  IntensityMatrix out(times.size(), cond.num_marks());
  std::size_t origin = 0;
  std::size_t q = 0;
  std::vector<double> deltas;
  while (q < times.size()) {
    while (origin < cond.num_events() && cond.origin_time(origin + 1) < times[q]) ++origin;
    // Group the run of grid points sharing this origin.
    const double next = origin < cond.num_events() ? cond.origin_time(origin + 1)
                                                   : std::numeric_limits<double>::infinity();
    deltas.clear();
    const std::size_t begin = q;
    while (q < times.size() && times[q] <= next) {
      deltas.push_back(times[q] - cond.origin_time(origin));
      ++q;
    }
    const auto block = cond.evolve(origin, deltas);
    std::copy(block.data.begin(), block.data.end(), out.data.begin() + begin * out.cols);
  }
  return out;
}

}  // namespace s2p2
