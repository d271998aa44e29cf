#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "s2p2/events.hpp"
#include "s2p2/intensity.hpp"

namespace s2p2 {

/// Equal-width bins on [0, 1].
struct CalibrationCurve {
  std::vector<double> edges;        // B + 1 values
  std::vector<double> frequency;    // observed value per bin
  std::vector<double> confidence;   // nominal value per bin
  std::vector<std::size_t> counts;  // items per bin
};

struct NextTimeEstimate {
  double mean = 0.0;
  double horizon = 0.0;        // largest delta integrated over
  double tail_survival = 0.0;  // survival at the last grid point used
  bool truncated = false;      // stopped early because survival < 1e-4
};

/// E[time to next event] = int_0^inf S(d) dd, S(d) = exp(-int_0^d lambda_total),
/// measured from t_origin + offset and conditioned on no event before then.
/// Both integrals use the trapezoid rule on one grid: {0}, 127 linear and 128
/// geometric points (from 1e-4 * horizon) on [0, horizon]. The horizon doubles
/// while S(horizon) >= 1e-4.
NextTimeEstimate expected_next_time(const ConditionedIntensity& cond, std::size_t origin,
                                    double horizon, double offset = 0.0);

/// Argmax of the left-limit intensity at t_origin + delta; ties go to the
/// smallest index.
std::size_t next_mark_prediction(const ConditionedIntensity& cond, std::size_t origin, double delta);

/// Probabilistic calibration error from compensator transforms
/// u_i = 1 - exp(-int_{t_{i-1}}^{t_i} lambda_total) (64-point trapezoid per
/// interval): PCE = (1/B) sum_b |F_u(b/B) - b/B|, the mean absolute deviation
/// of the empirical CDF of u from the uniform CDF at the bin edges.
struct PceResult {
  double pce = 0.0;
  CalibrationCurve curve;
};
PceResult pce_from_transforms(std::span<const double> u, int bins = 20);

/// ECE = sum_b (n_b / n) |acc_b - conf_b| with conf = max_k lambda^k / lambda_total.
struct EceResult {
  double ece = 0.0;
  CalibrationCurve curve;
};
EceResult ece_from_predictions(std::span<const double> confidence, std::span<const bool> correct,
                               int bins = 20);

struct EvalOptions {
  int bins = 20;
  int top_n = 3;
  /// Survival-integral horizon; <= 0 means 20 x the dataset's mean inter-arrival.
  double horizon = 0.0;
  int pce_points = 64;
  int threads = 0;
};

struct EvalReport {
  std::size_t sequences = 0;
  std::size_t events = 0;
  double per_event_total_ll = 0.0;
  double per_event_time_ll = 0.0;
  double per_event_mark_ll = 0.0;
  double decomposition_max_error = 0.0;  // max |total - (time + mark)| per sequence
  double rmse_next_time = 0.0;
  double mark_accuracy = 0.0;
  int top_n = 3;
  double top_n_accuracy = 0.0;
  double pce = 0.0;
  double ece = 0.0;
  std::optional<double> likelihood_ratio_vs_oracle;
  std::size_t truncated_survival = 0;  // events whose survival stayed above the cutoff
  CalibrationCurve pce_curve;
  CalibrationCurve ece_curve;
};

/// exp(mean per-event model LL - mean per-event oracle LL).
double likelihood_ratio(double model_total_ll, double oracle_total_ll, std::size_t events);

/// Full evaluation. `oracle_ll` (per-sequence ground-truth log-likelihoods)
/// enables the likelihood ratio. Sequence i uses likelihood stream i.
EvalReport evaluate(const IntensityModel& model, const Dataset& data, const EvalOptions& options = {},
                    std::span<const double> oracle_ll = {});

nlohmann::json to_json(const EvalReport& report);
/// CSV: bin_lower,bin_upper,count,frequency,confidence.
void write_curve_csv(const CalibrationCurve& curve, const std::filesystem::path& path);

}  // namespace s2p2
