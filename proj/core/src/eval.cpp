#include "s2p2/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>
#include <numeric>

#include "s2p2/parallel.hpp"

namespace s2p2 {

namespace {

constexpr double kSurvivalCutoff = 1e-4;

std::vector<double> survival_grid(double horizon) {
  std::vector<double> grid{0.0};
  for (int k = 1; k <= 127; ++k) grid.push_back(horizon * k / 127.0);
  const double lo = 1e-4 * horizon;
  for (int k = 0; k < 128; ++k) grid.push_back(lo * std::pow(horizon / lo, k / 127.0));
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  return grid;
}

std::size_t bin_of(double x, int bins) {
  const auto b = static_cast<long>(std::floor(x * bins));
  return static_cast<std::size_t>(std::clamp(b, 0L, static_cast<long>(bins) - 1));
}

CalibrationCurve empty_curve(int bins) {
  CalibrationCurve c;
  c.edges.resize(static_cast<std::size_t>(bins) + 1);
  for (int b = 0; b <= bins; ++b) c.edges[static_cast<std::size_t>(b)] = static_cast<double>(b) / bins;
  c.frequency.assign(static_cast<std::size_t>(bins), 0.0);
  c.confidence.assign(static_cast<std::size_t>(bins), 0.0);
  c.counts.assign(static_cast<std::size_t>(bins), 0);
  return c;
}

struct SequenceScores {
  LogLikelihood ll;
  double squared_error = 0.0;
  std::size_t correct = 0;
  std::size_t top_n_correct = 0;
  std::size_t truncated = 0;
  std::vector<double> transforms;
  std::vector<double> confidence;
  std::vector<bool> hits;
};

}  // namespace

NextTimeEstimate expected_next_time(const ConditionedIntensity& cond, std::size_t origin,
                                    double horizon, double offset) {
  if (!(horizon > 0.0)) throw ValidationError("horizon must be > 0");
  NextTimeEstimate est;
  for (int attempt = 0; attempt < 30; ++attempt, horizon *= 2.0) {
    const auto grid = survival_grid(horizon);
    std::vector<double> deltas(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) deltas[i] = offset + grid[i];
    const auto lambda = cond.evolve(origin, deltas);
    double compensator = 0.0;
    double mean = 0.0;
    double prev_rate = lambda.row_total(0);
    double prev_s = 1.0;
    est.truncated = false;
    std::size_t i = 1;
    for (; i < grid.size(); ++i) {
      const double h = grid[i] - grid[i - 1];
      const double rate = lambda.row_total(i);
      compensator += 0.5 * h * (prev_rate + rate);
      const double s = std::exp(-compensator);
      mean += 0.5 * h * (prev_s + s);
      prev_rate = rate;
      prev_s = s;
      if (s < kSurvivalCutoff) {
        est.truncated = true;
        break;
      }
    }
    est.mean = mean;
    est.horizon = grid[std::min(i, grid.size() - 1)];
    est.tail_survival = prev_s;
    if (est.truncated) break;
  }
  return est;
}

std::size_t next_mark_prediction(const ConditionedIntensity& cond, std::size_t origin, double delta) {
  const auto row = cond.evolve(origin, std::span<const double>(&delta, 1));
  const auto values = row.row(0);
  return static_cast<std::size_t>(std::max_element(values.begin(), values.end()) - values.begin());
}

PceResult pce_from_transforms(std::span<const double> u, int bins) {
  if (u.empty()) throw ValidationError("PCE needs at least one event");
  if (bins < 1) throw ValidationError("bins must be positive");
  PceResult r;
  r.curve = empty_curve(bins);
  for (double x : u) ++r.curve.counts[bin_of(x, bins)];
  std::size_t cumulative = 0;
  double total = 0.0;
  for (int b = 0; b < bins; ++b) {
    const auto bi = static_cast<std::size_t>(b);
    cumulative += r.curve.counts[bi];
    const double observed = static_cast<double>(cumulative) / static_cast<double>(u.size());
    const double nominal = static_cast<double>(b + 1) / bins;
    r.curve.frequency[bi] = observed;
    r.curve.confidence[bi] = nominal;
    total += std::abs(observed - nominal);
  }
  r.pce = total / bins;
  return r;
}

EceResult ece_from_predictions(std::span<const double> confidence, std::span<const bool> correct,
                               int bins) {
  if (confidence.empty()) throw ValidationError("ECE needs at least one event");
  if (confidence.size() != correct.size()) throw ValidationError("ECE inputs differ in length");
  if (bins < 1) throw ValidationError("bins must be positive");
  EceResult r;
  r.curve = empty_curve(bins);
  std::vector<double> conf_sum(static_cast<std::size_t>(bins), 0.0);
  std::vector<double> hit_sum(static_cast<std::size_t>(bins), 0.0);
  for (std::size_t i = 0; i < confidence.size(); ++i) {
    const std::size_t b = bin_of(confidence[i], bins);
    ++r.curve.counts[b];
    conf_sum[b] += confidence[i];
    hit_sum[b] += correct[i] ? 1.0 : 0.0;
  }
  const auto n = static_cast<double>(confidence.size());
  for (std::size_t b = 0; b < r.curve.counts.size(); ++b) {
    const auto nb = static_cast<double>(r.curve.counts[b]);
    if (nb == 0) continue;
    r.curve.frequency[b] = hit_sum[b] / nb;
    r.curve.confidence[b] = conf_sum[b] / nb;
    r.ece += nb / n * std::abs(r.curve.frequency[b] - r.curve.confidence[b]);
  }
  return r;
}

double likelihood_ratio(double model_total_ll, double oracle_total_ll, std::size_t events) {
  if (events == 0) throw ValidationError("likelihood ratio needs at least one event");
  return std::exp((model_total_ll - oracle_total_ll) / static_cast<double>(events));
}

EvalReport evaluate(const IntensityModel& model, const Dataset& data, const EvalOptions& options,
                    std::span<const double> oracle_ll) {
  data.validate();
  if (data.sequences.empty()) throw ValidationError("cannot evaluate an empty dataset");
  if (!oracle_ll.empty() && oracle_ll.size() != data.sequences.size()) {
    throw ValidationError("oracle likelihoods must have one value per sequence");
  }
  if (options.top_n < 1 || options.pce_points < 2) {
    throw ValidationError("top_n must be >= 1 and pce_points >= 2");
  }
  const double horizon =
      options.horizon > 0.0 ? options.horizon : 20.0 * mean_inter_arrival(data);
  const std::size_t k = model.num_marks();
  std::vector<SequenceScores> scores(data.sequences.size());
  parallel_for(scores.size(), options.threads > 0 ? options.threads : thread_count(),
               [&](std::size_t begin, std::size_t end) {
                 for (std::size_t s = begin; s < end; ++s) {
                   const EventSequence& seq = data.sequences[s];
                   SequenceScores& out = scores[s];
                   out.ll = model.log_likelihood(seq, s);
                   const auto cond = model.condition(seq);
                   std::vector<double> pts(static_cast<std::size_t>(options.pce_points));
                   for (std::size_t i = 0; i < seq.size(); ++i) {
                     const double gap = seq.time(i) - cond->origin_time(i);
                     const auto mark = static_cast<std::size_t>(seq.mark(i));

                     const auto next = expected_next_time(*cond, i, horizon);
                     out.squared_error += (next.mean - gap) * (next.mean - gap);
                     out.truncated += next.tail_survival >= kSurvivalCutoff ? 1 : 0;

                     const auto at = cond->evolve(i, std::span<const double>(&gap, 1));
                     const auto row = at.row(0);
                     std::vector<std::size_t> rank(k);
                     std::iota(rank.begin(), rank.end(), 0);
                     std::stable_sort(rank.begin(), rank.end(),
                                      [&](std::size_t a, std::size_t b) { return row[a] > row[b]; });
                     const double total = at.row_total(0);
                     out.correct += rank[0] == mark ? 1 : 0;
                     const auto top = std::min<std::size_t>(k, static_cast<std::size_t>(options.top_n));
                     out.top_n_correct +=
                         std::find(rank.begin(), rank.begin() + static_cast<std::ptrdiff_t>(top), mark) !=
                                 rank.begin() + static_cast<std::ptrdiff_t>(top)
                             ? 1
                             : 0;
                     out.confidence.push_back(row[rank[0]] / total);
                     out.hits.push_back(rank[0] == mark);

                     for (std::size_t j = 0; j < pts.size(); ++j) {
                       pts[j] = gap * static_cast<double>(j) / static_cast<double>(pts.size() - 1);
                     }
                     const auto along = cond->evolve(i, pts);
                     double compensator = 0.0;
                     for (std::size_t j = 1; j < pts.size(); ++j) {
                       compensator +=
                           0.5 * (pts[j] - pts[j - 1]) * (along.row_total(j - 1) + along.row_total(j));
                     }
                     out.transforms.push_back(-std::expm1(-compensator));
                   }
                 }
               });

  EvalReport r;
  r.sequences = data.sequences.size();
  r.top_n = options.top_n;
  double total = 0.0, time = 0.0, mark = 0.0, sq = 0.0, oracle_total = 0.0;
  std::size_t correct = 0, top_correct = 0;
  std::vector<double> transforms, confidence;
  std::vector<bool> hits;
  for (std::size_t s = 0; s < scores.size(); ++s) {
    const auto& sc = scores[s];
    r.events += sc.ll.events;
    total += sc.ll.total;
    time += sc.ll.time_ll;
    mark += sc.ll.mark_ll;
    r.decomposition_max_error =
        std::max(r.decomposition_max_error, std::abs(sc.ll.total - (sc.ll.time_ll + sc.ll.mark_ll)));
    sq += sc.squared_error;
    correct += sc.correct;
    top_correct += sc.top_n_correct;
    r.truncated_survival += sc.truncated;
    transforms.insert(transforms.end(), sc.transforms.begin(), sc.transforms.end());
    confidence.insert(confidence.end(), sc.confidence.begin(), sc.confidence.end());
    hits.insert(hits.end(), sc.hits.begin(), sc.hits.end());
    if (!oracle_ll.empty()) oracle_total += oracle_ll[s];
  }
  if (r.events == 0) throw ValidationError("cannot evaluate a dataset without events");
  const auto n = static_cast<double>(r.events);
  r.per_event_total_ll = total / n;
  r.per_event_time_ll = time / n;
  r.per_event_mark_ll = mark / n;
  r.rmse_next_time = std::sqrt(sq / n);
  r.mark_accuracy = static_cast<double>(correct) / n;
  r.top_n_accuracy = static_cast<double>(top_correct) / n;
  auto p = pce_from_transforms(transforms, options.bins);
  r.pce = p.pce;
  r.pce_curve = std::move(p.curve);
  std::unique_ptr<bool[]> hit_buf(new bool[hits.size()]);
  std::copy(hits.begin(), hits.end(), hit_buf.get());
  auto e = ece_from_predictions(confidence, std::span<const bool>(hit_buf.get(), hits.size()),
                                options.bins);
  r.ece = e.ece;
  r.ece_curve = std::move(e.curve);
  if (!oracle_ll.empty()) r.likelihood_ratio_vs_oracle = likelihood_ratio(total, oracle_total, r.events);
  return r;
}

nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json j{
      {"sequences", r.sequences},
      {"events", r.events},
      {"per_event_total_ll", r.per_event_total_ll},
      {"per_event_time_ll", r.per_event_time_ll},
      {"per_event_mark_ll", r.per_event_mark_ll},
      {"decomposition_max_error", r.decomposition_max_error},
      {"rmse_next_time", r.rmse_next_time},
      {"mark_accuracy", r.mark_accuracy},
      {"top_n", r.top_n},
      {"top_n_accuracy", r.top_n_accuracy},
      {"pce", r.pce},
      {"pce_definition",
       "mean over B equal-width bins of |empirical CDF of u - uniform CDF| at the bin edges, "
       "u = 1 - exp(-compensator increment); declared form, not taken from a reference"},
      {"ece", r.ece},
      {"truncated_survival", r.truncated_survival},
  };
  j["likelihood_ratio_vs_oracle"] =
      r.likelihood_ratio_vs_oracle ? nlohmann::json(*r.likelihood_ratio_vs_oracle) : nlohmann::json();
  return j;
}

void write_curve_csv(const CalibrationCurve& curve, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "bin_lower,bin_upper,count,frequency,confidence\n";
  out.precision(10);
  for (std::size_t b = 0; b < curve.counts.size(); ++b) {
    out << curve.edges[b] << ',' << curve.edges[b + 1] << ',' << curve.counts[b] << ','
        << curve.frequency[b] << ',' << curve.confidence[b] << '\n';
  }
}

}  // namespace s2p2
