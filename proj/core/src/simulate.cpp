#include "s2p2/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <deque>
#include <iostream>
#include <numbers>
#include <string>

#include <Eigen/Dense>

#include "s2p2/rng.hpp"

namespace s2p2 {

namespace {

double origin_time_of(const EventSequence& seq, std::size_t origin) {
  return origin == 0 ? seq.t_start() : seq.time(origin - 1);
}

// Homogeneous Poisson arrivals on (t0, t1] at `rate`.
std::vector<double> poisson_arrivals(double rate, double t0, double t1, Philox& rng) {
  std::vector<double> out;
  if (!(rate > 0.0)) return out;
  double t = t0;
  while (true) {
    t += rng.exponential(rate);
    if (t > t1) break;
    out.push_back(t);
  }
  return out;
}

// --- Hawkes ----------------------------------------------------------------

class HawkesConditioned final : public ConditionedIntensity {
 public:
  HawkesConditioned(const ExpHawkesParams& p, const EventSequence& seq) : p_(p), seq_(seq) {
    const std::size_t k = p_.num_marks();
    // excitation[o][a * K + b]: sum over events of mark b up to origin o of
    // exp(-beta[a][b] (t_o - t_i)), taken at the right limit.
    excitation_.assign((seq_.size() + 1) * k * k, 0.0);
    for (std::size_t o = 1; o <= seq_.size(); ++o) {
      const double dt = seq_.time(o - 1) - origin_time_of(seq_, o - 1);
      const double* prev = &excitation_[(o - 1) * k * k];
      double* cur = &excitation_[o * k * k];
      for (std::size_t a = 0; a < k; ++a) {
        for (std::size_t b = 0; b < k; ++b) {
          cur[a * k + b] = prev[a * k + b] * std::exp(-p_.beta[a][b] * dt);
        }
      }
      const auto m = static_cast<std::size_t>(seq_.mark(o - 1));
      for (std::size_t a = 0; a < k; ++a) cur[a * k + m] += 1.0;
    }
  }

  std::size_t num_marks() const override { return p_.num_marks(); }
  std::size_t num_events() const override { return seq_.size(); }
  double origin_time(std::size_t origin) const override { return origin_time_of(seq_, origin); }

  IntensityMatrix evolve(std::size_t origin, std::span<const double> deltas) const override {
    const std::size_t k = p_.num_marks();
    IntensityMatrix out(deltas.size(), k);
    const double* ex = &excitation_.at(origin * k * k);
    for (std::size_t q = 0; q < deltas.size(); ++q) {
      for (std::size_t a = 0; a < k; ++a) {
        double v = p_.nu[a];
        for (std::size_t b = 0; b < k; ++b) {
          if (ex[a * k + b] != 0.0) {
            v += p_.alpha[a][b] * ex[a * k + b] * std::exp(-p_.beta[a][b] * deltas[q]);
          }
        }
        out(q, a) = v;
      }
    }
    return out;
  }

 private:
  ExpHawkesParams p_;
  const EventSequence& seq_;
  std::vector<double> excitation_;
};

class HawkesOracle final : public IntensityModel {
 public:
  explicit HawkesOracle(ExpHawkesParams p) : p_(std::move(p)) { p_.validate(); }
  std::size_t num_marks() const override { return p_.num_marks(); }
  std::unique_ptr<ConditionedIntensity> condition(const EventSequence& seq) const override {
    return std::make_unique<OwningConditioned>(p_, seq);
  }
  LogLikelihood log_likelihood(const EventSequence& seq, std::uint64_t) const override {
    HawkesConditioned cond(p_, seq);
    IntensityMatrix at_events(seq.size(), p_.num_marks());
    for (std::size_t i = 0; i < seq.size(); ++i) {
      const double dt = seq.time(i) - origin_time_of(seq, i);
      const auto row = cond.evolve(i, std::span<const double>(&dt, 1));
      std::copy(row.data.begin(), row.data.end(), at_events.data.begin() + i * p_.num_marks());
    }
    const double ll = hawkes_loglik_oracle(p_, seq);
    double log_sum = 0.0;
    for (std::size_t i = 0; i < seq.size(); ++i) {
      log_sum += std::log(at_events(i, static_cast<std::size_t>(seq.mark(i))));
    }
    return decompose_log_likelihood(at_events, seq.marks(), log_sum - ll);
  }

 private:
  // Keeps its own copy of the sequence so the conditioned object may outlive
  // the caller's reference.
  struct OwningConditioned final : ConditionedIntensity {
    OwningConditioned(const ExpHawkesParams& p, const EventSequence& s)
        : seq(s), inner(p, seq) {}
    std::size_t num_marks() const override { return inner.num_marks(); }
    std::size_t num_events() const override { return inner.num_events(); }
    double origin_time(std::size_t o) const override { return inner.origin_time(o); }
    IntensityMatrix evolve(std::size_t o, std::span<const double> d) const override {
      return inner.evolve(o, d);
    }
    EventSequence seq;
    HawkesConditioned inner;
  };

  ExpHawkesParams p_;
};

// --- Self-correcting ---------------------------------------------------------

class SelfCorrectingOracle final : public IntensityModel {
 public:
  explicit SelfCorrectingOracle(SelfCorrectingParams p) : p_(p) { p_.validate(); }
  std::size_t num_marks() const override { return 1; }

  std::unique_ptr<ConditionedIntensity> condition(const EventSequence& seq) const override {
    struct Cond final : ConditionedIntensity {
      Cond(SelfCorrectingParams p, EventSequence s) : p(p), seq(std::move(s)) {}
      std::size_t num_marks() const override { return 1; }
      std::size_t num_events() const override { return seq.size(); }
      double origin_time(std::size_t o) const override { return origin_time_of(seq, o); }
      IntensityMatrix evolve(std::size_t o, std::span<const double> d) const override {
        IntensityMatrix out(d.size(), 1);
        const double t0 = origin_time(o);
        for (std::size_t q = 0; q < d.size(); ++q) {
          out(q, 0) = std::exp(p.a * (t0 + d[q]) - p.b * static_cast<double>(o));
        }
        return out;
      }
      SelfCorrectingParams p;
      EventSequence seq;
    };
    return std::make_unique<Cond>(p_, seq);
  }

  LogLikelihood log_likelihood(const EventSequence& seq, std::uint64_t) const override {
    IntensityMatrix at_events(seq.size(), 1);
    for (std::size_t i = 0; i < seq.size(); ++i) {
      at_events(i, 0) = std::exp(p_.a * seq.time(i) - p_.b * static_cast<double>(i));
    }
    double log_sum = 0.0;
    for (std::size_t i = 0; i < seq.size(); ++i) log_sum += std::log(at_events(i, 0));
    return decompose_log_likelihood(at_events, seq.marks(),
                                    log_sum - self_correcting_loglik_oracle(p_, seq));
  }

 private:
  SelfCorrectingParams p_;
};

// --- Square wave -------------------------------------------------------------

class SquareWaveOracle final : public IntensityModel {
 public:
  explicit SquareWaveOracle(SquareWaveParams p) : p_(p) { p_.validate(); }
  std::size_t num_marks() const override { return 1; }

  std::unique_ptr<ConditionedIntensity> condition(const EventSequence& seq) const override {
    struct Cond final : ConditionedIntensity {
      Cond(SquareWaveParams p, EventSequence s) : p(p), seq(std::move(s)) {}
      std::size_t num_marks() const override { return 1; }
      std::size_t num_events() const override { return seq.size(); }
      double origin_time(std::size_t o) const override { return origin_time_of(seq, o); }
      IntensityMatrix evolve(std::size_t o, std::span<const double> d) const override {
        IntensityMatrix out(d.size(), 1);
        const double t0 = origin_time(o);
        for (std::size_t q = 0; q < d.size(); ++q) out(q, 0) = p.rate(t0 + d[q]);
        return out;
      }
      SquareWaveParams p;
      EventSequence seq;
    };
    return std::make_unique<Cond>(p_, seq);
  }

  LogLikelihood log_likelihood(const EventSequence& seq, std::uint64_t) const override {
    IntensityMatrix at_events(seq.size(), 1);
    for (std::size_t i = 0; i < seq.size(); ++i) at_events(i, 0) = p_.rate(seq.time(i));
    return decompose_log_likelihood(at_events, seq.marks(),
                                    p_.integral(seq.t_start(), seq.t_end()));
  }

 private:
  SquareWaveParams p_;
};

// --- Long range --------------------------------------------------------------

// FIFO pairing of targets with pending triggers. pending[o] lists the
// triggers still waiting for their target just after origin o.
struct LongRangeHistory {
  std::vector<std::vector<double>> pending;
  bool orphan_target = false;  // a target arrived with nothing pending
  double cumulative_hazard = 0.0;
};

LongRangeHistory replay_long_range(const LongRangeParams& p, const EventSequence& seq) {
  LongRangeHistory h;
  h.pending.reserve(seq.size() + 1);
  std::deque<double> waiting;
  h.pending.emplace_back();
  for (std::size_t i = 0; i < seq.size(); ++i) {
    const Mark k = seq.mark(i);
    if (k > 2) {
      throw ValidationError("long-range sequences use marks {0, 1, 2}; found " + std::to_string(k));
    }
    if (k == 1) {
      waiting.push_back(seq.time(i));
    } else if (k == 2) {
      if (waiting.empty()) {
        h.orphan_target = true;
      } else {
        h.cumulative_hazard -=
            normal_delay_log_survival(seq.time(i) - waiting.front(), p.delay_mean, p.delay_var);
        waiting.pop_front();
      }
    }
    h.pending.emplace_back(waiting.begin(), waiting.end());
  }
  for (double trigger : waiting) {
    h.cumulative_hazard -=
        normal_delay_log_survival(seq.t_end() - trigger, p.delay_mean, p.delay_var);
  }
  return h;
}

class LongRangeOracle final : public IntensityModel {
 public:
  explicit LongRangeOracle(LongRangeParams p) : p_(p) { p_.validate(); }
  std::size_t num_marks() const override { return 3; }

  std::unique_ptr<ConditionedIntensity> condition(const EventSequence& seq) const override {
    struct Cond final : ConditionedIntensity {
      Cond(LongRangeParams p, EventSequence s)
          : p(p), seq(std::move(s)), history(replay_long_range(p, seq)) {}
      std::size_t num_marks() const override { return 3; }
      std::size_t num_events() const override { return seq.size(); }
      double origin_time(std::size_t o) const override { return origin_time_of(seq, o); }
      IntensityMatrix evolve(std::size_t o, std::span<const double> d) const override {
        IntensityMatrix out(d.size(), 3);
        const double t0 = origin_time(o);
        const auto& waiting = history.pending.at(o);
        for (std::size_t q = 0; q < d.size(); ++q) {
          double target = 0.0;
          for (double trigger : waiting) {
            target += normal_delay_hazard(t0 + d[q] - trigger, p.delay_mean, p.delay_var);
          }
          out(q, 0) = p.distractor_rate;
          out(q, 1) = p.trigger_rate;
          out(q, 2) = target;
        }
        return out;
      }
      LongRangeParams p;
      EventSequence seq;
      LongRangeHistory history;
    };
    return std::make_unique<Cond>(p_, seq);
  }

  LogLikelihood log_likelihood(const EventSequence& seq, std::uint64_t) const override {
    auto cond = condition(seq);
    IntensityMatrix at_events(seq.size(), 3);
    for (std::size_t i = 0; i < seq.size(); ++i) {
      const double dt = seq.time(i) - cond->origin_time(i);
      const auto row = cond->evolve(i, std::span<const double>(&dt, 1));
      for (std::size_t k = 0; k < 3; ++k) at_events(i, k) = row(0, k);
    }
    const auto history = replay_long_range(p_, seq);
    const double window = seq.t_end() - seq.t_start();
    const double integral =
        (p_.distractor_rate + p_.trigger_rate) * window + history.cumulative_hazard;
    return decompose_log_likelihood(at_events, seq.marks(), integral);
  }

 private:
  LongRangeParams p_;
};

class ConstantIntensity final : public IntensityModel {
 public:
  explicit ConstantIntensity(std::vector<double> rates) : rates_(std::move(rates)) {
    if (rates_.empty()) throw ValidationError("constant intensity needs at least one mark");
    for (double r : rates_) {
      if (!(r >= 0.0) || !std::isfinite(r)) throw ValidationError("rates must be finite and >= 0");
    }
  }
  std::size_t num_marks() const override { return rates_.size(); }

  std::unique_ptr<ConditionedIntensity> condition(const EventSequence& seq) const override {
    struct Cond final : ConditionedIntensity {
      Cond(std::vector<double> r, EventSequence s) : rates(std::move(r)), seq(std::move(s)) {}
      std::size_t num_marks() const override { return rates.size(); }
      std::size_t num_events() const override { return seq.size(); }
      double origin_time(std::size_t o) const override { return origin_time_of(seq, o); }
      IntensityMatrix evolve(std::size_t, std::span<const double> d) const override {
        IntensityMatrix out(d.size(), rates.size());
        for (std::size_t q = 0; q < d.size(); ++q) {
          std::copy(rates.begin(), rates.end(), out.data.begin() + q * rates.size());
        }
        return out;
      }
      std::vector<double> rates;
      EventSequence seq;
    };
    return std::make_unique<Cond>(rates_, seq);
  }

  LogLikelihood log_likelihood(const EventSequence& seq, std::uint64_t) const override {
    IntensityMatrix at_events(seq.size(), rates_.size());
    for (std::size_t i = 0; i < seq.size(); ++i) {
      std::copy(rates_.begin(), rates_.end(), at_events.data.begin() + i * rates_.size());
    }
    double total = 0.0;
    for (double r : rates_) total += r;
    return decompose_log_likelihood(at_events, seq.marks(), total * (seq.t_end() - seq.t_start()));
  }

 private:
  std::vector<double> rates_;
};

}  // namespace

// --- parameter types ---------------------------------------------------------

void ExpHawkesParams::validate() const {
  const std::size_t k = nu.size();
  if (k == 0) throw ValidationError("Hawkes process needs at least one mark");
  if (alpha.size() != k || beta.size() != k) {
    throw ValidationError("alpha and beta must be K x K");
  }
  for (std::size_t a = 0; a < k; ++a) {
    if (alpha[a].size() != k || beta[a].size() != k) {
      throw ValidationError("alpha and beta must be K x K");
    }
    if (!(nu[a] >= 0.0) || !std::isfinite(nu[a])) throw ValidationError("nu must be >= 0");
    for (std::size_t b = 0; b < k; ++b) {
      if (!(alpha[a][b] >= 0.0) || !std::isfinite(alpha[a][b])) {
        throw ValidationError("alpha must be >= 0");
      }
      if (!(beta[a][b] > 0.0) || !std::isfinite(beta[a][b])) {
        throw ValidationError("beta must be > 0");
      }
    }
  }
}

double ExpHawkesParams::branching_ratio() const {
  const auto k = static_cast<Eigen::Index>(nu.size());
  Eigen::MatrixXd g(k, k);
  for (Eigen::Index a = 0; a < k; ++a) {
    for (Eigen::Index b = 0; b < k; ++b) {
      g(a, b) = alpha[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] /
                beta[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)];
    }
  }
  Eigen::EigenSolver<Eigen::MatrixXd> solver(g, false);
  double radius = 0.0;
  for (Eigen::Index i = 0; i < k; ++i) radius = std::max(radius, std::abs(solver.eigenvalues()[i]));
  return radius;
}

ExpHawkesParams ExpHawkesParams::univariate(double nu, double alpha, double beta) {
  return ExpHawkesParams{{nu}, {{alpha}}, {{beta}}};
}

void SquareWaveParams::validate() const {
  if (!(low >= 0.0) || !(high >= 0.0) || !(tail_rate >= 0.0)) {
    throw ValidationError("square-wave rates must be >= 0");
  }
  if (!(period > 0.0)) throw ValidationError("square-wave period must be > 0");
  if (!(duty > 0.0 && duty < 1.0)) throw ValidationError("square-wave duty must be in (0, 1)");
}

double SquareWaveParams::rate(double t) const noexcept {
  if (t >= t_tail) return tail_rate;
  double phase = std::fmod(t, period);
  if (phase < 0.0) phase += period;
  return phase < duty * period ? high : low;
}

double SquareWaveParams::integral(double a, double b) const noexcept {
  if (b <= a) return 0.0;
  // Antiderivative of the periodic part from 0.
  const auto periodic = [this](double t) {
    const double cycles = std::floor(t / period);
    const double phase = t - cycles * period;
    const double on = duty * period;
    const double per_cycle = high * on + low * (period - on);
    const double partial = phase < on ? high * phase : high * on + low * (phase - on);
    return cycles * per_cycle + partial;
  };
  double total = 0.0;
  const double split = std::clamp(t_tail, a, b);
  if (split > a) total += periodic(split) - periodic(a);
  if (b > split) total += tail_rate * (b - split);
  return total;
}

double SquareWaveParams::max_rate() const noexcept { return std::max({low, high, tail_rate}); }

void SelfCorrectingParams::validate() const {
  if (!(a > 0.0) || !(b > 0.0)) throw ValidationError("self-correcting a and b must be > 0");
}

void LongRangeParams::validate() const {
  if (!(distractor_rate >= 0.0) || !(trigger_rate >= 0.0)) {
    throw ValidationError("long-range rates must be >= 0");
  }
  if (!(delay_var > 0.0)) throw ValidationError("delay variance must be > 0");
  if (!(t_end >= t_start)) throw ValidationError("long-range window must satisfy t_start <= t_end");
}

// --- generators --------------------------------------------------------------

EventSequence simulate_hawkes(const ExpHawkesParams& params, double t_end, std::uint64_t seed,
                              std::uint64_t stream) {
  params.validate();
  if (t_end <= 0.0) return EventSequence({}, {}, std::max(0.0, t_end));
  const std::size_t k = params.num_marks();
  Philox rng(seed, stream);
  std::vector<double> excitation(k * k, 0.0);  // [a * K + b], already scaled by alpha
  std::vector<double> lambda(k);
  std::vector<double> times;
  std::vector<Mark> marks;
  double t = 0.0;
  const auto total_at_current = [&] {
    double total = 0.0;
    for (std::size_t a = 0; a < k; ++a) {
      double v = params.nu[a];
      for (std::size_t b = 0; b < k; ++b) v += excitation[a * k + b];
      lambda[a] = v;
      total += v;
    }
    return total;
  };
  while (true) {
    // Kernels only decay between events, so the current intensity dominates.
    const double bound = total_at_current();
    if (!(bound > 0.0)) break;
    const double candidate = t + rng.exponential(bound);
    if (candidate > t_end) break;
    const double dt = candidate - t;
    for (std::size_t a = 0; a < k; ++a) {
      for (std::size_t b = 0; b < k; ++b) {
        excitation[a * k + b] *= std::exp(-params.beta[a][b] * dt);
      }
    }
    t = candidate;
    const double total = total_at_current();
    const double u = rng.uniform() * bound;
    if (u >= total) continue;
    std::size_t mark = k - 1;
    double cumulative = 0.0;
    for (std::size_t a = 0; a < k; ++a) {
      cumulative += lambda[a];
      if (u < cumulative) {
        mark = a;
        break;
      }
    }
    if (!times.empty() && !(t > times.back())) continue;  // floating-point tie
    times.push_back(t);
    marks.push_back(static_cast<Mark>(mark));
    for (std::size_t a = 0; a < k; ++a) excitation[a * k + mark] += params.alpha[a][mark];
  }
  return EventSequence(std::move(times), std::move(marks), t_end);
}

EventSequence simulate_self_correcting(const SelfCorrectingParams& params, double t_end,
                                       std::uint64_t seed, std::uint64_t stream) {
  params.validate();
  if (t_end <= 0.0) return EventSequence({}, {}, std::max(0.0, t_end));
  Philox rng(seed, stream);
  std::vector<double> times;
  double t = 0.0;
  double count = 0.0;
  // Piecewise dominating rate: the intensity increases between events, so its
  // value at the end of a window of length 1/a bounds it on the window.
  const double window = 1.0 / params.a;
  while (t < t_end) {
    const double horizon = std::min(t + window, t_end);
    const double bound = std::exp(params.a * horizon - params.b * count);
    const double candidate = t + rng.exponential(bound);
    if (candidate > horizon) {
      t = horizon;
      continue;
    }
    t = candidate;
    const double rate = std::exp(params.a * t - params.b * count);
    if (rng.uniform() * bound < rate && (times.empty() || t > times.back())) {
      times.push_back(t);
      count += 1.0;
    }
  }
  std::vector<Mark> marks(times.size(), 0);
  return EventSequence(std::move(times), std::move(marks), t_end);
}

EventSequence simulate_square_wave(const SquareWaveParams& params, double t_end,
                                   std::uint64_t seed, std::uint64_t stream) {
  params.validate();
  if (t_end <= 0.0) return EventSequence({}, {}, std::max(0.0, t_end));
  Philox rng(seed, stream);
  const double bound = params.max_rate();
  std::vector<double> times;
  if (bound > 0.0) {
    double t = 0.0;
    while (true) {
      t += rng.exponential(bound);
      if (t > t_end) break;
      if (rng.uniform() * bound < params.rate(t)) times.push_back(t);
    }
  }
  std::vector<Mark> marks(times.size(), 0);
  return EventSequence(std::move(times), std::move(marks), t_end);
}

EventSequence simulate_long_range(const LongRangeParams& params, std::uint64_t seed,
                                  std::uint64_t stream) {
  params.validate();
  Philox rng(seed, stream);
  const double sd = std::sqrt(params.delay_var);
  while (true) {
    std::vector<std::pair<double, Mark>> events;
    for (double t : poisson_arrivals(params.distractor_rate, params.t_start, params.t_end, rng)) {
      events.emplace_back(t, 0);
    }
    const auto triggers = poisson_arrivals(params.trigger_rate, params.t_start, params.t_end, rng);
    for (double t : triggers) events.emplace_back(t, 1);
    for (double t : triggers) {
      const double target = t + params.delay_mean + sd * rng.normal();
      if (target > params.t_start && target <= params.t_end) events.emplace_back(target, 2);
    }
    std::sort(events.begin(), events.end());
    const bool tied = std::adjacent_find(events.begin(), events.end(), [](auto& x, auto& y) {
                        return x.first == y.first;
                      }) != events.end();
    if (tied) continue;  // redraw the whole sequence from the continuing stream
    std::vector<double> times;
    std::vector<Mark> marks;
    times.reserve(events.size());
    marks.reserve(events.size());
    for (const auto& [t, k] : events) {
      times.push_back(t);
      marks.push_back(k);
    }
    return EventSequence(std::move(times), std::move(marks), params.t_end, params.t_start);
  }
}

ExpHawkesParams random_hawkes_params(std::size_t num_marks, std::uint64_t seed) {
  Philox rng(seed);
  ExpHawkesParams p;
  p.nu.resize(num_marks);
  p.alpha.assign(num_marks, std::vector<double>(num_marks));
  p.beta.assign(num_marks, std::vector<double>(num_marks));
  for (auto& v : p.nu) v = rng.uniform(0.1, 0.5);
  for (auto& row : p.alpha) {
    for (auto& v : row) v = rng.uniform(0.5, 0.8);
  }
  for (auto& row : p.beta) {
    for (auto& v : row) v = rng.uniform(0.4, 1.2);
  }
  return p;
}

// --- oracles -----------------------------------------------------------------

double hawkes_loglik_oracle(const ExpHawkesParams& params, const EventSequence& seq) {
  params.validate();
  const std::size_t k = params.num_marks();
  if (seq.max_mark() >= static_cast<Mark>(k)) throw ValidationError("mark out of range");
  std::vector<double> recursion(k * k, 0.0);  // sum_{i: k_i=b} exp(-beta[a][b](t - t_i))
  double log_sum = 0.0;
  double prev = seq.t_start();
  for (std::size_t i = 0; i < seq.size(); ++i) {
    const double t = seq.time(i);
    for (std::size_t a = 0; a < k; ++a) {
      for (std::size_t b = 0; b < k; ++b) {
        recursion[a * k + b] *= std::exp(-params.beta[a][b] * (t - prev));
      }
    }
    const auto m = static_cast<std::size_t>(seq.mark(i));
    double lambda = params.nu[m];
    for (std::size_t b = 0; b < k; ++b) lambda += params.alpha[m][b] * recursion[m * k + b];
    log_sum += std::log(lambda);
    for (std::size_t a = 0; a < k; ++a) recursion[a * k + m] += 1.0;
    prev = t;
  }
  double compensator = 0.0;
  for (double v : params.nu) compensator += v * (seq.t_end() - seq.t_start());
  for (std::size_t i = 0; i < seq.size(); ++i) {
    const auto m = static_cast<std::size_t>(seq.mark(i));
    const double remaining = seq.t_end() - seq.time(i);
    for (std::size_t a = 0; a < k; ++a) {
      compensator += params.alpha[a][m] / params.beta[a][m] *
                     -std::expm1(-params.beta[a][m] * remaining);
    }
  }
  return log_sum - compensator;
}

double self_correcting_loglik_oracle(const SelfCorrectingParams& params, const EventSequence& seq) {
  params.validate();
  double log_sum = 0.0;
  double compensator = 0.0;
  double prev = seq.t_start();
  const auto segment = [&](double from, double to, double count) {
    // integral of exp(a s - b n) over [from, to]
    return std::exp(params.a * from - params.b * count) * std::expm1(params.a * (to - from)) /
           params.a;
  };
  for (std::size_t i = 0; i < seq.size(); ++i) {
    const double t = seq.time(i);
    log_sum += params.a * t - params.b * static_cast<double>(i);
    compensator += segment(prev, t, static_cast<double>(i));
    prev = t;
  }
  compensator += segment(prev, seq.t_end(), static_cast<double>(seq.size()));
  return log_sum - compensator;
}

double square_wave_loglik_oracle(const SquareWaveParams& params, const EventSequence& seq) {
  params.validate();
  double log_sum = 0.0;
  for (double t : seq.times()) log_sum += std::log(params.rate(t));
  return log_sum - params.integral(seq.t_start(), seq.t_end());
}

double normal_delay_log_survival(double tau, double mean, double var) {
  const double z = (tau - mean) / std::sqrt(var);
  if (z < 30.0) return std::log(0.5 * std::erfc(z / std::numbers::sqrt2));
  // Mills-ratio asymptotic series; erfc underflows past z ~ 37.
  const double z2 = z * z;
  return -0.5 * z2 - std::log(z) - 0.5 * std::log(2.0 * std::numbers::pi) +
         std::log1p(-1.0 / z2 + 3.0 / (z2 * z2) - 15.0 / (z2 * z2 * z2));
}

double normal_delay_hazard(double tau, double mean, double var) {
  const double sd = std::sqrt(var);
  const double z = (tau - mean) / sd;
  const double log_pdf = -0.5 * z * z - 0.5 * std::log(2.0 * std::numbers::pi) - std::log(sd);
  return std::exp(log_pdf - normal_delay_log_survival(tau, mean, var));
}

double longrange_loglik_oracle(const LongRangeParams& params, const EventSequence& seq) {
  params.validate();
  const auto history = replay_long_range(params, seq);
  if (history.orphan_target) return -std::numeric_limits<double>::infinity();
  double log_sum = 0.0;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    switch (seq.mark(i)) {
      case 0:
        log_sum += std::log(params.distractor_rate);
        break;
      case 1:
        log_sum += std::log(params.trigger_rate);
        break;
      default: {
        double target = 0.0;
        for (double trigger : history.pending[i]) {
          target += normal_delay_hazard(seq.time(i) - trigger, params.delay_mean, params.delay_var);
        }
        log_sum += std::log(target);
      }
    }
  }
  const double window = seq.t_end() - seq.t_start();
  return log_sum - (params.distractor_rate + params.trigger_rate) * window -
         history.cumulative_hazard;
}

std::unique_ptr<IntensityModel> make_hawkes_oracle(ExpHawkesParams params) {
  if (params.branching_ratio() >= 1.0) {
    std::cerr << "warning: Hawkes branching ratio >= 1; process is not stationary\n";
  }
  return std::make_unique<HawkesOracle>(std::move(params));
}

std::unique_ptr<IntensityModel> make_self_correcting_oracle(SelfCorrectingParams params) {
  return std::make_unique<SelfCorrectingOracle>(params);
}

std::unique_ptr<IntensityModel> make_square_wave_oracle(SquareWaveParams params) {
  return std::make_unique<SquareWaveOracle>(params);
}

std::unique_ptr<IntensityModel> make_long_range_oracle(LongRangeParams params) {
  return std::make_unique<LongRangeOracle>(params);
}

std::unique_ptr<IntensityModel> make_constant_intensity(std::vector<double> rates) {
  return std::make_unique<ConstantIntensity>(std::move(rates));
}

}  // namespace s2p2
