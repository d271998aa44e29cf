#include <gtest/gtest.h>

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <limits>
#include <numeric>

#include "s2p2/rng.hpp"
#include "s2p2/simulate.hpp"

using namespace s2p2;
using boost::math::quadrature::gauss_kronrod;

namespace {

double hawkes_rate(const ExpHawkesParams& p, const EventSequence& s, std::size_t k, double t) {
  double r = p.nu[k];
  for (std::size_t i = 0; i < s.size() && s.time(i) < t; ++i) {
    const auto j = static_cast<std::size_t>(s.mark(i));
    r += p.alpha[k][j] * std::exp(-p.beta[k][j] * (t - s.time(i)));
  }
  return r;
}

// Log-likelihood with the compensator integrated numerically between events.
double hawkes_quadrature_ll(const ExpHawkesParams& p, const EventSequence& s) {
  double ll = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    ll += std::log(hawkes_rate(p, s, static_cast<std::size_t>(s.mark(i)), s.time(i)));
  }
  std::vector<double> knots{s.t_start()};
  for (double t : s.times()) knots.push_back(t);
  knots.push_back(s.t_end());
  for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
    if (knots[i + 1] <= knots[i]) continue;
    const double mid = 0.5 * (knots[i] + knots[i + 1]);
    for (std::size_t k = 0; k < p.num_marks(); ++k) {
      // History up to the interval start is fixed inside the open interval.
      auto f = [&](double t) {
        double r = p.nu[k];
        for (std::size_t e = 0; e < s.size() && s.time(e) < mid; ++e) {
          const auto j = static_cast<std::size_t>(s.mark(e));
          r += p.alpha[k][j] * std::exp(-p.beta[k][j] * (t - s.time(e)));
        }
        return r;
      };
      ll -= gauss_kronrod<double, 31>::integrate(f, knots[i], knots[i + 1], 3, 1e-13);
    }
  }
  return ll;
}

double total_count(const std::vector<EventSequence>& seqs) {
  double n = 0.0;
  for (const auto& s : seqs) n += static_cast<double>(s.size());
  return n;
}

}  // namespace

TEST(SimulateHawkes, ZeroKernelIsPoisson) {
  auto p = ExpHawkesParams::univariate(2.0, 0.0, 1.0);
  const auto s = simulate_hawkes(p, 1000.0, 11);
  EXPECT_NEAR(static_cast<double>(s.size()), 2000.0, 4.0 * std::sqrt(2000.0));
}

TEST(SimulateHawkes, StationaryMeanCount) {
  const auto p = ExpHawkesParams::univariate(0.5, 0.5, 1.0);
  double sum = 0.0;
  const int runs = 400;
  for (int r = 0; r < runs; ++r) sum += static_cast<double>(simulate_hawkes(p, 100.0, 5, r).size());
  EXPECT_NEAR(sum / runs, 100.0, 4.0);
}

TEST(SimulateHawkes, ZeroHorizonAndDeterminism) {
  const auto p = ExpHawkesParams::univariate(0.5, 0.5, 1.0);
  EXPECT_TRUE(simulate_hawkes(p, 0.0, 1).empty());
  EXPECT_EQ(simulate_hawkes(p, 50.0, 3, 2), simulate_hawkes(p, 50.0, 3, 2));
  EXPECT_NE(simulate_hawkes(p, 50.0, 3, 2), simulate_hawkes(p, 50.0, 3, 3));
}

TEST(SimulateHawkes, CompensatorMatchesCountOverSeeds) {
  const auto p = random_hawkes_params(3, 17);
  double count = 0.0, comp = 0.0;
  for (int r = 0; r < 100; ++r) {
    const auto s = simulate_hawkes(p, 4.0, 21, r);
    count += static_cast<double>(s.size());
    double ll_events = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      ll_events += std::log(hawkes_rate(p, s, static_cast<std::size_t>(s.mark(i)), s.time(i)));
    }
    comp += ll_events - hawkes_loglik_oracle(p, s);
  }
  EXPECT_NEAR(count, comp, 4.0 * std::sqrt(comp));
}

TEST(HawkesOracle, PoissonClosedForm) {
  const auto p = ExpHawkesParams::univariate(1.7, 0.0, 1.0);
  const EventSequence s({0.5, 1.0, 4.0}, {0, 0, 0}, 6.0);
  EXPECT_NEAR(hawkes_loglik_oracle(p, s), 3.0 * std::log(1.7) - 1.7 * 6.0, 1e-13);
}

TEST(HawkesOracle, EmptySequence) {
  const auto p = ExpHawkesParams::univariate(0.5, 0.5, 1.0);
  EXPECT_NEAR(hawkes_loglik_oracle(p, EventSequence({}, {}, 10.0)), -5.0, 1e-14);
}

TEST(HawkesOracle, MatchesQuadratureOnFixedSequence) {
  const auto p = ExpHawkesParams::univariate(0.5, 0.5, 1.0);
  const EventSequence s({1.0, 2.0, 3.0}, {0, 0, 0}, 4.0);
  EXPECT_NEAR(hawkes_loglik_oracle(p, s), hawkes_quadrature_ll(p, s), 1e-9);
  // Hand-derived value for this sequence, frozen.
  const double e = std::exp(1.0);
  const double ll = std::log(0.5) + std::log(0.5 + 0.5 / e) + std::log(0.5 + 0.5 / e + 0.5 / (e * e)) -
                    (2.0 + 0.5 * (1.0 - 1.0 / (e * e * e)) + 0.5 * (1.0 - 1.0 / (e * e)) +
                     0.5 * (1.0 - 1.0 / e));
  EXPECT_NEAR(hawkes_loglik_oracle(p, s), ll, 1e-12);
}

// The random three-mark parameters are supercritical, so windows stay short.
TEST(HawkesOracle, MatchesQuadratureOnRandomDraws) {
  for (int c = 0; c < 50; ++c) {
    const auto p = random_hawkes_params(1 + c % 3, 100 + c);
    const auto s = simulate_hawkes(p, 4.0, 7, c);
    const double exact = hawkes_loglik_oracle(p, s);
    EXPECT_NEAR(exact, hawkes_quadrature_ll(p, s), 1e-8 * std::max(1.0, std::abs(exact))) << c;
  }
}

TEST(HawkesOracle, TimeChangeResidualsAreExponential) {
  const auto p = ExpHawkesParams::univariate(0.5, 0.5, 1.0);
  const auto oracle = make_hawkes_oracle(p);
  std::vector<double> residuals;
  for (int r = 0; residuals.size() < 10000; ++r) {
    const auto s = simulate_hawkes(p, 100.0, 99, r);
    const auto cond = oracle->condition(s);
    double prev = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      // Exact compensator increment from closed-form partial likelihoods.
      const EventSequence upto(std::vector<double>(s.times().begin(), s.times().begin() + i),
                               std::vector<Mark>(i, 0), s.time(i));
      const EventSequence before(std::vector<double>(s.times().begin(), s.times().begin() + i),
                                 std::vector<Mark>(i, 0), prev);
      const double comp_upto = -hawkes_loglik_oracle(p, upto);
      const double comp_before = -hawkes_loglik_oracle(p, before);
      residuals.push_back(comp_upto - comp_before);
      prev = s.time(i);
    }
  }
  std::sort(residuals.begin(), residuals.end());
  const double n = static_cast<double>(residuals.size());
  double d = 0.0;
  for (std::size_t i = 0; i < residuals.size(); ++i) {
    const double f = 1.0 - std::exp(-residuals[i]);
    d = std::max({d, std::abs(f - static_cast<double>(i) / n), std::abs(static_cast<double>(i + 1) / n - f)});
  }
  // Asymptotic Kolmogorov critical value at alpha = 0.01.
  EXPECT_LT(d, 1.6276 / std::sqrt(n));
}

TEST(RandomHawkesParams, RangesMeansDeterminism) {
  const auto a = random_hawkes_params(3, 5);
  const auto b = random_hawkes_params(3, 5);
  EXPECT_EQ(a.nu, b.nu);
  EXPECT_EQ(a.alpha, b.alpha);
  EXPECT_EQ(a.beta, b.beta);
  double snu = 0, sal = 0, sbe = 0;
  int n_nu = 0, n_ab = 0;
  for (int s = 0; s < 10000; ++s) {
    const auto p = random_hawkes_params(3, s);
    for (std::size_t k = 0; k < 3; ++k) {
      EXPECT_GE(p.nu[k], 0.1);
      EXPECT_LE(p.nu[k], 0.5);
      snu += p.nu[k];
      ++n_nu;
      for (std::size_t j = 0; j < 3; ++j) {
        ASSERT_GE(p.alpha[k][j], 0.5);
        ASSERT_LE(p.alpha[k][j], 0.8);
        ASSERT_GE(p.beta[k][j], 0.4);
        ASSERT_LE(p.beta[k][j], 1.2);
        sal += p.alpha[k][j];
        sbe += p.beta[k][j];
        ++n_ab;
      }
    }
  }
  EXPECT_NEAR(snu / n_nu, 0.3, 0.02 * 0.3);
  EXPECT_NEAR(sal / n_ab, 0.65, 0.02 * 0.65);
  EXPECT_NEAR(sbe / n_ab, 0.8, 0.02 * 0.8);
}

TEST(ExpHawkesParams, ValidationAndBranchingRatio) {
  auto p = ExpHawkesParams::univariate(0.5, 0.5, 1.0);
  EXPECT_NEAR(p.branching_ratio(), 0.5, 1e-12);
  p.alpha[0][0] = -1.0;
  EXPECT_THROW(p.validate(), ValidationError);
  ExpHawkesParams bad{{0.1, 0.2}, {{0.1}}, {{1.0}}};
  EXPECT_THROW(bad.validate(), ValidationError);
}

TEST(SimulateSelfCorrecting, EquilibriumRateAndMonotoneInB) {
  const SelfCorrectingParams unit{1.0, 1.0};
  std::vector<EventSequence> runs;
  double gaps = 0.0, n = 0.0;
  for (int r = 0; r < 200; ++r) {
    runs.push_back(simulate_self_correcting(unit, 10.0, 3, r));
    const auto& s = runs.back();
    for (std::size_t i = 1; i < s.size(); ++i) {
      gaps += s.time(i) - s.time(i - 1);
      n += 1.0;
    }
  }
  EXPECT_NEAR(gaps / n, 1.0, 0.1);
  const SelfCorrectingParams steep{1.0, 8.0};
  double c_unit = total_count(runs), c_steep = 0.0;
  for (int r = 0; r < 200; ++r) c_steep += static_cast<double>(simulate_self_correcting(steep, 10.0, 3, r).size());
  EXPECT_LT(c_steep, c_unit);
  EXPECT_TRUE(simulate_self_correcting(unit, 0.0, 1).empty());
}

TEST(SimulateSelfCorrecting, CompensatorMatchesCount) {
  const SelfCorrectingParams p{1.0, 0.5};
  double count = 0.0, comp = 0.0;
  for (int r = 0; r < 100; ++r) {
    const auto s = simulate_self_correcting(p, 10.0, 8, r);
    count += static_cast<double>(s.size());
    double log_terms = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) log_terms += s.time(i) - 0.5 * static_cast<double>(i);
    comp += log_terms - self_correcting_loglik_oracle(p, s);
  }
  EXPECT_NEAR(count, comp, 4.0 * std::sqrt(comp));
}

TEST(SelfCorrectingOracle, MatchesQuadrature) {
  const SelfCorrectingParams p{1.0, 0.5};
  const EventSequence s({0.4, 1.1, 2.5}, {0, 0, 0}, 3.0);
  double ll = 0.0;
  std::vector<double> knots{0.0, 0.4, 1.1, 2.5, 3.0};
  for (std::size_t i = 0; i < 3; ++i) ll += s.time(i) - 0.5 * static_cast<double>(i);
  for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
    const double n = static_cast<double>(i);
    ll -= gauss_kronrod<double, 31>::integrate([&](double t) { return std::exp(t - 0.5 * n); },
                                               knots[i], knots[i + 1]);
  }
  EXPECT_NEAR(self_correcting_loglik_oracle(p, s), ll, 1e-10);
}

TEST(SimulateSquareWave, CountsAndDegenerateCases) {
  SquareWaveParams p;
  p.t_tail = std::numeric_limits<double>::infinity();
  const auto s = simulate_square_wave(p, 1000.0, 2);
  EXPECT_NEAR(static_cast<double>(s.size()), 500.0, 4.0 * std::sqrt(500.0));
  for (double t : s.times()) EXPECT_LT(std::fmod(t, 2.0), 1.0);

  SquareWaveParams flat;
  flat.low = flat.high = flat.tail_rate = 1.5;
  const auto f = simulate_square_wave(flat, 1000.0, 2);
  EXPECT_NEAR(static_cast<double>(f.size()), 1500.0, 4.0 * std::sqrt(1500.0));

  const auto early = simulate_square_wave(SquareWaveParams{}, 0.9, 4);
  for (double t : early.times()) EXPECT_LT(t, 1.0);
  EXPECT_TRUE(simulate_square_wave(SquareWaveParams{}, 0.0, 1).empty());
}

TEST(SquareWaveOracle, ClosedFormIntegralMatchesQuadrature) {
  const SquareWaveParams p;
  const double q = gauss_kronrod<double, 15>::integrate([&](double t) { return p.rate(t); }, 0.0, 1.0) +
                   gauss_kronrod<double, 15>::integrate([&](double t) { return p.rate(t); }, 1.0, 2.0) +
                   gauss_kronrod<double, 15>::integrate([&](double t) { return p.rate(t); }, 2.0, 3.0) +
                   gauss_kronrod<double, 15>::integrate([&](double t) { return p.rate(t); }, 3.0, 3.7);
  EXPECT_NEAR(p.integral(0.0, 3.7), q, 1e-12);
  EXPECT_NEAR(p.integral(0.0, 10.0), 4.0 + 1.5, 1e-12);
  const EventSequence s({0.5, 2.25, 8.0}, {0, 0, 0}, 10.0);
  EXPECT_NEAR(square_wave_loglik_oracle(p, s), std::log(0.5) - 5.5, 1e-12);
  const EventSequence impossible({1.5}, {0}, 10.0);
  EXPECT_EQ(square_wave_loglik_oracle(p, impossible), -std::numeric_limits<double>::infinity());
}

TEST(SimulateLongRange, NoTriggersMeansNoTargets) {
  LongRangeParams p;
  p.trigger_rate = 0.0;
  for (int r = 0; r < 20; ++r) {
    const auto s = simulate_long_range(p, 1, r);
    for (Mark m : s.marks()) EXPECT_EQ(m, 0);
  }
}

TEST(SimulateLongRange, TargetsPairWithEarlyTriggers) {
  const LongRangeParams p;
  double targets = 0.0, early = 0.0;
  for (int r = 0; r < 2000; ++r) {
    const auto s = simulate_long_range(p, 6, r);
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s.mark(i) == 2) targets += 1.0;
      if (s.mark(i) == 1 && s.time(i) < 60.0) early += 1.0;
    }
  }
  // Expected 6 per sequence each; sampling noise about 4 sqrt(2 * 12000).
  EXPECT_NEAR(targets, early, 4.0 * std::sqrt(2.0 * early));
}

TEST(SimulateLongRange, DegenerateDelay) {
  LongRangeParams p;
  p.delay_var = 1e-12;
  for (int r = 0; r < 50; ++r) {
    const auto s = simulate_long_range(p, 3, r);
    std::vector<double> trig, targ;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s.mark(i) == 1 && s.time(i) + 40.0 < p.t_end - 1e-3) trig.push_back(s.time(i));
      if (s.mark(i) == 2) targ.push_back(s.time(i));
    }
    ASSERT_EQ(trig.size(), targ.size());
    // The delay standard deviation is 1e-6, so allow ten of them.
    for (std::size_t i = 0; i < trig.size(); ++i) EXPECT_NEAR(targ[i] - trig[i], 40.0, 1e-5);
  }
}

TEST(LongRangeOracle, NoTriggersIsTwoPoisson) {
  const LongRangeParams p;
  const EventSequence s({1.0, 5.0, 30.0}, {0, 0, 0}, 100.0);
  EXPECT_NEAR(longrange_loglik_oracle(p, s), 3.0 * std::log(1.0) - 100.0 - 10.0, 1e-9);
}

TEST(LongRangeOracle, SingleTriggerMatchesQuadrature) {
  const LongRangeParams p;
  const EventSequence s({10.0, 50.0}, {1, 2}, 100.0);
  const double sd = std::sqrt(p.delay_var);
  auto pdf = [&](double tau) {
    const double z = (tau - p.delay_mean) / sd;
    return std::exp(-0.5 * z * z) / (sd * std::sqrt(2.0 * std::numbers::pi));
  };
  auto surv = [&](double tau) { return 0.5 * std::erfc((tau - p.delay_mean) / (sd * std::sqrt(2.0))); };
  // Hazard integrated by quadrature, split near the delay mean where it is sharp.
  auto hazard = [&](double t) { return pdf(t - 10.0) / surv(t - 10.0); };
  const double cum = gauss_kronrod<double, 61>::integrate(hazard, 10.0, 48.0, 15, 1e-14) +
                     gauss_kronrod<double, 61>::integrate(hazard, 48.0, 50.0, 15, 1e-14);
  const double expected = std::log(0.1) + std::log(hazard(50.0)) - cum - 100.0 - 10.0;
  EXPECT_NEAR(longrange_loglik_oracle(p, s), expected, 1e-6);
}

TEST(LongRangeOracle, DuplicateTargetLowersLikelihood) {
  const LongRangeParams p;
  const EventSequence once({10.0, 50.0}, {1, 2}, 100.0);
  const EventSequence twice({10.0, 50.0, 50.1}, {1, 2, 2}, 100.0);
  EXPECT_LT(longrange_loglik_oracle(p, twice), longrange_loglik_oracle(p, once));
  EXPECT_THROW(longrange_loglik_oracle(p, EventSequence({1.0}, {3}, 100.0)), ValidationError);
}

TEST(LongRangeOracle, CompensatorMatchesCountOverSeeds) {
  const LongRangeParams p;
  const auto oracle = make_long_range_oracle(p);
  double count = 0.0, comp = 0.0;
  for (int r = 0; r < 100; ++r) {
    const auto s = simulate_long_range(p, 4, r);
    count += static_cast<double>(s.size());
    comp += oracle->log_likelihood(s).integral;
  }
  EXPECT_NEAR(count, comp, 4.0 * std::sqrt(comp));
}

TEST(NormalDelay, SurvivalTailIsFinite) {
  EXPECT_NEAR(std::exp(normal_delay_log_survival(40.0, 40.0, 0.1)), 0.5, 1e-15);
  const double deep = normal_delay_log_survival(60.0, 40.0, 0.1);
  EXPECT_TRUE(std::isfinite(deep));
  EXPECT_LT(deep, -1000.0);
  EXPECT_GT(normal_delay_hazard(60.0, 40.0, 0.1), 0.0);
}
