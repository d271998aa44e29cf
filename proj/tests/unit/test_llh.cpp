#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <numbers>

#include "s2p2/llh.hpp"

using namespace s2p2;
using ad::Tensor;
using cplx = std::complex<double>;

namespace {

LLHLayerParams random_layer(std::size_t h, std::size_t p, bool id, ZohMode mode, std::uint64_t seed) {
  Philox rng(seed);
  auto layer = LLHLayerParams::init(h, p, id, mode, rng);
  for (double& v : layer.rho.data) v = rng.uniform(-2.0, 1.0);
  for (double& v : layer.x0.data) v = rng.uniform(-1.0, 1.0);
  for (double& v : layer.D.data) v = rng.uniform(-1.0, 1.0);
  for (double& v : layer.W_prime.data) v = rng.normal(0.0, 0.3);
  for (double& v : layer.b_prime.data) v = rng.normal(0.0, 0.3);
  return layer;
}

Tensor random_real(std::size_t r, std::size_t c, Philox& rng) {
  Tensor t(r, c);
  for (double& v : t.data) v = rng.uniform(-1.0, 1.0);
  return t;
}

Tensor random_complex(std::size_t r, std::size_t c, Philox& rng) {
  Tensor t(r, c, true);
  for (double& v : t.data) v = rng.uniform(-1.0, 1.0);
  return t;
}

}  // namespace

TEST(LLH, ZohModeParsing) {
  EXPECT_EQ(parse_zoh_mode("forward"), ZohMode::forward);
  EXPECT_EQ(parse_zoh_mode("backward"), ZohMode::backward);
  EXPECT_EQ(to_string(ZohMode::forward), "forward");
  EXPECT_THROW(parse_zoh_mode("sideways"), std::invalid_argument);
}

TEST(LLH, InitIsStableAndUnitScaled) {
  Philox rng(1);
  const auto layer = LLHLayerParams::init(4, 6, true, ZohMode::backward, rng);
  const auto lam = layer.lambda();
  for (std::size_t p = 0; p < lam.size(); ++p) {
    EXPECT_DOUBLE_EQ(lam[p].real(), -0.5);
    EXPECT_DOUBLE_EQ(lam[p].imag(), std::numbers::pi * static_cast<double>(p));
  }
  const std::vector<double> u{0.3, -1.0, 2.0, 0.0};
  const auto eff = effective_lambda(layer, u);
  for (std::size_t p = 0; p < lam.size(); ++p) EXPECT_NEAR(std::abs(eff[p] - lam[p]), 0.0, 1e-14);
  layer.validate();
}

TEST(LLH, EffectiveLambdaKeepsNegativeRealParts) {
  for (std::uint64_t s = 0; s < 50; ++s) {
    const auto layer = random_layer(5, 7, true, ZohMode::backward, s);
    Philox rng(s + 1000);
    std::vector<double> u(5);
    for (double& v : u) v = rng.normal(0.0, 3.0);
    for (const cplx& l : effective_lambda(layer, u)) EXPECT_LT(l.real(), 0.0);
  }
}

TEST(LLH, ScaledChannelEqualsLongerStep) {
  const std::vector<cplx> base{{-0.7, 2.0}};
  const std::vector<cplx> doubled{2.0 * base[0]};
  EXPECT_LT(std::abs(discretize(doubled, 0.3).lambda_bar[0] - discretize(base, 0.6).lambda_bar[0]), 1e-15);
}

TEST(LLH, DiscretizeEdgeCases) {
  const std::vector<cplx> lam{{-1.0, 0.0}, {-0.3, 4.0}};
  const auto zero = discretize(lam, 0.0);
  for (std::size_t p = 0; p < 2; ++p) {
    EXPECT_EQ(zero.lambda_bar[p], cplx(1.0, 0.0));
    EXPECT_EQ(zero.input_factor[p], cplx(0.0, 0.0));
  }
  EXPECT_NEAR(discretize(lam, std::log(2.0)).lambda_bar[0].real(), 0.5, 1e-15);
  const auto far = discretize(lam, 1e6);
  for (const cplx& z : far.lambda_bar) EXPECT_LT(std::abs(z), 1e-100);
  for (std::size_t p = 0; p < 2; ++p) EXPECT_LE(std::abs(discretize(lam, 0.37).lambda_bar[p]), 1.0);
}

TEST(LLH, EvolveStateIdentitySemigroupAndDecay) {
  const auto layer = random_layer(3, 4, false, ZohMode::backward, 2);
  Philox rng(3);
  std::vector<cplx> x(4);
  for (auto& z : x) z = cplx(rng.uniform(-1, 1), rng.uniform(-1, 1));
  const std::vector<double> u{0.5, -0.2, 1.0};
  const auto lam = layer.lambda();
  EXPECT_EQ(evolve_state(layer, x, u, lam, 0.0), x);
  const auto direct = evolve_state(layer, x, u, lam, 0.7);
  const auto composed = evolve_state(layer, evolve_state(layer, x, u, lam, 0.3), u, lam, 0.4);
  for (std::size_t p = 0; p < 4; ++p) EXPECT_LT(std::abs(direct[p] - composed[p]), 1e-12);

  const std::vector<cplx> ones(4, 1.0), unit(4, cplx(-1.0, 0.0));
  const std::vector<double> zero_u(3, 0.0);
  for (const cplx& z : evolve_state(layer, ones, zero_u, unit, 1.0)) {
    EXPECT_NEAR(z.real(), std::exp(-1.0), 1e-15);
    EXPECT_EQ(z.imag(), 0.0);
  }
}

TEST(LLH, PureImpulse) {
  const auto layer = random_layer(3, 4, false, ZohMode::backward, 4);
  auto zeroed = layer;
  std::fill(zeroed.x0.data.begin(), zeroed.x0.data.end(), 0.0);
  Philox rng(5);
  const Tensor impulse = random_complex(1, 4, rng);
  const Tensor u(1, 3);
  const std::vector<double> dt{0.8};
  const auto states = layer_forward(zeroed, impulse, u, dt);
  EXPECT_EQ(states.right_limits.data, impulse.data);
  for (double v : states.left_limits.data) EXPECT_EQ(v, 0.0);
}

TEST(LLH, FirstLayerMatchesClosedFormDecay) {
  // With u = 0 the state between events is exp(Lambda (t - t_i)) x_i exactly.
  for (bool id : {false, true}) {
    const auto layer = random_layer(3, 5, id, ZohMode::backward, 6);
    Philox rng(7);
    const std::size_t n = 6;
    const Tensor impulses = random_complex(n, 5, rng);
    const Tensor u(n, 3);
    std::vector<double> times{0.4, 1.1, 1.5, 2.9, 3.0, 4.4};
    std::vector<double> dt(n);
    for (std::size_t i = 0; i < n; ++i) dt[i] = times[i] - (i ? times[i - 1] : 0.0);
    const auto states = layer_forward(layer, impulses, u, dt);
    const std::vector<double> zero_u(3, 0.0);
    const auto lam = id ? effective_lambda(layer, zero_u) : effective_lambda(layer, {});
    for (int q = 0; q < 20; ++q) {
      const double t = rng.uniform(0.0, 5.0);
      std::size_t last = 0;
      while (last < n && times[last] < t) ++last;
      const double origin = last ? times[last - 1] : 0.0;
      std::vector<cplx> x(5);
      for (std::size_t p = 0; p < 5; ++p) {
        x[p] = last ? states.right_limits.c(last - 1, p) : layer.x0.c(0, p);
      }
      const auto got = evolve_state(layer, x, zero_u, lam, t - origin);
      for (std::size_t p = 0; p < 5; ++p) {
        const cplx expected = std::exp(lam[p] * (t - origin)) * x[p];
        EXPECT_LT(std::abs(got[p] - expected), 1e-12);
      }
    }
    // The left limit at every event is the decayed previous right limit.
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t p = 0; p < 5; ++p) {
        const cplx prev = i ? states.right_limits.c(i - 1, p) : layer.x0.c(0, p);
        EXPECT_LT(std::abs(states.left_limits.c(i, p) - std::exp(lam[p] * dt[i]) * prev), 1e-12);
      }
    }
  }
}

TEST(LLH, LeftRightLimitIdentityAndModeEquivalenceOnFirstLayer) {
  const auto back = random_layer(4, 6, true, ZohMode::backward, 8);
  auto fwd = back;
  fwd.zoh_mode = ZohMode::forward;
  Philox rng(9);
  const std::size_t n = 40;
  const Tensor impulses = random_complex(n, 6, rng);
  const Tensor u(n, 4);
  std::vector<double> dt(n);
  for (double& d : dt) d = rng.exponential(1.0);
  const auto a = layer_forward(back, impulses, u, dt);
  const auto b = layer_forward(fwd, impulses, u, dt, u);
  EXPECT_EQ(a.right_limits.data, b.right_limits.data);
  for (std::size_t k = 0; k < a.right_limits.data.size(); ++k) {
    EXPECT_EQ(a.right_limits.data[k] - impulses.data[k], a.left_limits.data[k]);
  }
}

TEST(LLH, ScanMatchesSequentialRecurrenceWithInputs) {
  for (std::size_t n : {1u, 17u, 2048u}) {
    const auto layer = random_layer(3, 4, true, ZohMode::backward, 10 + n);
    Philox rng(11 + n);
    const Tensor impulses = random_complex(n, 4, rng);
    const Tensor u = random_real(n, 3, rng);
    std::vector<double> dt(n);
    for (double& d : dt) d = rng.exponential(2.0);
    const auto states = layer_forward(layer, impulses, u, dt);
    std::vector<cplx> x(4);
    for (std::size_t p = 0; p < 4; ++p) x[p] = layer.x0.c(0, p);
    double max_err = 0.0, bound = 0.0;
    for (std::size_t p = 0; p < 4; ++p) bound += std::abs(x[p]);
    for (std::size_t i = 0; i < n; ++i) {
      const std::vector<double> cond = i ? std::vector<double>(u.data.begin() + (i - 1) * 3, u.data.begin() + i * 3)
                                         : std::vector<double>(3, 0.0);
      const auto lam = effective_lambda(layer, cond);
      const std::vector<double> held(u.data.begin() + i * 3, u.data.begin() + (i + 1) * 3);
      x = evolve_state(layer, x, held, lam, dt[i]);
      for (std::size_t p = 0; p < 4; ++p) {
        x[p] += impulses.c(i, p);
        max_err = std::max(max_err, std::abs(x[p] - states.right_limits.c(i, p)));
      }
    }
    EXPECT_LT(max_err, 1e-10) << n;
  }
}

TEST(LLH, OutputIsRealProjectionPlusPassthrough) {
  const auto layer = random_layer(2, 3, false, ZohMode::backward, 12);
  Philox rng(13);
  const Tensor impulses = random_complex(2, 3, rng);
  const Tensor u = random_real(2, 2, rng);
  const std::vector<double> dt{0.5, 0.25};
  const auto s = layer_forward(layer, impulses, u, dt);
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t h = 0; h < 2; ++h) {
      cplx acc = 0.0;
      for (std::size_t p = 0; p < 3; ++p) acc += layer.C.c(h, p) * s.left_limits.c(i, p);
      EXPECT_NEAR(s.outputs(i, h), 2.0 * acc.real() + layer.D(0, h) * u(i, h), 1e-13);
    }
  }
}

TEST(LLH, ValidateRejectsBadShapes) {
  auto layer = random_layer(2, 3, true, ZohMode::backward, 14);
  layer.B = Tensor(2, 2, true);
  EXPECT_THROW(layer.validate(), std::invalid_argument);
  auto nan_layer = random_layer(2, 3, true, ZohMode::backward, 15);
  nan_layer.rho.data[0] = std::nan("");
  EXPECT_THROW(nan_layer.validate(), std::invalid_argument);
}
