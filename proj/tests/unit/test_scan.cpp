#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <vector>

#include "fd.hpp"
#include "s2p2/autodiff.hpp"
#include "s2p2/parallel.hpp"
#include "s2p2/scan.hpp"

using namespace s2p2;
using ad::Tape;
using ad::Tensor;
using ad::Var;
using cplx = std::complex<double>;

namespace {

std::vector<cplx> random_complex(std::size_t n, Philox& rng, double radius = 1.0) {
  std::vector<cplx> out(n);
  for (auto& z : out) z = cplx(rng.uniform(-radius, radius), rng.uniform(-radius, radius));
  return out;
}

// Decays inside the unit disk keep long scans bounded.
std::vector<cplx> random_decays(std::size_t n, Philox& rng) {
  std::vector<cplx> out(n);
  for (auto& z : out) z = std::polar(rng.uniform(0.2, 0.999), rng.uniform(-3.0, 3.0));
  return out;
}

Tensor to_tensor(const std::vector<cplx>& v, std::size_t rows, std::size_t cols) {
  Tensor t(rows, cols, true);
  for (std::size_t i = 0; i < v.size(); ++i) t.cdata()[i] = v[i];
  return t;
}

double max_abs_diff(const std::vector<cplx>& a, const std::vector<cplx>& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

class ScanModeGuard {
 public:
  explicit ScanModeGuard(ScanMode mode, int threads) : mode_(default_scan_mode()), threads_(thread_count()) {
    set_default_scan_mode(mode);
    set_thread_count(threads);
  }
  ~ScanModeGuard() {
    set_default_scan_mode(mode_);
    set_thread_count(threads_);
  }

 private:
  ScanMode mode_;
  int threads_;
};

// x_i = a_i x_{i-1} + b_i built from elementwise tape ops, one row at a time.
Var unrolled_scan(const Var& a, const Var& b, const Var& x0) {
  Var x = x0;
  Var all;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    x = ad::add(ad::mul(ad::slice_rows(a, i, 1), x), ad::slice_rows(b, i, 1));
    all = all.defined() ? ad::concat_rows(all, x) : x;
  }
  return all;
}

}  // namespace

TEST(Scan, CombineIsAssociative) {
  Philox rng(1);
  for (int draw = 0; draw < 1000; ++draw) {
    const auto v = random_complex(6, rng, 2.0);
    auto combine = [](std::pair<cplx, cplx> l, std::pair<cplx, cplx> r) {
      return std::pair<cplx, cplx>{r.first * l.first, r.first * l.second + r.second};
    };
    const std::pair<cplx, cplx> x{v[0], v[1]}, y{v[2], v[3]}, z{v[4], v[5]};
    const auto left = combine(combine(x, y), z);
    const auto right = combine(x, combine(y, z));
    EXPECT_LT(std::abs(left.first - right.first), 1e-12);
    EXPECT_LT(std::abs(left.second - right.second), 1e-12);
  }
}

TEST(Scan, PrefixSumAndMemoryless) {
  const std::size_t n = 300, p = 3;
  Philox rng(2);
  const auto b = random_complex(n * p, rng);
  for (ScanMode mode : {ScanMode::sequential, ScanMode::parallel}) {
    std::vector<cplx> ones(n * p, 1.0), zeros(n * p, 0.0), x(n * p);
    linear_scan(ones.data(), b.data(), nullptr, x.data(), n, p, mode, 4);
    std::vector<cplx> acc(p, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t c = 0; c < p; ++c) {
        acc[c] += b[i * p + c];
        EXPECT_LT(std::abs(x[i * p + c] - acc[c]), 1e-12);
      }
    }
    linear_scan(zeros.data(), b.data(), nullptr, x.data(), n, p, mode, 4);
    EXPECT_EQ(x, b);
  }
}

TEST(Scan, ParallelMatchesSequentialAcrossLengthsAndThreads) {
  Philox rng(3);
  for (std::size_t n : {1u, 2u, 17u, 257u, 2048u, 5000u}) {
    for (int threads : {1, 2, 3, 4, 7}) {
      const std::size_t p = 5;
      const auto a = random_decays(n * p, rng);
      const auto b = random_complex(n * p, rng);
      const auto x0 = random_complex(p, rng);
      std::vector<cplx> seq(n * p), par(n * p);
      linear_scan(a.data(), b.data(), x0.data(), seq.data(), n, p, ScanMode::sequential);
      linear_scan(a.data(), b.data(), x0.data(), par.data(), n, p, ScanMode::parallel, threads);
      EXPECT_LT(max_abs_diff(seq, par), 1e-12) << "n=" << n << " threads=" << threads;
      std::vector<cplx> again(n * p);
      linear_scan(a.data(), b.data(), x0.data(), again.data(), n, p, ScanMode::parallel, threads);
      EXPECT_EQ(par, again);
    }
  }
}

TEST(Scan, OperationCountIsLinear) {
  const std::size_t p = 4;
  Philox rng(4);
  for (std::size_t n : {1024u, 4096u, 65536u}) {
    const auto a = random_decays(n * p, rng);
    const auto b = random_complex(n * p, rng);
    std::vector<cplx> x(n * p);
    reset_scan_op_count();
    linear_scan(a.data(), b.data(), nullptr, x.data(), n, p, ScanMode::sequential);
    EXPECT_EQ(scan_op_count(), n * p);
    reset_scan_op_count();
    linear_scan(a.data(), b.data(), nullptr, x.data(), n, p, ScanMode::parallel, 4);
    EXPECT_LE(scan_op_count(), 2 * n * p + 64 * p);
    EXPECT_GE(scan_op_count(), n * p);
  }
}

TEST(Scan, DifferentiableScanMatchesUnrolledLoop) {
  Philox rng(5);
  for (ScanMode mode : {ScanMode::sequential, ScanMode::parallel}) {
    ScanModeGuard guard(mode, 4);
    for (std::size_t n : {1u, 2u, 17u, 257u}) {
      const std::size_t p = 3;
      const std::vector<Tensor> in{to_tensor(random_decays(n * p, rng), n, p),
                                   to_tensor(random_complex(n * p, rng), n, p),
                                   to_tensor(random_complex(p, rng), 1, p)};
      const Tensor w = to_tensor(random_complex(n * p, rng), n, p);
      auto loss = [&](bool fused) {
        return [&, fused](Tape& t, const std::vector<Var>& v) {
          const Var x = fused ? ad::scan(v[0], v[1], v[2]) : unrolled_scan(v[0], v[1], v[2]);
          const Var y = ad::mul(x, t.constant(w));
          return ad::sum(ad::real_part(ad::mul(y, y)));
        };
      };
      const auto fused = test::analytic(loss(true), in);
      const auto loop = test::analytic(loss(false), in);
      EXPECT_NEAR(test::evaluate(loss(true), in), test::evaluate(loss(false), in), 1e-10);
      for (std::size_t i = 0; i < in.size(); ++i) {
        EXPECT_LT(test::relative_error(fused[i], loop[i], 1.0), 1e-10) << "n=" << n << " input " << i;
      }
      if (n <= 17) {
        const auto fd = test::central_difference(loss(true), in);
        for (std::size_t i = 0; i < in.size(); ++i) {
          EXPECT_LT(test::relative_error(fused[i], fd[i]), 1e-6) << "n=" << n << " input " << i;
        }
      }
    }
  }
}

TEST(Scan, LengthMismatchThrows) {
  Tape tape;
  const Var a = tape.leaf(Tensor(3, 2, true));
  const Var b = tape.leaf(Tensor(4, 2, true));
  const Var x0 = tape.leaf(Tensor(1, 2, true));
  EXPECT_THROW(ad::scan(a, b, x0), ad::ShapeError);
}
