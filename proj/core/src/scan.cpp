#include "s2p2/scan.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <vector>

#include "s2p2/parallel.hpp"

namespace s2p2 {

namespace {

using cplx = std::complex<double>;

std::atomic<std::uint64_t> g_scan_ops{0};
std::atomic<ScanMode> g_default_mode{ScanMode::automatic};

void sequential_scan(const cplx* a, const cplx* b, const cplx* x0, cplx* x, std::size_t n,
                     std::size_t p) {
  if (n == 0) return;
  for (std::size_t j = 0; j < p; ++j) {
    const cplx start = x0 ? x0[j] : cplx{};
    x[j] = a[j] * start + b[j];
  }
  for (std::size_t i = 1; i < n; ++i) {
    const cplx* ai = a + i * p;
    const cplx* bi = b + i * p;
    const cplx* prev = x + (i - 1) * p;
    cplx* cur = x + i * p;
    for (std::size_t j = 0; j < p; ++j) cur[j] = ai[j] * prev[j] + bi[j];
  }
  g_scan_ops.fetch_add(static_cast<std::uint64_t>(n * p), std::memory_order_relaxed);
}

// Affine map x -> a x + b per channel; `then(first, second)` applies first, then second.
struct Affine {
  std::vector<cplx> a;
  std::vector<cplx> b;
};

void compose_into(const Affine& first, Affine& second) {
  for (std::size_t j = 0; j < second.a.size(); ++j) {
    second.b[j] = second.a[j] * first.b[j] + second.b[j];
    second.a[j] = second.a[j] * first.a[j];
  }
}

// Exclusive prefix over chunk aggregates: after the call, items[c] is the
// composition of items[0..c-1] (identity for c = 0).
void blelloch_exclusive(std::vector<Affine>& items, std::size_t p) {
  const std::size_t m = std::bit_ceil(items.size());
  const Affine identity{std::vector<cplx>(p, cplx{1.0, 0.0}), std::vector<cplx>(p, cplx{})};
  items.resize(m, identity);
  for (std::size_t stride = 1; stride < m; stride *= 2) {
    for (std::size_t k = 0; k < m; k += 2 * stride) {
      compose_into(items[k + stride - 1], items[k + 2 * stride - 1]);
    }
  }
  items[m - 1] = identity;
  for (std::size_t stride = m / 2; stride >= 1; stride /= 2) {
    for (std::size_t k = 0; k < m; k += 2 * stride) {
      Affine left = std::move(items[k + stride - 1]);
      items[k + stride - 1] = items[k + 2 * stride - 1];
      // Right child's prefix: everything before this subtree, then the left block.
      Affine right = std::move(left);
      compose_into(items[k + stride - 1], right);
      items[k + 2 * stride - 1] = std::move(right);
    }
    if (stride == 1) break;
  }
  g_scan_ops.fetch_add(static_cast<std::uint64_t>(2 * m * p), std::memory_order_relaxed);
}

void parallel_scan(const cplx* a, const cplx* b, const cplx* x0, cplx* x, std::size_t n,
                   std::size_t p, int threads) {
  const auto chunks = static_cast<std::size_t>(std::min<std::size_t>(threads, n));
  const auto bounds = [&](std::size_t c) {
    return std::pair{n * c / chunks, n * (c + 1) / chunks};
  };
  std::vector<Affine> agg(chunks, Affine{std::vector<cplx>(p), std::vector<cplx>(p)});

  // Phase 1: local scans from a zero carry; aggregates (prod a, local final x).
  parallel_for(chunks, static_cast<int>(chunks), [&](std::size_t c0, std::size_t c1) {
    for (std::size_t c = c0; c < c1; ++c) {
      const auto [begin, end] = bounds(c);
      sequential_scan(a + begin * p, b + begin * p, nullptr, x + begin * p, end - begin, p);
      auto& prod = agg[c].a;
      std::fill(prod.begin(), prod.end(), cplx{1.0, 0.0});
      for (std::size_t i = begin; i < end; ++i) {
        for (std::size_t j = 0; j < p; ++j) prod[j] *= a[i * p + j];
      }
      std::copy(x + (end - 1) * p, x + end * p, agg[c].b.begin());
    }
  });

  // Phase 2: carries via Blelloch sweeps over the chunk aggregates.
  blelloch_exclusive(agg, p);

  // Phase 3: x_i += (prod_{chunk start..i} a) * carry.
  parallel_for(chunks, static_cast<int>(chunks), [&](std::size_t c0, std::size_t c1) {
    std::vector<cplx> carry(p);
    for (std::size_t c = c0; c < c1; ++c) {
      const auto [begin, end] = bounds(c);
      for (std::size_t j = 0; j < p; ++j) {
        const cplx start = x0 ? x0[j] : cplx{};
        carry[j] = agg[c].a[j] * start + agg[c].b[j];
      }
      for (std::size_t i = begin; i < end; ++i) {
        for (std::size_t j = 0; j < p; ++j) {
          carry[j] *= a[i * p + j];
          x[i * p + j] += carry[j];
        }
      }
      g_scan_ops.fetch_add(static_cast<std::uint64_t>((end - begin) * p),
                           std::memory_order_relaxed);
    }
  });
}

}  // namespace

void linear_scan(const cplx* a, const cplx* b, const cplx* x0, cplx* x, std::size_t n,
                 std::size_t p, ScanMode mode, int threads) {
  if (n == 0 || p == 0) return;
  if (threads <= 0) threads = thread_count();
  if (mode == ScanMode::automatic) {
    mode = n >= kParallelScanThreshold && threads > 1 ? ScanMode::parallel : ScanMode::sequential;
  }
  if (mode == ScanMode::parallel && threads > 1 && n > 1) {
    parallel_scan(a, b, x0, x, n, p, threads);
  } else {
    sequential_scan(a, b, x0, x, n, p);
  }
}

std::uint64_t scan_op_count() noexcept { return g_scan_ops.load(std::memory_order_relaxed); }
void reset_scan_op_count() noexcept { g_scan_ops.store(0, std::memory_order_relaxed); }

void set_default_scan_mode(ScanMode mode) noexcept { g_default_mode.store(mode); }
ScanMode default_scan_mode() noexcept { return g_default_mode.load(); }

}  // namespace s2p2
