#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>

namespace s2p2 {

enum class ScanMode { automatic, sequential, parallel };

/// Sequences at least this long use the parallel kernel in automatic mode.
inline constexpr std::size_t kParallelScanThreshold = 4096;

/// x_i = a_i * x_{i-1} + b_i over rows i = 0..n-1, elementwise across p
/// channels, with x_{-1} = x0 (may be null for zeros). All arrays row-major.
///
/// The parallel kernel splits rows into one chunk per thread, scans chunks
/// locally, combines chunk aggregates with a Blelloch up/down sweep under
/// (a1, b1) o (a2, b2) = (a2 a1, a2 b1 + b2), then fixes up each chunk with
/// its carry. The reduction order depends only on (n, threads).
void linear_scan(const std::complex<double>* a, const std::complex<double>* b,
                 const std::complex<double>* x0, std::complex<double>* x, std::size_t n,
                 std::size_t p, ScanMode mode = ScanMode::automatic, int threads = 0);

/// Elementwise combine operations performed by linear_scan since the last
/// reset (one per multiply-add on a channel).
std::uint64_t scan_op_count() noexcept;
void reset_scan_op_count() noexcept;

/// Mode used by the differentiable scan primitive; automatic by default.
void set_default_scan_mode(ScanMode mode) noexcept;
ScanMode default_scan_mode() noexcept;

}  // namespace s2p2
