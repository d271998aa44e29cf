#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "s2p2/model.hpp"

namespace s2p2 {

enum class BenchMode { condition, loglik };

BenchMode parse_bench_mode(std::string_view s);
std::string to_string(BenchMode mode);

struct BenchOptions {
  std::vector<std::size_t> lengths;
  BenchMode mode = BenchMode::condition;
  int repeats = 3;
  /// Worker count for the parallel scan; 0 uses thread_count().
  int threads = 0;
  S2P2Config model;
  int mc_points = 10;
  std::uint64_t seed = 0;
  /// Largest allowed |parallel - sequential| over all right-limit states.
  double tolerance = 1e-10;
};

struct BenchRow {
  std::size_t length = 0;
  int threads = 1;
  double seconds_parallel = 0.0;    // median model wall time, parallel scan
  double seconds_sequential = 0.0;  // median model wall time, sequential scan
  double scan_parallel = 0.0;       // median kernel time on the layer-1 recurrence
  double scan_sequential = 0.0;
  std::uint64_t scan_ops = 0;       // combine operations in one parallel-mode run
  double max_abs_diff = 0.0;        // parallel vs sequential states
};

/// Powers of two from lo to hi inclusive.
std::vector<std::size_t> geometric_lengths(std::size_t lo, std::size_t hi);

/// For each length: simulates a rate-1 sequence, checks that conditioning
/// with the parallel scan reproduces the sequential states (throws
/// std::runtime_error beyond `tolerance`), then times both modes with the
/// same call and the bare scan kernel on the first layer's recurrence.
std::vector<BenchRow> run_bench(const BenchOptions& options,
                                const std::function<void(const BenchRow&)>& on_row = {});

/// CSV: length,threads,seconds_parallel,seconds_sequential,scan_parallel,
/// scan_sequential,scan_ops,max_abs_diff.
void write_bench_csv(const std::vector<BenchRow>& rows, const std::filesystem::path& path);

}  // namespace s2p2
