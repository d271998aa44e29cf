#include "s2p2/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <fstream>
#include <stdexcept>

#include "s2p2/parallel.hpp"
#include "s2p2/rng.hpp"
#include "s2p2/scan.hpp"

namespace s2p2 {

namespace {

using cplx = std::complex<double>;
using clock_type = std::chrono::steady_clock;

class ScanModeScope {
 public:
  explicit ScanModeScope(ScanMode mode) : saved_(default_scan_mode()) { set_default_scan_mode(mode); }
  ~ScanModeScope() { set_default_scan_mode(saved_); }
  ScanModeScope(const ScanModeScope&) = delete;
  ScanModeScope& operator=(const ScanModeScope&) = delete;

 private:
  ScanMode saved_;
};

class ThreadScope {
 public:
  explicit ThreadScope(int threads) : saved_(thread_count()) { set_thread_count(threads); }
  ~ThreadScope() { set_thread_count(saved_); }
  ThreadScope(const ThreadScope&) = delete;
  ThreadScope& operator=(const ThreadScope&) = delete;

 private:
  int saved_;
};

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

template <class F>
double seconds(F&& fn) {
  const auto start = clock_type::now();
  fn();
  return std::chrono::duration<double>(clock_type::now() - start).count();
}

EventSequence poisson_sequence(std::size_t n, int num_marks, std::uint64_t seed) {
  Philox rng(seed, n);
  std::vector<double> times(n);
  std::vector<Mark> marks(n);
  double t = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    t += rng.exponential(1.0);
    times[i] = t;
    marks[i] = static_cast<Mark>(rng.below(static_cast<std::uint64_t>(num_marks)));
  }
  return {std::move(times), std::move(marks), t + 1.0};
}

// One model evaluation in the selected mode; returns layer right limits.
std::vector<ad::Tensor> run_model(const S2P2Model& model, const EventSequence& seq,
                                  const BenchOptions& options) {
  std::vector<ad::Tensor> states;
  if (options.mode == BenchMode::condition) {
    const auto cond = condition(model, seq);
    for (std::size_t l = 0; l < model.layers.size(); ++l) states.push_back(cond->right_limits(l));
  } else {
    const auto ll = log_likelihood(model, seq, options.mc_points, options.seed);
    ad::Tensor t(1, 1);
    t.data[0] = ll.total;
    states.push_back(std::move(t));
  }
  return states;
}

double max_abs_diff(const std::vector<ad::Tensor>& a, const std::vector<ad::Tensor>& b) {
  double d = 0.0;
  for (std::size_t l = 0; l < a.size(); ++l) {
    for (std::size_t k = 0; k < a[l].data.size(); ++k) {
      d = std::max(d, std::abs(a[l].data[k] - b[l].data[k]));
    }
  }
  return d;
}

}  // namespace

BenchMode parse_bench_mode(std::string_view s) {
  if (s == "condition") return BenchMode::condition;
  if (s == "loglik") return BenchMode::loglik;
  throw ValidationError("unknown bench mode '" + std::string(s) + "'");
}

std::string to_string(BenchMode mode) {
  return mode == BenchMode::condition ? "condition" : "loglik";
}

std::vector<std::size_t> geometric_lengths(std::size_t lo, std::size_t hi) {
  if (lo < 1 || hi < lo) throw ValidationError("geometric_lengths: need 1 <= lo <= hi");
  std::vector<std::size_t> out;
  for (std::size_t n = lo; n <= hi; n *= 2) out.push_back(n);
  return out;
}

std::vector<BenchRow> run_bench(const BenchOptions& options,
                                const std::function<void(const BenchRow&)>& on_row) {
  if (options.repeats < 1) throw ValidationError("repeats must be >= 1");
  if (options.lengths.empty()) throw ValidationError("no lengths to benchmark");
  options.model.validate();
  const int threads = options.threads > 0 ? options.threads : thread_count();
  const ThreadScope thread_scope(threads);
  const S2P2Model model(options.model);
  const auto lambda = model.layers.front().lambda();
  const std::size_t p = lambda.size();

  std::vector<BenchRow> rows;
  for (std::size_t n : options.lengths) {
    if (n < 1) throw ValidationError("lengths must be positive");
    const auto seq = poisson_sequence(n, options.model.num_marks, options.seed);
    BenchRow row;
    row.length = n;
    row.threads = threads;

    std::vector<ad::Tensor> sequential, parallel;
    {
      const ScanModeScope scope(ScanMode::sequential);
      sequential = run_model(model, seq, options);
    }
    {
      const ScanModeScope scope(ScanMode::parallel);
      reset_scan_op_count();
      parallel = run_model(model, seq, options);
      row.scan_ops = scan_op_count();
    }
    row.max_abs_diff = max_abs_diff(parallel, sequential);
    if (!(row.max_abs_diff <= options.tolerance)) {
      throw std::runtime_error("parallel scan disagrees with the sequential recurrence at length " +
                               std::to_string(n) + " (max |diff| " +
                               std::to_string(row.max_abs_diff) + ")");
    }

    std::vector<double> par_t, seq_t;
    for (int r = 0; r < options.repeats; ++r) {
      {
        const ScanModeScope scope(ScanMode::parallel);
        par_t.push_back(seconds([&] { run_model(model, seq, options); }));
      }
      {
        const ScanModeScope scope(ScanMode::sequential);
        seq_t.push_back(seconds([&] { run_model(model, seq, options); }));
      }
    }
    row.seconds_parallel = median(par_t);
    row.seconds_sequential = median(seq_t);

    std::vector<cplx> a(n * p), b(n * p), x(n * p);
    Philox rng(options.seed, 0xbe7cULL + n);
    const auto times = seq.times();
    for (std::size_t i = 0; i < n; ++i) {
      const double dt = times[i] - (i ? times[i - 1] : 0.0);
      const auto d = discretize(lambda, dt);
      for (std::size_t j = 0; j < p; ++j) {
        a[i * p + j] = d.lambda_bar[j];
        b[i * p + j] = cplx(rng.normal(), rng.normal());
      }
    }
    std::vector<double> kpar, kseq;
    for (int r = 0; r < options.repeats; ++r) {
      kpar.push_back(seconds([&] {
        linear_scan(a.data(), b.data(), nullptr, x.data(), n, p, ScanMode::parallel, threads);
      }));
      kseq.push_back(seconds([&] {
        linear_scan(a.data(), b.data(), nullptr, x.data(), n, p, ScanMode::sequential, threads);
      }));
    }
    row.scan_parallel = median(kpar);
    row.scan_sequential = median(kseq);
    rows.push_back(row);
    if (on_row) on_row(row);
  }
  return rows;
}

void write_bench_csv(const std::vector<BenchRow>& rows, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "length,threads,seconds_parallel,seconds_sequential,scan_parallel,scan_sequential,"
         "scan_ops,max_abs_diff\n";
  out.precision(10);
  for (const auto& r : rows) {
    out << r.length << ',' << r.threads << ',' << r.seconds_parallel << ',' << r.seconds_sequential
        << ',' << r.scan_parallel << ',' << r.scan_sequential << ',' << r.scan_ops << ','
        << r.max_abs_diff << '\n';
  }
}

}  // namespace s2p2
