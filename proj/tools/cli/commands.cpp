#include "commands.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "config.hpp"
#include "s2p2/bench.hpp"
#include "s2p2/checkpoint.hpp"
#include "s2p2/eval.hpp"
#include "s2p2/events.hpp"
#include "s2p2/model.hpp"
#include "s2p2/parallel.hpp"
#include "s2p2/simulate.hpp"
#include "s2p2/train.hpp"

#ifndef S2P2_VERSION
#define S2P2_VERSION "unknown"
#endif
#ifndef S2P2_GIT_REVISION
#define S2P2_GIT_REVISION "unknown"
#endif

namespace s2p2::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::vector<std::string> kSubcommands = {"simulate", "train", "eval", "trace", "bench"};

struct Global {
  int threads = 0;
  std::string out = "run";
};

struct SimulateOptions {
  std::string process;
  int k = 1;
  std::string nu = "0.5";
  std::string alpha = "0.5";
  std::string beta = "1.0";
  double a = 1.0;
  double b = 0.5;
  SquareWaveParams square;
  LongRangeParams long_range;
  std::uint64_t param_seed = 0;
  int n = 100;
  double t_end = 0.0;
  std::uint64_t seed = 0;
};

struct TrainOptions {
  std::string train_path;
  std::string valid_path;
  S2P2Config model;
  std::string zoh_mode = "backward";
  TrainConfig train;
};

struct EvalCliOptions {
  std::string checkpoint;
  std::string data;
  std::string oracle;
  int mc_points = 10;
  std::uint64_t seed = 0;
  EvalOptions eval;
};

struct TraceOptions {
  std::string checkpoint;
  std::string data;
  int sequence = 0;
  bool empty = false;
  double t_start = NAN;
  double t_end = NAN;
  int grid_points = 1000;
};

struct BenchCliOptions {
  std::string lengths = "8..524288";
  std::string mode = "condition";
  int repeats = 3;
  S2P2Config model;
  int mc_points = 10;
  std::uint64_t seed = 0;
};

std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Every option of the subcommand with its effective value.
json echo_config(const CLI::App& sub) {
  json j = json::object();
  for (const CLI::Option* opt : sub.get_options()) {
    const std::string name = opt->get_single_name();
    if (name == "help") continue;
    if (opt->count() > 0) {
      const auto& r = opt->results();
      j[name] = r.size() == 1 ? json(r.front()) : json(r);
    } else {
      j[name] = opt->get_default_str();
    }
  }
  return j;
}

class Manifest {
 public:
  Manifest(const std::string& subcommand, const std::vector<std::string>& args, const fs::path& dir)
      : dir_(dir), started_(std::chrono::steady_clock::now()) {
    j_["subcommand"] = subcommand;
    j_["argv"] = args;
    j_["version"] = S2P2_VERSION;
    j_["git_revision"] = S2P2_GIT_REVISION;
    j_["started_at"] = utc_now();
    j_["threads"] = thread_count();
    j_["inputs"] = json::array();
    j_["outputs"] = json::array();
    j_["seeds"] = json::object();
  }
  json& operator[](const char* key) { return j_[key]; }
  void input(const fs::path& p) { j_["inputs"].push_back(p.string()); }
  void output(const fs::path& p) { j_["outputs"].push_back(p.string()); }
  void finish(const std::string& status) {
    j_["status"] = status;
    j_["wall_time_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started_).count();
    write_json_atomic(j_, dir_ / "manifest.json");
  }

 private:
  json j_;
  fs::path dir_;
  std::chrono::steady_clock::time_point started_;
};

ExpHawkesParams hawkes_from(const SimulateOptions& o) {
  const auto k = static_cast<std::size_t>(o.k);
  const auto nu = parse_list(o.nu);
  const auto alpha = parse_list(o.alpha);
  const auto beta = parse_list(o.beta);
  auto expand = [k](const std::vector<double>& v, std::size_t want, const char* name) {
    if (v.size() == 1) return std::vector<double>(want, v[0]);
    if (v.size() != want) {
      throw ValidationError(std::string(name) + " needs 1 or " + std::to_string(want) + " values");
    }
    return v;
  };
  const auto nu_k = expand(nu, k, "nu");
  const auto alpha_kk = expand(alpha, k * k, "alpha");
  const auto beta_kk = expand(beta, k * k, "beta");
  ExpHawkesParams p;
  p.nu = nu_k;
  p.alpha.assign(k, std::vector<double>(k));
  p.beta.assign(k, std::vector<double>(k));
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = 0; b < k; ++b) {
      p.alpha[a][b] = alpha_kk[a * k + b];
      p.beta[a][b] = beta_kk[a * k + b];
    }
  }
  p.validate();
  return p;
}

json to_json(const ExpHawkesParams& p) {
  return json{{"nu", p.nu}, {"alpha", p.alpha}, {"beta", p.beta}};
}

int cmd_simulate(const SimulateOptions& o, const fs::path& dir, Manifest& manifest) {
  if (o.n < 0) throw ValidationError("--n must be >= 0");
  Dataset data;
  data.name = o.process;
  std::function<EventSequence(std::size_t)> draw;
  std::unique_ptr<IntensityModel> oracle;
  json params;
  double t_end = o.t_end;
  if (o.process == "hawkes" || o.process == "random-hawkes-k3") {
    ExpHawkesParams p;
    if (o.process == "hawkes") {
      if (o.k < 1) throw ValidationError("--k must be >= 1");
      p = hawkes_from(o);
      if (t_end <= 0.0) t_end = 100.0;
    } else {
      p = random_hawkes_params(3, o.param_seed);
      // These draws are usually supercritical; keep the default window short.
      if (t_end <= 0.0) t_end = 4.0;
      manifest["seeds"]["param_seed"] = o.param_seed;
    }
    data.num_marks = static_cast<int>(p.num_marks());
    params = to_json(p);
    params["branching_ratio"] = p.branching_ratio();
    oracle = make_hawkes_oracle(p);
    draw = [p, t_end, seed = o.seed](std::size_t i) { return simulate_hawkes(p, t_end, seed, i); };
  } else if (o.process == "self-correcting") {
    const SelfCorrectingParams p{o.a, o.b};
    p.validate();
    if (t_end <= 0.0) t_end = 20.0;
    data.num_marks = 1;
    params = {{"a", p.a}, {"b", p.b}};
    oracle = make_self_correcting_oracle(p);
    draw = [p, t_end, seed = o.seed](std::size_t i) {
      return simulate_self_correcting(p, t_end, seed, i);
    };
  } else if (o.process == "square-wave") {
    const SquareWaveParams p = o.square;
    p.validate();
    if (t_end <= 0.0) t_end = 10.0;
    data.num_marks = 1;
    params = {{"low", p.low},         {"high", p.high},          {"period", p.period},
              {"duty", p.duty},       {"tail_rate", p.tail_rate}, {"t_tail", p.t_tail}};
    oracle = make_square_wave_oracle(p);
    draw = [p, t_end, seed = o.seed](std::size_t i) { return simulate_square_wave(p, t_end, seed, i); };
  } else if (o.process == "long-range") {
    LongRangeParams p = o.long_range;
    if (t_end > 0.0) p.t_end = t_end;
    p.validate();
    t_end = p.t_end;
    data.num_marks = 3;
    params = {{"distractor_rate", p.distractor_rate}, {"trigger_rate", p.trigger_rate},
              {"delay_mean", p.delay_mean},           {"delay_var", p.delay_var},
              {"t_start", p.t_start},                 {"t_end", p.t_end}};
    oracle = make_long_range_oracle(p);
    draw = [p, seed = o.seed](std::size_t i) { return simulate_long_range(p, seed, i); };
  } else {
    throw ValidationError("unknown process '" + o.process + "'");
  }
  manifest["seeds"]["seed"] = o.seed;
  manifest["process_params"] = params;
  manifest["t_end"] = t_end;

  data.sequences.resize(static_cast<std::size_t>(o.n));
  parallel_for(data.sequences.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) data.sequences[i] = draw(i);
  });
  const fs::path events = dir / "events.jsonl";
  save_jsonl(data, events);
  manifest.output(events);

  const fs::path oracle_csv = dir / "oracle.csv";
  std::ofstream out(oracle_csv);
  if (!out) throw std::runtime_error("cannot write " + oracle_csv.string());
  out << "sequence,events,total_ll,time_ll,mark_ll,integral\n";
  out.precision(17);
  for (std::size_t i = 0; i < data.sequences.size(); ++i) {
    const auto ll = oracle->log_likelihood(data.sequences[i], i);
    out << i << ',' << ll.events << ',' << ll.total << ',' << ll.time_ll << ',' << ll.mark_ll << ','
        << ll.integral << '\n';
  }
  manifest.output(oracle_csv);
  std::cout << "simulated " << data.sequences.size() << " sequences, " << data.num_events()
            << " events -> " << events.string() << '\n';
  return kExitOk;
}

void print_norms(const NumericalError& e) {
  std::cerr << "numerical error: " << e.what() << "\n  sequence index: " << e.sequence_index()
            << "\n  parameter norms:\n";
  for (const auto& [name, norm] : e.parameter_norms()) {
    std::cerr << "    " << name << ' ' << norm << '\n';
  }
}

int cmd_train(TrainOptions o, const fs::path& dir, Manifest& manifest) {
  const Dataset train_set = load_jsonl(o.train_path);
  manifest.input(o.train_path);
  Dataset valid_set;
  if (!o.valid_path.empty()) {
    valid_set = load_jsonl(o.valid_path);
    manifest.input(o.valid_path);
    if (valid_set.num_marks != train_set.num_marks) {
      throw ValidationError("training and validation sets disagree on the number of marks");
    }
  }
  o.model.num_marks = train_set.num_marks;
  o.model.zoh_mode = parse_zoh_mode(o.zoh_mode);
  o.model.mc_points = o.train.mc_points;
  o.model.validate();
  o.train.validate();
  manifest["seeds"]["model_seed"] = o.model.seed;
  manifest["seeds"]["seed"] = o.train.seed;
  manifest["model"] = config_to_json(o.model);

  S2P2Model model(o.model);
  const fs::path checkpoint = dir / "checkpoint.json";
  const fs::path log = dir / "train_log.csv";
  TrainReport partial;
  try {
    const auto report = train(model, train_set, valid_set, o.train, checkpoint, [&](const EpochRecord& r) {
      partial.epochs.push_back(r);
      write_train_log(partial, log);
      std::cout << "epoch " << r.epoch << " train_nll " << r.train_nll << " valid_nll " << r.valid_nll
                << " lr " << r.lr << " (" << r.seconds << "s)" << std::endl;
    });
    write_train_log(report, log);
    manifest["best_epoch"] = report.best_epoch;
    manifest["best_valid_nll"] = report.best_valid_nll;
    manifest["stopped_early"] = report.stopped_early;
  } catch (const NumericalError& e) {
    print_norms(e);
    json norms = json::object();
    for (const auto& [name, norm] : e.parameter_norms()) norms[name] = norm;
    manifest["error"] = {{"message", e.what()},
                         {"sequence_index", e.sequence_index()},
                         {"parameter_norms", norms}};
    if (fs::exists(log)) manifest.output(log);
    if (fs::exists(checkpoint)) manifest.output(checkpoint);
    manifest.finish("numerical_error");
    return kExitNumerical;
  }
  manifest.output(checkpoint);
  manifest.output(log);
  return kExitOk;
}

std::vector<double> read_oracle_csv(const fs::path& path, std::size_t expected) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read oracle file " + path.string());
  std::string line;
  std::getline(in, line);
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  const auto col = std::find(header.begin(), header.end(), "total_ll");
  if (col == header.end()) throw ValidationError("oracle file has no total_ll column");
  const auto index = static_cast<std::size_t>(col - header.begin());
  std::vector<double> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    for (std::size_t c = 0; c <= index; ++c) std::getline(ss, cell, ',');
    out.push_back(std::stod(cell));
  }
  if (out.size() != expected) {
    throw ValidationError("oracle file has " + std::to_string(out.size()) + " rows, dataset has " +
                          std::to_string(expected) + " sequences");
  }
  return out;
}

int cmd_eval(const EvalCliOptions& o, const fs::path& dir, Manifest& manifest) {
  const S2P2Model model = load_checkpoint(o.checkpoint);
  manifest.input(o.checkpoint);
  const Dataset data = load_jsonl(o.data);
  manifest.input(o.data);
  if (data.num_marks > model.config.num_marks) {
    throw ValidationError("dataset has more marks than the model");
  }
  std::vector<double> oracle_ll;
  if (!o.oracle.empty()) {
    oracle_ll = read_oracle_csv(o.oracle, data.sequences.size());
    manifest.input(o.oracle);
  }
  if (o.mc_points < 1) throw ValidationError("--mc-points must be >= 1");
  manifest["seeds"]["seed"] = o.seed;
  const S2P2Intensity intensity(model, o.mc_points, o.seed);
  const auto report = evaluate(intensity, data, o.eval, oracle_ll);
  if (report.truncated_survival > 0) {
    std::cerr << "note: survival stayed above the cutoff for " << report.truncated_survival
              << " events\n";
  }
  const fs::path report_path = dir / "report.json";
  write_json_atomic(to_json(report), report_path);
  write_curve_csv(report.pce_curve, dir / "pce_curve.csv");
  write_curve_csv(report.ece_curve, dir / "ece_curve.csv");
  for (const char* f : {"report.json", "pce_curve.csv", "ece_curve.csv"}) manifest.output(dir / f);
  std::cout << to_json(report).dump(2) << '\n';
  return kExitOk;
}

int cmd_trace(const TraceOptions& o, const fs::path& dir, Manifest& manifest) {
  const S2P2Model model = load_checkpoint(o.checkpoint);
  manifest.input(o.checkpoint);
  if (o.grid_points < 2) throw ValidationError("--grid-points must be >= 2");
  EventSequence seq;
  if (o.empty) {
    const double start = std::isnan(o.t_start) ? 0.0 : o.t_start;
    if (std::isnan(o.t_end)) throw ValidationError("--empty needs --t-end");
    seq = EventSequence({}, {}, o.t_end, start);
  } else {
    if (o.data.empty()) throw ValidationError("trace needs --data with --sequence, or --empty");
    const Dataset data = load_jsonl(o.data);
    manifest.input(o.data);
    if (o.sequence < 0 || static_cast<std::size_t>(o.sequence) >= data.sequences.size()) {
      throw ValidationError("--sequence out of range");
    }
    seq = data.sequences[static_cast<std::size_t>(o.sequence)];
    if (seq.max_mark() >= model.config.num_marks) throw ValidationError("sequence has marks beyond the model");
  }
  const double a = std::isnan(o.t_start) ? seq.t_start() : o.t_start;
  const double b = std::isnan(o.t_end) ? seq.t_end() : o.t_end;
  if (!(b > a)) throw ValidationError("trace window must satisfy t_start < t_end");
  std::vector<double> grid(static_cast<std::size_t>(o.grid_points));
  for (std::size_t i = 0; i < grid.size(); ++i) {
    grid[i] = a + (b - a) * static_cast<double>(i) / static_cast<double>(grid.size() - 1);
  }
  const auto lam = intensity_trace(model, seq, grid);
  const fs::path path = dir / "trace.csv";
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << 't';
  for (std::size_t k = 0; k < lam.cols; ++k) out << ",lambda_" << k;
  out << ",lambda_total\n";
  out.precision(10);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    out << grid[i];
    for (std::size_t k = 0; k < lam.cols; ++k) out << ',' << lam(i, k);
    out << ',' << lam.row_total(i) << '\n';
  }
  manifest.output(path);
  return kExitOk;
}

int cmd_bench(const BenchCliOptions& o, const fs::path& dir, Manifest& manifest) {
  BenchOptions opt;
  opt.lengths = parse_lengths(o.lengths);
  opt.mode = parse_bench_mode(o.mode);
  opt.repeats = o.repeats;
  opt.model = o.model;
  opt.mc_points = o.mc_points;
  opt.seed = o.seed;
  manifest["seeds"]["seed"] = o.seed;
  manifest["seeds"]["model_seed"] = o.model.seed;
  std::cout << "length,threads,seconds_parallel,seconds_sequential,scan_parallel,scan_sequential,"
               "scan_ops,max_abs_diff\n";
  const auto rows = run_bench(opt, [](const BenchRow& r) {
    std::cout << r.length << ',' << r.threads << ',' << r.seconds_parallel << ','
              << r.seconds_sequential << ',' << r.scan_parallel << ',' << r.scan_sequential << ','
              << r.scan_ops << ',' << r.max_abs_diff << std::endl;
  });
  const fs::path path = dir / "bench.csv";
  write_bench_csv(rows, path);
  manifest.output(path);
  return kExitOk;
}

void add_model_options(CLI::App* sub, S2P2Config& m) {
  sub->add_option("--hidden", m.hidden, "hidden width H");
  sub->add_option("--state", m.state, "state size P");
  sub->add_option("--layers", m.layers, "number of LLH layers");
  sub->add_option("--input-dependent", m.input_dependent, "input-dependent dynamics (true/false)");
  sub->add_option("--model-seed", m.seed, "initialization seed");
}

}  // namespace

int run(const std::vector<std::string>& raw_args) {
  std::vector<std::string> args;
  try {
    args = expand_config(raw_args, kSubcommands);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  }

  CLI::App app{"s2p2: state-space point process toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  app.option_defaults()->always_capture_default()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  Global g;
  app.add_option("--threads", g.threads, "worker threads (default: S2P2_THREADS or all cores)");
  app.add_option("--out", g.out, "run directory for outputs and manifest.json");

  SimulateOptions sim;
  auto* s = app.add_subcommand("simulate", "simulate a dataset from a known process");
  s->add_option("--process", sim.process, "hawkes|self-correcting|square-wave|long-range|random-hawkes-k3")
      ->required();
  s->add_option("--k", sim.k, "hawkes: number of marks");
  s->add_option("--nu", sim.nu, "hawkes: background rates (1 or K values)");
  s->add_option("--alpha", sim.alpha, "hawkes: excitation, row-major (1 or K*K values)");
  s->add_option("--beta", sim.beta, "hawkes: decay, row-major (1 or K*K values)");
  s->add_option("--a", sim.a, "self-correcting: growth rate");
  s->add_option("--b", sim.b, "self-correcting: drop per event");
  s->add_option("--low", sim.square.low, "square-wave: low rate");
  s->add_option("--high", sim.square.high, "square-wave: high rate");
  s->add_option("--period", sim.square.period, "square-wave: period");
  s->add_option("--duty", sim.square.duty, "square-wave: fraction of the period at the high rate");
  s->add_option("--tail-rate", sim.square.tail_rate, "square-wave: rate after t-tail");
  s->add_option("--t-tail", sim.square.t_tail, "square-wave: start of the constant tail");
  s->add_option("--distractor-rate", sim.long_range.distractor_rate, "long-range: mark 0 rate");
  s->add_option("--trigger-rate", sim.long_range.trigger_rate, "long-range: mark 1 rate");
  s->add_option("--delay-mean", sim.long_range.delay_mean, "long-range: trigger-to-target mean delay");
  s->add_option("--delay-var", sim.long_range.delay_var, "long-range: delay variance");
  s->add_option("--param-seed", sim.param_seed, "random-hawkes-k3: parameter draw seed");
  s->add_option("--n", sim.n, "number of sequences");
  s->add_option("--T", sim.t_end, "window end (0: process default)");
  s->add_option("--seed", sim.seed, "simulation seed");

  TrainOptions tr;
  auto* t = app.add_subcommand("train", "train an S2P2 model");
  t->add_option("--train", tr.train_path, "training JSONL")->required()->check(CLI::ExistingFile);
  t->add_option("--valid", tr.valid_path, "validation JSONL (default: training set)")
      ->check(CLI::ExistingFile);
  add_model_options(t, tr.model);
  t->add_option("--zoh-mode", tr.zoh_mode, "forward|backward");
  t->add_option("--lr", tr.train.lr, "peak learning rate");
  t->add_option("--warmup-fraction", tr.train.warmup_fraction, "fraction of steps spent warming up");
  t->add_option("--epochs", tr.train.epochs, "maximum epochs");
  t->add_option("--batch-size", tr.train.batch_size, "sequences per step");
  t->add_option("--grad-clip", tr.train.grad_clip_norm, "global gradient norm bound");
  t->add_option("--mc-points", tr.train.mc_points, "Monte-Carlo points per interval");
  t->add_option("--eval-mc-points", tr.train.eval_mc_points, "Monte-Carlo points for validation");
  t->add_option("--patience", tr.train.patience, "epochs without improvement before stopping");
  t->add_option("--seed", tr.train.seed, "shuffle and Monte-Carlo seed");

  EvalCliOptions ev;
  auto* e = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
  e->add_option("--checkpoint", ev.checkpoint, "checkpoint.json")->required()->check(CLI::ExistingFile);
  e->add_option("--data", ev.data, "dataset JSONL")->required()->check(CLI::ExistingFile);
  e->add_option("--oracle", ev.oracle, "oracle.csv for the likelihood ratio")->check(CLI::ExistingFile);
  e->add_option("--mc-points", ev.mc_points, "Monte-Carlo points per interval");
  e->add_option("--seed", ev.seed, "Monte-Carlo seed");
  e->add_option("--bins", ev.eval.bins, "calibration bins");
  e->add_option("--top-n", ev.eval.top_n, "n for top-n mark accuracy");
  e->add_option("--horizon", ev.eval.horizon, "survival horizon (0: 20 x mean inter-arrival)");
  e->add_option("--pce-points", ev.eval.pce_points, "trapezoid points per interval for PCE");

  TraceOptions tc;
  auto* c = app.add_subcommand("trace", "intensities of a checkpoint on a time grid");
  c->add_option("--checkpoint", tc.checkpoint, "checkpoint.json")->required()->check(CLI::ExistingFile);
  c->add_option("--data", tc.data, "dataset JSONL")->check(CLI::ExistingFile);
  c->add_option("--sequence", tc.sequence, "sequence index in --data");
  c->add_flag("--empty", tc.empty, "condition on an empty history");
  c->add_option("--t-start", tc.t_start, "grid start (default: window start)");
  c->add_option("--t-end", tc.t_end, "grid end (default: window end)");
  c->add_option("--grid-points", tc.grid_points, "equidistant grid points");

  BenchCliOptions bc;
  bc.model.hidden = 8;
  bc.model.state = 8;
  bc.model.layers = 1;
  auto* b = app.add_subcommand("bench", "scan scaling benchmark");
  b->add_option("--lengths", bc.lengths, "lo..hi (powers of two) or a comma list");
  b->add_option("--mode", bc.mode, "condition|loglik");
  b->add_option("--repeats", bc.repeats, "timed repeats per length (median reported)");
  b->add_option("--k", bc.model.num_marks, "number of marks");
  add_model_options(b, bc.model);
  b->add_option("--mc-points", bc.mc_points, "Monte-Carlo points (loglik mode)");
  b->add_option("--seed", bc.seed, "sequence seed");

  std::vector<std::string> reversed(args.rbegin(), args.rend() - 1);
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? kExitOk : kExitValidation;
  }

  if (g.threads < 0) {
    std::cerr << "error: --threads must be >= 0\n";
    return kExitValidation;
  }
  if (g.threads > 0) set_thread_count(g.threads);

  CLI::App* sub = app.get_subcommands().front();
  const fs::path dir = g.out;
  try {
    fs::create_directories(dir);
    Manifest manifest(sub->get_name(), args, dir);
    json config = echo_config(*sub);
    config["threads"] = thread_count();
    config["out"] = g.out;
    manifest["config"] = config;
    int code = kExitOk;
    if (sub == s) {
      code = cmd_simulate(sim, dir, manifest);
    } else if (sub == t) {
      code = cmd_train(tr, dir, manifest);
      if (code != kExitOk) return code;
    } else if (sub == e) {
      code = cmd_eval(ev, dir, manifest);
    } else if (sub == c) {
      code = cmd_trace(tc, dir, manifest);
    } else {
      code = cmd_bench(bc, dir, manifest);
    }
    manifest.finish("ok");
    return code;
  } catch (const NumericalError& err) {
    print_norms(err);
    return kExitNumerical;
  } catch (const ValidationError& err) {
    std::cerr << "validation error: " << err.what() << '\n';
    return kExitValidation;
  } catch (const ParseError& err) {
    std::cerr << "parse error: " << err.what() << '\n';
    return kExitValidation;
  } catch (const ad::ShapeError& err) {
    std::cerr << "validation error: " << err.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace s2p2::cli
