#include "s2p2/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <optional>

#include "s2p2/checkpoint.hpp"
#include "s2p2/parallel.hpp"
#include "s2p2/rng.hpp"

namespace s2p2 {

using ad::Tensor;

namespace {

std::vector<std::pair<std::string, double>> parameter_norms(const S2P2Model& model) {
  std::vector<std::pair<std::string, double>> out;
  for (const auto& [name, t] : model.named_parameters()) {
    double s = 0.0;
    for (double v : t->data) s += v * v;
    out.emplace_back(name, std::sqrt(s));
  }
  return out;
}

bool all_finite(const std::vector<Tensor>& grads) {
  for (const auto& g : grads) {
    for (double v : g.data) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

// Distinct Monte-Carlo seeds per epoch, derived from the run seed.
std::uint64_t epoch_seed(std::uint64_t seed, int epoch) {
  Philox rng(seed, 0x5eedULL + static_cast<std::uint64_t>(epoch));
  return rng.next_u64();
}

}  // namespace

void TrainConfig::validate() const {
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw ValidationError("lr must be >= 0");
  if (!(warmup_fraction > 0.0 && warmup_fraction < 1.0)) {
    throw ValidationError("warmup_fraction must be in (0, 1)");
  }
  if (epochs < 1 || batch_size < 1 || mc_points < 1 || eval_mc_points < 1 || patience < 1) {
    throw ValidationError("epochs, batch_size, mc_points, eval_mc_points and patience must be positive");
  }
  if (!(grad_clip_norm > 0.0)) throw ValidationError("grad_clip_norm must be > 0");
  if (threads < 0) throw ValidationError("threads must be >= 0");
}

NumericalError::NumericalError(std::size_t sequence_index,
                               std::vector<std::pair<std::string, double>> norms,
                               const std::string& what)
    : std::runtime_error(what), sequence_index_(sequence_index), norms_(std::move(norms)) {}

double learning_rate(double base, long iteration, long total, long warmup) {
  if (iteration < warmup) {
    return base * static_cast<double>(iteration + 1) / static_cast<double>(warmup);
  }
  const double span = static_cast<double>(std::max(1L, total - 1 - warmup));
  const double progress = std::min(1.0, static_cast<double>(iteration - warmup) / span);
  return base * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

double clip_global_norm(std::vector<Tensor>& grads, double max_norm) {
  double sq = 0.0;
  for (const auto& g : grads) {
    for (double v : g.data) sq += v * v;
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double factor = max_norm / norm;
    for (auto& g : grads) {
      for (double& v : g.data) v *= factor;
    }
  }
  return norm;
}

void adam_step(std::span<Tensor* const> params, const std::vector<Tensor>& grads,
               AdamState& state, double lr) {
  if (params.size() != grads.size()) throw ValidationError("adam_step: params and grads differ");
  if (state.m.empty()) {
    for (const Tensor* p : params) {
      state.m.emplace_back(p->data.size(), 0.0);
      state.v.emplace_back(p->data.size(), 0.0);
    }
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i]->data;
    const auto& g = grads[i].data;
    if (g.size() != p.size()) throw ValidationError("adam_step: gradient shape mismatch");
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = state.beta1 * m[k] + (1.0 - state.beta1) * g[k];
      v[k] = state.beta2 * v[k] + (1.0 - state.beta2) * g[k] * g[k];
      p[k] -= lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + state.eps);
    }
  }
}

BatchGradient batch_gradient(const S2P2Model& model, const Dataset& data,
                             std::span<const std::size_t> indices, int mc_points,
                             std::uint64_t seed, int threads) {
  if (indices.empty()) throw ValidationError("empty batch");
  std::vector<double> losses(indices.size());
  std::vector<std::vector<Tensor>> grads(indices.size());
  parallel_for(indices.size(), threads > 0 ? threads : thread_count(),
               [&](std::size_t begin, std::size_t end) {
                 for (std::size_t b = begin; b < end; ++b) {
                   const std::size_t idx = indices[b];
                   ad::Tape tape;
                   const ModelVars vars = bind(model, tape, true);
                   Philox rng(seed, idx);
                   try {
                     const ad::Var total =
                         log_likelihood_graph(vars, data.sequences.at(idx), mc_points, rng, tape);
                     losses[b] = -total.value().item();
                     tape.backward(ad::scale(total, -1.0));
                   } catch (const std::domain_error& e) {
                     throw NumericalError(idx, parameter_norms(model),
                                          std::string(e.what()) + " on sequence " +
                                              std::to_string(idx));
                   }
                   grads[b] = gradients(vars, tape);
                   if (!std::isfinite(losses[b]) || !all_finite(grads[b])) {
                     throw NumericalError(idx, parameter_norms(model),
                                          "non-finite loss or gradient on sequence " +
                                              std::to_string(idx));
                   }
                 }
               });
  BatchGradient out;
  const double inv = 1.0 / static_cast<double>(indices.size());
  out.grads = std::move(grads[0]);
  out.loss = losses[0];
  for (std::size_t b = 1; b < indices.size(); ++b) {
    out.loss += losses[b];
    for (std::size_t t = 0; t < out.grads.size(); ++t) {
      auto& acc = out.grads[t].data;
      const auto& g = grads[b][t].data;
      for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += g[k];
    }
  }
  out.loss *= inv;
  for (auto& g : out.grads) {
    for (double& v : g.data) v *= inv;
  }
  return out;
}

double mean_nll(const S2P2Model& model, const Dataset& data, int mc_points, std::uint64_t seed,
                int threads) {
  if (data.sequences.empty()) return 0.0;
  std::vector<double> nll(data.sequences.size());
  parallel_for(nll.size(), threads > 0 ? threads : thread_count(),
               [&](std::size_t begin, std::size_t end) {
                 for (std::size_t i = begin; i < end; ++i) {
                   nll[i] = -log_likelihood(model, data.sequences[i], mc_points, seed, i).total;
                 }
               });
  return std::accumulate(nll.begin(), nll.end(), 0.0) / static_cast<double>(nll.size());
}

TrainReport train(S2P2Model& model, const Dataset& train_set, const Dataset& valid_set,
                  const TrainConfig& cfg, const std::filesystem::path& checkpoint,
                  const std::function<void(const EpochRecord&)>& on_epoch) {
  cfg.validate();
  model.validate();
  train_set.validate();
  if (train_set.sequences.empty()) throw ValidationError("training set is empty");
  if (train_set.num_marks > model.config.num_marks ||
      (!valid_set.sequences.empty() && valid_set.num_marks > model.config.num_marks)) {
    throw ValidationError("dataset has more marks than the model");
  }
  const std::size_t n = train_set.sequences.size();
  const auto batch = static_cast<std::size_t>(cfg.batch_size);
  const long steps_per_epoch = static_cast<long>((n + batch - 1) / batch);
  const long total_steps = steps_per_epoch * cfg.epochs;
  const long warmup =
      std::max(1L, std::lround(cfg.warmup_fraction * static_cast<double>(total_steps)));
  const std::uint64_t eval_seed = cfg.seed ^ 0xe7a1e7a1ULL;

  auto params = model.named_parameters();
  std::vector<Tensor*> slots;
  for (auto& [name, t] : params) slots.push_back(t);

  AdamState adam;
  TrainReport report;
  std::optional<S2P2Model> best;
  int since_best = 0;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  long step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    Philox shuffle_rng(cfg.seed, 0x5407ULL + static_cast<std::uint64_t>(epoch));
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    const std::uint64_t mc_seed = epoch_seed(cfg.seed, epoch);
    double loss_sum = 0.0;
    double lr = 0.0;
    for (std::size_t begin = 0; begin < n; begin += batch, ++step) {
      const std::size_t count = std::min(batch, n - begin);
      auto result = batch_gradient(model, train_set, std::span(order).subspan(begin, count),
                                   cfg.mc_points, mc_seed, cfg.threads);
      loss_sum += result.loss * static_cast<double>(count);
      clip_global_norm(result.grads, cfg.grad_clip_norm);
      lr = learning_rate(cfg.lr, step, total_steps, warmup);
      adam_step(slots, result.grads, adam, lr);
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_nll = loss_sum / static_cast<double>(n);
    rec.lr = lr;
    const Dataset& selection = valid_set.sequences.empty() ? train_set : valid_set;
    try {
      rec.valid_nll = mean_nll(model, selection, cfg.eval_mc_points, eval_seed, cfg.threads);
    } catch (const std::domain_error& e) {
      throw NumericalError(0, parameter_norms(model), std::string("validation: ") + e.what());
    }
    if (!std::isfinite(rec.valid_nll)) {
      throw NumericalError(0, parameter_norms(model), "non-finite validation NLL");
    }
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    report.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);

    if (!best || rec.valid_nll < report.best_valid_nll) {
      best = model;
      report.best_epoch = epoch;
      report.best_valid_nll = rec.valid_nll;
      since_best = 0;
      if (!checkpoint.empty()) {
        save_checkpoint(model, checkpoint);
        report.best_checkpoint = checkpoint;
      }
    } else if (++since_best >= cfg.patience) {
      report.stopped_early = true;
      break;
    }
  }
  model = std::move(*best);
  return report;
}

void write_train_log(const TrainReport& report, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "epoch,train_nll,valid_nll,lr,seconds\n";
  out.precision(10);
  for (const auto& r : report.epochs) {
    out << r.epoch << ',' << r.train_nll << ',' << r.valid_nll << ',' << r.lr << ',' << r.seconds
        << '\n';
  }
}

}  // namespace s2p2
