#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "s2p2/autodiff.hpp"
#include "s2p2/events.hpp"
#include "s2p2/model.hpp"

namespace s2p2 {

struct TrainConfig {
  double lr = 0.01;
  double warmup_fraction = 0.01;
  int epochs = 300;
  int batch_size = 32;
  double grad_clip_norm = 1.0;
  int mc_points = 10;
  int patience = 20;
  std::uint64_t seed = 0;
  /// Monte-Carlo points for the validation likelihood (fixed seed).
  int eval_mc_points = 10;
  /// Worker threads for per-sequence gradients; 0 uses thread_count().
  int threads = 0;

  void validate() const;
};

/// Raised when the loss or a gradient becomes non-finite.
class NumericalError : public std::runtime_error {
 public:
  NumericalError(std::size_t sequence_index, std::vector<std::pair<std::string, double>> norms,
                 const std::string& what);
  std::size_t sequence_index() const noexcept { return sequence_index_; }
  const std::vector<std::pair<std::string, double>>& parameter_norms() const noexcept {
    return norms_;
  }

 private:
  std::size_t sequence_index_;
  std::vector<std::pair<std::string, double>> norms_;
};

struct EpochRecord {
  int epoch = 0;
  double train_nll = 0.0;  // mean per-sequence NLL over the epoch's batches
  double valid_nll = 0.0;  // mean per-sequence NLL on the validation set
  double lr = 0.0;         // rate used by the epoch's last step
  double seconds = 0.0;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  int best_epoch = -1;
  double best_valid_nll = 0.0;
  std::filesystem::path best_checkpoint;
  bool stopped_early = false;
};

/// Linear warm-up over `warmup` iterations to `base`, then cosine decay to 0
/// at iteration total - 1.
double learning_rate(double base, long iteration, long total, long warmup);

/// Scales all gradients so their joint L2 norm is at most max_norm. Returns
/// the norm before clipping.
double clip_global_norm(std::vector<ad::Tensor>& grads, double max_norm);

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long step = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
};

/// One bias-corrected Adam update. Complex tensors are updated as pairs of
/// independent real coordinates.
void adam_step(std::span<ad::Tensor* const> params, const std::vector<ad::Tensor>& grads,
               AdamState& state, double lr);

struct BatchGradient {
  double loss = 0.0;  // mean per-sequence negative log-likelihood
  std::vector<ad::Tensor> grads;
};

/// Gradient of the mean NLL over `indices`; sequence i draws Monte-Carlo
/// points from Philox(seed, i). Per-sequence work runs in parallel and is
/// summed in index order.
BatchGradient batch_gradient(const S2P2Model& model, const Dataset& data,
                             std::span<const std::size_t> indices, int mc_points,
                             std::uint64_t seed, int threads = 0);

/// Mean per-sequence NLL (no gradient).
double mean_nll(const S2P2Model& model, const Dataset& data, int mc_points, std::uint64_t seed,
                int threads = 0);

/// Trains in place and leaves `model` at the best validation epoch. When
/// `checkpoint` is non-empty the best model is saved there after every
/// improvement.
TrainReport train(S2P2Model& model, const Dataset& train_set, const Dataset& valid_set,
                  const TrainConfig& cfg, const std::filesystem::path& checkpoint = {},
                  const std::function<void(const EpochRecord&)>& on_epoch = {});

/// CSV with header epoch,train_nll,valid_nll,lr,seconds.
void write_train_log(const TrainReport& report, const std::filesystem::path& path);

}  // namespace s2p2
