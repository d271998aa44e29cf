#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "s2p2/autodiff.hpp"
#include "s2p2/events.hpp"
#include "s2p2/intensity.hpp"
#include "s2p2/llh.hpp"

namespace s2p2 {

struct S2P2Config {
  int num_marks = 1;
  int hidden = 32;
  int state = 32;
  int layers = 2;
  int mc_points = 10;
  bool input_dependent = true;
  ZohMode zoh_mode = ZohMode::backward;
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const S2P2Config&) const = default;
};

/// Mark embeddings, L LLH layers with post-norm residual blocks, and the
/// scaled-softplus intensity head lambda = s * softplus((W u + b) / s).
struct S2P2Model {
  S2P2Config config;
  ad::Tensor mark_embeddings;  // K x H
  std::vector<LLHLayerParams> layers;
  std::vector<ad::Tensor> norm_gamma;  // per layer, 1 x H
  std::vector<ad::Tensor> norm_beta;   // per layer, 1 x H
  ad::Tensor head_W;                   // K x H
  ad::Tensor head_b;                   // 1 x K
  ad::Tensor head_log_s;               // 1 x K

  S2P2Model() = default;
  /// Random initialization from config.seed.
  explicit S2P2Model(const S2P2Config& cfg);

  std::vector<std::pair<std::string, ad::Tensor*>> named_parameters();
  std::vector<std::pair<std::string, const ad::Tensor*>> named_parameters() const;
  std::size_t num_parameters() const;
  /// Shapes match the config and all values are finite.
  void validate() const;
};

/// Model parameters bound on a tape.
struct ModelVars {
  ad::Var mark_embeddings;
  std::vector<LLHLayerVars> layers;
  std::vector<ad::Var> norm_gamma;
  std::vector<ad::Var> norm_beta;
  ad::Var head_W, head_b, head_log_s;
  ad::Var head_s, head_inv_s;
};

ModelVars bind(const S2P2Model& model, ad::Tape& tape, bool trainable = true);
/// Adjoints in the order of S2P2Model::named_parameters.
std::vector<ad::Tensor> gradients(const ModelVars& vars, const ad::Tape& tape);

/// Differentiable conditioning on one sequence (the per-layer right limits).
struct GraphConditioning {
  std::size_t num_events = 0;
  std::vector<ad::Var> x_right;   // per layer, (N + 1) x P, row 0 = x0
  std::vector<ad::Var> scale;     // per layer, (N + 1) x P, 1 x P, or undefined
  std::vector<ad::Var> u_right;   // per layer input at right limits (forward ZOH only)
  ad::Var u_top;                  // N x H stream entering the head at left limits
};

GraphConditioning condition_graph(const ModelVars& vars, const EventSequence& seq,
                                  ad::Tape& tape);
/// Head intensities, rows x K.
ad::Var head(const ModelVars& vars, const ad::Var& u);
/// Left-limit intensities (Q x K) at t_{origin} + delta for each query.
ad::Var query_graph(const ModelVars& vars, const GraphConditioning& cond,
                    std::span<const std::size_t> origins, std::span<const double> deltas,
                    ad::Tape& tape);

/// Monte-Carlo log-likelihood: M uniform draws in every inter-event interval
/// and in the terminal interval (t_N, T]. Returns the total as a 1 x 1 Var and
/// fills `parts` when given.
ad::Var log_likelihood_graph(const ModelVars& vars, const EventSequence& seq, int mc_points,
                             Philox& rng, ad::Tape& tape, LogLikelihood* parts = nullptr);

/// Value-level conditioned state, usable as a ConditionedIntensity.
class ConditionedState final : public ConditionedIntensity {
 public:
  ConditionedState(const S2P2Model& model, EventSequence seq);

  std::size_t num_marks() const override;
  std::size_t num_events() const override { return seq_.size(); }
  double origin_time(std::size_t origin) const override;
  IntensityMatrix evolve(std::size_t origin, std::span<const double> deltas) const override;

  const EventSequence& sequence() const noexcept { return seq_; }
  /// Right-limit states of layer `l`, (N + 1) x P with row 0 = x0.
  const ad::Tensor& right_limits(std::size_t l) const;
  /// Head input at the event left limits, N x H.
  const ad::Tensor& top_inputs() const { return graph_.u_top.value(); }

 private:
  EventSequence seq_;
  std::unique_ptr<ad::Tape> tape_;
  ModelVars vars_;
  GraphConditioning graph_;
};

std::unique_ptr<ConditionedState> condition(const S2P2Model& model, const EventSequence& seq);
/// Left-limit intensity at t (events at exactly t are not yet seen).
std::vector<double> intensity_at(const ConditionedState& cond, double t);
LogLikelihood log_likelihood(const S2P2Model& model, const EventSequence& seq, int mc_points,
                             std::uint64_t seed, std::uint64_t stream = 0);
/// |grid| x K left-limit intensities; throws ValidationError for an unsorted grid.
IntensityMatrix intensity_trace(const S2P2Model& model, const EventSequence& seq,
                                std::span<const double> grid);

/// IntensityModel view of a trained model; likelihoods use `mc_points`
/// draws per interval from Philox(seed, stream).
class S2P2Intensity final : public IntensityModel {
 public:
  S2P2Intensity(const S2P2Model& model, int mc_points, std::uint64_t seed)
      : model_(model), mc_points_(mc_points), seed_(seed) {}
  std::size_t num_marks() const override;
  std::unique_ptr<ConditionedIntensity> condition(const EventSequence& seq) const override;
  LogLikelihood log_likelihood(const EventSequence& seq, std::uint64_t stream = 0) const override;

 private:
  const S2P2Model& model_;
  int mc_points_;
  std::uint64_t seed_;
};

}  // namespace s2p2
