#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "s2p2/checkpoint.hpp"
#include "s2p2/simulate.hpp"
#include "s2p2/train.hpp"

using namespace s2p2;
using ad::Tensor;

namespace {

S2P2Config tiny_config() {
  S2P2Config cfg;
  cfg.num_marks = 1;
  cfg.hidden = 4;
  cfg.state = 4;
  cfg.layers = 1;
  cfg.seed = 5;
  return cfg;
}

Dataset poisson_data(std::size_t n, double t_end, std::uint64_t seed) {
  Dataset ds;
  ds.num_marks = 1;
  const auto p = ExpHawkesParams::univariate(1.0, 0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) ds.sequences.push_back(simulate_hawkes(p, t_end, seed, i));
  return ds;
}

}  // namespace

TEST(Schedule, WarmupThenCosine) {
  const long total = 1000, warmup = 10;
  EXPECT_DOUBLE_EQ(learning_rate(0.01, 0, total, warmup), 0.001);
  EXPECT_DOUBLE_EQ(learning_rate(0.01, warmup - 1, total, warmup), 0.01);
  EXPECT_DOUBLE_EQ(learning_rate(0.01, warmup, total, warmup), 0.01);
  EXPECT_LE(learning_rate(0.01, total - 1, total, warmup), 1e-3 * 0.01);
  for (long it = warmup; it + 1 < total; ++it) {
    EXPECT_GE(learning_rate(0.01, it, total, warmup), learning_rate(0.01, it + 1, total, warmup));
  }
}

TEST(Clip, ScalesToMaxNorm) {
  std::vector<Tensor> g{Tensor::from(1, 2, {6.0, 0.0}), Tensor::from(1, 1, {8.0})};
  EXPECT_DOUBLE_EQ(clip_global_norm(g, 1.0), 10.0);
  EXPECT_DOUBLE_EQ(g[0].data[0], 0.6);
  EXPECT_DOUBLE_EQ(g[1].data[0], 0.8);
  std::vector<Tensor> small{Tensor::from(1, 1, {0.5})};
  clip_global_norm(small, 1.0);
  EXPECT_EQ(small[0].data[0], 0.5);
}

TEST(Clip, DirectionInvariantToLossScale) {
  std::vector<Tensor> a{Tensor::from(1, 3, {3.0, -1.0, 2.0})};
  std::vector<Tensor> b{Tensor::from(1, 3, {30.0, -10.0, 20.0})};
  clip_global_norm(a, 1.0);
  clip_global_norm(b, 1.0);
  for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(a[0].data[k], b[0].data[k], 1e-15);
}

TEST(Adam, ZeroGradientIsNoOpAndConstantGradientTakesLrSteps) {
  Tensor p = Tensor::from(1, 2, {1.0, -2.0});
  Tensor* slots[] = {&p};
  AdamState state;
  adam_step(slots, {Tensor(1, 2)}, state, 0.1);
  EXPECT_EQ(p.data, (std::vector<double>{1.0, -2.0}));
  AdamState s2;
  for (int i = 0; i < 200; ++i) {
    const Tensor before = p;
    adam_step(slots, {Tensor::from(1, 2, {3.0, -0.01})}, s2, 0.1);
    EXPECT_NEAR(before.data[0] - p.data[0], 0.1, 1e-6);
    EXPECT_NEAR(before.data[1] - p.data[1], -0.1, 1e-4);
  }
}

TEST(Train, ZeroLearningRateLeavesParametersBitIdentical) {
  S2P2Model model(tiny_config());
  const S2P2Model before = model;
  TrainConfig cfg;
  cfg.lr = 0.0;
  cfg.epochs = 1;
  cfg.batch_size = 4;
  const auto data = poisson_data(8, 5.0, 1);
  train(model, data, {}, cfg);
  const auto a = model.named_parameters();
  const auto b = before.named_parameters();
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].second->data, b[i].second->data);
}

TEST(Train, ReproducibleAcrossRunsAndThreads) {
  const auto data = poisson_data(12, 5.0, 2);
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 5;
  auto run = [&](int threads) {
    S2P2Model model(tiny_config());
    cfg.threads = threads;
    return train(model, data, data, cfg).best_valid_nll;
  };
  const double a = run(1);
  EXPECT_EQ(a, run(1));
  EXPECT_EQ(a, run(3));
}

TEST(Train, OverfitsHomogeneousPoisson) {
  const auto data = poisson_data(50, 10.0, 3);
  double oracle = 0.0;
  const auto p = ExpHawkesParams::univariate(1.0, 0.0, 1.0);
  for (const auto& s : data.sequences) oracle += hawkes_loglik_oracle(p, s);
  const double events = static_cast<double>(data.num_events());

  auto mcfg = tiny_config();
  mcfg.hidden = 2;
  mcfg.state = 2;
  S2P2Model model(mcfg);
  TrainConfig cfg;
  cfg.epochs = 200;
  cfg.batch_size = 10;
  cfg.patience = 200;
  std::vector<double> train_nll;
  const auto dir = std::filesystem::temp_directory_path() / "s2p2_train_test";
  std::filesystem::create_directories(dir);
  const auto report = train(model, data, data, cfg, dir / "best.json",
                            [&](const EpochRecord& r) { train_nll.push_back(r.train_nll); });
  ASSERT_EQ(report.epochs.size(), 200u);
  EXPECT_LT(report.epochs[1].train_nll, report.epochs[0].train_nll);
  const double model_per_event = -report.best_valid_nll * 50.0 / events;
  EXPECT_LT(std::abs(model_per_event - oracle / events), 0.05);
  // The restored model is the best checkpoint.
  const auto saved = load_checkpoint(report.best_checkpoint);
  EXPECT_EQ(saved.head_b.data, model.head_b.data);
  write_train_log(report, dir / "log.csv");
  EXPECT_TRUE(std::filesystem::exists(dir / "log.csv"));
  std::filesystem::remove_all(dir);
}

TEST(Train, BatchGradientIsMeanOfSequenceGradients) {
  S2P2Model model(tiny_config());
  const auto data = poisson_data(3, 4.0, 4);
  const std::vector<std::size_t> all{0, 1, 2};
  const auto joint = batch_gradient(model, data, all, 5, 7, 2);
  double loss = 0.0;
  std::vector<Tensor> acc;
  for (std::size_t i : all) {
    const std::vector<std::size_t> one{i};
    auto g = batch_gradient(model, data, one, 5, 7, 1);
    loss += g.loss / 3.0;
    if (acc.empty()) {
      acc = g.grads;
      for (auto& t : acc) for (double& v : t.data) v /= 3.0;
    } else {
      for (std::size_t t = 0; t < acc.size(); ++t)
        for (std::size_t k = 0; k < acc[t].data.size(); ++k) acc[t].data[k] += g.grads[t].data[k] / 3.0;
    }
  }
  EXPECT_NEAR(joint.loss, loss, 1e-12);
  for (std::size_t t = 0; t < acc.size(); ++t)
    for (std::size_t k = 0; k < acc[t].data.size(); ++k) EXPECT_NEAR(joint.grads[t].data[k], acc[t].data[k], 1e-12);
}

TEST(Train, RejectsInconsistentMarksAndBadConfig) {
  S2P2Model model(tiny_config());
  Dataset data = poisson_data(2, 3.0, 5);
  data.num_marks = 2;
  EXPECT_THROW(train(model, data, {}, TrainConfig{}), ValidationError);
  TrainConfig bad;
  bad.warmup_fraction = 1.5;
  EXPECT_THROW(bad.validate(), ValidationError);
}

TEST(Train, NonFiniteLossRaisesNumericalError) {
  S2P2Model model(tiny_config());
  model.head_b.data[0] = std::nan("");
  const auto data = poisson_data(2, 3.0, 6);
  const std::vector<std::size_t> idx{0, 1};
  try {
    batch_gradient(model, data, idx, 5, 1, 1);
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_EQ(e.sequence_index(), 0u);
    EXPECT_FALSE(e.parameter_norms().empty());
  }
}
