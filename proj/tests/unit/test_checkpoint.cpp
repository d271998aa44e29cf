#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "s2p2/checkpoint.hpp"

using namespace s2p2;

namespace {

S2P2Model sample_model() {
  S2P2Config cfg;
  cfg.num_marks = 3;
  cfg.hidden = 4;
  cfg.state = 3;
  cfg.layers = 2;
  cfg.zoh_mode = ZohMode::forward;
  cfg.input_dependent = false;
  cfg.seed = 99;
  S2P2Model m(cfg);
  Philox rng(1);
  for (auto& [name, t] : m.named_parameters()) {
    for (double& v : t->data) v += rng.normal() / 3.0;
  }
  return m;
}

}  // namespace

TEST(Checkpoint, RoundTripIsBitExact) {
  const auto model = sample_model();
  const auto dir = std::filesystem::temp_directory_path() / "s2p2_ckpt_test";
  std::filesystem::create_directories(dir);
  save_checkpoint(model, dir / "m.json");
  const auto back = load_checkpoint(dir / "m.json");
  EXPECT_EQ(back.config, model.config);
  const auto a = model.named_parameters();
  const auto b = back.named_parameters();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].first, b[i].first);
    EXPECT_EQ(a[i].second->data, b[i].second->data);
    EXPECT_EQ(a[i].second->is_complex, b[i].second->is_complex);
  }
  const EventSequence seq({0.5, 1.5}, {2, 0}, 3.0);
  EXPECT_EQ(log_likelihood(model, seq, 10, 1).total, log_likelihood(back, seq, 10, 1).total);
  EXPECT_FALSE(std::filesystem::exists(dir / "m.json.tmp"));
  std::filesystem::remove_all(dir);
}

TEST(Checkpoint, RejectsWrongFormatVersionAndParameters) {
  auto j = checkpoint_to_json(sample_model());
  EXPECT_EQ(j["version"], kCheckpointVersion);
  auto bad = j;
  bad["format"] = "other";
  EXPECT_THROW(checkpoint_from_json(bad), ValidationError);
  bad = j;
  bad["version"] = 99;
  EXPECT_THROW(checkpoint_from_json(bad), ValidationError);
  bad = j;
  bad["parameters"].erase(0);
  EXPECT_THROW(checkpoint_from_json(bad), ValidationError);
  bad = j;
  bad["parameters"][0]["shape"] = {1, 1};
  EXPECT_THROW(checkpoint_from_json(bad), ValidationError);
  bad = j;
  bad["config"]["hidden"] = 0;
  EXPECT_THROW(checkpoint_from_json(bad), ValidationError);
}

TEST(Checkpoint, ConfigJsonRoundTrip) {
  const auto cfg = sample_model().config;
  EXPECT_EQ(config_from_json(config_to_json(cfg)), cfg);
}
