#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "ipp/training.hpp"
#include "ipp/world.hpp"

using namespace ipp;

namespace {

WorldModel desk_world() {
  return WorldModel(TerrainSpec{}, KinematicsModel{}, SensorModel{}, InterestRegionSpec{},
                    std::nullopt, 150.0);
}

NetConfig small_net() {
  NetConfig c;
  c.channels = 8;
  c.encoder_blocks = 2;
  c.head_channels = 8;
  c.head_blocks = 1;
  return c;
}

TrainingConfig quick() {
  TrainingConfig c;
  c.search.num_simulations = 4;
  c.max_steps = 6;
  return c;
}

}  // namespace

TEST(Schedule, ExplorationMatchesClosedForm) {
  const ScheduleSpec s;
  for (int i = 0; i <= 100; ++i) {
    const ExplorationConstants e = exploration_constants(i, s);
    EXPECT_EQ(e.c1, std::max(15.0 * std::pow(0.8, i), 4.0)) << i;
    EXPECT_EQ(e.delta, std::max(1.0 * std::pow(0.8, i), 0.3)) << i;
  }
  EXPECT_EQ(exploration_constants(0, s).c1, 15.0);
  EXPECT_EQ(exploration_constants(0, s).delta, 1.0);
  EXPECT_EQ(exploration_constants(6, s).c1, 4.0);
  EXPECT_EQ(exploration_constants(1000, s).c1, 4.0);
  EXPECT_EQ(exploration_constants(1000, s).delta, 0.3);
}

TEST(Schedule, WindowMatchesClosedForm) {
  const ScheduleSpec s;
  for (int i = 0; i <= 100; ++i)
    EXPECT_EQ(window_size(i, s), std::min(static_cast<int>(std::floor(1.0 + i / 2.0)), 10)) << i;
  EXPECT_EQ(window_size(0, s), 1);
  EXPECT_EQ(window_size(5, s), 3);
  EXPECT_EQ(window_size(100, s), 10);
}

TEST(Schedule, AblationSwitches) {
  ScheduleSpec s;
  s.adaptive_window = false;
  s.decaying_exploration = false;
  for (int i = 0; i < 20; ++i) {
    EXPECT_EQ(window_size(i, s), 10);
    EXPECT_EQ(exploration_constants(i, s).c1, 4.0);
    EXPECT_EQ(exploration_constants(i, s).delta, 0.3);
  }
}

TEST(Schedule, OneCycle) {
  const int total = 100;
  EXPECT_DOUBLE_EQ(one_cycle_lr(0, total, 0.01), 0.01 / 25.0);
  EXPECT_DOUBLE_EQ(one_cycle_lr(45, total, 0.01), 0.01);
  EXPECT_NEAR(one_cycle_lr(total - 1, total, 0.01), 0.01 / 100.0, 1e-15);
  for (int s = 1; s < 45; ++s) EXPECT_GT(one_cycle_lr(s, total, 0.01), one_cycle_lr(s - 1, total, 0.01));
  for (int s = 46; s < total; ++s) EXPECT_LT(one_cycle_lr(s, total, 0.01), one_cycle_lr(s - 1, total, 0.01));
}

TEST(Replay, WindowOnlySeesNewestBlocks) {
  ReplayBuffer buf;
  for (int b = 0; b < 6; ++b) {
    std::vector<ExperienceRecord> block(static_cast<std::size_t>(b + 1));
    for (auto& r : block) r.action = b;
    buf.add_block(std::move(block));
    EXPECT_EQ(buf.blocks(), b + 1);
  }
  EXPECT_EQ(buf.size(), 21u);
  for (int w = 1; w <= 8; ++w) {
    const auto win = buf.window(w);
    EXPECT_EQ(win.size(), buf.window_size(w));
    for (const ExperienceRecord* r : win) EXPECT_GE(r->action, 6 - w);
  }
}

TEST(Episode, TargetsAndBudget) {
  const WorldModel world = desk_world();
  Network net(small_net());
  net.initialize(1);
  TrainingConfig cfg = quick();
  cfg.max_steps = 30;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const Episode ep = generate_episode(net, world, cfg, {15.0, 1.0}, seed);
    ASSERT_FALSE(ep.records.empty());
    EXPECT_LE(ep.spent, 150.0 + 1e-9);
    EXPECT_EQ(ep.path.size(), ep.records.size() + 1);
    EXPECT_NEAR(ep.records.back().target_value, ep.records.back().reward, 1e-12);
    for (std::size_t t = 0; t + 1 < ep.records.size(); ++t)
      EXPECT_NEAR(ep.records[t].target_value,
                  ep.records[t].reward + ep.records[t + 1].target_value, 1e-9);
    double ret = 0.0;
    for (const auto& r : ep.records) {
      ret += r.reward;
      EXPECT_GE(r.reward, -1e-9);
      EXPECT_GE(r.target_value, -1e-9);
      EXPECT_NEAR(std::accumulate(r.target_policy.begin(), r.target_policy.end(), 0.0), 1.0, 1e-5);
      for (std::size_t a = 0; a < r.target_policy.size(); ++a)
        if (r.target_policy[a] > 0.0f) {
          EXPECT_TRUE(std::binary_search(r.reachable.begin(), r.reachable.end(), static_cast<int>(a)));
        }
      EXPECT_TRUE(std::binary_search(r.reachable.begin(), r.reachable.end(), r.action));
    }
    EXPECT_NEAR(ret, ep.episode_return, 1e-9);
  }
}

TEST(Episode, ReproduciblePerSeed) {
  const WorldModel world = desk_world();
  Network net(small_net());
  net.initialize(2);
  const TrainingConfig cfg = quick();
  const Episode a = generate_episode(net, world, cfg, {10.0, 0.5}, 77);
  const Episode b = generate_episode(net, world, cfg, {10.0, 0.5}, 77);
  ASSERT_EQ(a.records.size(), b.records.size());
  EXPECT_EQ(a.path, b.path);
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    EXPECT_EQ(a.records[i].features.data, b.records[i].features.data);
    EXPECT_EQ(a.records[i].target_policy, b.records[i].target_policy);
    EXPECT_EQ(a.records[i].target_value, b.records[i].target_value);
  }
}

TEST(TrainEpochs, SkipsSmallBuffers) {
  Network net(small_net());
  net.initialize(3);
  std::vector<ExperienceRecord> few(5);
  std::vector<const ExperienceRecord*> ptrs;
  for (auto& r : few) ptrs.push_back(&r);
  const std::vector<float> before(net.parameters().begin(), net.parameters().end());
  EXPECT_TRUE(train_epochs(net, ptrs, TrainingConfig{}, 1).empty());
  EXPECT_TRUE(std::equal(before.begin(), before.end(), net.parameters().begin()));
}

// A fixed 200-record synthetic buffer: the last epoch fits better than the first.
TEST(TrainEpochs, LossDecreasesOnSyntheticBuffer) {
  int improved = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    const int g = 10, actions = 200;
    std::vector<ExperienceRecord> data(200);
    for (auto& r : data) {
      r.features = {17, g, std::vector<float>(17 * g * g)};
      for (float& v : r.features.data) v = u(rng);
      for (int a = 0; a < actions; ++a)
        if (rng() % 2) r.reachable.push_back(a);
      r.target_policy.assign(actions, 0.0f);
      // The target is the reachable cell with the highest value in plane 0.
      int best = r.reachable.front();
      for (int a : r.reachable)
        if (r.features.data[static_cast<std::size_t>(a % 100)] >
            r.features.data[static_cast<std::size_t>(best % 100)])
          best = a;
      r.target_policy[static_cast<std::size_t>(best)] = 1.0f;
      r.target_value = 3.0 * r.features.data[100];
    }
    std::vector<const ExperienceRecord*> ptrs;
    for (auto& r : data) ptrs.push_back(&r);
    Network net(small_net());
    net.initialize(seed);
    TrainingConfig cfg;
    const auto losses = train_epochs(net, ptrs, cfg, seed);
    const std::size_t per = losses.size() / 3;
    ASSERT_EQ(losses.size(), 3 * per);
    const double first = std::accumulate(losses.begin(), losses.begin() + per, 0.0) / per;
    const double last = std::accumulate(losses.end() - per, losses.end(), 0.0) / per;
    if (last < first) ++improved;
  }
  EXPECT_GE(improved, 9);
}

TEST(RunTraining, BookkeepingAndWorkerIndependence) {
  const WorldModel world = desk_world();
  TrainingConfig cfg = quick();
  cfg.iterations = 2;
  cfg.episodes = 3;
  cfg.batch_size = 8;
  cfg.epochs = 1;
  cfg.workers = 1;
  const TrainingRun a = run_training(world, small_net(), cfg, 5);
  cfg.workers = 3;
  const TrainingRun b = run_training(world, small_net(), cfg, 5);
  ASSERT_EQ(a.metrics.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(a.metrics[i].iteration, static_cast<int>(i));
    EXPECT_EQ(a.metrics[i].episodes, 3);
    EXPECT_EQ(a.metrics[i].mean_return, b.metrics[i].mean_return);
    EXPECT_EQ(a.metrics[i].mean_loss, b.metrics[i].mean_loss);
    EXPECT_EQ(a.metrics[i].buffer_records, b.metrics[i].buffer_records);
  }
  EXPECT_TRUE(std::equal(a.net.parameters().begin(), a.net.parameters().end(),
                         b.net.parameters().begin()));
}

TEST(TrainingConfig, Validation) {
  TrainingConfig c;
  c.episodes = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = TrainingConfig{};
  c.momentum = 1.0;
  EXPECT_THROW(c.validate(), ConfigError);
}
