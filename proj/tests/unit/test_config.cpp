#include <gtest/gtest.h>

#include "ipp/config.hpp"

using namespace ipp;

namespace {

std::string error_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Config, Profiles) {
  const MissionConfig desk = profile_defaults("desk");
  EXPECT_EQ(desk.world().lattice().grid_dim(), 10);
  EXPECT_EQ(desk.world().action_count(), 200);
  EXPECT_FALSE(desk.radius.has_value());
  EXPECT_EQ(desk.eval_seeds.size(), 10u);
  EXPECT_EQ(desk.search.num_simulations, 10);
  EXPECT_EQ(desk.training.search.num_simulations, 10);
  EXPECT_EQ(desk.training.iterations, 10);
  EXPECT_EQ(desk.training.episodes, 20);
  EXPECT_EQ(desk.budget, 150.0);
  EXPECT_EQ(desk.net.input_planes, 17);
  desk.validate();

  const MissionConfig paper = profile_defaults("paper");
  EXPECT_EQ(paper.world().lattice().grid_dim(), 15);
  EXPECT_EQ(paper.world().action_count(), 450);
  ASSERT_TRUE(paper.radius.has_value());
  EXPECT_EQ(*paper.radius, 11.0);
  paper.validate();

  EXPECT_THROW(profile_defaults("huge"), ConfigError);
}

TEST(Config, EmptyObjectIsDeskDefaults) {
  EXPECT_EQ(dump_config(parse_config("{}")), dump_config(profile_defaults("desk")));
}

TEST(Config, RoundTrip) {
  for (const char* p : {"desk", "paper"}) {
    MissionConfig c = profile_defaults(p);
    c.seed = 17;
    c.training.peak_lr = 0.003;
    c.mission.fixed_planning_seconds = 0.25;
    c.eval_seeds = {4, 5};
    c.planners = {"random", "cmaes"};
    const std::string text = dump_config(c);
    const MissionConfig back = parse_config(text);
    EXPECT_EQ(dump_config(back), text);
    EXPECT_EQ(back.seed, 17u);
    EXPECT_EQ(back.training.peak_lr, 0.003);
  }
}

TEST(Config, OverridesApply) {
  const MissionConfig c = parse_config(
      R"({"profile": "paper", "training": {"episodes": 3, "schedule": {"window_max": 4}},
          "mission": {"budget": 90, "start": [5, 5, 8]}})");
  EXPECT_EQ(c.profile, "paper");
  EXPECT_EQ(c.training.episodes, 3);
  EXPECT_EQ(c.training.schedule.window_max, 4);
  EXPECT_EQ(c.budget, 90.0);
  EXPECT_EQ(c.mission.start.z, 8.0);
}

TEST(Config, RejectsUnknownKeysWithPath) {
  EXPECT_NE(error_of(R"({"bogus": 1})").find("bogus"), std::string::npos);
  EXPECT_NE(error_of(R"({"training": {"schedule": {"c9": 1}}})").find("training.schedule.c9"),
            std::string::npos);
}

TEST(Config, RejectsBadValuesWithFieldName) {
  EXPECT_NE(error_of(R"({"training": {"episodes": "many"}})").find("training.episodes"),
            std::string::npos);
  EXPECT_NE(error_of(R"({"mission": {"budget": -1}})").find("mission.budget"), std::string::npos);
  EXPECT_NE(error_of(R"({"evaluation": {"planners": ["rl", "oracle"]}})").find("oracle"),
            std::string::npos);
  EXPECT_NE(error_of("{not json").find("JSON"), std::string::npos);
  EXPECT_NE(error_of(R"({"profile": "huge"})").find("huge"), std::string::npos);
}

TEST(Config, AblationsToggleExactlyOneThing) {
  const MissionConfig base = profile_defaults("desk");
  const std::string base_dump = dump_config(base);
  EXPECT_EQ(dump_config(apply_ablation(base, "baseline")), base_dump);

  const MissionConfig fw = apply_ablation(base, "fixed_window");
  EXPECT_FALSE(fw.training.schedule.adaptive_window);
  for (int i = 0; i <= 20; ++i) EXPECT_EQ(window_size(i, fw.training.schedule), 10);

  const MissionConfig fe = apply_ablation(base, "fixed_exploration");
  for (int i = 0; i <= 20; ++i) {
    EXPECT_EQ(exploration_constants(i, fe.training.schedule).c1, 4.0);
    EXPECT_EQ(exploration_constants(i, fe.training.schedule).delta, 0.3);
  }

  EXPECT_FALSE(apply_ablation(base, "no_forced_playouts").training.search.forced_playouts);
  EXPECT_FALSE(apply_ablation(base, "no_global_pooling").net.global_pooling_bias);
  EXPECT_EQ(apply_ablation(base, "encoder5").net.encoder_blocks, 5);
  EXPECT_EQ(apply_ablation(base, "no_history").net.input_planes, 7);

  for (const std::string& v : ablation_variants()) {
    const MissionConfig c = apply_ablation(base, v);
    c.validate();
    if (v != "baseline") {
      EXPECT_NE(dump_config(c), base_dump) << v;
    }
  }
  try {
    apply_ablation(base, "wider");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("fixed_window"), std::string::npos);
  }
}

TEST(Config, PlannerFactories) {
  const MissionConfig c = profile_defaults("desk");
  const WorldModel world = c.world();
  const auto planners = make_planners(c, world, {"random", "coverage", "mcts_pw", "cmaes"});
  ASSERT_EQ(planners.size(), 4u);
  for (const auto& p : planners) EXPECT_EQ(p.make()->name(), p.name);
  EXPECT_THROW(make_planners(c, world, {"rl"}), ConfigError);
  auto net = std::make_shared<const Network>(c.net);
  EXPECT_EQ(make_planners(c, world, {"rl"}, net).at(0).make()->name(), "rl");
}
