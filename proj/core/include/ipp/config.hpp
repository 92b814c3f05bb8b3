#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ipp/baselines.hpp"
#include "ipp/env.hpp"
#include "ipp/evaluation.hpp"
#include "ipp/ipp_problem.hpp"
#include "ipp/kernel.hpp"
#include "ipp/mapping.hpp"
#include "ipp/net.hpp"
#include "ipp/search.hpp"
#include "ipp/training.hpp"
#include "ipp/world.hpp"

namespace ipp {

/// Every tunable of a run. A profile supplies the defaults, a JSON file may
/// override any field, and command-line flags override both.
struct MissionConfig {
  std::string profile = "desk";
  std::uint64_t seed = 0;

  TerrainSpec terrain;
  KinematicsModel kinematics;
  SensorModel sensor;
  KernelSpec kernel;
  InterestRegionSpec interest;

  double budget = 150.0;
  std::optional<double> radius;
  MissionSpec mission;

  SearchConfig search;  // deploy-time search
  NetConfig net;
  TrainingConfig training;
  MctsPwConfig mcts_pw;
  CmaEsConfig cmaes;
  double coverage_altitude = 8.0;

  std::vector<std::uint64_t> eval_seeds;
  std::vector<std::string> planners;
  int workers = 1;

  /// Throws ConfigError naming the offending field.
  void validate() const;
  WorldModel world() const;
};

/// "desk" (10x10 grid, 200 actions) or "paper" (15x15, 450 actions, 11 m
/// action radius).
MissionConfig profile_defaults(const std::string& profile);

/// Starts from the profile named in `text` (desk when absent), then applies
/// every key. Unknown keys and ill-typed values throw ConfigError.
MissionConfig parse_config(const std::string& text);
MissionConfig load_config(const std::filesystem::path& path);

/// Complete, re-loadable JSON of `cfg`.
std::string dump_config(const MissionConfig& cfg);

inline const std::vector<std::string>& planner_names() {
  static const std::vector<std::string> names{"rl", "random", "coverage", "mcts_pw", "cmaes"};
  return names;
}

inline const std::vector<std::string>& ablation_variants() {
  static const std::vector<std::string> names{"baseline",         "fixed_window",
                                              "fixed_exploration", "no_forced_playouts",
                                              "no_global_pooling", "encoder5",
                                              "no_history"};
  return names;
}

/// Planner factories for `names`. "rl" needs `rl_net` (ConfigError
/// otherwise). `world` must outlive the factories.
std::vector<NamedPlanner> make_planners(const MissionConfig& cfg, const WorldModel& world,
                                        const std::vector<std::string>& names,
                                        std::shared_ptr<const Network> rl_net = nullptr);

/// `base` with exactly the toggle of `variant` applied. Throws ConfigError
/// listing the valid names for an unknown variant.
MissionConfig apply_ablation(MissionConfig base, const std::string& variant);

}  // namespace ipp
