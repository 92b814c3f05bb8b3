#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ipp/env.hpp"
#include "ipp/kernel.hpp"
#include "ipp/mapping.hpp"
#include "ipp/planner.hpp"
#include "ipp/world.hpp"

namespace ipp {

struct MissionSpec {
  Position start{2.0, 2.0, 14.0};  // snapped to the nearest lattice pose
  KernelSpec kernel;               // prior and truth; the nugget only enters the truth
  double prior_mean = 0.5;
  /// Charge this many seconds per planning call instead of the measured
  /// wall time. Makes missions bit-reproducible.
  std::optional<double> fixed_planning_seconds;

  void validate() const;
};

struct StepLog {
  int step = 0;
  int action = -1;
  Position pose;
  double planning_seconds = 0.0;
  double travel_seconds = 0.0;
  double trace = 0.0;  // over the interest set of the posterior
  double rmse = 0.0;
  double effective_time = 0.0;  // cumulative planning + travel
  double travel_time = 0.0;     // cumulative travel
};

struct MissionResult {
  std::string planner;
  std::uint64_t seed = 0;
  double budget = 0.0;
  int start_action = -1;
  double initial_trace = 0.0;
  double initial_rmse = 0.0;
  std::vector<StepLog> steps;
  double total_planning_seconds = 0.0;  // includes the final, unexecuted call
  double effective_time = 0.0;          // all planning plus all travel
  int planning_calls = 0;
  bool aborted = false;
  std::string diagnostic;

  double travel_time() const { return steps.empty() ? 0.0 : steps.back().travel_time; }
  double final_trace() const { return steps.empty() ? initial_trace : steps.back().trace; }
  double final_rmse() const { return steps.empty() ? initial_rmse : steps.back().rmse; }
  double mean_planning_seconds() const {
    return planning_calls > 0 ? total_planning_seconds / planning_calls : 0.0;
  }
};

struct MapMetrics {
  double trace = 0.0;
  double rmse = 0.0;
};

/// Trace and RMSE over `interest`; (0, 0) when it is empty.
MapMetrics metrics(const GridMapBelief& belief, const GroundTruthField& truth,
                   std::span<const int> interest);

/// Plan, check affordability, fly, measure, fuse, log; until the planner
/// gives up or its choice no longer fits in the remaining budget. Planning
/// time is charged against the budget. Planner exceptions end the mission
/// with `aborted` set.
MissionResult run_mission(Planner& planner, const WorldModel& world, const MissionSpec& spec,
                          std::uint64_t seed);

inline constexpr std::array<double, 3> kCheckpointFractions{0.33, 0.67, 1.0};

/// Metrics at `fraction` of the budget on the effective-time axis, linearly
/// interpolated between logged steps (time 0 holds the prior metrics) and
/// held at the terminal value past the last step.
MapMetrics metrics_at(const MissionResult& mission, double fraction);

struct AggregateRow {
  std::string planner;
  double checkpoint = 0.0;  // fraction of the budget
  int missions = 0;
  double trace_mean = 0.0;
  double trace_std = 0.0;  // population standard deviation
  double rmse_mean = 0.0;
  double rmse_std = 0.0;
  double mean_plan_seconds = 0.0;

  friend bool operator==(const AggregateRow&, const AggregateRow&) = default;
};

using PlannerFactory = std::function<std::unique_ptr<Planner>()>;

struct NamedPlanner {
  std::string name;
  PlannerFactory make;
};

struct Comparison {
  std::vector<MissionResult> missions;  // planner-major, then seed order
  std::vector<AggregateRow> table;
};

/// Every planner on every seed, `workers` missions at a time.
Comparison compare(const std::vector<NamedPlanner>& planners,
                   const std::vector<std::uint64_t>& seeds, const WorldModel& world,
                   const MissionSpec& spec, int workers = 1);

std::vector<AggregateRow> aggregate(const std::vector<MissionResult>& missions);

/// RFC-4180 quoting when the field holds a comma, quote or line break.
std::string csv_field(const std::string& s);

void write_aggregate_csv(const std::filesystem::path& path, const std::vector<AggregateRow>& rows);
std::vector<AggregateRow> read_aggregate_csv(const std::filesystem::path& path);
/// planner, seed, checkpoint, trace, rmse, mean_plan_seconds
void write_results_csv(const std::filesystem::path& path,
                       const std::vector<MissionResult>& missions);
void write_step_log(const std::filesystem::path& path, const MissionResult& mission);
void write_path_csv(const std::filesystem::path& path, const MissionResult& mission);

}  // namespace ipp
