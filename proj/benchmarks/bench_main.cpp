#include <benchmark/benchmark.h>

#include "ipp/baselines.hpp"
#include "ipp/config.hpp"
#include "ipp/ipp_problem.hpp"

using namespace ipp;

namespace {

const MissionConfig& desk() {
  static const MissionConfig cfg = profile_defaults("desk");
  return cfg;
}

const WorldModel& desk_world() {
  static const WorldModel world = desk().world();
  return world;
}

std::shared_ptr<const Network> desk_net() {
  static const auto net = [] {
    auto n = std::make_shared<Network>(desk().net);
    n->initialize(0);
    return std::shared_ptr<const Network>(n);
  }();
  return net;
}

GridMapBelief prior() { return build_prior(desk().terrain, desk().kernel, 0.5); }

}  // namespace

static void BM_KalmanFuse(benchmark::State& state) {
  const WorldModel& world = desk_world();
  const GridMapBelief b = prior();
  const GroundTruthField truth = generate_ground_truth(1, desk().terrain, desk().kernel, 0.4);
  const int action = static_cast<int>(state.range(0));
  const Measurement m =
      measure(truth, world.lattice().pose(action).position, desk().terrain, desk().sensor, 2);
  for (auto _ : state) benchmark::DoNotOptimize(kalman_fuse(b, m.cells, m.values, m.noise_variance));
  state.counters["cells"] = static_cast<double>(m.cells.size());
}
BENCHMARK(BM_KalmanFuse)->Arg(44)->Arg(144)->Unit(benchmark::kMicrosecond);

static void BM_NetForward(benchmark::State& state) {
  const WorldModel& world = desk_world();
  const Featurizer fz(world.lattice(), world.kinematics(), world.total_budget(), true);
  const auto net = desk_net();
  const IppProblem problem(world, fz, *net);
  IppState s{std::make_shared<const GridMapBelief>(prior()), 137, 150.0, {}};
  const FeatureStack x = problem.features(s);
  const std::vector<int> reach = problem.actions(s);
  for (auto _ : state) benchmark::DoNotOptimize(net->forward(x, reach));
}
BENCHMARK(BM_NetForward)->Unit(benchmark::kMicrosecond);

static void BM_RlReplan(benchmark::State& state) {
  const WorldModel& world = desk_world();
  SearchConfig search = desk().search;
  search.num_simulations = static_cast<int>(state.range(0));
  RlPlanner planner(world, desk_net(), search);
  planner.reset(0);
  const GridMapBelief b = prior();
  for (auto _ : state) benchmark::DoNotOptimize(planner.plan({b, 137, 150.0}));
}
BENCHMARK(BM_RlReplan)->Arg(10)->Arg(50)->Unit(benchmark::kMillisecond);

static void BM_MctsPwReplan(benchmark::State& state) {
  const WorldModel& world = desk_world();
  MctsPwPlanner planner(world, desk().mcts_pw);
  planner.reset(0);
  const GridMapBelief b = prior();
  for (auto _ : state) benchmark::DoNotOptimize(planner.plan({b, 137, 150.0}));
}
BENCHMARK(BM_MctsPwReplan)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
