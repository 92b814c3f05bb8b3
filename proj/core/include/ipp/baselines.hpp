#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ipp/planner.hpp"
#include "ipp/rng.hpp"
#include "ipp/search.hpp"
#include "ipp/world.hpp"

namespace ipp {

/// Uniform over the reachable actions.
class RandomPlanner final : public Planner {
 public:
  explicit RandomPlanner(const WorldModel& world) : world_(&world) {}

  std::string name() const override { return "random"; }
  void reset(std::uint64_t seed) override { rng_.seed(derive_seed(seed, {0x72616eULL})); }
  std::optional<int> plan(const PlanningContext& ctx) override;

 private:
  const WorldModel* world_;
  Rng rng_{0};
};

/// Lawnmower sweep over the lattice at the level closest to `altitude`.
/// Rows (and the points along each row) are one footprint width apart, and
/// the last row/column is shifted inwards so the union of footprints covers
/// every cell. Of the four corner-started variants, the one whose first
/// waypoint is nearest to `start` is returned.
std::vector<int> coverage_waypoints(const WorldModel& world, double altitude, int start);

class CoveragePlanner final : public Planner {
 public:
  explicit CoveragePlanner(const WorldModel& world, double altitude = 8.0)
      : world_(&world), altitude_(altitude) {}

  std::string name() const override { return "coverage"; }
  void reset(std::uint64_t) override {
    path_.clear();
    next_ = 0;
  }
  /// Follows the sweep; stops at the first waypoint it cannot afford.
  std::optional<int> plan(const PlanningContext& ctx) override;

 private:
  const WorldModel* world_;
  double altitude_;
  std::vector<int> path_;
  std::size_t next_ = 0;
};

struct MctsPwConfig {
  int num_simulations = 100;
  int max_depth = 5;
  int rollout_depth = 5;
  int rollout_candidates = 10;
  double widening_k = 4.0;
  double widening_alpha = 0.5;
  double exploration = 1.0;
  std::optional<double> radius = 11.0;

  void validate() const;
};

/// A problem MCTS-PW can plan in: the SearchProblem transition interface plus
/// a rollout policy.
template <typename P>
concept RolloutProblem = requires(const P& p, const typename P::State& s, int a, Rng& rng) {
  { p.actions(s) } -> std::convertible_to<std::vector<int>>;
  { p.step(s, a) } -> std::same_as<std::pair<typename P::State, double>>;
  { p.rollout_action(s, rng) } -> std::same_as<std::optional<int>>;
};

struct MctsPwResult {
  std::vector<int> actions;  // expanded root children, in expansion order
  std::vector<int> visits;
  std::vector<double> q;
  int max_root_children = 0;  // largest child count seen at the root
  int simulations = 0;

  int best_action() const;
};

/// MCTS with progressive widening: a node visited N times (counting the
/// current visit) may hold at most ceil(k * N^alpha) children; new children
/// are drawn in a seeded random order. Leaves are scored by a rollout.
/// Selection is UCT on Q normalized by the smallest and largest edge values
/// seen anywhere in the tree so far.
template <RolloutProblem Problem>
class MctsPw {
 public:
  using State = typename Problem::State;

  MctsPw(const Problem& problem, MctsPwConfig config) : problem_(&problem), cfg_(config) {
    cfg_.validate();
  }

  MctsPwResult run(const State& root_state, Rng& rng) {
    nodes_.clear();
    lo_ = std::numeric_limits<double>::infinity();
    hi_ = -lo_;
    nodes_.push_back(make_node(root_state, 0, rng));
    if (nodes_[0].untried.empty()) throw ContractViolation("mcts: no reachable action at the root");
    MctsPwResult out;
    for (int s = 0; s < cfg_.num_simulations; ++s) {
      simulate(rng);
      out.max_root_children =
          std::max(out.max_root_children, static_cast<int>(nodes_[0].children.size()));
    }
    const Node& root = nodes_[0];
    for (const Child& c : root.children) {
      out.actions.push_back(c.action);
      out.visits.push_back(c.visits);
      out.q.push_back(c.visits > 0 ? c.value_sum / c.visits : 0.0);
    }
    out.simulations = cfg_.num_simulations;
    return out;
  }

 private:
  struct Child {
    int action = -1;
    int node = -1;
    double reward = 0.0;
    int visits = 0;
    double value_sum = 0.0;
  };
  struct Node {
    State state;
    int depth = 0;
    int visits = 0;
    std::vector<int> untried;  // shuffled; expanded from the back
    std::vector<Child> children;
  };

  Node make_node(State state, int depth, Rng& rng) const {
    Node n;
    n.state = std::move(state);
    n.depth = depth;
    n.untried = problem_->actions(n.state);
    std::shuffle(n.untried.begin(), n.untried.end(), rng);
    return n;
  }

  bool may_widen(const Node& n) const {
    const double cap = std::ceil(cfg_.widening_k * std::pow(n.visits, cfg_.widening_alpha));
    return !n.untried.empty() && static_cast<double>(n.children.size()) < cap;
  }

  std::size_t select(const Node& n) const {
    std::size_t best = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n.children.size(); ++i) {
      const Child& c = n.children[i];
      if (c.visits == 0) return i;
      const double q = hi_ > lo_ ? (c.value_sum / c.visits - lo_) / (hi_ - lo_) : 0.5;
      const double s =
          q + cfg_.exploration * std::sqrt(std::log(static_cast<double>(n.visits)) / c.visits);
      if (s > best_score) {
        best_score = s;
        best = i;
      }
    }
    return best;
  }

  double rollout(State state, Rng& rng) const {
    double g = 0.0;
    for (int d = 0; d < cfg_.rollout_depth; ++d) {
      const std::optional<int> a = problem_->rollout_action(state, rng);
      if (!a) break;
      auto [next, r] = problem_->step(state, *a);
      g += r;
      state = std::move(next);
    }
    return g;
  }

  void simulate(Rng& rng) {
    std::vector<std::pair<int, std::size_t>> path;
    int current = 0;
    double leaf = 0.0;
    for (;;) {
      Node& n = nodes_[current];
      n.visits += 1;
      if (n.untried.empty() && n.children.empty()) break;  // terminal
      if (may_widen(n)) {
        const int action = n.untried.back();
        n.untried.pop_back();
        auto [next, r] = problem_->step(n.state, action);
        const int depth = n.depth + 1;
        Node child = make_node(std::move(next), depth, rng);
        child.visits = 1;
        leaf = depth < cfg_.max_depth ? rollout(child.state, rng) : 0.0;
        nodes_.push_back(std::move(child));
        Node& parent = nodes_[current];
        parent.children.push_back({action, static_cast<int>(nodes_.size() - 1), r});
        path.emplace_back(current, parent.children.size() - 1);
        break;
      }
      const std::size_t i = select(n);
      path.emplace_back(current, i);
      const int next = n.children[i].node;
      if (nodes_[next].depth >= cfg_.max_depth) {
        nodes_[next].visits += 1;
        break;
      }
      current = next;
    }
    double g = leaf;
    for (auto it = path.rbegin(); it != path.rend(); ++it) {
      Child& c = nodes_[it->first].children[it->second];
      g += c.reward;
      c.visits += 1;
      c.value_sum += g;
      lo_ = std::min(lo_, c.value_sum / c.visits);
      hi_ = std::max(hi_, c.value_sum / c.visits);
    }
  }

  const Problem* problem_;
  MctsPwConfig cfg_;
  std::vector<Node> nodes_;
  double lo_ = std::numeric_limits<double>::infinity();
  double hi_ = -std::numeric_limits<double>::infinity();
};

/// The mapping mission as seen by MCTS-PW: imagined fusion transitions and a
/// greedy cost-benefit rollout over a few sampled candidates.
class IppRolloutProblem {
 public:
  struct State {
    std::shared_ptr<const GridMapBelief> belief;
    int pose = 0;
    double budget = 0.0;
  };

  IppRolloutProblem(const WorldModel& world, std::optional<double> radius, int candidates)
      : world_(&world), radius_(radius), candidates_(candidates) {}

  std::vector<int> actions(const State& s) const;
  std::pair<State, double> step(const State& s, int action) const;
  std::optional<int> rollout_action(const State& s, Rng& rng) const;

 private:
  const WorldModel* world_;
  std::optional<double> radius_;
  int candidates_;
};

class MctsPwPlanner final : public Planner {
 public:
  MctsPwPlanner(const WorldModel& world, MctsPwConfig config)
      : world_(&world), cfg_(std::move(config)) {
    cfg_.validate();
  }

  std::string name() const override { return "mcts_pw"; }
  void reset(std::uint64_t seed) override { rng_.seed(derive_seed(seed, {0x6d637473ULL})); }
  std::optional<int> plan(const PlanningContext& ctx) override;

 private:
  const WorldModel* world_;
  MctsPwConfig cfg_;
  Rng rng_{0};
};

struct CmaEsConfig {
  int iterations = 45;
  int offspring = 12;
  double sigma_xy = 4.0;
  double sigma_z = 3.0;
  int horizon = 5;

  void validate() const;
};

/// Scores a continuous horizon of waypoints (x, y, z per waypoint) starting
/// at `pose`: information gained over flight time, each waypoint clamped to
/// the lattice bounds and measured at its nearest lattice pose. Waypoints
/// beyond the remaining budget are ignored; a plan whose first waypoint is
/// unaffordable or coincides with `pose` scores 0.
double trajectory_objective(const WorldModel& world, const GridMapBelief& belief, int pose,
                            double budget, const Eigen::VectorXd& waypoints);

class CmaEsPlanner final : public Planner {
 public:
  CmaEsPlanner(const WorldModel& world, CmaEsConfig config);

  std::string name() const override { return "cmaes"; }
  void reset(std::uint64_t seed) override { seed_ = seed; calls_ = 0; }
  std::optional<int> plan(const PlanningContext& ctx) override;

  struct Plan {
    int action = -1;
    double objective = 0.0;
    double greedy_objective = 0.0;
  };
  /// plan() with the objective values exposed.
  std::optional<Plan> plan_detailed(const PlanningContext& ctx);

 private:
  const WorldModel* world_;
  CmaEsConfig cfg_;
  std::uint64_t seed_ = 0;
  std::uint64_t calls_ = 0;
};

}  // namespace ipp
