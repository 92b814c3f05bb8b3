#pragma once

#include <deque>
#include <memory>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "ipp/features.hpp"
#include "ipp/net.hpp"
#include "ipp/planner.hpp"
#include "ipp/search.hpp"
#include "ipp/world.hpp"

namespace ipp {

struct IppState {
  std::shared_ptr<const GridMapBelief> belief;
  int pose = 0;
  double budget = 0.0;
  std::vector<FrameSummary> history;  // most recent first, at most two
};

/// Tree-search view of the mapping mission: actions are the reachable lattice
/// poses, transitions fuse the maximum-likelihood measurement, and leaves are
/// scored by the network.
class IppProblem {
 public:
  using State = IppState;

  IppProblem(const WorldModel& world, const Featurizer& featurizer, const Network& net)
      : world_(&world), featurizer_(&featurizer), net_(&net) {}

  std::vector<int> actions(const State& s) const { return world_->reachable(s.pose, s.budget); }
  std::pair<State, double> step(const State& s, int action) const;
  std::pair<std::vector<double>, double> evaluate(const State& s,
                                                  std::span<const int> actions) const;

  FrameSummary frame(const State& s) const;
  FeatureStack features(const State& s) const;

 private:
  const WorldModel* world_;
  const Featurizer* featurizer_;
  const Network* net_;
};

/// The learned planner at deploy time: no root noise, no forced playouts,
/// most-visited root action.
class RlPlanner final : public Planner {
 public:
  RlPlanner(const WorldModel& world, std::shared_ptr<const Network> net, SearchConfig search);

  std::string name() const override { return "rl"; }
  void reset(std::uint64_t seed) override;
  std::optional<int> plan(const PlanningContext& ctx) override;

  const std::optional<SearchResult>& last_search() const { return last_; }

 private:
  const WorldModel* world_;
  std::shared_ptr<const Network> net_;
  Featurizer featurizer_;
  SearchConfig search_;
  std::deque<FrameSummary> history_;
  std::optional<SearchResult> last_;
};

}  // namespace ipp
