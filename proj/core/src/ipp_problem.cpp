#include "ipp/ipp_problem.hpp"

#include <fmt/format.h>

#include "ipp/error.hpp"

namespace ipp {

namespace {

bool history_for(const WorldModel& world, const NetConfig& cfg) {
  const int levels = world.terrain().levels();
  if (cfg.input_planes == feature_plane_count(levels, true)) return true;
  if (cfg.input_planes == feature_plane_count(levels, false)) return false;
  throw ConfigError(fmt::format("network takes {} input planes; {} altitude levels need {} or {}",
                                cfg.input_planes, levels, feature_plane_count(levels, true),
                                feature_plane_count(levels, false)));
}

}  // namespace

FrameSummary IppProblem::frame(const State& s) const {
  return featurizer_->frame(*s.belief, world_->interest(*s.belief), s.pose, s.budget);
}

FeatureStack IppProblem::features(const State& s) const {
  return featurizer_->build(frame(s), s.pose, s.history);
}

std::pair<IppState, double> IppProblem::step(const State& s, int action) const {
  WorldModel::Transition t = world_->imagine(*s.belief, s.pose, action);
  State next;
  next.belief = std::make_shared<const GridMapBelief>(std::move(t.posterior));
  next.pose = action;
  next.budget = s.budget - t.cost;
  if (featurizer_->with_history()) {
    next.history.push_back(frame(s));
    if (!s.history.empty()) next.history.push_back(s.history.front());
  }
  return {std::move(next), t.reward};
}

std::pair<std::vector<double>, double> IppProblem::evaluate(const State& s,
                                                           std::span<const int> actions) const {
  const NetOutput<float> out = net_->forward(features(s), actions);
  std::vector<double> priors;
  priors.reserve(actions.size());
  for (int a : actions) priors.push_back(out.policy[static_cast<std::size_t>(a)]);
  return {std::move(priors), static_cast<double>(out.value)};
}

RlPlanner::RlPlanner(const WorldModel& world, std::shared_ptr<const Network> net,
                     SearchConfig search)
    : world_(&world),
      net_(std::move(net)),
      featurizer_(world.lattice(), world.kinematics(), world.total_budget(),
                  history_for(world, net_->config())),
      search_(search) {
  if (net_->config().action_levels != world.terrain().levels())
    throw ConfigError(fmt::format("network has {} altitude levels, terrain has {}",
                                  net_->config().action_levels, world.terrain().levels()));
  search_.validate();
}

void RlPlanner::reset(std::uint64_t) {
  history_.clear();
  last_.reset();
}

std::optional<int> RlPlanner::plan(const PlanningContext& ctx) {
  const IppProblem problem(*world_, featurizer_, *net_);
  IppState root;
  root.belief = std::make_shared<const GridMapBelief>(ctx.belief);
  root.pose = ctx.pose;
  root.budget = ctx.budget;
  root.history.assign(history_.begin(), history_.end());

  // The current frame becomes history for the next call either way.
  history_.push_front(problem.frame(root));
  if (history_.size() > 2) history_.pop_back();

  if (problem.actions(root).empty()) {
    last_.reset();
    return std::nullopt;
  }
  TreeSearch<IppProblem> search(problem, search_);
  last_ = search.run(root, false);
  return last_->best_action();
}

}  // namespace ipp
