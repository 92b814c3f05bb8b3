#include "ipp/baselines.hpp"

#include "ipp/cmaes.hpp"
#include "ipp/error.hpp"

namespace ipp {

std::optional<int> RandomPlanner::plan(const PlanningContext& ctx) {
  const std::vector<int> reachable = world_->reachable(ctx.pose, ctx.budget);
  if (reachable.empty()) return std::nullopt;
  std::uniform_int_distribution<std::size_t> pick(0, reachable.size() - 1);
  return reachable[pick(rng_)];
}

namespace {

/// Line positions along one axis, `stride` cells apart, covering [0, g).
std::vector<int> sweep_lines(int g, int reach) {
  const int stride = 2 * reach + 1;
  std::vector<int> lines;
  for (int p = std::min(reach, g - 1); p < g; p += stride) lines.push_back(p);
  if (lines.back() + reach < g - 1) lines.push_back(g - 1 - reach);
  return lines;
}

int closest_level(const TerrainSpec& spec, double altitude) {
  int best = 0;
  for (int l = 1; l < spec.levels(); ++l)
    if (std::abs(spec.altitudes[l] - altitude) < std::abs(spec.altitudes[best] - altitude)) best = l;
  return best;
}

}  // namespace

std::vector<int> coverage_waypoints(const WorldModel& world, double altitude, int start) {
  const ActionLattice& lattice = world.lattice();
  const int g = lattice.grid_dim();
  const int level = closest_level(world.terrain(), altitude);
  const double half_width = world.sensor().half_width(world.terrain().altitudes[level]);
  const int reach = static_cast<int>(std::floor(half_width / world.terrain().resolution + 1e-9));
  const std::vector<int> lines = sweep_lines(g, reach);

  std::vector<int> best;
  double best_distance = std::numeric_limits<double>::infinity();
  for (int variant = 0; variant < 4; ++variant) {
    std::vector<int> rows = lines, cols = lines;
    if (variant & 1) std::reverse(rows.begin(), rows.end());
    if (variant & 2) std::reverse(cols.begin(), cols.end());
    std::vector<int> path;
    for (std::size_t r = 0; r < rows.size(); ++r) {
      for (std::size_t c = 0; c < cols.size(); ++c) {
        const std::size_t k = r % 2 == 0 ? c : cols.size() - 1 - c;
        path.push_back(lattice.index_of(level, rows[r], cols[k]));
      }
    }
    const double d = world.distance(start, path.front());
    if (d < best_distance - 1e-12) {
      best_distance = d;
      best = std::move(path);
    }
  }
  return best;
}

std::optional<int> CoveragePlanner::plan(const PlanningContext& ctx) {
  if (path_.empty()) {
    path_ = coverage_waypoints(*world_, altitude_, ctx.pose);
    next_ = 0;
  }
  while (next_ < path_.size() && path_[next_] == ctx.pose) ++next_;
  if (next_ >= path_.size()) return std::nullopt;
  const int target = path_[next_];
  if (world_->cost(ctx.pose, target) > ctx.budget) return std::nullopt;
  ++next_;
  return target;
}

void MctsPwConfig::validate() const {
  if (num_simulations < 1) throw ConfigError("mcts_pw.num_simulations must be >= 1");
  if (max_depth < 1) throw ConfigError("mcts_pw.max_depth must be >= 1");
  if (rollout_depth < 0) throw ConfigError("mcts_pw.rollout_depth must be >= 0");
  if (rollout_candidates < 1) throw ConfigError("mcts_pw.rollout_candidates must be >= 1");
  if (!(widening_k > 0.0)) throw ConfigError("mcts_pw.widening_k must be > 0");
  if (!(widening_alpha > 0.0 && widening_alpha <= 1.0))
    throw ConfigError("mcts_pw.widening_alpha must be in (0, 1]");
  if (!(exploration >= 0.0)) throw ConfigError("mcts_pw.exploration must be >= 0");
  if (radius && !(*radius > 0.0)) throw ConfigError("mcts_pw.radius must be > 0");
}

int MctsPwResult::best_action() const {
  if (actions.empty()) throw ContractViolation("mcts result is empty");
  std::size_t best = 0;
  for (std::size_t i = 1; i < actions.size(); ++i)
    if (visits[i] > visits[best] || (visits[i] == visits[best] && actions[i] < actions[best]))
      best = i;
  return actions[best];
}

std::vector<int> IppRolloutProblem::actions(const State& s) const {
  std::vector<int> out = world_->reachable(s.pose, s.budget);
  if (radius_)
    std::erase_if(out, [&](int a) { return world_->distance(s.pose, a) > *radius_ + 1e-9; });
  return out;
}

std::pair<IppRolloutProblem::State, double> IppRolloutProblem::step(const State& s,
                                                                     int action) const {
  WorldModel::Transition t = world_->imagine(*s.belief, s.pose, action);
  State next{std::make_shared<const GridMapBelief>(std::move(t.posterior)), action,
             s.budget - t.cost};
  return {std::move(next), t.reward};
}

std::optional<int> IppRolloutProblem::rollout_action(const State& s, Rng& rng) const {
  std::vector<int> acts = actions(s);
  if (acts.empty()) return std::nullopt;
  const std::size_t k = std::min(acts.size(), static_cast<std::size_t>(candidates_));
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, acts.size() - 1);
    std::swap(acts[i], acts[pick(rng)]);
  }
  const std::vector<int> region = world_->interest(*s.belief);
  int best = acts[0];
  double best_reward = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < k; ++i) {
    const double r = world_->imagined_reward(*s.belief, region, s.pose, acts[i]);
    if (r > best_reward) {
      best_reward = r;
      best = acts[i];
    }
  }
  return best;
}

std::optional<int> MctsPwPlanner::plan(const PlanningContext& ctx) {
  const IppRolloutProblem problem(*world_, cfg_.radius, cfg_.rollout_candidates);
  IppRolloutProblem::State root{std::make_shared<const GridMapBelief>(ctx.belief), ctx.pose,
                                ctx.budget};
  if (problem.actions(root).empty()) return std::nullopt;
  MctsPw<IppRolloutProblem> search(problem, cfg_);
  return search.run(root, rng_).best_action();
}

void CmaEsConfig::validate() const {
  if (iterations < 0) throw ConfigError("cmaes.iterations must be >= 0");
  if (offspring < 2) throw ConfigError("cmaes.offspring must be >= 2");
  if (!(sigma_xy > 0.0 && sigma_z > 0.0)) throw ConfigError("cmaes step sizes must be > 0");
  if (horizon < 1) throw ConfigError("cmaes.horizon must be >= 1");
}

double trajectory_objective(const WorldModel& world, const GridMapBelief& belief, int pose,
                            double budget, const Eigen::VectorXd& waypoints) {
  const ActionLattice& lattice = world.lattice();
  const Position lo = lattice.lower_bound(), hi = lattice.upper_bound();
  const auto horizon = waypoints.size() / 3;

  std::vector<int> plan;
  int previous = pose;
  double cost = 0.0;
  for (Eigen::Index w = 0; w < horizon; ++w) {
    const Position p{std::clamp(waypoints[3 * w], lo.x, hi.x),
                     std::clamp(waypoints[3 * w + 1], lo.y, hi.y),
                     std::clamp(waypoints[3 * w + 2], lo.z, hi.z)};
    const int a = lattice.nearest(p);
    if (a == previous) {
      if (w == 0) return 0.0;
      continue;
    }
    const double c = world.cost(previous, a);
    if (cost + c > budget) {
      if (w == 0) return 0.0;
      break;
    }
    cost += c;
    plan.push_back(a);
    previous = a;
  }

  double info = 0.0;
  GridMapBelief b = belief;
  previous = pose;
  for (std::size_t i = 0; i < plan.size(); ++i) {
    const std::vector<int> region = world.interest(b);
    if (i + 1 == plan.size()) {
      info += world.imagined_reward(b, region, previous, plan[i]) * world.cost(previous, plan[i]);
    } else {
      WorldModel::Transition t = world.imagine(b, previous, plan[i]);
      info += t.reward * t.cost;
      b = std::move(t.posterior);
    }
    previous = plan[i];
  }
  return info / cost;
}

CmaEsPlanner::CmaEsPlanner(const WorldModel& world, CmaEsConfig config)
    : world_(&world), cfg_(config) {
  cfg_.validate();
}

std::optional<int> CmaEsPlanner::plan(const PlanningContext& ctx) {
  const std::optional<Plan> p = plan_detailed(ctx);
  if (!p) return std::nullopt;
  return p->action;
}

std::optional<CmaEsPlanner::Plan> CmaEsPlanner::plan_detailed(const PlanningContext& ctx) {
  const std::vector<int> reachable = world_->reachable(ctx.pose, ctx.budget);
  if (reachable.empty()) return std::nullopt;
  const ActionLattice& lattice = world_->lattice();

  // Greedy chain of one-step cost-benefit choices as the initial mean.
  Eigen::VectorXd mean(3 * cfg_.horizon);
  GridMapBelief b = ctx.belief;
  int previous = ctx.pose;
  double remaining = ctx.budget;
  int first_greedy = -1;
  for (int w = 0; w < cfg_.horizon; ++w) {
    const std::vector<int> options = world_->reachable(previous, remaining);
    int choice = previous;
    if (!options.empty()) {
      const std::vector<int> region = world_->interest(b);
      double best = -std::numeric_limits<double>::infinity();
      for (int a : options) {
        const double r = world_->imagined_reward(b, region, previous, a);
        if (r > best) {
          best = r;
          choice = a;
        }
      }
      WorldModel::Transition t = world_->imagine(b, previous, choice);
      b = std::move(t.posterior);
      remaining -= t.cost;
    }
    if (w == 0) first_greedy = choice;
    const Position& p = lattice.pose(choice).position;
    mean.segment<3>(3 * w) << p.x, p.y, p.z;
    previous = choice;
  }

  auto objective = [&](const Eigen::VectorXd& x) {
    return -trajectory_objective(*world_, ctx.belief, ctx.pose, ctx.budget, x);
  };
  Eigen::VectorXd sigma(3 * cfg_.horizon);
  for (int w = 0; w < cfg_.horizon; ++w) sigma.segment<3>(3 * w) << cfg_.sigma_xy, cfg_.sigma_xy, cfg_.sigma_z;
  CmaEs es(mean, sigma, cfg_.offspring, derive_seed(seed_, {0x636d61ULL, calls_++}));
  const CmaEs::Result r = es.minimize(objective, cfg_.iterations);

  Plan out;
  out.greedy_objective = -objective(mean);
  out.objective = -r.best_value;
  const Position lo = lattice.lower_bound(), hi = lattice.upper_bound();
  const int first = lattice.nearest({std::clamp(r.best[0], lo.x, hi.x),
                                     std::clamp(r.best[1], lo.y, hi.y),
                                     std::clamp(r.best[2], lo.z, hi.z)});
  const bool valid = std::binary_search(reachable.begin(), reachable.end(), first);
  out.action = valid ? first : first_greedy;
  return out;
}

}  // namespace ipp
