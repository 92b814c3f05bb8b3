#include "ipp/world.hpp"

#include "ipp/error.hpp"

namespace ipp {

WorldModel::WorldModel(TerrainSpec terrain, KinematicsModel kin, SensorModel sensor,
                       InterestRegionSpec interest, std::optional<double> radius,
                       double total_budget)
    : lattice_(std::move(terrain)),
      kin_(kin),
      sensor_(sensor),
      interest_(interest),
      radius_(radius),
      total_budget_(total_budget) {
  kin_.validate();
  sensor_.validate();
  interest_.validate();
  if (radius_ && !(*radius_ > 0.0)) throw ConfigError("radius must be > 0");
  if (!(total_budget_ > 0.0)) throw ConfigError("budget must be > 0");

  const int n = lattice_.size();
  footprints_.resize(static_cast<std::size_t>(n));
  noise_.resize(static_cast<std::size_t>(n));
  for (int a = 0; a < n; ++a) {
    const Position& p = lattice_.pose(a).position;
    footprints_[static_cast<std::size_t>(a)] = footprint_cells(p, lattice_.spec(), sensor_);
    noise_[static_cast<std::size_t>(a)] = sensor_.noise_variance(p.z);
  }
  costs_.resize(static_cast<std::size_t>(n) * static_cast<std::size_t>(n));
  distances_.resize(costs_.size());
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      const Position& pa = lattice_.pose(a).position;
      const Position& pb = lattice_.pose(b).position;
      costs_[index(a, b)] = travel_time(pa, pb, kin_);
      distances_[index(a, b)] = ipp::distance(pa, pb);
    }
}

std::vector<int> WorldModel::reachable(int pose, double budget) const {
  std::vector<int> out;
  if (!(budget > 0.0)) return out;
  for (int a = 0; a < lattice_.size(); ++a) {
    if (a == pose) continue;
    if (radius_ && distances_[index(pose, a)] > *radius_ + 1e-9) continue;
    if (costs_[index(pose, a)] <= budget + 1e-12) out.push_back(a);
  }
  return out;
}

WorldModel::Transition WorldModel::imagine(const GridMapBelief& belief, int from, int to) const {
  const std::span<const int> cells = footprint(to);
  Eigen::VectorXd values(static_cast<Eigen::Index>(cells.size()));
  for (std::size_t i = 0; i < cells.size(); ++i)
    values[static_cast<Eigen::Index>(i)] = belief.mean[cells[i]];
  Transition t;
  t.posterior = kalman_fuse(belief, cells, values, noise_variance(to));
  t.cost = cost(from, to);
  if (!(t.cost > 0.0)) throw ContractViolation("imagine: zero travel cost (identical poses)");
  const std::vector<int> region = interest(belief);
  t.reward = information_value(belief.cov, t.posterior.cov, region) / t.cost;
  return t;
}

double WorldModel::imagined_reward(const GridMapBelief& belief, std::span<const int> interest,
                                   int from, int to) const {
  return predicted_trace_reduction(belief, footprint(to), noise_variance(to), interest) /
         cost(from, to);
}

}  // namespace ipp
