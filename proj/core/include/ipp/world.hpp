#pragma once

#include <optional>
#include <span>
#include <vector>

#include "ipp/env.hpp"
#include "ipp/mapping.hpp"

namespace ipp {

/// Everything a planner may know about the mission apart from the belief:
/// lattice, motion and sensor models, interest-region rule and budget.
/// Footprints, noise levels and pairwise flight times are precomputed.
class WorldModel {
 public:
  WorldModel(TerrainSpec terrain, KinematicsModel kin, SensorModel sensor,
             InterestRegionSpec interest, std::optional<double> radius, double total_budget);

  const ActionLattice& lattice() const { return lattice_; }
  const TerrainSpec& terrain() const { return lattice_.spec(); }
  const KinematicsModel& kinematics() const { return kin_; }
  const SensorModel& sensor() const { return sensor_; }
  const InterestRegionSpec& interest_spec() const { return interest_; }
  std::optional<double> radius() const { return radius_; }
  double total_budget() const { return total_budget_; }
  int action_count() const { return lattice_.size(); }

  std::span<const int> footprint(int action) const { return footprints_.at(action); }
  double noise_variance(int action) const { return noise_.at(action); }
  double cost(int from, int to) const { return costs_[index(from, to)]; }
  double distance(int from, int to) const { return distances_[index(from, to)]; }

  std::vector<int> interest(const GridMapBelief& belief) const {
    return interest_set(belief, interest_);
  }

  /// Same result as reachable_actions() on this lattice.
  std::vector<int> reachable(int pose, double budget) const;

  struct Transition {
    GridMapBelief posterior;
    double reward = 0.0;
    double cost = 0.0;
  };

  /// Fusion of the maximum-likelihood measurement at `to` (the current mean
  /// over the footprint). Only the covariance changes. The reward uses the
  /// interest set of `belief`.
  Transition imagine(const GridMapBelief& belief, int from, int to) const;

  /// The reward of imagine() without forming the posterior.
  double imagined_reward(const GridMapBelief& belief, std::span<const int> interest, int from,
                         int to) const;

 private:
  std::size_t index(int from, int to) const {
    return static_cast<std::size_t>(from) * static_cast<std::size_t>(lattice_.size()) +
           static_cast<std::size_t>(to);
  }

  ActionLattice lattice_;
  KinematicsModel kin_;
  SensorModel sensor_;
  InterestRegionSpec interest_;
  std::optional<double> radius_;
  double total_budget_;
  std::vector<std::vector<int>> footprints_;
  std::vector<double> noise_;
  std::vector<double> costs_;
  std::vector<double> distances_;
};

}  // namespace ipp
