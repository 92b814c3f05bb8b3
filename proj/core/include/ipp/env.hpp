#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "ipp/kernel.hpp"

namespace ipp {

/// Square terrain discretized into grid_dim x grid_dim cells, mirrored on a
/// set of altitude levels to form the action lattice.
struct TerrainSpec {
  double side_length = 40.0;
  double resolution = 4.0;
  std::vector<double> altitudes{8.0, 14.0};

  int grid_dim() const;
  int cell_count() const { return grid_dim() * grid_dim(); }
  int levels() const { return static_cast<int>(altitudes.size()); }
  int action_count() const { return levels() * cell_count(); }
  void validate() const;
};

/// Trapezoidal velocity profile: accelerate at `accel`, cruise at `max_speed`,
/// decelerate at `accel`.
struct KinematicsModel {
  double accel = 2.0;
  double max_speed = 2.0;

  void validate() const;
};

/// Downward-facing square camera with altitude-dependent Gaussian noise.
struct SensorModel {
  double fov_degrees = 60.0;
  double base_noise_var = 0.05;
  double altitude_noise_coeff = 0.05;

  double half_width(double altitude) const;
  /// base_noise_var * (1 + altitude_noise_coeff * z^2)
  double noise_variance(double altitude) const;
  void validate() const;
};

struct Position {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  friend bool operator==(const Position&, const Position&) = default;
};

double distance(const Position& a, const Position& b);

/// A lattice point: a cell center at one of the configured altitudes.
struct MeasurementPose {
  Position position;
  int action_index = -1;

  friend bool operator==(const MeasurementPose&, const MeasurementPose&) = default;
};

/// Bijection between action indices and lattice poses.
///
/// Index layout: level * g^2 + row * g + col, where cell (row, col) has its
/// center at x = (col + 0.5) * r, y = (row + 0.5) * r.
class ActionLattice {
 public:
  explicit ActionLattice(TerrainSpec spec);

  const TerrainSpec& spec() const { return spec_; }
  int grid_dim() const { return g_; }
  int size() const { return static_cast<int>(poses_.size()); }

  const MeasurementPose& pose(int action) const { return poses_.at(action); }
  int index_of(int level, int row, int col) const {
    return level * g_ * g_ + row * g_ + col;
  }
  int level_of(int action) const { return action / (g_ * g_); }
  int cell_of(int action) const { return action % (g_ * g_); }
  Position cell_center(int cell, double z) const;

  /// Nearest lattice action to an arbitrary point (ties to the lowest index).
  int nearest(const Position& p) const;

  Position lower_bound() const;
  Position upper_bound() const;

 private:
  TerrainSpec spec_;
  int g_;
  std::vector<MeasurementPose> poses_;
};

/// Row-major grid_dim x grid_dim field with values in [0, 1].
struct GroundTruthField {
  int grid_dim = 0;
  Eigen::VectorXd values;

  double at(int row, int col) const { return values[row * grid_dim + col]; }
};

/// Smooth GP draw plus 1-3 Gaussian hotspots, min-max normalized. Redraws
/// (deterministically) until between 5% and 95% of cells reach `threshold`.
GroundTruthField generate_ground_truth(std::uint64_t seed, const TerrainSpec& spec,
                                      const KernelSpec& kernel, double threshold);

/// Flight time between two points under the accel-decel model.
double travel_time(const Position& from, const Position& to, const KinematicsModel& kin);
inline double travel_time(const MeasurementPose& from, const MeasurementPose& to,
                          const KinematicsModel& kin) {
  return travel_time(from.position, to.position, kin);
}

/// Cells whose centers lie inside the square footprint below `p`, sorted.
/// Never empty: falls back to the cell under `p`.
std::vector<int> footprint_cells(const Position& p, const TerrainSpec& spec,
                                 const SensorModel& sensor);

struct Measurement {
  std::vector<int> cells;
  Eigen::VectorXd values;
  double noise_variance = 0.0;
};

Measurement measure(const GroundTruthField& field, const Position& p,
                    const TerrainSpec& spec, const SensorModel& sensor,
                    std::uint64_t seed);

/// Actions other than `current` reachable within `remaining_budget` seconds,
/// optionally restricted to a Euclidean ball of `radius` meters. Sorted by
/// action index; empty means the episode is over.
std::vector<int> reachable_actions(const ActionLattice& lattice, int current,
                                   double remaining_budget,
                                   std::optional<double> radius,
                                   const KinematicsModel& kin);

}  // namespace ipp
