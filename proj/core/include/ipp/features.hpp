#pragma once

#include <array>
#include <span>
#include <vector>

#include "ipp/env.hpp"
#include "ipp/mapping.hpp"

namespace ipp {

/// Bumped whenever the plane packing below changes; stored in checkpoints.
inline constexpr int kPlaneLayoutVersion = 1;

/// Plane packing (levels = number of altitudes, L):
///   0            variance over the interest set, min-max normalized
///   1            remaining budget / total budget
///   2, 3, 4      current x, y, z normalized to the lattice bounds
///   5 .. 5+L-1   flight time from every lattice pose of each level to the
///                current pose, jointly min-max normalized
///   then, with history, two previous frames of (variance, budget, x, y, z),
///   most recent first.
/// Constant planes normalize to 0 under min-max.
int feature_plane_count(int levels, bool with_history);

/// The per-step part of the input that is carried along as history.
struct FrameSummary {
  std::vector<float> variance;
  float budget = 0.0f;
  std::array<float, 3> position{};
};

struct FeatureStack {
  int planes = 0;
  int grid_dim = 0;
  std::vector<float> data;

  int cells() const { return grid_dim * grid_dim; }
  std::span<const float> plane(int p) const {
    return {data.data() + static_cast<std::size_t>(p) * cells(), static_cast<std::size_t>(cells())};
  }
};

class Featurizer {
 public:
  Featurizer(const ActionLattice& lattice, KinematicsModel kin, double total_budget,
             bool with_history);

  int planes() const;
  bool with_history() const { return with_history_; }

  FrameSummary frame(const GridMapBelief& belief, std::span<const int> interest, int pose,
                     double budget) const;

  /// `history` holds up to two earlier frames, most recent first. Missing
  /// frames repeat the oldest one available, or `current` at episode start.
  FeatureStack build(const FrameSummary& current, int pose,
                     std::span<const FrameSummary> history) const;

 private:
  const ActionLattice* lattice_;
  KinematicsModel kin_;
  double total_budget_;
  bool with_history_;
};

}  // namespace ipp
