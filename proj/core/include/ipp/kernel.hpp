#pragma once

#include <cmath>

namespace ipp {

/// Matérn-3/2 covariance parameters. Distances are in meters.
struct KernelSpec {
  double length_scale = 3.67;
  double signal_variance = 1.82;
  // Only the ground-truth generator uses this as a nugget; the map prior does
  // not include it.
  double noise_variance = 1.42;

  void validate() const;
};

inline double matern32(double distance, const KernelSpec& k) {
  const double s = std::sqrt(3.0) * distance / k.length_scale;
  return k.signal_variance * (1.0 + s) * std::exp(-s);
}

}  // namespace ipp
