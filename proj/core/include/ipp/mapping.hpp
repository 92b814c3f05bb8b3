#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

#include "ipp/env.hpp"
#include "ipp/kernel.hpp"

namespace ipp {

/// Gaussian belief over the terrain cells.
struct GridMapBelief {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;

  int size() const { return static_cast<int>(mean.size()); }
  Eigen::VectorXd variances() const { return cov.diagonal(); }
};

/// Confidence-bound level set: cells with mean + beta * variance >= threshold.
struct InterestRegionSpec {
  double beta = 1.0;
  double threshold = 0.4;

  void validate() const;
};

/// Matérn-3/2 covariance between all cell centers (no nugget).
Eigen::MatrixXd matern_covariance(const TerrainSpec& spec, const KernelSpec& kernel);

GridMapBelief build_prior(const TerrainSpec& spec, const KernelSpec& kernel,
                          double prior_mean);

/// Kalman update with a selection observation matrix over `cells` and
/// R = noise_var * I. Covariance uses the Joseph form and is symmetrized.
/// Throws NumericalError if the innovation covariance is not positive definite.
GridMapBelief kalman_fuse(const GridMapBelief& belief, std::span<const int> cells,
                          const Eigen::VectorXd& values, double noise_var);

/// Restricted-trace reduction that kalman_fuse would produce, without forming
/// the posterior. O(n m^2) instead of O(n^2 m).
double predicted_trace_reduction(const GridMapBelief& belief,
                                 std::span<const int> cells, double noise_var,
                                 std::span<const int> interest);

std::vector<int> interest_set(const GridMapBelief& belief, const InterestRegionSpec& spec);

double restricted_trace(const Eigen::MatrixXd& cov, std::span<const int> cells);

/// Tr(P_before) - Tr(P_after), both restricted to `interest`.
double information_value(const Eigen::MatrixXd& before, const Eigen::MatrixXd& after,
                         std::span<const int> interest);

/// Information gain per second of flight. Throws ContractViolation when the
/// two poses coincide.
double reward(const Eigen::MatrixXd& before, const Eigen::MatrixXd& after,
              std::span<const int> interest, const MeasurementPose& previous,
              const MeasurementPose& next, const KinematicsModel& kin);

}  // namespace ipp
