#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Core>

#include "ipp/rng.hpp"

namespace ipp {

/// (mu/mu_w, lambda)-CMA-ES with cumulative step-size adaptation, rank-one
/// and rank-mu covariance updates, minimizing f. Default constants follow
/// Hansen's tutorial.
class CmaEs {
 public:
  /// `sigma` holds per-coordinate initial step sizes.
  CmaEs(Eigen::VectorXd mean, Eigen::VectorXd sigma, int lambda, std::uint64_t seed);

  int dimension() const { return static_cast<int>(mean_.size()); }
  int lambda() const { return lambda_; }
  const Eigen::VectorXd& mean() const { return mean_; }
  double step_size() const { return sigma_; }

  std::vector<Eigen::VectorXd> ask();
  /// `fitness[i]` belongs to the i-th point of the last ask().
  void tell(const std::vector<double>& fitness);

  struct Result {
    Eigen::VectorXd best;
    double best_value = 0.0;
    int evaluations = 0;
  };

  /// ask/tell for `iterations` generations. Elitist bookkeeping only: the
  /// returned point is the best ever evaluated, including `mean` itself.
  Result minimize(const std::function<double(const Eigen::VectorXd&)>& f, int iterations);

 private:
  void update_eigensystem();

  int lambda_;
  int mu_;
  Eigen::VectorXd weights_;
  double mueff_, cc_, cs_, c1_, cmu_, damps_, chi_n_;
  Eigen::VectorXd mean_;
  double sigma_ = 1.0;
  Eigen::MatrixXd cov_, basis_;
  Eigen::VectorXd scales_;  // sqrt of the eigenvalues of cov_
  Eigen::VectorXd pc_, ps_;
  std::vector<Eigen::VectorXd> offspring_, steps_;
  int generation_ = 0;
  Rng rng_;
};

}  // namespace ipp
