#include "ipp/mapping.hpp"

#include <Eigen/Cholesky>

#include "ipp/error.hpp"

namespace ipp {

void InterestRegionSpec::validate() const {
  if (!(beta >= 0.0)) throw ConfigError("interest.beta must be >= 0");
}

Eigen::MatrixXd matern_covariance(const TerrainSpec& spec, const KernelSpec& kernel) {
  const int g = spec.grid_dim();
  const int n = g * g;
  const double r = spec.resolution;
  Eigen::MatrixXd k(n, n);
  for (int i = 0; i < n; ++i) {
    const double xi = (i % g) * r, yi = (i / g) * r;
    for (int j = i; j < n; ++j) {
      const double dx = xi - (j % g) * r, dy = yi - (j / g) * r;
      k(i, j) = k(j, i) = matern32(std::sqrt(dx * dx + dy * dy), kernel);
    }
  }
  return k;
}

GridMapBelief build_prior(const TerrainSpec& spec, const KernelSpec& kernel, double prior_mean) {
  kernel.validate();
  GridMapBelief b;
  b.cov = matern_covariance(spec, kernel);
  b.mean = Eigen::VectorXd::Constant(b.cov.rows(), prior_mean);
  return b;
}

namespace {

Eigen::MatrixXd rows_of(const Eigen::MatrixXd& p, std::span<const int> cells) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(cells.size()), p.cols());
  for (std::size_t i = 0; i < cells.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = p.row(cells[i]);
  return out;
}

Eigen::MatrixXd innovation_matrix(const Eigen::MatrixXd& cov, std::span<const int> cells,
                                  double noise_var) {
  const auto m = static_cast<Eigen::Index>(cells.size());
  Eigen::MatrixXd s(m, m);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j) s(i, j) = cov(cells[static_cast<std::size_t>(i)], cells[static_cast<std::size_t>(j)]);
  s.diagonal().array() += noise_var;
  return s;
}

Eigen::LLT<Eigen::MatrixXd> factor(const Eigen::MatrixXd& s) {
  Eigen::LLT<Eigen::MatrixXd> llt(s);
  if (llt.info() != Eigen::Success)
    throw NumericalError("innovation covariance is not positive definite");
  return llt;
}

void check_fusion_args(const GridMapBelief& belief, std::span<const int> cells, double noise_var) {
  if (cells.empty()) throw ContractViolation("kalman_fuse: no observed cells");
  if (!(noise_var > 0.0)) throw ContractViolation("kalman_fuse: noise variance must be > 0");
  for (int c : cells)
    if (c < 0 || c >= belief.size()) throw ContractViolation("kalman_fuse: cell index out of range");
}

}  // namespace

GridMapBelief kalman_fuse(const GridMapBelief& belief, std::span<const int> cells,
                          const Eigen::VectorXd& values, double noise_var) {
  check_fusion_args(belief, cells, noise_var);
  if (values.size() != static_cast<Eigen::Index>(cells.size()))
    throw ContractViolation("kalman_fuse: one value per observed cell required");

  // H P: the observed rows of P (m x n).
  const Eigen::MatrixXd hp = rows_of(belief.cov, cells);
  const Eigen::MatrixXd s = innovation_matrix(belief.cov, cells, noise_var);
  const auto llt = factor(s);
  // K^T = S^-1 H P (m x n).
  const Eigen::MatrixXd gain_t = llt.solve(hp);

  Eigen::VectorXd residual(values.size());
  for (Eigen::Index i = 0; i < values.size(); ++i)
    residual[i] = values[i] - belief.mean[cells[static_cast<std::size_t>(i)]];

  GridMapBelief out;
  out.mean = belief.mean + gain_t.transpose() * residual;

  // Joseph form with a selection H:
  //   (I - KH) P (I - KH)^T + K R K^T = P - K HP - (K HP)^T + K S K^T
  const Eigen::MatrixXd k_hp = gain_t.transpose() * hp;
  const Eigen::MatrixXd k_s_kt = gain_t.transpose() * (s * gain_t);
  out.cov = belief.cov - k_hp - k_hp.transpose() + k_s_kt;
  out.cov = 0.5 * (out.cov + out.cov.transpose()).eval();
  return out;
}

double predicted_trace_reduction(const GridMapBelief& belief, std::span<const int> cells,
                                 double noise_var, std::span<const int> interest) {
  check_fusion_args(belief, cells, noise_var);
  if (interest.empty()) return 0.0;
  const auto m = static_cast<Eigen::Index>(cells.size());
  Eigen::MatrixXd cross(m, static_cast<Eigen::Index>(interest.size()));
  for (Eigen::Index i = 0; i < m; ++i)
    for (std::size_t j = 0; j < interest.size(); ++j)
      cross(i, static_cast<Eigen::Index>(j)) = belief.cov(cells[static_cast<std::size_t>(i)], interest[j]);
  const auto llt = factor(innovation_matrix(belief.cov, cells, noise_var));
  // sum_i P_{i,F} S^-1 P_{F,i}
  return (cross.array() * llt.solve(cross).array()).sum();
}

std::vector<int> interest_set(const GridMapBelief& belief, const InterestRegionSpec& spec) {
  std::vector<int> out;
  for (int i = 0; i < belief.size(); ++i)
    if (belief.mean[i] + spec.beta * belief.cov(i, i) >= spec.threshold) out.push_back(i);
  return out;
}

double restricted_trace(const Eigen::MatrixXd& cov, std::span<const int> cells) {
  double t = 0.0;
  for (int c : cells) t += cov(c, c);
  return t;
}

double information_value(const Eigen::MatrixXd& before, const Eigen::MatrixXd& after,
                         std::span<const int> interest) {
  if (before.rows() != after.rows() || before.cols() != after.cols())
    throw ContractViolation("information_value: covariance shapes differ");
  return restricted_trace(before, interest) - restricted_trace(after, interest);
}

double reward(const Eigen::MatrixXd& before, const Eigen::MatrixXd& after,
              std::span<const int> interest, const MeasurementPose& previous,
              const MeasurementPose& next, const KinematicsModel& kin) {
  const double cost = travel_time(previous, next, kin);
  if (!(cost > 0.0)) throw ContractViolation("reward: zero travel cost (identical poses)");
  return information_value(before, after, interest) / cost;
}

}  // namespace ipp
