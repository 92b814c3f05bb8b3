#include "ipp/cmaes.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <Eigen/Eigenvalues>

#include "ipp/error.hpp"

namespace ipp {

CmaEs::CmaEs(Eigen::VectorXd mean, Eigen::VectorXd sigma, int lambda, std::uint64_t seed)
    : lambda_(lambda), mean_(std::move(mean)), rng_(seed) {
  const auto n = mean_.size();
  if (n < 1) throw ContractViolation("cmaes: empty search space");
  if (sigma.size() != n || (sigma.array() <= 0.0).any())
    throw ContractViolation("cmaes: one positive step size per coordinate required");
  if (lambda_ < 2) throw ContractViolation("cmaes: lambda must be >= 2");

  mu_ = lambda_ / 2;
  weights_.resize(mu_);
  for (int i = 0; i < mu_; ++i) weights_[i] = std::log(mu_ + 0.5) - std::log(i + 1.0);
  weights_ /= weights_.sum();
  mueff_ = 1.0 / weights_.squaredNorm();

  const double dn = static_cast<double>(n);
  cc_ = (4.0 + mueff_ / dn) / (dn + 4.0 + 2.0 * mueff_ / dn);
  cs_ = (mueff_ + 2.0) / (dn + mueff_ + 5.0);
  c1_ = 2.0 / ((dn + 1.3) * (dn + 1.3) + mueff_);
  cmu_ = std::min(1.0 - c1_, 2.0 * (mueff_ - 2.0 + 1.0 / mueff_) / ((dn + 2.0) * (dn + 2.0) + mueff_));
  damps_ = 1.0 + 2.0 * std::max(0.0, std::sqrt((mueff_ - 1.0) / (dn + 1.0)) - 1.0) + cs_;
  chi_n_ = std::sqrt(dn) * (1.0 - 1.0 / (4.0 * dn) + 1.0 / (21.0 * dn * dn));

  cov_ = sigma.array().square().matrix().asDiagonal();
  pc_ = Eigen::VectorXd::Zero(n);
  ps_ = Eigen::VectorXd::Zero(n);
  update_eigensystem();
}

void CmaEs::update_eigensystem() {
  cov_ = 0.5 * (cov_ + cov_.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov_);
  basis_ = eig.eigenvectors();
  scales_ = eig.eigenvalues().cwiseMax(1e-300).cwiseSqrt();
}

std::vector<Eigen::VectorXd> CmaEs::ask() {
  std::normal_distribution<double> normal;
  const auto n = mean_.size();
  offspring_.assign(static_cast<std::size_t>(lambda_), Eigen::VectorXd());
  steps_.assign(static_cast<std::size_t>(lambda_), Eigen::VectorXd());
  for (int k = 0; k < lambda_; ++k) {
    Eigen::VectorXd z(n);
    for (Eigen::Index i = 0; i < n; ++i) z[i] = normal(rng_);
    steps_[static_cast<std::size_t>(k)] = basis_ * scales_.cwiseProduct(z);
    offspring_[static_cast<std::size_t>(k)] = mean_ + sigma_ * steps_[static_cast<std::size_t>(k)];
  }
  return offspring_;
}

void CmaEs::tell(const std::vector<double>& fitness) {
  if (fitness.size() != offspring_.size())
    throw ContractViolation("cmaes: one fitness value per offspring required");
  std::vector<std::size_t> order(fitness.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return fitness[a] < fitness[b]; });

  const auto n = mean_.size();
  const double dn = static_cast<double>(n);
  Eigen::VectorXd step = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < mu_; ++i) step += weights_[i] * steps_[order[static_cast<std::size_t>(i)]];
  mean_ += sigma_ * step;

  // C^(-1/2) * step
  const Eigen::VectorXd whitened = basis_ * (basis_.transpose() * step).cwiseQuotient(scales_);
  ps_ = (1.0 - cs_) * ps_ + std::sqrt(cs_ * (2.0 - cs_) * mueff_) * whitened;
  ++generation_;
  const double ps_norm = ps_.norm();
  const bool hsig = ps_norm / std::sqrt(1.0 - std::pow(1.0 - cs_, 2.0 * generation_)) / chi_n_ <
                    1.4 + 2.0 / (dn + 1.0);
  pc_ = (1.0 - cc_) * pc_ + (hsig ? std::sqrt(cc_ * (2.0 - cc_) * mueff_) : 0.0) * step;

  Eigen::MatrixXd rank_mu = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < mu_; ++i) {
    const Eigen::VectorXd& y = steps_[order[static_cast<std::size_t>(i)]];
    rank_mu += weights_[i] * y * y.transpose();
  }
  const double correction = hsig ? 0.0 : c1_ * cc_ * (2.0 - cc_);
  cov_ = (1.0 - c1_ - cmu_ + correction) * cov_ + c1_ * pc_ * pc_.transpose() + cmu_ * rank_mu;

  sigma_ *= std::exp((cs_ / damps_) * (ps_norm / chi_n_ - 1.0));
  update_eigensystem();
}

CmaEs::Result CmaEs::minimize(const std::function<double(const Eigen::VectorXd&)>& f,
                              int iterations) {
  Result r;
  r.best = mean_;
  r.best_value = f(mean_);
  r.evaluations = 1;
  std::vector<double> fitness(static_cast<std::size_t>(lambda_));
  for (int it = 0; it < iterations; ++it) {
    const std::vector<Eigen::VectorXd> xs = ask();
    for (std::size_t k = 0; k < xs.size(); ++k) {
      fitness[k] = f(xs[k]);
      ++r.evaluations;
      if (fitness[k] < r.best_value) {
        r.best_value = fitness[k];
        r.best = xs[k];
      }
    }
    tell(fitness);
  }
  return r;
}

}  // namespace ipp
