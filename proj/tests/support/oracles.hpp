#pragma once

// Independent reference computations used by the unit and acceptance tests.
// None of these call into the library code they are compared against.

#include <algorithm>
#include <cmath>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <boost/math/quadrature/tanh_sinh.hpp>

namespace oracle {

struct Observation {
  int cell;
  double value;
  double noise_var;
};

/// Batch Gaussian conditioning of N(mean, cov) on all observations at once.
inline std::pair<Eigen::VectorXd, Eigen::MatrixXd> gp_condition(
    const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov, std::span<const Observation> obs) {
  const int n = static_cast<int>(mean.size());
  const int m = static_cast<int>(obs.size());
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(m, n);
  Eigen::VectorXd y(m);
  Eigen::MatrixXd r = Eigen::MatrixXd::Zero(m, m);
  for (int i = 0; i < m; ++i) {
    h(i, obs[i].cell) = 1.0;
    y[i] = obs[i].value;
    r(i, i) = obs[i].noise_var;
  }
  const Eigen::MatrixXd s = h * cov * h.transpose() + r;
  const Eigen::LLT<Eigen::MatrixXd> llt(s);
  const Eigen::MatrixXd kt = llt.solve(h * cov);  // (K)^T
  Eigen::VectorXd post_mean = mean + kt.transpose() * (y - h * mean);
  Eigen::MatrixXd post_cov = cov - cov * h.transpose() * kt;
  return {post_mean, post_cov};
}

/// Flight time over distance d as the integral of ds / v(s), where the speed
/// at position s is limited by acceleration from rest, the speed cap, and
/// braking to rest at d.
inline double travel_time_by_quadrature(double d, double accel, double vmax) {
  if (d <= 0.0) return 0.0;
  auto speed = [&](double s) {
    return std::min({vmax, std::sqrt(2.0 * accel * s), std::sqrt(2.0 * accel * (d - s))});
  };
  // Split at the kinks of v(s) so every piece is smooth in its interior.
  std::vector<double> knots{0.0, d};
  const double ramp = vmax * vmax / (2.0 * accel);
  if (2.0 * ramp < d) {
    knots.push_back(ramp);
    knots.push_back(d - ramp);
  } else {
    knots.push_back(d / 2.0);
  }
  std::sort(knots.begin(), knots.end());
  boost::math::quadrature::tanh_sinh<double> integrator;
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
    if (knots[i + 1] - knots[i] < 1e-15) continue;
    total += integrator.integrate([&](double s) { return 1.0 / speed(s); }, knots[i],
                                  knots[i + 1], 1e-13);
  }
  return total;
}

/// Two actions, two steps: r1[a] for the first step, r2[a][b] for the
/// second. Returns the best achievable return after opening with each action.
struct TwoStepToy {
  double r1[2];
  double r2[2][2];

  double best_return(int a) const { return r1[a] + std::max(r2[a][0], r2[a][1]); }
  int best_first_action() const { return best_return(1) > best_return(0) ? 1 : 0; }

  static TwoStepToy random(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    TwoStepToy t{};
    for (int a = 0; a < 2; ++a) {
      t.r1[a] = u(rng);
      for (int b = 0; b < 2; ++b) t.r2[a][b] = u(rng);
    }
    return t;
  }
};

/// Root visit counts of a plain PUCT search on the two-step toy with uniform
/// priors and a zero value estimate, written out directly for this tree:
/// per-node min-max Q normalization, unvisited children at 0.5, the parent
/// count floored at 1, ties to the lower action.
inline std::pair<int, int> toy_puct_visits(const TwoStepToy& t, int sims, double c1, double c2) {
  struct Edge {
    int n = 0;
    double w = 0.0;
  };
  Edge root[2];
  Edge inner[2][2];
  auto pick = [&](const Edge* e, const double* r) {
    double q[2], lo = 1e300, hi = -1e300;
    int ns = 0;
    for (int a = 0; a < 2; ++a) {
      ns += e[a].n;
      if (e[a].n > 0) {
        q[a] = e[a].w / e[a].n + (r ? r[a] : 0.0);
        lo = std::min(lo, q[a]);
        hi = std::max(hi, q[a]);
      }
    }
    int best = 0;
    double best_s = -1e300;
    for (int a = 0; a < 2; ++a) {
      const double qn = e[a].n == 0 ? 0.5 : (hi > lo ? (q[a] - lo) / (hi - lo) : 0.5);
      const double s = qn + 0.5 * std::sqrt(std::max(ns, 1)) / (1.0 + e[a].n) *
                                (c1 + std::log((ns + c2 + 1.0) / c2));
      if (s > best_s) {
        best_s = s;
        best = a;
      }
    }
    return best;
  };
  // root[a].w and inner[a][b].w hold the returns below the edge reward.
  for (int s = 0; s < sims; ++s) {
    const int a = pick(root, t.r1);
    if (root[a].n == 0) {
      root[a].n = 1;  // new node, value 0
      continue;
    }
    const int b = pick(inner[a], t.r2[a]);
    inner[a][b].n += 1;  // terminal grandchild, value 0
    root[a].n += 1;
    root[a].w += t.r2[a][b];
  }
  return {root[0].n, root[1].n};
}

/// Central finite differences of f at x, one coordinate at a time.
template <typename F>
std::vector<double> finite_difference_gradient(F&& f, std::vector<double> x, double h) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double x0 = x[i];
    x[i] = x0 + h;
    const double fp = f(x);
    x[i] = x0 - h;
    const double fm = f(x);
    x[i] = x0;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

}  // namespace oracle
