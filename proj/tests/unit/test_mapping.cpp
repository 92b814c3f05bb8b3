#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>
#include <random>

#include "ipp/env.hpp"
#include "ipp/error.hpp"
#include "ipp/mapping.hpp"
#include "ipp/world.hpp"
#include "oracles.hpp"

using namespace ipp;

namespace {

TerrainSpec grid5() {
  TerrainSpec t;
  t.side_length = 20.0;
  t.resolution = 4.0;
  return t;
}

double min_eigenvalue(const Eigen::MatrixXd& m) {
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(m, Eigen::EigenvaluesOnly)
      .eigenvalues()
      .minCoeff();
}

}  // namespace

TEST(Prior, KernelValues) {
  const GridMapBelief prior = build_prior(TerrainSpec{}, KernelSpec{}, 0.5);
  ASSERT_EQ(prior.size(), 100);
  for (int i = 0; i < 100; ++i) EXPECT_DOUBLE_EQ(prior.cov(i, i), 1.82);
  EXPECT_TRUE((prior.mean.array() == 0.5).all());
  KernelSpec k;
  EXPECT_NEAR(matern32(k.length_scale, k), 0.8797, 1e-4);
  EXPECT_LT(matern32(10.0 * k.length_scale, k), 1e-4);
  // Neighbouring cell centers are one resolution apart.
  EXPECT_DOUBLE_EQ(prior.cov(0, 1), matern32(4.0, k));
  EXPECT_DOUBLE_EQ(prior.cov(0, 11), matern32(4.0 * std::sqrt(2.0), k));
}

TEST(Fusion, ScalarClosedForm) {
  const GridMapBelief prior = build_prior(grid5(), KernelSpec{}, 0.5);
  const std::vector<int> cell{12};
  const GridMapBelief post = kalman_fuse(prior, cell, Eigen::VectorXd::Constant(1, 0.9), 0.3);
  const double sp = 1.82, sn = 0.3;
  EXPECT_NEAR(post.cov(12, 12), sp * sn / (sp + sn), 1e-12);
  EXPECT_NEAR(post.mean[12], 0.5 + sp / (sp + sn) * 0.4, 1e-12);
}

TEST(Fusion, UninformativeMeasurement) {
  const GridMapBelief prior = build_prior(grid5(), KernelSpec{}, 0.5);
  const std::vector<int> cells{3, 4, 8};
  const GridMapBelief post = kalman_fuse(prior, cells, Eigen::VectorXd::Constant(3, 5.0), 1e12);
  EXPECT_LT((post.cov - prior.cov).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_LT((post.mean - prior.mean).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Fusion, SequentialMatchesBatchConditioning) {
  const TerrainSpec t = grid5();
  const SensorModel sensor;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> xy(0.0, 20.0), val(0.0, 1.0);
    std::uniform_int_distribution<int> lvl(0, 1);
    GridMapBelief belief = build_prior(t, KernelSpec{}, 0.5);
    const GridMapBelief prior = belief;
    std::vector<oracle::Observation> all;
    for (int k = 0; k < 8; ++k) {
      const Position p{xy(rng), xy(rng), t.altitudes[static_cast<std::size_t>(lvl(rng))]};
      const auto cells = footprint_cells(p, t, sensor);
      Eigen::VectorXd z(static_cast<Eigen::Index>(cells.size()));
      for (auto& v : z) v = val(rng);
      const double nv = sensor.noise_variance(p.z);
      belief = kalman_fuse(belief, cells, z, nv);
      for (std::size_t i = 0; i < cells.size(); ++i)
        all.push_back({cells[i], z[static_cast<Eigen::Index>(i)], nv});
    }
    const auto [mean, cov] = oracle::gp_condition(prior.mean, prior.cov, all);
    EXPECT_LT((belief.mean - mean).cwiseAbs().maxCoeff(), 1e-6) << seed;
    EXPECT_LT((belief.cov - cov).cwiseAbs().maxCoeff(), 1e-6) << seed;
  }
}

TEST(Fusion, OrderInvariance) {
  const TerrainSpec t = grid5();
  const GridMapBelief prior = build_prior(t, KernelSpec{}, 0.5);
  const std::vector<int> a{0, 1, 5, 6}, b{6, 7, 11, 12};
  const Eigen::VectorXd za = Eigen::Vector4d(0.1, 0.9, 0.3, 0.7), zb = Eigen::Vector4d(0.2, 0.4, 0.8, 0.6);
  const GridMapBelief ab = kalman_fuse(kalman_fuse(prior, a, za, 0.2), b, zb, 0.5);
  const GridMapBelief ba = kalman_fuse(kalman_fuse(prior, b, zb, 0.5), a, za, 0.2);
  EXPECT_LT((ab.mean - ba.mean).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_LT((ab.cov - ba.cov).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Fusion, RejectsBadInput) {
  const GridMapBelief prior = build_prior(grid5(), KernelSpec{}, 0.5);
  const std::vector<int> none;
  EXPECT_THROW(kalman_fuse(prior, none, Eigen::VectorXd(0), 0.1), ContractViolation);
  const std::vector<int> one{2};
  EXPECT_THROW(kalman_fuse(prior, one, Eigen::VectorXd::Constant(1, 0.1), 0.0), ContractViolation);
}

// 100 random missions of 30 fusions each: trace never grows, the posterior
// stays symmetric PSD with a non-negative diagonal.
TEST(FusionProperties, TraceMonotoneAndPsd) {
  const TerrainSpec t{};
  const SensorModel sensor;
  const ActionLattice lattice(t);
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(seed);
    KernelSpec k;
    k.length_scale = std::uniform_real_distribution<double>(2.5, 5.0)(rng);
    const GroundTruthField truth = generate_ground_truth(seed, t, k, 0.4);
    GridMapBelief belief = build_prior(t, k, 0.5);
    const int steps = seed < 10 ? 30 : 8;
    for (int s = 0; s < steps; ++s) {
      const int a = std::uniform_int_distribution<int>(0, lattice.size() - 1)(rng);
      const Measurement m = measure(truth, lattice.pose(a).position, t, sensor, rng());
      const GridMapBelief next = kalman_fuse(belief, m.cells, m.values, m.noise_variance);
      ASSERT_LE(next.cov.trace(), belief.cov.trace() + 1e-9);
      ASSERT_LT((next.cov - next.cov.transpose()).cwiseAbs().maxCoeff(), 1e-9);
      ASSERT_GE(next.cov.diagonal().minCoeff(), 0.0);
      if (seed < 10) {
        ASSERT_GE(min_eigenvalue(next.cov), -1e-8);
      }
      belief = next;
    }
  }
}

TEST(Interest, Examples) {
  GridMapBelief b = build_prior(grid5(), KernelSpec{}, 0.5);
  EXPECT_EQ(interest_set(b, InterestRegionSpec{}).size(), 25u);
  b.mean[3] = 0.1;
  b.cov(3, 3) = 0.04;
  const auto s = interest_set(b, InterestRegionSpec{1.0, 0.4});
  EXPECT_TRUE(std::find(s.begin(), s.end(), 3) == s.end());
  EXPECT_EQ(s.size(), 24u);
}

TEST(Interest, MonotoneInBeta) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    GridMapBelief b = build_prior(grid5(), KernelSpec{}, 0.5);
    for (int i = 0; i < 25; ++i) {
      b.mean[i] = u(rng);
      b.cov(i, i) = 0.5 * u(rng);
    }
    const double b1 = u(rng), b2 = b1 + u(rng);
    const auto s1 = interest_set(b, {b1, 0.4}), s2 = interest_set(b, {b2, 0.4});
    EXPECT_TRUE(std::includes(s2.begin(), s2.end(), s1.begin(), s1.end()));
    const auto s0 = interest_set(b, {0.0, 0.4});
    for (int i = 0; i < 25; ++i)
      EXPECT_EQ(std::find(s0.begin(), s0.end(), i) != s0.end(), b.mean[i] >= 0.4);
  }
}

TEST(Information, ValueAndReward) {
  const GridMapBelief prior = build_prior(grid5(), KernelSpec{}, 0.5);
  const std::vector<int> cell{7}, interest{7}, empty;
  const GridMapBelief post = kalman_fuse(prior, cell, Eigen::VectorXd::Constant(1, 0.5), 0.5);
  EXPECT_EQ(information_value(prior.cov, prior.cov, interest), 0.0);
  EXPECT_EQ(information_value(prior.cov, post.cov, empty), 0.0);
  EXPECT_NEAR(information_value(prior.cov, post.cov, interest), 1.82 - 1.82 * 0.5 / 2.32, 1e-12);

  const ActionLattice lattice(grid5());
  const KinematicsModel kin;
  // Two poses 10 m apart: 6 s of flight.
  MeasurementPose from{{2, 2, 8}, 0}, to{{12, 2, 8}, 1};
  Eigen::MatrixXd after = prior.cov;
  after(7, 7) -= 0.4;
  EXPECT_NEAR(reward(prior.cov, after, interest, from, to, kin), 0.4 / 6.0, 1e-12);
  EXPECT_EQ(reward(prior.cov, prior.cov, interest, from, to, kin), 0.0);
  EXPECT_THROW(reward(prior.cov, after, interest, from, from, kin), ContractViolation);
  MeasurementPose far{{22, 2, 8}, 2};  // 20 m: 11 s
  EXPECT_NEAR(reward(prior.cov, after, interest, from, far, kin), 0.4 / 11.0, 1e-12);
}

TEST(Information, PredictedReductionMatchesFusion) {
  const TerrainSpec t{};
  const WorldModel world(t, KinematicsModel{}, SensorModel{}, InterestRegionSpec{}, std::nullopt,
                         150.0);
  std::mt19937_64 rng(3);
  GridMapBelief belief = build_prior(t, KernelSpec{}, 0.5);
  for (int k = 0; k < 50; ++k) {
    const int a = std::uniform_int_distribution<int>(0, 199)(rng);
    const auto fp = world.footprint(a);
    const std::vector<int> cells(fp.begin(), fp.end());
    std::vector<int> interest;
    for (int i = 0; i < 100; ++i)
      if (rng() % 3 != 0) interest.push_back(i);
    const GridMapBelief post =
        kalman_fuse(belief, cells, belief.mean(cells), world.noise_variance(a));
    EXPECT_NEAR(predicted_trace_reduction(belief, cells, world.noise_variance(a), interest),
                information_value(belief.cov, post.cov, interest), 1e-9);
    belief = post;
  }
}
