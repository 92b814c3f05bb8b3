#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "ipp/net.hpp"
#include "oracles.hpp"

using namespace ipp;

namespace {

NetConfig tiny() {
  NetConfig c;
  c.input_planes = 7;
  c.action_levels = 2;
  c.channels = 2;
  c.encoder_blocks = 1;
  c.pooling_bias_interval = 1;
  c.head_channels = 2;
  c.head_blocks = 1;
  return c;
}

FeatureStack random_features(int planes, int g, std::mt19937_64& rng) {
  FeatureStack x{planes, g, std::vector<float>(static_cast<std::size_t>(planes * g * g))};
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  for (float& v : x.data) v = u(rng);
  return x;
}

std::vector<int> all_actions(int n) {
  std::vector<int> a(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) a[static_cast<std::size_t>(i)] = i;
  return a;
}

struct Sample {
  FeatureStack x;
  std::vector<int> reachable;
  std::vector<float> target;
  double value;
};

Sample random_sample(const NetConfig& c, int g, std::mt19937_64& rng) {
  Sample s{random_features(c.input_planes, g, rng), {}, {}, 0.0};
  const int n = c.action_levels * g * g;
  for (int a = 0; a < n; ++a)
    if (rng() % 3 != 0) s.reachable.push_back(a);
  s.target.assign(static_cast<std::size_t>(n), 0.0f);
  float sum = 0.0f;
  for (int a : s.reachable) {
    s.target[static_cast<std::size_t>(a)] = std::uniform_real_distribution<float>(0.0f, 1.0f)(rng);
    sum += s.target[static_cast<std::size_t>(a)];
  }
  for (float& t : s.target) t /= sum;
  s.value = std::uniform_real_distribution<double>(0.0, 3.0)(rng);
  return s;
}

std::vector<LossSample> views(const std::vector<Sample>& samples) {
  std::vector<LossSample> out;
  for (const Sample& s : samples) out.push_back({&s.x, s.reachable, s.target, s.value});
  return out;
}

}  // namespace

TEST(Net, TinyConfigIsSmall) {
  const PolicyValueNet<double> net(tiny());
  EXPECT_GT(net.parameter_count(), 0u);
  EXPECT_LE(net.parameter_count(), 500u);
}

TEST(Net, GradientMatchesFiniteDifferences) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    PolicyValueNet<double> net(tiny());
    net.initialize(seed);
    std::mt19937_64 rng(seed);
    std::vector<Sample> samples;
    for (int i = 0; i < 3; ++i) samples.push_back(random_sample(net.config(), 4, rng));
    const auto batch = views(samples);
    const LossWeights w{1.0, 1.0, 1e-2};

    std::vector<double> grad(net.parameter_count());
    net.loss(batch, w, grad);
    const std::vector<double> theta(net.parameters().begin(), net.parameters().end());
    auto f = [&](const std::vector<double>& p) {
      std::copy(p.begin(), p.end(), net.parameters().begin());
      return net.loss(batch, w);
    };
    const std::vector<double> numeric = oracle::finite_difference_gradient(f, theta, 1e-4);
    double worst = 0.0;
    for (std::size_t i = 0; i < grad.size(); ++i) {
      const double denom = std::max({std::abs(grad[i]), std::abs(numeric[i]), 1e-8});
      worst = std::max(worst, std::abs(grad[i] - numeric[i]) / denom);
    }
    EXPECT_LT(worst, 1e-3) << "seed " << seed;
  }
}

TEST(Net, FreshInitIsNearUniform) {
  NetConfig c;
  const int g = 10;
  const FeatureStack x{c.input_planes, g, std::vector<float>(static_cast<std::size_t>(c.input_planes * g * g), 0.5f)};
  const auto acts = all_actions(c.action_levels * g * g);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Network net(c);
    net.initialize(seed);
    const auto out = net.forward(x, acts);
    const auto [lo, hi] = std::minmax_element(out.policy.begin(), out.policy.end());
    EXPECT_LT(*hi / *lo, 3.0f) << seed;
  }
}

TEST(Net, ForwardContracts) {
  Network net(tiny());
  net.initialize(4);
  std::mt19937_64 rng(4);
  const int g = 6;
  const FeatureStack x = random_features(7, g, rng);
  const std::vector<int> single{17};
  const auto one = net.forward(x, single);
  EXPECT_EQ(one.policy[17], 1.0f);
  EXPECT_FLOAT_EQ(std::accumulate(one.policy.begin(), one.policy.end(), 0.0f), 1.0f);

  const auto acts = all_actions(2 * g * g);
  const auto a = net.forward(x, acts), b = net.forward(x, acts);
  EXPECT_EQ(a.policy, b.policy);
  EXPECT_EQ(a.value, b.value);
  EXPECT_EQ(a.logits, b.logits);
}

TEST(Net, SizeAgnostic) {
  Network net(NetConfig{});
  net.initialize(9);
  std::mt19937_64 rng(9);
  for (int g : {8, 10}) {
    const FeatureStack x = random_features(17, g, rng);
    const auto out = net.forward(x, all_actions(2 * g * g));
    ASSERT_EQ(out.policy.size(), static_cast<std::size_t>(2 * g * g));
    EXPECT_NEAR(std::accumulate(out.policy.begin(), out.policy.end(), 0.0), 1.0, 1e-5);
    EXPECT_GT(out.value, 0.0f);
  }
}

TEST(Net, ValueIsPositive) {
  std::mt19937_64 rng(3);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Network net(tiny());
    net.initialize(seed);
    for (float& p : net.parameters()) p *= 20.0f;  // push the softplus far into both tails
    const auto out = net.forward(random_features(7, 5, rng), all_actions(50));
    EXPECT_GE(out.value, 0.0f);
    EXPECT_TRUE(std::isfinite(out.value));
  }
}

TEST(Net, MaskingCorrectness) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> logits(20);
    for (double& l : logits) l = std::normal_distribution<double>(0.0, 2.0)(rng);
    std::vector<int> reach;
    for (int a = 0; a < 20; ++a)
      if (rng() % 2) reach.push_back(a);
    if (reach.empty()) reach.push_back(0);
    const auto p = masked_softmax<double>(logits, reach);
    double sum = 0.0;
    for (double v : p) sum += v;
    EXPECT_NEAR(sum, 1.0, 1e-12);
    for (int a = 0; a < 20; ++a) {
      if (std::find(reach.begin(), reach.end(), a) != reach.end()) continue;
      EXPECT_EQ(p[static_cast<std::size_t>(a)], 0.0);
      auto perturbed = logits;
      perturbed[static_cast<std::size_t>(a)] += 100.0;
      EXPECT_EQ(masked_softmax<double>(perturbed, reach), p);
    }
  }
}

TEST(Net, LossIgnoresMaskedActions) {
  PolicyValueNet<double> net(tiny());
  net.initialize(6);
  std::mt19937_64 rng(6);
  std::vector<Sample> s{random_sample(net.config(), 4, rng)};
  const double base = net.loss(views(s), LossWeights{});
  // Policy mass on an unreachable action would be a bad target; the loss must
  // not depend on the logits there, so the output distribution is unchanged.
  const auto out = net.forward(s[0].x, s[0].reachable);
  for (int a = 0; a < 32; ++a)
    if (std::find(s[0].reachable.begin(), s[0].reachable.end(), a) == s[0].reachable.end()) {
      EXPECT_EQ(out.policy[static_cast<std::size_t>(a)], 0.0);
    }
  EXPECT_TRUE(std::isfinite(base));
}

TEST(Net, LossHandComputation) {
  // All-zero parameters: equal logits and value softplus(0) = log 2.
  PolicyValueNet<double> net(tiny());
  std::fill(net.parameters().begin(), net.parameters().end(), 0.0);
  std::mt19937_64 rng(7);
  Sample s{random_features(7, 4, rng), {3, 9}, std::vector<float>(32, 0.0f), 1.5};
  s.target[3] = 0.25f;
  s.target[9] = 0.75f;
  const std::vector<Sample> v{s};
  const double expected = (1.5 - std::log(2.0)) * (1.5 - std::log(2.0)) - std::log(0.5);
  EXPECT_NEAR(net.loss(views(v), LossWeights{1.0, 1.0, 0.0}), expected, 1e-12);
}

TEST(Net, LossAtPerfectFitIsEntropyPlusRegularizer) {
  PolicyValueNet<double> net(tiny());
  net.initialize(8);
  std::mt19937_64 rng(8);
  Sample s = random_sample(net.config(), 4, rng);
  const auto out = net.forward(s.x, s.reachable);
  double entropy = 0.0;
  for (std::size_t a = 0; a < out.policy.size(); ++a) {
    s.target[a] = static_cast<float>(out.policy[a]);
    if (s.target[a] > 0.0f) entropy -= s.target[a] * std::log(std::max(out.policy[a], 1e-12));
  }
  s.value = out.value;
  double l2 = 0.0;
  for (double p : net.parameters()) l2 += p * p;
  const std::vector<Sample> v{s};
  EXPECT_NEAR(net.loss(views(v), LossWeights{1.0, 1.0, 1e-4}), entropy + 1e-4 * l2, 1e-6);
}

TEST(Net, RejectsInvalidConfig) {
  NetConfig c;
  c.channels = 0;
  EXPECT_ANY_THROW(Network{c});
}
