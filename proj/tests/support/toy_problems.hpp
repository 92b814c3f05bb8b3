#pragma once

#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "ipp/rng.hpp"
#include "oracles.hpp"

namespace toy {

/// The two-step toy as a search problem with a constant network:
/// uniform priors and value 0 everywhere.
struct TwoStepProblem {
  struct State {
    int depth = 0;
    int first = -1;
  };

  oracle::TwoStepToy table;
  double scale = 1.0;

  std::vector<int> actions(const State& s) const {
    return s.depth < 2 ? std::vector<int>{0, 1} : std::vector<int>{};
  }
  std::pair<State, double> step(const State& s, int a) const {
    const double r = s.depth == 0 ? table.r1[a] : table.r2[s.first][a];
    return {State{s.depth + 1, s.depth == 0 ? a : s.first}, scale * r};
  }
  std::pair<std::vector<double>, double> evaluate(const State&, std::span<const int> acts) const {
    return {std::vector<double>(acts.size(), 1.0 / static_cast<double>(acts.size())), 0.0};
  }
  std::optional<int> rollout_action(const State& s, ipp::Rng& rng) const {
    if (s.depth >= 2) return std::nullopt;
    return static_cast<int>(rng() % 2);
  }
};

/// A wide one-step bandit: action a pays reward[a], priors are uniform.
struct Bandit {
  struct State {
    bool done = false;
  };
  std::vector<double> reward;

  std::vector<int> actions(const State& s) const {
    if (s.done) return {};
    std::vector<int> a(reward.size());
    for (std::size_t i = 0; i < a.size(); ++i) a[i] = static_cast<int>(i);
    return a;
  }
  std::pair<State, double> step(const State&, int a) const {
    return {State{true}, reward[static_cast<std::size_t>(a)]};
  }
  std::pair<std::vector<double>, double> evaluate(const State&, std::span<const int> acts) const {
    return {std::vector<double>(acts.size(), 1.0 / static_cast<double>(acts.size())), 0.0};
  }
  std::optional<int> rollout_action(const State&, ipp::Rng&) const { return std::nullopt; }
};

}  // namespace toy
