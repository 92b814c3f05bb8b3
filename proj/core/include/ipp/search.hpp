#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "ipp/error.hpp"
#include "ipp/rng.hpp"

namespace ipp {

struct SearchConfig {
  int num_simulations = 10;
  int max_depth = 5;
  double c1 = 4.0;
  double c2 = 10000.0;
  double tau = 1.0;
  double noise_weight = 0.25;
  double dirichlet_alpha = 0.3;
  double forced_playout_k = 2.0;
  bool forced_playouts = true;
  bool policy_pruning = true;

  void validate() const;
};

/// Q + P * sqrt(N_s) / (1 + N_sa) * (c1 + log((N_s + c2 + 1) / c2))
double puct_score(double q_norm, double prior, int parent_visits, int edge_visits, double c1,
                  double c2);

/// Min-max normalization over the visited entries. Unvisited entries, and all
/// entries when the visited values are all equal, map to 0.5.
std::vector<double> normalize_q(std::span<const double> q, std::span<const char> visited);
std::vector<double> normalize_q(std::span<const double> q);

/// (1 - eps) * P + eps * Dirichlet(alpha). P is aligned with the reachable
/// actions, so the noise is drawn over exactly those entries.
std::vector<double> apply_root_noise(std::span<const double> priors, double eps, double alpha,
                                     Rng& rng);

/// ceil(sqrt(k * P * N_s)); 0 when P == 0.
int forced_playout_floor(double prior, int parent_visits, double k);

struct PruneInfo {
  std::span<const int> forced;     // forced-playout floor per child
  std::span<const double> q_norm;  // normalized Q per child
};

/// pi_a proportional to N_a^(1/tau). tau <= 1e-6 is the argmax (lowest index
/// on ties); tau is capped at 1e6. With `prune`, forced visits are removed
/// first; if nothing survives the unpruned counts are used.
std::vector<double> extract_policy(std::span<const int> visits, double tau,
                                   const PruneInfo* prune = nullptr);

/// A problem the tree search can plan in.
///   actions(s)        legal actions, sorted; empty means terminal
///   step(s, a)        successor state and edge reward
///   evaluate(s, acts) priors aligned with `acts` and a value estimate
template <typename P>
concept SearchProblem = requires(const P& p, const typename P::State& s, int a,
                                 std::span<const int> acts) {
  { p.actions(s) } -> std::convertible_to<std::vector<int>>;
  { p.step(s, a) } -> std::same_as<std::pair<typename P::State, double>>;
  { p.evaluate(s, acts) } -> std::same_as<std::pair<std::vector<double>, double>>;
};

struct SearchResult {
  std::vector<int> actions;  // root children, sorted
  std::vector<int> visits;
  std::vector<double> priors;  // after root noise
  std::vector<double> q;       // W/N, 0 when unvisited
  std::vector<double> q_norm;
  std::vector<int> forced;  // forced-playout floors at the end of the search
  double root_value = 0.0;  // visit-weighted mean of the backed-up returns
  double network_value = 0.0;
  int simulations = 0;

  int best_action() const;
  /// Policy over `actions` under the configured temperature and pruning.
  std::vector<double> policy(double tau, bool prune) const;
};

template <SearchProblem Problem>
class TreeSearch {
 public:
  using State = typename Problem::State;

  TreeSearch(const Problem& problem, SearchConfig config) : problem_(&problem), cfg_(config) {
    cfg_.validate();
  }

  /// In train mode the root gets Dirichlet noise and forced playouts (when
  /// enabled); deploy mode is fully deterministic and ignores `rng`.
  /// Throws ContractViolation when the root is terminal.
  SearchResult run(const State& root_state, bool train_mode, Rng* rng = nullptr) {
    nodes_.clear();
    nodes_.push_back(make_node(root_state, 0));
    if (nodes_[0].terminal) throw ContractViolation("search: no reachable action at the root");
    Node& root = nodes_[0];
    if (train_mode && cfg_.noise_weight > 0.0) {
      if (rng == nullptr) throw ContractViolation("search: train mode needs an rng");
      root.priors = apply_root_noise(root.priors, cfg_.noise_weight, cfg_.dirichlet_alpha, *rng);
    }
    const bool forcing = train_mode && cfg_.forced_playouts;

    for (int sim = 0; sim < cfg_.num_simulations; ++sim) simulate(forcing);

    const Node& r = nodes_[0];
    SearchResult out;
    out.actions = r.actions;
    out.visits = r.visits;
    out.priors = r.priors;
    out.network_value = r.value;
    out.simulations = cfg_.num_simulations;
    const std::size_t n = r.actions.size();
    out.q.assign(n, 0.0);
    std::vector<char> visited(n, 0);
    double w = 0.0;
    int total = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (r.visits[i] > 0) {
        out.q[i] = r.value_sum[i] / r.visits[i];
        visited[i] = 1;
      }
      w += r.value_sum[i];
      total += r.visits[i];
    }
    out.q_norm = normalize_q(out.q, visited);
    out.root_value = total > 0 ? w / total : r.value;
    out.forced.assign(n, 0);
    if (forcing)
      for (std::size_t i = 0; i < n; ++i)
        if (r.visits[i] > 0)
          out.forced[i] = forced_playout_floor(r.priors[i], total, cfg_.forced_playout_k);
    return out;
  }

 private:
  struct Node {
    State state;
    int depth = 0;
    bool terminal = false;
    double value = 0.0;
    std::vector<int> actions;
    std::vector<double> priors;
    std::vector<int> visits;
    std::vector<double> value_sum;
    std::vector<double> rewards;
    std::vector<int> children;
  };

  Node make_node(State state, int depth) const {
    Node node;
    node.state = std::move(state);
    node.depth = depth;
    node.actions = problem_->actions(node.state);
    node.terminal = node.actions.empty();
    if (node.terminal) return node;
    auto [priors, value] = problem_->evaluate(node.state, node.actions);
    if (priors.size() != node.actions.size())
      throw ContractViolation("search: evaluate returned priors of the wrong size");
    node.priors = std::move(priors);
    node.value = value;
    const std::size_t n = node.actions.size();
    node.visits.assign(n, 0);
    node.value_sum.assign(n, 0.0);
    node.rewards.assign(n, 0.0);
    node.children.assign(n, -1);
    return node;
  }

  std::size_t select(const Node& node, bool forcing) const {
    const std::size_t n = node.actions.size();
    int parent = 0;
    std::vector<double> q(n, 0.0);
    std::vector<char> visited(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
      parent += node.visits[i];
      if (node.visits[i] > 0) {
        q[i] = node.value_sum[i] / node.visits[i];
        visited[i] = 1;
      }
    }
    if (forcing) {
      // Only children that already received a playout are topped up.
      for (std::size_t i = 0; i < n; ++i)
        if (node.visits[i] > 0 &&
            node.visits[i] < forced_playout_floor(node.priors[i], parent, cfg_.forced_playout_k))
          return i;
    }
    const std::vector<double> qn = normalize_q(q, visited);
    // sqrt(0) would silence the priors on the first visit.
    const int ns = std::max(parent, 1);
    std::size_t best = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      const double s = puct_score(qn[i], node.priors[i], ns, node.visits[i], cfg_.c1, cfg_.c2);
      if (s > best_score) {
        best_score = s;
        best = i;
      }
    }
    return best;
  }

  void simulate(bool forcing) {
    struct Edge {
      int node;
      std::size_t child;
    };
    std::vector<Edge> path;
    int current = 0;
    double leaf = 0.0;
    for (;;) {
      const std::size_t i = select(nodes_[current], forcing && current == 0);
      path.push_back({current, i});
      const int existing = nodes_[current].children[i];
      if (existing < 0) {
        auto [next, r] = problem_->step(nodes_[current].state, nodes_[current].actions[i]);
        Node child = make_node(std::move(next), nodes_[current].depth + 1);
        leaf = child.terminal ? 0.0 : child.value;
        nodes_.push_back(std::move(child));
        nodes_[current].children[i] = static_cast<int>(nodes_.size() - 1);
        nodes_[current].rewards[i] = r;
        break;
      }
      const Node& c = nodes_[existing];
      if (c.terminal || c.depth >= cfg_.max_depth) {
        leaf = c.terminal ? 0.0 : c.value;
        break;
      }
      current = existing;
    }
    double g = leaf;
    for (std::size_t k = path.size(); k-- > 0;) {
      Node& n = nodes_[path[k].node];
      g += n.rewards[path[k].child];
      n.visits[path[k].child] += 1;
      n.value_sum[path[k].child] += g;
    }
  }

  const Problem* problem_;
  SearchConfig cfg_;
  std::vector<Node> nodes_;
};

}  // namespace ipp
