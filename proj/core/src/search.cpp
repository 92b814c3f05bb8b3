#include "ipp/search.hpp"

#include <numeric>
#include <random>

namespace ipp {

void SearchConfig::validate() const {
  if (num_simulations < 1) throw ConfigError("search.num_simulations must be >= 1");
  if (max_depth < 1) throw ConfigError("search.max_depth must be >= 1");
  if (!(c1 >= 0.0)) throw ConfigError("search.c1 must be >= 0");
  if (!(c2 > 0.0)) throw ConfigError("search.c2 must be > 0");
  if (!(tau >= 0.0)) throw ConfigError("search.tau must be >= 0");
  if (!(noise_weight >= 0.0 && noise_weight <= 1.0))
    throw ConfigError("search.noise_weight must be in [0, 1]");
  if (!(dirichlet_alpha > 0.0)) throw ConfigError("search.dirichlet_alpha must be > 0");
  if (!(forced_playout_k >= 0.0)) throw ConfigError("search.forced_playout_k must be >= 0");
}

double puct_score(double q_norm, double prior, int parent_visits, int edge_visits, double c1,
                  double c2) {
  const double ns = parent_visits;
  return q_norm + prior * (std::sqrt(ns) / (1.0 + edge_visits)) *
                      (c1 + std::log((ns + c2 + 1.0) / c2));
}

std::vector<double> normalize_q(std::span<const double> q, std::span<const char> visited) {
  if (visited.size() != q.size()) throw ContractViolation("normalize_q: mask size mismatch");
  std::vector<double> out(q.size(), 0.5);
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (std::size_t i = 0; i < q.size(); ++i)
    if (visited[i]) {
      lo = std::min(lo, q[i]);
      hi = std::max(hi, q[i]);
    }
  if (!(hi > lo)) return out;
  for (std::size_t i = 0; i < q.size(); ++i)
    if (visited[i]) out[i] = (q[i] - lo) / (hi - lo);
  return out;
}

std::vector<double> normalize_q(std::span<const double> q) {
  const std::vector<char> all(q.size(), 1);
  return normalize_q(q, all);
}

std::vector<double> apply_root_noise(std::span<const double> priors, double eps, double alpha,
                                     Rng& rng) {
  std::vector<double> out(priors.begin(), priors.end());
  if (priors.empty() || eps == 0.0) return out;
  std::gamma_distribution<double> gamma(alpha, 1.0);
  std::vector<double> eta(priors.size());
  for (double& e : eta) e = gamma(rng);
  double z = std::accumulate(eta.begin(), eta.end(), 0.0);
  if (!(z > 0.0)) {
    std::fill(eta.begin(), eta.end(), 1.0);
    z = static_cast<double>(eta.size());
  }
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (1.0 - eps) * priors[i] + eps * eta[i] / z;
  return out;
}

int forced_playout_floor(double prior, int parent_visits, double k) {
  if (prior <= 0.0 || parent_visits <= 0) return 0;
  return static_cast<int>(std::ceil(std::sqrt(k * prior * parent_visits)));
}

namespace {

std::vector<double> power_policy(std::span<const double> counts, double tau) {
  std::vector<double> pi(counts.size(), 0.0);
  if (tau <= 1e-6) {
    const auto best = std::max_element(counts.begin(), counts.end()) - counts.begin();
    pi[static_cast<std::size_t>(best)] = 1.0;
    return pi;
  }
  tau = std::min(tau, 1e6);
  const double hi = *std::max_element(counts.begin(), counts.end());
  double z = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    // Scaling by the max keeps N^(1/tau) finite for small tau.
    if (counts[i] > 0.0) pi[i] = std::pow(counts[i] / hi, 1.0 / tau);
    z += pi[i];
  }
  for (double& p : pi) p /= z;
  return pi;
}

}  // namespace

std::vector<double> extract_policy(std::span<const int> visits, double tau,
                                   const PruneInfo* prune) {
  if (visits.empty()) throw ContractViolation("extract_policy: no actions");
  std::vector<double> raw(visits.begin(), visits.end());
  if (std::accumulate(raw.begin(), raw.end(), 0.0) < 1.0)
    throw ContractViolation("extract_policy: no visits");
  if (prune == nullptr) return power_policy(raw, tau);
  if (prune->forced.size() != visits.size() || prune->q_norm.size() != visits.size())
    throw ContractViolation("extract_policy: prune info size mismatch");

  const std::size_t best = static_cast<std::size_t>(
      std::max_element(visits.begin(), visits.end()) - visits.begin());
  std::vector<double> pruned = raw;
  for (std::size_t i = 0; i < visits.size(); ++i) {
    if (i == best || visits[i] == 0) continue;
    if (prune->q_norm[i] > prune->q_norm[best]) continue;
    const int cut = std::min(visits[i] - 1, prune->forced[i]);
    pruned[i] = std::max(0.0, raw[i] - std::max(cut, 0));
  }
  if (std::accumulate(pruned.begin(), pruned.end(), 0.0) <= 0.0) return power_policy(raw, tau);
  return power_policy(pruned, tau);
}

int SearchResult::best_action() const {
  if (actions.empty()) throw ContractViolation("search result is empty");
  const auto it = std::max_element(visits.begin(), visits.end());
  return actions[static_cast<std::size_t>(it - visits.begin())];
}

std::vector<double> SearchResult::policy(double tau, bool prune) const {
  if (!prune) return extract_policy(visits, tau);
  const PruneInfo info{forced, q_norm};
  return extract_policy(visits, tau, &info);
}

}  // namespace ipp
