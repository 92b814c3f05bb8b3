#include "ipp/features.hpp"

#include <algorithm>

#include "ipp/error.hpp"

namespace ipp {

int feature_plane_count(int levels, bool with_history) {
  return 5 + levels + (with_history ? 10 : 0);
}

namespace {

void min_max_normalize(std::span<float> values) {
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  const float low = *lo, range = *hi - *lo;
  if (range <= 0.0f) {
    std::fill(values.begin(), values.end(), 0.0f);
    return;
  }
  for (float& v : values) v = std::clamp((v - low) / range, 0.0f, 1.0f);
}

float unit_interval(double v, double lo, double hi) {
  if (hi - lo <= 0.0) return 0.0f;
  return static_cast<float>(std::clamp((v - lo) / (hi - lo), 0.0, 1.0));
}

void append_frame(std::vector<float>& out, const FrameSummary& f, int cells) {
  out.insert(out.end(), f.variance.begin(), f.variance.end());
  out.insert(out.end(), static_cast<std::size_t>(cells), f.budget);
  for (float p : f.position) out.insert(out.end(), static_cast<std::size_t>(cells), p);
}

}  // namespace

Featurizer::Featurizer(const ActionLattice& lattice, KinematicsModel kin, double total_budget,
                       bool with_history)
    : lattice_(&lattice), kin_(kin), total_budget_(total_budget), with_history_(with_history) {
  if (!(total_budget > 0.0)) throw ConfigError("featurizer: total budget must be > 0");
}

int Featurizer::planes() const {
  return feature_plane_count(lattice_->spec().levels(), with_history_);
}

FrameSummary Featurizer::frame(const GridMapBelief& belief, std::span<const int> interest,
                               int pose, double budget) const {
  const int cells = lattice_->grid_dim() * lattice_->grid_dim();
  FrameSummary f;
  f.variance.assign(static_cast<std::size_t>(cells), 0.0f);
  for (int c : interest) f.variance[static_cast<std::size_t>(c)] = static_cast<float>(belief.cov(c, c));
  min_max_normalize(f.variance);
  f.budget = static_cast<float>(std::clamp(budget / total_budget_, 0.0, 1.0));
  const Position& p = lattice_->pose(pose).position;
  const Position lo = lattice_->lower_bound(), hi = lattice_->upper_bound();
  f.position = {unit_interval(p.x, lo.x, hi.x), unit_interval(p.y, lo.y, hi.y),
                unit_interval(p.z, lo.z, hi.z)};
  return f;
}

FeatureStack Featurizer::build(const FrameSummary& current, int pose,
                               std::span<const FrameSummary> history) const {
  const int g = lattice_->grid_dim();
  const int cells = g * g;
  FeatureStack x;
  x.planes = planes();
  x.grid_dim = g;
  x.data.reserve(static_cast<std::size_t>(x.planes) * cells);

  append_frame(x.data, current, cells);

  const std::size_t cost_begin = x.data.size();
  const Position& here = lattice_->pose(pose).position;
  for (int a = 0; a < lattice_->size(); ++a)
    x.data.push_back(static_cast<float>(travel_time(lattice_->pose(a).position, here, kin_)));
  min_max_normalize(std::span<float>(x.data.data() + cost_begin, x.data.size() - cost_begin));

  if (with_history_)
    for (std::size_t h = 0; h < 2; ++h)
      append_frame(x.data,
                   h < history.size() ? history[h] : (history.empty() ? current : history.back()),
                   cells);
  return x;
}

}  // namespace ipp
