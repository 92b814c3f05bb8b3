#include "ipp/env.hpp"

#include <algorithm>
#include <limits>
#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Cholesky>
#include <fmt/format.h>

#include "ipp/error.hpp"
#include "ipp/mapping.hpp"
#include "ipp/rng.hpp"

namespace ipp {

int TerrainSpec::grid_dim() const {
  return static_cast<int>(std::lround(side_length / resolution));
}

void TerrainSpec::validate() const {
  if (!(resolution > 0.0)) throw ConfigError("terrain.resolution must be > 0");
  if (!(side_length > 0.0)) throw ConfigError("terrain.side_length must be > 0");
  const double cells = side_length / resolution;
  if (std::abs(cells - std::round(cells)) > 1e-9)
    throw ConfigError(fmt::format(
        "terrain.side_length ({}) must be a multiple of terrain.resolution ({})",
        side_length, resolution));
  if (grid_dim() < 2) throw ConfigError("terrain grid must have at least 2 cells per side");
  if (altitudes.empty()) throw ConfigError("terrain.altitudes must not be empty");
  for (std::size_t i = 0; i < altitudes.size(); ++i) {
    if (!(altitudes[i] > 0.0)) throw ConfigError("terrain.altitudes must be positive");
    if (i > 0 && !(altitudes[i] > altitudes[i - 1]))
      throw ConfigError("terrain.altitudes must be strictly increasing");
  }
}

void KinematicsModel::validate() const {
  if (!(accel > 0.0)) throw ConfigError("kinematics.accel must be > 0");
  if (!(max_speed > 0.0)) throw ConfigError("kinematics.max_speed must be > 0");
}

double SensorModel::half_width(double altitude) const {
  return altitude * std::tan(fov_degrees * std::numbers::pi / 360.0);
}

double SensorModel::noise_variance(double altitude) const {
  return base_noise_var * (1.0 + altitude_noise_coeff * altitude * altitude);
}

void SensorModel::validate() const {
  if (!(fov_degrees > 0.0 && fov_degrees < 180.0))
    throw ConfigError("sensor.fov_degrees must be in (0, 180)");
  if (!(base_noise_var > 0.0)) throw ConfigError("sensor.base_noise_var must be > 0");
  if (!(altitude_noise_coeff >= 0.0))
    throw ConfigError("sensor.altitude_noise_coeff must be >= 0");
}

void KernelSpec::validate() const {
  if (!(length_scale > 0.0)) throw ConfigError("kernel.length_scale must be > 0");
  if (!(signal_variance > 0.0)) throw ConfigError("kernel.signal_variance must be > 0");
  if (!(noise_variance > 0.0)) throw ConfigError("kernel.noise_variance must be > 0");
}

double distance(const Position& a, const Position& b) {
  const double dx = a.x - b.x, dy = a.y - b.y, dz = a.z - b.z;
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

ActionLattice::ActionLattice(TerrainSpec spec) : spec_(std::move(spec)), g_(spec_.grid_dim()) {
  spec_.validate();
  poses_.reserve(static_cast<std::size_t>(spec_.action_count()));
  for (int level = 0; level < spec_.levels(); ++level)
    for (int row = 0; row < g_; ++row)
      for (int col = 0; col < g_; ++col) {
        const int index = index_of(level, row, col);
        poses_.push_back({cell_center(row * g_ + col, spec_.altitudes[level]), index});
      }
}

Position ActionLattice::cell_center(int cell, double z) const {
  const int row = cell / g_, col = cell % g_;
  return {(col + 0.5) * spec_.resolution, (row + 0.5) * spec_.resolution, z};
}

int ActionLattice::nearest(const Position& p) const {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (const auto& pose : poses_) {
    const double d = distance(pose.position, p);
    if (d < best_d - 1e-12) {
      best_d = d;
      best = pose.action_index;
    }
  }
  return best;
}

Position ActionLattice::lower_bound() const {
  return {0.5 * spec_.resolution, 0.5 * spec_.resolution, spec_.altitudes.front()};
}

Position ActionLattice::upper_bound() const {
  const double far = (g_ - 0.5) * spec_.resolution;
  return {far, far, spec_.altitudes.back()};
}

namespace {

constexpr int kMaxGroundTruthDraws = 64;

Eigen::VectorXd draw_field(Rng& rng, const TerrainSpec& spec, const Eigen::MatrixXd& chol_lower,
                           double signal_std) {
  const int g = spec.grid_dim();
  const int n = g * g;
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd white(n);
  for (int i = 0; i < n; ++i) white[i] = normal(rng);
  Eigen::VectorXd field = chol_lower * white;

  std::uniform_int_distribution<int> blob_count(1, 3);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int blobs = blob_count(rng);
  for (int b = 0; b < blobs; ++b) {
    const double cx = unit(rng) * spec.side_length;
    const double cy = unit(rng) * spec.side_length;
    const double width = 3.0 + 4.0 * unit(rng);
    const double amplitude = (2.5 + 1.5 * unit(rng)) * signal_std;
    for (int row = 0; row < g; ++row)
      for (int col = 0; col < g; ++col) {
        const double dx = (col + 0.5) * spec.resolution - cx;
        const double dy = (row + 0.5) * spec.resolution - cy;
        field[row * g + col] += amplitude * std::exp(-(dx * dx + dy * dy) / (2.0 * width * width));
      }
  }

  const double lo = field.minCoeff(), hi = field.maxCoeff();
  if (hi - lo < 1e-12) return Eigen::VectorXd::Constant(n, 0.5);
  return ((field.array() - lo) / (hi - lo)).cwiseMax(0.0).cwiseMin(1.0).matrix();
}

}  // namespace

GroundTruthField generate_ground_truth(std::uint64_t seed, const TerrainSpec& spec,
                                      const KernelSpec& kernel, double threshold) {
  const int g = spec.grid_dim();
  const int n = g * g;
  Eigen::MatrixXd k = matern_covariance(spec, kernel);
  k.diagonal().array() += kernel.noise_variance;
  Eigen::LLT<Eigen::MatrixXd> llt(k);
  if (llt.info() != Eigen::Success)
    throw NumericalError("ground-truth covariance is not positive definite");
  const Eigen::MatrixXd lower = llt.matrixL();
  const double signal_std = std::sqrt(kernel.signal_variance + kernel.noise_variance);

  GroundTruthField out{g, {}};
  for (int attempt = 0; attempt < kMaxGroundTruthDraws; ++attempt) {
    Rng rng(derive_seed(seed, {0x67747275ULL, static_cast<std::uint64_t>(attempt)}));
    out.values = draw_field(rng, spec, lower, signal_std);
    const auto interesting = (out.values.array() >= threshold).count();
    const double fraction = static_cast<double>(interesting) / n;
    if (fraction >= 0.05 && fraction <= 0.95) return out;
  }
  throw NumericalError(fmt::format(
      "could not draw a ground truth with 5-95% of cells above {} (seed {})", threshold, seed));
}

double travel_time(const Position& from, const Position& to, const KinematicsModel& kin) {
  const double d = distance(from, to);
  if (d <= 0.0) return 0.0;
  const double ramp = kin.max_speed * kin.max_speed / kin.accel;
  if (d >= ramp) return d / kin.max_speed + kin.max_speed / kin.accel;
  return 2.0 * std::sqrt(d / kin.accel);
}

std::vector<int> footprint_cells(const Position& p, const TerrainSpec& spec,
                                 const SensorModel& sensor) {
  const int g = spec.grid_dim();
  const double r = spec.resolution;
  const double hw = sensor.half_width(p.z) + 1e-9;
  // Candidate column/row range from the square bounds, then exact center test.
  const int col_lo = std::max(0, static_cast<int>(std::ceil((p.x - hw) / r - 0.5)));
  const int col_hi = std::min(g - 1, static_cast<int>(std::floor((p.x + hw) / r - 0.5)));
  const int row_lo = std::max(0, static_cast<int>(std::ceil((p.y - hw) / r - 0.5)));
  const int row_hi = std::min(g - 1, static_cast<int>(std::floor((p.y + hw) / r - 0.5)));
  std::vector<int> cells;
  for (int row = row_lo; row <= row_hi; ++row)
    for (int col = col_lo; col <= col_hi; ++col) {
      const double cx = (col + 0.5) * r, cy = (row + 0.5) * r;
      if (std::abs(cx - p.x) <= hw && std::abs(cy - p.y) <= hw) cells.push_back(row * g + col);
    }
  if (cells.empty()) {
    const int col = std::clamp(static_cast<int>(std::floor(p.x / r)), 0, g - 1);
    const int row = std::clamp(static_cast<int>(std::floor(p.y / r)), 0, g - 1);
    cells.push_back(row * g + col);
  }
  return cells;
}

Measurement measure(const GroundTruthField& field, const Position& p, const TerrainSpec& spec,
                    const SensorModel& sensor, std::uint64_t seed) {
  Measurement m;
  m.cells = footprint_cells(p, spec, sensor);
  m.noise_variance = sensor.noise_variance(p.z);
  Rng rng(derive_seed(seed, {0x6d656173ULL}));
  std::normal_distribution<double> noise(0.0, std::sqrt(m.noise_variance));
  m.values.resize(static_cast<Eigen::Index>(m.cells.size()));
  for (std::size_t i = 0; i < m.cells.size(); ++i)
    m.values[static_cast<Eigen::Index>(i)] = field.values[m.cells[i]] + noise(rng);
  return m;
}

std::vector<int> reachable_actions(const ActionLattice& lattice, int current,
                                   double remaining_budget, std::optional<double> radius,
                                   const KinematicsModel& kin) {
  std::vector<int> out;
  if (!(remaining_budget > 0.0)) return out;
  const Position& here = lattice.pose(current).position;
  for (int a = 0; a < lattice.size(); ++a) {
    if (a == current) continue;
    const Position& there = lattice.pose(a).position;
    if (radius && distance(here, there) > *radius + 1e-9) continue;
    if (travel_time(here, there, kin) <= remaining_budget + 1e-12) out.push_back(a);
  }
  return out;
}

}  // namespace ipp
