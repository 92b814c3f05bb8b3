#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "ipp/features.hpp"
#include "ipp/kernel.hpp"
#include "ipp/net.hpp"
#include "ipp/search.hpp"
#include "ipp/world.hpp"

namespace ipp {

struct ScheduleSpec {
  double c1_start = 15.0;
  double c1_min = 4.0;
  double c1_decay = 0.8;
  double delta_start = 1.0;
  double delta_min = 0.3;
  double delta_decay = 0.8;
  double window_start = 1.0;
  double window_step = 2.0;
  int window_max = 10;
  // Ablation switches: hold the window at window_max, or the exploration
  // constants at their floors.
  bool adaptive_window = true;
  bool decaying_exploration = true;

  void validate() const;
};

struct ExplorationConstants {
  double c1 = 0.0;
  double delta = 0.0;
};

/// c1 = max(c1_start * c1_decay^i, c1_min), same shape for delta.
ExplorationConstants exploration_constants(int iteration, const ScheduleSpec& spec);

/// min(floor(window_start + i / window_step), window_max)
int window_size(int iteration, const ScheduleSpec& spec);

/// One-cycle schedule: linear from peak/25 to peak over the first 45% of the
/// steps, then cosine down to peak/100 at the last step.
double one_cycle_lr(int step, int total_steps, double peak);

struct ExperienceRecord {
  FeatureStack features;
  int action = -1;
  std::vector<int> reachable;
  std::vector<float> target_policy;  // dense over all actions
  double target_value = 0.0;
  double budget = 0.0;
  double reward = 0.0;
};

/// Records grouped by the iteration that produced them; sampling only sees
/// the newest `w` blocks.
class ReplayBuffer {
 public:
  void add_block(std::vector<ExperienceRecord> block);
  int blocks() const { return static_cast<int>(blocks_.size()); }
  std::size_t size() const;
  std::size_t window_size(int w) const;
  std::vector<const ExperienceRecord*> window(int w) const;
  std::span<const ExperienceRecord> block(int i) const { return blocks_.at(i); }

 private:
  std::vector<std::vector<ExperienceRecord>> blocks_;
};

struct TrainingConfig {
  int iterations = 10;
  int episodes = 20;
  int max_steps = 30;
  double tau = 1.0;
  double prior_mean = 0.5;
  double length_scale_min = 2.5;
  double length_scale_max = 5.0;
  double signal_variance_min = 1.0;
  double signal_variance_max = 2.5;
  KernelSpec truth_kernel;  // noise_variance is the nugget of the truth draw
  int batch_size = 96;
  int epochs = 3;
  double peak_lr = 1e-2;
  double momentum = 0.9;
  double grad_clip = 1.0;  // global L2 norm, 0 disables
  int max_samples = 0;     // records drawn from the window per iteration, 0 = all
  LossWeights loss;
  ScheduleSpec schedule;
  SearchConfig search;
  int workers = 1;

  void validate() const;
};

struct Episode {
  std::vector<ExperienceRecord> records;
  std::vector<int> path;  // start pose first
  double episode_return = 0.0;
  double spent = 0.0;
};

/// One self-play episode on a fresh random world. Deterministic in `seed`.
Episode generate_episode(const Network& net, const WorldModel& world, const TrainingConfig& cfg,
                         ExplorationConstants exploration, std::uint64_t seed);

/// `epochs` passes over `data` in shuffled mini-batches with momentum SGD.
/// Returns the loss of every step; empty (with a warning) when `data` holds
/// fewer than one batch.
std::vector<double> train_epochs(Network& net, std::span<const ExperienceRecord* const> data,
                                 const TrainingConfig& cfg, std::uint64_t seed);

struct IterationMetrics {
  int iteration = 0;
  int episodes = 0;
  double mean_return = 0.0;
  double mean_loss = 0.0;
  std::size_t buffer_records = 0;
  double wall_seconds = 0.0;
  bool trained = false;
};

struct TrainingRun {
  Network net;
  std::vector<IterationMetrics> metrics;
};

struct TrainingOutput {
  std::optional<std::filesystem::path> dir;  // checkpoints and metrics.csv
  std::function<void(const IterationMetrics&)> on_iteration;
};

TrainingRun run_training(const WorldModel& world, const NetConfig& net_config,
                         const TrainingConfig& cfg, std::uint64_t seed,
                         const TrainingOutput& output = {});

}  // namespace ipp
