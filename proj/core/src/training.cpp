#include "ipp/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "ipp/checkpoint.hpp"
#include "ipp/error.hpp"
#include "ipp/ipp_problem.hpp"
#include "ipp/parallel.hpp"
#include "ipp/rng.hpp"

namespace ipp {

void ScheduleSpec::validate() const {
  if (!(c1_start > 0.0 && c1_min > 0.0)) throw ConfigError("schedule: c1 values must be > 0");
  if (!(delta_start > 0.0 && delta_min > 0.0))
    throw ConfigError("schedule: delta values must be > 0");
  if (!(c1_decay > 0.0 && c1_decay <= 1.0 && delta_decay > 0.0 && delta_decay <= 1.0))
    throw ConfigError("schedule: decay factors must be in (0, 1]");
  if (!(window_start >= 1.0 && window_step > 0.0 && window_max >= 1))
    throw ConfigError("schedule: window parameters must be positive");
}

ExplorationConstants exploration_constants(int iteration, const ScheduleSpec& spec) {
  if (iteration < 0) throw ContractViolation("exploration_constants: negative iteration");
  if (!spec.decaying_exploration) return {spec.c1_min, spec.delta_min};
  return {std::max(spec.c1_start * std::pow(spec.c1_decay, iteration), spec.c1_min),
          std::max(spec.delta_start * std::pow(spec.delta_decay, iteration), spec.delta_min)};
}

int window_size(int iteration, const ScheduleSpec& spec) {
  if (iteration < 0) throw ContractViolation("window_size: negative iteration");
  if (!spec.adaptive_window) return spec.window_max;
  const auto w = static_cast<int>(std::floor(spec.window_start + iteration / spec.window_step));
  return std::min(w, spec.window_max);
}

double one_cycle_lr(int step, int total_steps, double peak) {
  if (total_steps <= 1) return peak;
  const double start = peak / 25.0;
  const double end = peak / 100.0;
  const double last = total_steps - 1;
  const double warm = 0.45 * total_steps;
  const double s = std::clamp<double>(step, 0.0, last);
  if (s <= warm) return start + (peak - start) * s / warm;
  const double t = (s - warm) / (last - warm);
  return end + (peak - end) * 0.5 * (1.0 + std::cos(std::numbers::pi * t));
}

void ReplayBuffer::add_block(std::vector<ExperienceRecord> block) {
  blocks_.push_back(std::move(block));
}

std::size_t ReplayBuffer::size() const {
  std::size_t n = 0;
  for (const auto& b : blocks_) n += b.size();
  return n;
}

std::size_t ReplayBuffer::window_size(int w) const {
  std::size_t n = 0;
  const int first = std::max(0, blocks() - w);
  for (int i = first; i < blocks(); ++i) n += blocks_[static_cast<std::size_t>(i)].size();
  return n;
}

std::vector<const ExperienceRecord*> ReplayBuffer::window(int w) const {
  std::vector<const ExperienceRecord*> out;
  const int first = std::max(0, blocks() - w);
  for (int i = first; i < blocks(); ++i)
    for (const auto& r : blocks_[static_cast<std::size_t>(i)]) out.push_back(&r);
  return out;
}

void TrainingConfig::validate() const {
  if (iterations < 0) throw ConfigError("training.iterations must be >= 0");
  if (episodes < 1) throw ConfigError("training.episodes must be >= 1");
  if (max_steps < 1) throw ConfigError("training.max_steps must be >= 1");
  if (!(tau >= 0.0)) throw ConfigError("training.tau must be >= 0");
  if (!(length_scale_min > 0.0 && length_scale_max >= length_scale_min))
    throw ConfigError("training.length_scale range is invalid");
  if (!(signal_variance_min > 0.0 && signal_variance_max >= signal_variance_min))
    throw ConfigError("training.signal_variance range is invalid");
  truth_kernel.validate();
  if (batch_size < 1) throw ConfigError("training.batch_size must be >= 1");
  if (epochs < 1) throw ConfigError("training.epochs must be >= 1");
  if (!(peak_lr > 0.0)) throw ConfigError("training.peak_lr must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("training.momentum must be in [0, 1)");
  if (!(grad_clip >= 0.0)) throw ConfigError("training.grad_clip must be >= 0");
  if (max_samples < 0) throw ConfigError("training.max_samples must be >= 0");
  if (workers < 1) throw ConfigError("training.workers must be >= 1");
  schedule.validate();
  search.validate();
}

Episode generate_episode(const Network& net, const WorldModel& world, const TrainingConfig& cfg,
                         ExplorationConstants exploration, std::uint64_t seed) {
  Rng rng(derive_seed(seed, {1}));
  std::uniform_real_distribution<double> length(cfg.length_scale_min, cfg.length_scale_max);
  std::uniform_real_distribution<double> signal(cfg.signal_variance_min, cfg.signal_variance_max);
  KernelSpec prior_kernel = cfg.truth_kernel;
  prior_kernel.length_scale = length(rng);
  prior_kernel.signal_variance = signal(rng);
  KernelSpec truth_kernel = cfg.truth_kernel;
  truth_kernel.length_scale = prior_kernel.length_scale;
  truth_kernel.signal_variance = prior_kernel.signal_variance;

  const GroundTruthField truth = generate_ground_truth(
      derive_seed(seed, {2}), world.terrain(), truth_kernel, world.interest_spec().threshold);

  const bool history = net.config().input_planes ==
                       feature_plane_count(world.terrain().levels(), true);
  const Featurizer featurizer(world.lattice(), world.kinematics(), world.total_budget(), history);
  const IppProblem problem(world, featurizer, net);

  SearchConfig search = cfg.search;
  search.c1 = exploration.c1;
  search.dirichlet_alpha = exploration.delta;
  TreeSearch<IppProblem> tree(problem, search);
  const bool prune = search.forced_playouts && search.policy_pruning;

  IppState state;
  state.belief = std::make_shared<const GridMapBelief>(
      build_prior(world.terrain(), prior_kernel, cfg.prior_mean));
  state.pose = std::uniform_int_distribution<int>(0, world.action_count() - 1)(rng);
  state.budget = world.total_budget();

  Episode ep;
  ep.path.push_back(state.pose);
  for (int step = 0; step < cfg.max_steps; ++step) {
    const std::vector<int> reachable = problem.actions(state);
    if (reachable.empty()) break;

    Rng search_rng(derive_seed(seed, {3, static_cast<std::uint64_t>(step)}));
    const SearchResult result = tree.run(state, true, &search_rng);
    const std::vector<double> pi = result.policy(cfg.tau, prune);
    const std::size_t pick = std::discrete_distribution<std::size_t>(pi.begin(), pi.end())(rng);
    const int action = result.actions[pick];

    ExperienceRecord rec;
    rec.features = problem.features(state);
    rec.action = action;
    rec.reachable = reachable;
    rec.target_policy.assign(static_cast<std::size_t>(world.action_count()), 0.0f);
    for (std::size_t i = 0; i < pi.size(); ++i)
      rec.target_policy[static_cast<std::size_t>(result.actions[i])] = static_cast<float>(pi[i]);
    rec.budget = state.budget;

    const Measurement m = measure(truth, world.lattice().pose(action).position, world.terrain(),
                                  world.sensor(), derive_seed(seed, {4, static_cast<std::uint64_t>(step)}));
    const std::vector<int> region = world.interest(*state.belief);
    GridMapBelief posterior = kalman_fuse(*state.belief, m.cells, m.values, m.noise_variance);
    const double cost = world.cost(state.pose, action);
    rec.reward = information_value(state.belief->cov, posterior.cov, region) / cost;

    IppState next;
    if (history) {
      next.history.push_back(problem.frame(state));
      if (!state.history.empty()) next.history.push_back(state.history.front());
    }
    next.belief = std::make_shared<const GridMapBelief>(std::move(posterior));
    next.pose = action;
    next.budget = state.budget - cost;
    state = std::move(next);

    ep.spent += cost;
    ep.episode_return += rec.reward;
    ep.path.push_back(action);
    ep.records.push_back(std::move(rec));
  }

  double to_go = 0.0;
  for (auto it = ep.records.rbegin(); it != ep.records.rend(); ++it) {
    to_go += it->reward;
    it->target_value = to_go;
  }
  return ep;
}

std::vector<double> train_epochs(Network& net, std::span<const ExperienceRecord* const> data,
                                 const TrainingConfig& cfg, std::uint64_t seed) {
  std::vector<double> losses;
  const auto n = data.size();
  const auto batch = static_cast<std::size_t>(cfg.batch_size);
  if (n < batch) {
    spdlog::warn("replay window holds {} records, fewer than one batch of {}; skipping training",
                 n, batch);
    return losses;
  }
  const std::size_t per_epoch = (n + batch - 1) / batch;
  const int total = static_cast<int>(per_epoch) * cfg.epochs;

  Rng rng(derive_seed(seed, {5}));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<float> grad(net.parameter_count());
  std::vector<float> velocity(net.parameter_count(), 0.0f);
  std::vector<LossSample> samples;
  samples.reserve(batch);

  int step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t b = 0; b < n; b += batch) {
      samples.clear();
      for (std::size_t k = b; k < std::min(n, b + batch); ++k) {
        const ExperienceRecord& r = *data[order[k]];
        samples.push_back({&r.features, r.reachable, r.target_policy, r.target_value});
      }
      const double loss = net.loss(samples, cfg.loss, grad);
      losses.push_back(loss);

      double scale = 1.0;
      if (cfg.grad_clip > 0.0) {
        double sq = 0.0;
        for (float g : grad) sq += static_cast<double>(g) * g;
        const double norm = std::sqrt(sq);
        if (norm > cfg.grad_clip) scale = cfg.grad_clip / norm;
      }
      const auto lr = static_cast<float>(one_cycle_lr(step, total, cfg.peak_lr));
      const auto mu = static_cast<float>(cfg.momentum);
      const auto s = static_cast<float>(scale);
      auto params = net.parameters();
      for (std::size_t i = 0; i < params.size(); ++i) {
        velocity[i] = mu * velocity[i] + s * grad[i];
        params[i] -= lr * velocity[i];
      }
      ++step;
    }
  }
  return losses;
}

namespace {

// metrics.csv is reproducible bit for bit; wall times go to timing.csv.
void write_metrics_row(std::ofstream& out, const IterationMetrics& m) {
  out << fmt::format("{},{},{:.17g},{:.17g},{},{}\n", m.iteration, m.episodes, m.mean_return,
                     m.mean_loss, m.buffer_records, m.trained ? 1 : 0);
  out.flush();
}

void write_timing_row(std::ofstream& out, const IterationMetrics& m) {
  out << fmt::format("{},{:.6f}\n", m.iteration, m.wall_seconds);
  out.flush();
}

std::ofstream open_csv(const std::filesystem::path& path, const char* header) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << header;
  return out;
}

}  // namespace

TrainingRun run_training(const WorldModel& world, const NetConfig& net_config,
                         const TrainingConfig& cfg, std::uint64_t seed,
                         const TrainingOutput& output) {
  cfg.validate();
  TrainingRun run{Network(net_config), {}};
  run.net.initialize(derive_seed(seed, {10}));

  std::ofstream metrics, timing;
  if (output.dir) {
    std::filesystem::create_directories(*output.dir);
    metrics = open_csv(*output.dir / "metrics.csv",
                       "iteration,episodes,mean_return,mean_loss,buffer_records,trained\n");
    timing = open_csv(*output.dir / "timing.csv", "iteration,wall_seconds\n");
  }

  ReplayBuffer buffer;
  for (int it = 0; it < cfg.iterations; ++it) {
    const auto t0 = std::chrono::steady_clock::now();
    const ExplorationConstants explore = exploration_constants(it, cfg.schedule);

    // The network is only read while episodes run.
    std::vector<Episode> episodes(static_cast<std::size_t>(cfg.episodes));
    const Network& snapshot = run.net;
    parallel_for(cfg.episodes, cfg.workers, [&](int e) {
      episodes[static_cast<std::size_t>(e)] = generate_episode(
          snapshot, world, cfg, explore,
          derive_seed(seed, {20, static_cast<std::uint64_t>(it), static_cast<std::uint64_t>(e)}));
    });

    IterationMetrics m;
    m.iteration = it;
    m.episodes = cfg.episodes;
    std::vector<ExperienceRecord> block;
    for (Episode& ep : episodes) {
      m.mean_return += ep.episode_return / cfg.episodes;
      for (auto& r : ep.records) block.push_back(std::move(r));
    }
    buffer.add_block(std::move(block));
    m.buffer_records = buffer.size();

    std::vector<const ExperienceRecord*> data = buffer.window(window_size(it, cfg.schedule));
    if (cfg.max_samples > 0 && data.size() > static_cast<std::size_t>(cfg.max_samples)) {
      Rng pick(derive_seed(seed, {30, static_cast<std::uint64_t>(it)}));
      std::shuffle(data.begin(), data.end(), pick);
      data.resize(static_cast<std::size_t>(cfg.max_samples));
    }
    const std::vector<double> losses =
        train_epochs(run.net, data, cfg, derive_seed(seed, {40, static_cast<std::uint64_t>(it)}));
    m.trained = !losses.empty();
    if (m.trained) m.mean_loss = std::accumulate(losses.begin(), losses.end(), 0.0) / losses.size();
    m.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    spdlog::info("iteration {}: return {:.4f} loss {:.4f} records {} window {} ({:.1f} s)", it,
                 m.mean_return, m.mean_loss, m.buffer_records, data.size(), m.wall_seconds);
    if (output.dir) {
      save_checkpoint(*output.dir / fmt::format("iter_{:03d}", it + 1), run.net,
                      world.terrain().grid_dim(), it + 1);
      write_metrics_row(metrics, m);
      write_timing_row(timing, m);
    }
    if (output.on_iteration) output.on_iteration(m);
    run.metrics.push_back(m);
  }
  return run;
}

}  // namespace ipp
