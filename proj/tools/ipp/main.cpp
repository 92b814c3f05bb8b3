// ipp: train, evaluate, ablate and debug the informative path planners.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#if __has_include(<CLI/CLI.hpp>)
#include <CLI/CLI.hpp>
#else
#include <CLI11.hpp>
#endif
#include <fmt/format.h>
#include <fmt/ranges.h>
#include <spdlog/spdlog.h>

#include "ipp/checkpoint.hpp"
#include "ipp/config.hpp"
#include "ipp/error.hpp"
#include "ipp/evaluation.hpp"
#include "ipp/ipp_problem.hpp"
#include "ipp/rng.hpp"
#include "ipp/training.hpp"

namespace fs = std::filesystem;
using namespace ipp;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;
constexpr const char* kOutputRootEnv = "IPP_OUTPUT_ROOT";

/// Raised for output-location problems, which map to the usage exit code.
struct OutputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string config_path;
  std::string profile;
  std::optional<std::uint64_t> seed;
  std::string seeds;
  std::string planners;
  std::optional<int> iterations;
  std::optional<int> episodes;
  std::optional<int> simulations;
  std::optional<int> workers;
  std::string out;
  std::string checkpoint;
  std::string variants;
  bool quiet = false;
};

std::vector<std::string> split(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

std::vector<std::uint64_t> parse_seeds(const std::string& s) {
  std::vector<std::uint64_t> out;
  for (const std::string& item : split(s)) {
    const auto dash = item.find('-');
    try {
      if (dash != std::string::npos && dash > 0) {
        const std::uint64_t lo = std::stoull(item.substr(0, dash));
        const std::uint64_t hi = std::stoull(item.substr(dash + 1));
        if (hi < lo) throw ConfigError("");
        for (std::uint64_t v = lo; v <= hi; ++v) out.push_back(v);
      } else {
        out.push_back(std::stoull(item));
      }
    } catch (const std::exception&) {
      throw ConfigError(fmt::format("--seeds: cannot parse '{}'", item));
    }
  }
  if (out.empty()) throw ConfigError("--seeds: no seeds given");
  return out;
}

MissionConfig resolve_config(const Options& o) {
  MissionConfig cfg;
  if (!o.config_path.empty()) {
    cfg = load_config(o.config_path);
    if (!o.profile.empty() && o.profile != cfg.profile)
      throw ConfigError(fmt::format("--profile {} conflicts with profile '{}' in {}", o.profile,
                                    cfg.profile, o.config_path));
  } else {
    cfg = profile_defaults(o.profile.empty() ? "desk" : o.profile);
  }
  if (o.seed) cfg.seed = *o.seed;
  if (!o.seeds.empty()) cfg.eval_seeds = parse_seeds(o.seeds);
  if (!o.planners.empty()) cfg.planners = split(o.planners);
  if (o.iterations) cfg.training.iterations = *o.iterations;
  if (o.episodes) cfg.training.episodes = *o.episodes;
  if (o.simulations) {
    cfg.search.num_simulations = *o.simulations;
    cfg.training.search.num_simulations = *o.simulations;
  }
  const int workers = o.workers.value_or(
      static_cast<int>(std::max(1u, std::thread::hardware_concurrency())));
  cfg.workers = workers;
  cfg.training.workers = workers;
  cfg.validate();
  return cfg;
}

fs::path output_dir(const Options& o, const std::string& fallback) {
  if (!o.out.empty()) return o.out;
  const char* root = std::getenv(kOutputRootEnv);
  return fs::path(root != nullptr && *root != '\0' ? root : "runs") / fallback;
}

/// Creates `dir` and proves it is writable before any real work starts.
void prepare_output(const fs::path& dir) {
  std::error_code ec;
  const bool existed = fs::exists(dir, ec);
  fs::create_directories(dir, ec);
  if (ec) throw OutputError(fmt::format("cannot create output directory {}: {}", dir.string(), ec.message()));
  const fs::path probe = dir / ".write_probe";
  {
    std::ofstream f(probe);
    if (!f) {
      if (!existed) fs::remove(dir, ec);
      throw OutputError(fmt::format("output directory {} is not writable", dir.string()));
    }
  }
  fs::remove(probe, ec);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path);
  if (!f || !(f << text)) throw std::runtime_error("cannot write " + path.string());
}

void freeze_config(const fs::path& dir, const MissionConfig& cfg) {
  write_text(dir / "config.json", dump_config(cfg));
}

std::shared_ptr<const Network> load_rl(const std::string& checkpoint, MissionConfig& cfg) {
  LoadedCheckpoint ck = load_checkpoint(checkpoint, cfg.terrain.grid_dim());
  if (ck.manifest.architecture.action_levels != cfg.terrain.levels())
    throw CheckpointMismatch(fmt::format("checkpoint has {} altitude levels but the config has {}",
                                         ck.manifest.architecture.action_levels,
                                         cfg.terrain.levels()));
  cfg.net = ck.manifest.architecture;
  return std::make_shared<const Network>(std::move(ck.net));
}

void write_missions(const fs::path& dir, const Comparison& cmp) {
  write_aggregate_csv(dir / "aggregate.csv", cmp.table);
  write_results_csv(dir / "results.csv", cmp.missions);
  const fs::path missions = dir / "missions";
  fs::create_directories(missions);
  for (const MissionResult& m : cmp.missions) {
    const std::string stem = fmt::format("{}_seed{}", m.planner, m.seed);
    write_step_log(missions / (stem + ".jsonl"), m);
    write_path_csv(missions / (stem + "_path.csv"), m);
    if (m.aborted) spdlog::warn("{} seed {}: {}", m.planner, m.seed, m.diagnostic);
  }
}

void print_table(const std::vector<AggregateRow>& rows) {
  fmt::print("{:<10} {:>5} {:>10} {:>9} {:>9} {:>9} {:>11}\n", "planner", "ckpt", "trace", "std",
             "rmse", "std", "plan_s");
  for (const AggregateRow& r : rows)
    fmt::print("{:<10} {:>5.2f} {:>10.4f} {:>9.4f} {:>9.4f} {:>9.4f} {:>11.6f}\n", r.planner,
               r.checkpoint, r.trace_mean, r.trace_std, r.rmse_mean, r.rmse_std,
               r.mean_plan_seconds);
}

int cmd_train(const Options& o) {
  MissionConfig cfg = resolve_config(o);
  const fs::path dir = output_dir(o, fmt::format("train_seed{}", cfg.seed));
  prepare_output(dir);
  freeze_config(dir, cfg);
  const WorldModel world = cfg.world();
  run_training(world, cfg.net, cfg.training, cfg.seed, {dir, {}});
  fmt::print("checkpoints written to {}\n", dir.string());
  return 0;
}

int cmd_evaluate(const Options& o) {
  MissionConfig cfg = resolve_config(o);
  const bool wants_rl =
      std::find(cfg.planners.begin(), cfg.planners.end(), "rl") != cfg.planners.end();
  if (wants_rl && o.checkpoint.empty())
    throw ConfigError("planner 'rl' needs --checkpoint");
  std::shared_ptr<const Network> net;
  if (wants_rl) net = load_rl(o.checkpoint, cfg);
  const fs::path dir = output_dir(o, fmt::format("evaluate_seed{}", cfg.seed));
  prepare_output(dir);
  freeze_config(dir, cfg);
  const WorldModel world = cfg.world();
  const Comparison cmp =
      compare(make_planners(cfg, world, cfg.planners, net), cfg.eval_seeds, world, cfg.mission,
              cfg.workers);
  write_missions(dir, cmp);
  print_table(cmp.table);
  return 0;
}

int cmd_ablate(const Options& o) {
  const MissionConfig base = resolve_config(o);
  const std::vector<std::string> variants =
      o.variants.empty() ? ablation_variants() : split(o.variants);
  for (const std::string& v : variants) apply_ablation(base, v);  // reject unknown names early

  const fs::path dir = output_dir(o, fmt::format("ablate_seed{}", base.seed));
  prepare_output(dir);
  freeze_config(dir, base);
  std::ofstream table(dir / "ablation.csv");
  if (!table) throw std::runtime_error("cannot write ablation.csv");
  table << "variant,trace_33,trace_67,trace_100,rmse_33,rmse_67,rmse_100,mean_plan_seconds\n";

  for (const std::string& v : variants) {
    MissionConfig cfg = apply_ablation(base, v);
    const fs::path vdir = dir / v;
    fs::create_directories(vdir);
    freeze_config(vdir, cfg);
    const WorldModel world = cfg.world();
    spdlog::info("ablation {}: training", v);
    TrainingRun run = run_training(world, cfg.net, cfg.training, cfg.seed, {vdir / "train", {}});
    auto net = std::make_shared<const Network>(std::move(run.net));
    const Comparison cmp = compare(make_planners(cfg, world, {"rl"}, net), cfg.eval_seeds, world,
                                   cfg.mission, cfg.workers);
    write_missions(vdir, cmp);
    std::vector<double> trace, rmse;
    double plan = 0.0;
    for (const AggregateRow& r : cmp.table) {
      trace.push_back(r.trace_mean);
      rmse.push_back(r.rmse_mean);
      plan = r.mean_plan_seconds;
    }
    table << fmt::format("{},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g}\n",
                         csv_field(v), trace.at(0), trace.at(1), trace.at(2), rmse.at(0),
                         rmse.at(1), rmse.at(2), plan);
    table.flush();
    fmt::print("{:<20} trace {:.4f} {:.4f} {:.4f}  rmse {:.4f} {:.4f} {:.4f}\n", v, trace[0],
               trace[1], trace[2], rmse[0], rmse[1], rmse[2]);
  }
  return 0;
}

int cmd_plan(const Options& o) {
  MissionConfig cfg = resolve_config(o);
  if (o.checkpoint.empty()) throw ConfigError("plan needs --checkpoint");
  auto net = load_rl(o.checkpoint, cfg);
  const WorldModel world = cfg.world();
  const GridMapBelief prior = build_prior(cfg.terrain, cfg.kernel, cfg.mission.prior_mean);
  const int pose = world.lattice().nearest(cfg.mission.start);

  RlPlanner planner(world, net, cfg.search);
  planner.reset(cfg.seed);
  const std::optional<int> action = planner.plan({prior, pose, cfg.budget});
  if (!action) {
    fmt::print("no affordable action from pose {}\n", pose);
    return 0;
  }
  const SearchResult& s = *planner.last_search();
  const Position p = world.lattice().pose(*action).position;
  fmt::print("start pose {}  chosen action {} at ({:.2f}, {:.2f}, {:.2f})\n", pose, *action, p.x,
             p.y, p.z);
  fmt::print("network value {:.4f}  root value {:.4f}  simulations {}\n", s.network_value,
             s.root_value, s.simulations);
  fmt::print("{:>7} {:>7} {:>9} {:>9}\n", "action", "visits", "prior", "q");
  for (std::size_t i = 0; i < s.actions.size(); ++i)
    if (s.visits[i] > 0)
      fmt::print("{:>7} {:>7} {:>9.5f} {:>9.4f}\n", s.actions[i], s.visits[i], s.priors[i], s.q[i]);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Informative path planning: self-play training, missions and benchmarks"};
  app.require_subcommand(1);
  Options o;

  auto common = [&o](CLI::App* cmd) {
    cmd->add_option("--config", o.config_path, "JSON configuration file")->check(CLI::ExistingFile);
    cmd->add_option("--profile", o.profile, "desk or paper")
        ->check(CLI::IsMember({"desk", "paper"}));
    cmd->add_option("--seed", o.seed, "base seed");
    cmd->add_option("--workers", o.workers, "worker threads (default: all cores)")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--simulations", o.simulations, "tree-search simulations per step")
        ->check(CLI::PositiveNumber);
    cmd->add_flag("-q,--quiet", o.quiet, "only warnings and errors on stderr");
  };
  auto with_out = [&o](CLI::App* cmd) {
    cmd->add_option("--out", o.out,
                    fmt::format("output directory (default: ${}/<command>_seed<seed>)",
                                kOutputRootEnv));
  };
  auto with_training = [&o](CLI::App* cmd) {
    cmd->add_option("--iterations", o.iterations, "training iterations")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--episodes", o.episodes, "episodes per iteration")
        ->check(CLI::PositiveNumber);
  };
  auto with_eval = [&o](CLI::App* cmd) {
    cmd->add_option("--seeds", o.seeds, "evaluation seeds, e.g. 0,1,2 or 0-9");
  };

  CLI::App* train = app.add_subcommand("train", "self-play training; writes checkpoints");
  common(train);
  with_out(train);
  with_training(train);

  CLI::App* evaluate = app.add_subcommand("evaluate", "run missions and aggregate metrics");
  common(evaluate);
  with_out(evaluate);
  with_eval(evaluate);
  evaluate->add_option("--planners", o.planners, "comma list of rl,random,coverage,mcts_pw,cmaes");
  evaluate->add_option("--checkpoint", o.checkpoint, "checkpoint directory for the rl planner");

  CLI::App* ablate = app.add_subcommand("ablate", "train and evaluate ablation variants");
  common(ablate);
  with_out(ablate);
  with_training(ablate);
  with_eval(ablate);
  ablate->add_option("--variant", o.variants,
                     fmt::format("comma list from {} (default: all)",
                                 fmt::join(ablation_variants(), ",")));

  CLI::App* plan = app.add_subcommand("plan", "one deploy-mode replanning step from the prior");
  common(plan);
  plan->add_option("--checkpoint", o.checkpoint, "checkpoint directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }
  spdlog::set_level(o.quiet ? spdlog::level::warn : spdlog::level::info);

  try {
    if (*train) return cmd_train(o);
    if (*evaluate) return cmd_evaluate(o);
    if (*ablate) return cmd_ablate(o);
    if (*plan) return cmd_plan(o);
  } catch (const ConfigError& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitUsage;
  } catch (const OutputError& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitRuntime;
  }
  return kExitUsage;
}
