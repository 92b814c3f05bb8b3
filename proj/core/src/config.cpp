#include "ipp/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ranges.h>
#include <nlohmann/json.hpp>

#include "ipp/error.hpp"
#include "ipp/features.hpp"

namespace ipp {

using nlohmann::json;

MissionConfig profile_defaults(const std::string& profile) {
  MissionConfig c;
  c.profile = profile;
  if (profile == "desk") {
    c.terrain.side_length = 40.0;
    c.terrain.resolution = 4.0;
  } else if (profile == "paper") {
    c.terrain.side_length = 37.5;
    c.terrain.resolution = 2.5;
    c.radius = 11.0;
  } else {
    throw ConfigError(fmt::format("profile: unknown profile '{}' (valid: desk, paper)", profile));
  }
  c.net.action_levels = c.terrain.levels();
  c.net.input_planes = feature_plane_count(c.terrain.levels(), true);
  c.training.truth_kernel = c.kernel;
  c.mission.kernel = c.kernel;
  c.eval_seeds = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  c.planners = {"rl", "random", "coverage", "mcts_pw", "cmaes"};
  return c;
}

void MissionConfig::validate() const {
  terrain.validate();
  kinematics.validate();
  sensor.validate();
  kernel.validate();
  interest.validate();
  if (!(budget > 0.0)) throw ConfigError("mission.budget must be > 0");
  if (radius && !(*radius > 0.0)) throw ConfigError("mission.radius must be > 0");
  mission.validate();
  search.validate();
  net.validate();
  if (net.action_levels != terrain.levels())
    throw ConfigError(fmt::format("net.action_levels is {} but terrain.altitudes has {} levels",
                                  net.action_levels, terrain.levels()));
  const int with = feature_plane_count(terrain.levels(), true);
  const int without = feature_plane_count(terrain.levels(), false);
  if (net.input_planes != with && net.input_planes != without)
    throw ConfigError(fmt::format("net.input_planes must be {} (with history) or {} (without)",
                                  with, without));
  training.validate();
  mcts_pw.validate();
  cmaes.validate();
  if (!(coverage_altitude > 0.0)) throw ConfigError("coverage.altitude must be > 0");
  if (workers < 1) throw ConfigError("evaluation.workers must be >= 1");
  for (const std::string& p : planners)
    if (std::find(planner_names().begin(), planner_names().end(), p) == planner_names().end())
      throw ConfigError(fmt::format("evaluation.planners: unknown planner '{}' (valid: {})", p,
                                    fmt::join(planner_names(), ", ")));
}

WorldModel MissionConfig::world() const {
  return WorldModel(terrain, kinematics, sensor, interest, radius, budget);
}

namespace {

/// Reads the keys of one JSON object and rejects the ones nobody asked for.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(fmt::format("{} must be an object", where()));
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    const json& v = j_.at(key);
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw ConfigError("");
      } else if constexpr (std::is_arithmetic_v<T>) {
        if (!v.is_number()) throw ConfigError("");
        if constexpr (std::is_integral_v<T>)
          if (!v.is_number_integer() && !v.is_number_unsigned()) throw ConfigError("");
      }
      out = v.get<T>();
    } catch (const std::exception&) {
      throw ConfigError(fmt::format("{}: invalid value {}", field(key), v.dump()));
    }
  }

  void get(const char* key, std::optional<double>& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    const json& v = j_.at(key);
    if (v.is_null()) {
      out.reset();
      return;
    }
    if (!v.is_number()) throw ConfigError(fmt::format("{}: invalid value {}", field(key), v.dump()));
    out = v.get<double>();
  }

  std::optional<Section> child(const char* key) {
    seen_.insert(key);
    if (!j_.contains(key)) return std::nullopt;
    return Section(j_.at(key), field(key));
  }

  void finish() const {
    for (const auto& [key, value] : j_.items())
      if (!seen_.contains(key)) throw ConfigError(fmt::format("unknown key '{}'", field(key.c_str())));
  }

  std::string field(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  std::string where() const { return path_.empty() ? "config" : path_; }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_search(Section& s, SearchConfig& c) {
  s.get("num_simulations", c.num_simulations);
  s.get("max_depth", c.max_depth);
  s.get("c1", c.c1);
  s.get("c2", c.c2);
  s.get("tau", c.tau);
  s.get("noise_weight", c.noise_weight);
  s.get("dirichlet_alpha", c.dirichlet_alpha);
  s.get("forced_playout_k", c.forced_playout_k);
  s.get("forced_playouts", c.forced_playouts);
  s.get("policy_pruning", c.policy_pruning);
  s.finish();
}

json write_search(const SearchConfig& c) {
  return {{"num_simulations", c.num_simulations}, {"max_depth", c.max_depth},
          {"c1", c.c1},
          {"c2", c.c2},
          {"tau", c.tau},
          {"noise_weight", c.noise_weight},
          {"dirichlet_alpha", c.dirichlet_alpha},
          {"forced_playout_k", c.forced_playout_k},
          {"forced_playouts", c.forced_playouts},
          {"policy_pruning", c.policy_pruning}};
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

MissionConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(fmt::format("config is not valid JSON: {}", e.what()));
  }
  Section root(j, "");
  std::string profile = "desk";
  root.get("profile", profile);
  MissionConfig c = profile_defaults(profile);
  root.get("seed", c.seed);
  int layout = kPlaneLayoutVersion;
  root.get("plane_layout_version", layout);
  if (layout != kPlaneLayoutVersion)
    throw ConfigError(fmt::format("plane_layout_version is {} but this build uses {}", layout,
                                  kPlaneLayoutVersion));

  if (auto s = root.child("terrain")) {
    s->get("side_length", c.terrain.side_length);
    s->get("resolution", c.terrain.resolution);
    s->get("altitudes", c.terrain.altitudes);
    s->finish();
  }
  if (auto s = root.child("kinematics")) {
    s->get("accel", c.kinematics.accel);
    s->get("max_speed", c.kinematics.max_speed);
    s->finish();
  }
  if (auto s = root.child("sensor")) {
    s->get("fov_degrees", c.sensor.fov_degrees);
    s->get("base_noise_var", c.sensor.base_noise_var);
    s->get("altitude_noise_coeff", c.sensor.altitude_noise_coeff);
    s->finish();
  }
  if (auto s = root.child("kernel")) {
    s->get("length_scale", c.kernel.length_scale);
    s->get("signal_variance", c.kernel.signal_variance);
    s->get("noise_variance", c.kernel.noise_variance);
    s->finish();
  }
  if (auto s = root.child("interest")) {
    s->get("beta", c.interest.beta);
    s->get("threshold", c.interest.threshold);
    s->finish();
  }
  if (auto s = root.child("mission")) {
    s->get("budget", c.budget);
    s->get("radius", c.radius);
    std::vector<double> start{c.mission.start.x, c.mission.start.y, c.mission.start.z};
    s->get("start", start);
    if (start.size() != 3) throw ConfigError("mission.start must hold [x, y, z]");
    c.mission.start = {start[0], start[1], start[2]};
    s->get("prior_mean", c.mission.prior_mean);
    s->get("fixed_planning_seconds", c.mission.fixed_planning_seconds);
    s->finish();
  }
  if (auto s = root.child("search")) read_search(*s, c.search);
  if (auto s = root.child("net")) {
    s->get("input_planes", c.net.input_planes);
    s->get("action_levels", c.net.action_levels);
    s->get("channels", c.net.channels);
    s->get("encoder_blocks", c.net.encoder_blocks);
    s->get("pooling_bias_interval", c.net.pooling_bias_interval);
    s->get("global_pooling_bias", c.net.global_pooling_bias);
    s->get("head_channels", c.net.head_channels);
    s->get("head_blocks", c.net.head_blocks);
    s->finish();
  } else {
    c.net.action_levels = c.terrain.levels();
    c.net.input_planes = feature_plane_count(c.terrain.levels(), true);
  }
  if (auto s = root.child("training")) {
    TrainingConfig& t = c.training;
    s->get("iterations", t.iterations);
    s->get("episodes", t.episodes);
    s->get("max_steps", t.max_steps);
    s->get("tau", t.tau);
    s->get("prior_mean", t.prior_mean);
    s->get("length_scale_min", t.length_scale_min);
    s->get("length_scale_max", t.length_scale_max);
    s->get("signal_variance_min", t.signal_variance_min);
    s->get("signal_variance_max", t.signal_variance_max);
    s->get("batch_size", t.batch_size);
    s->get("epochs", t.epochs);
    s->get("peak_lr", t.peak_lr);
    s->get("momentum", t.momentum);
    s->get("grad_clip", t.grad_clip);
    s->get("max_samples", t.max_samples);
    s->get("workers", t.workers);
    if (auto l = s->child("loss")) {
      l->get("value", t.loss.value);
      l->get("policy", t.loss.policy);
      l->get("l2", t.loss.l2);
      l->finish();
    }
    if (auto sc = s->child("schedule")) {
      ScheduleSpec& k = t.schedule;
      sc->get("c1_start", k.c1_start);
      sc->get("c1_min", k.c1_min);
      sc->get("c1_decay", k.c1_decay);
      sc->get("delta_start", k.delta_start);
      sc->get("delta_min", k.delta_min);
      sc->get("delta_decay", k.delta_decay);
      sc->get("window_start", k.window_start);
      sc->get("window_step", k.window_step);
      sc->get("window_max", k.window_max);
      sc->get("adaptive_window", k.adaptive_window);
      sc->get("decaying_exploration", k.decaying_exploration);
      sc->finish();
    }
    if (auto se = s->child("search")) read_search(*se, t.search);
    s->finish();
  }
  c.training.truth_kernel = c.kernel;
  c.mission.kernel = c.kernel;
  if (auto s = root.child("mcts_pw")) {
    s->get("num_simulations", c.mcts_pw.num_simulations);
    s->get("max_depth", c.mcts_pw.max_depth);
    s->get("rollout_depth", c.mcts_pw.rollout_depth);
    s->get("rollout_candidates", c.mcts_pw.rollout_candidates);
    s->get("widening_k", c.mcts_pw.widening_k);
    s->get("widening_alpha", c.mcts_pw.widening_alpha);
    s->get("exploration", c.mcts_pw.exploration);
    s->get("radius", c.mcts_pw.radius);
    s->finish();
  }
  if (auto s = root.child("cmaes")) {
    s->get("iterations", c.cmaes.iterations);
    s->get("offspring", c.cmaes.offspring);
    s->get("sigma_xy", c.cmaes.sigma_xy);
    s->get("sigma_z", c.cmaes.sigma_z);
    s->get("horizon", c.cmaes.horizon);
    s->finish();
  }
  if (auto s = root.child("coverage")) {
    s->get("altitude", c.coverage_altitude);
    s->finish();
  }
  if (auto s = root.child("evaluation")) {
    s->get("seeds", c.eval_seeds);
    s->get("planners", c.planners);
    s->get("workers", c.workers);
    s->finish();
  }
  root.finish();
  c.validate();
  return c;
}

MissionConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string dump_config(const MissionConfig& c) {
  const TrainingConfig& t = c.training;
  const ScheduleSpec& k = t.schedule;
  json j = {
      {"profile", c.profile},
      {"seed", c.seed},
      {"plane_layout_version", kPlaneLayoutVersion},
      {"terrain",
       {{"side_length", c.terrain.side_length},
        {"resolution", c.terrain.resolution},
        {"altitudes", c.terrain.altitudes}}},
      {"kinematics", {{"accel", c.kinematics.accel}, {"max_speed", c.kinematics.max_speed}}},
      {"sensor",
       {{"fov_degrees", c.sensor.fov_degrees},
        {"base_noise_var", c.sensor.base_noise_var},
        {"altitude_noise_coeff", c.sensor.altitude_noise_coeff}}},
      {"kernel",
       {{"length_scale", c.kernel.length_scale},
        {"signal_variance", c.kernel.signal_variance},
        {"noise_variance", c.kernel.noise_variance}}},
      {"interest", {{"beta", c.interest.beta}, {"threshold", c.interest.threshold}}},
      {"mission",
       {{"budget", c.budget},
        {"radius", optional_json(c.radius)},
        {"start", {c.mission.start.x, c.mission.start.y, c.mission.start.z}},
        {"prior_mean", c.mission.prior_mean},
        {"fixed_planning_seconds", optional_json(c.mission.fixed_planning_seconds)}}},
      {"search", write_search(c.search)},
      {"net",
       {{"input_planes", c.net.input_planes},
        {"action_levels", c.net.action_levels},
        {"channels", c.net.channels},
        {"encoder_blocks", c.net.encoder_blocks},
        {"pooling_bias_interval", c.net.pooling_bias_interval},
        {"global_pooling_bias", c.net.global_pooling_bias},
        {"head_channels", c.net.head_channels},
        {"head_blocks", c.net.head_blocks}}},
      {"training",
       {{"iterations", t.iterations},
        {"episodes", t.episodes},
        {"max_steps", t.max_steps},
        {"tau", t.tau},
        {"prior_mean", t.prior_mean},
        {"length_scale_min", t.length_scale_min},
        {"length_scale_max", t.length_scale_max},
        {"signal_variance_min", t.signal_variance_min},
        {"signal_variance_max", t.signal_variance_max},
        {"batch_size", t.batch_size},
        {"epochs", t.epochs},
        {"peak_lr", t.peak_lr},
        {"momentum", t.momentum},
        {"grad_clip", t.grad_clip},
        {"max_samples", t.max_samples},
        {"workers", t.workers},
        {"loss", {{"value", t.loss.value}, {"policy", t.loss.policy}, {"l2", t.loss.l2}}},
        {"schedule",
         {{"c1_start", k.c1_start},
          {"c1_min", k.c1_min},
          {"c1_decay", k.c1_decay},
          {"delta_start", k.delta_start},
          {"delta_min", k.delta_min},
          {"delta_decay", k.delta_decay},
          {"window_start", k.window_start},
          {"window_step", k.window_step},
          {"window_max", k.window_max},
          {"adaptive_window", k.adaptive_window},
          {"decaying_exploration", k.decaying_exploration}}},
        {"search", write_search(t.search)}}},
      {"mcts_pw",
       {{"num_simulations", c.mcts_pw.num_simulations},
        {"max_depth", c.mcts_pw.max_depth},
        {"rollout_depth", c.mcts_pw.rollout_depth},
        {"rollout_candidates", c.mcts_pw.rollout_candidates},
        {"widening_k", c.mcts_pw.widening_k},
        {"widening_alpha", c.mcts_pw.widening_alpha},
        {"exploration", c.mcts_pw.exploration},
        {"radius", optional_json(c.mcts_pw.radius)}}},
      {"cmaes",
       {{"iterations", c.cmaes.iterations},
        {"offspring", c.cmaes.offspring},
        {"sigma_xy", c.cmaes.sigma_xy},
        {"sigma_z", c.cmaes.sigma_z},
        {"horizon", c.cmaes.horizon}}},
      {"coverage", {{"altitude", c.coverage_altitude}}},
      {"evaluation", {{"seeds", c.eval_seeds}, {"planners", c.planners}, {"workers", c.workers}}},
  };
  return j.dump(2) + "\n";
}

std::vector<NamedPlanner> make_planners(const MissionConfig& cfg, const WorldModel& world,
                                        const std::vector<std::string>& names,
                                        std::shared_ptr<const Network> rl_net) {
  std::vector<NamedPlanner> out;
  for (const std::string& name : names) {
    PlannerFactory make;
    if (name == "rl") {
      if (!rl_net) throw ConfigError("planner 'rl' needs a checkpoint");
      make = [&world, rl_net, search = cfg.search] {
        return std::make_unique<RlPlanner>(world, rl_net, search);
      };
    } else if (name == "random") {
      make = [&world] { return std::make_unique<RandomPlanner>(world); };
    } else if (name == "coverage") {
      make = [&world, alt = cfg.coverage_altitude] {
        return std::make_unique<CoveragePlanner>(world, alt);
      };
    } else if (name == "mcts_pw") {
      make = [&world, c = cfg.mcts_pw] { return std::make_unique<MctsPwPlanner>(world, c); };
    } else if (name == "cmaes") {
      make = [&world, c = cfg.cmaes] { return std::make_unique<CmaEsPlanner>(world, c); };
    } else {
      throw ConfigError(fmt::format("unknown planner '{}' (valid: {})", name,
                                    fmt::join(planner_names(), ", ")));
    }
    out.push_back({name, std::move(make)});
  }
  return out;
}

MissionConfig apply_ablation(MissionConfig c, const std::string& variant) {
  if (variant == "baseline") {
  } else if (variant == "fixed_window") {
    c.training.schedule.adaptive_window = false;
  } else if (variant == "fixed_exploration") {
    c.training.schedule.decaying_exploration = false;
  } else if (variant == "no_forced_playouts") {
    c.training.search.forced_playouts = false;
  } else if (variant == "no_global_pooling") {
    c.net.global_pooling_bias = false;
  } else if (variant == "encoder5") {
    c.net.encoder_blocks = 5;
  } else if (variant == "no_history") {
    c.net.input_planes = feature_plane_count(c.terrain.levels(), false);
  } else {
    throw ConfigError(fmt::format("unknown ablation variant '{}' (valid: {})", variant,
                                  fmt::join(ablation_variants(), ", ")));
  }
  return c;
}

}  // namespace ipp
