#include "ipp/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "ipp/error.hpp"
#include "ipp/parallel.hpp"
#include "ipp/rng.hpp"

namespace ipp {

void MissionSpec::validate() const {
  kernel.validate();
  if (fixed_planning_seconds && !(*fixed_planning_seconds >= 0.0))
    throw ConfigError("mission.fixed_planning_seconds must be >= 0");
}

MapMetrics metrics(const GridMapBelief& belief, const GroundTruthField& truth,
                   std::span<const int> interest) {
  if (truth.values.size() != belief.mean.size())
    throw ContractViolation("metrics: belief and truth sizes differ");
  if (interest.empty()) return {};
  MapMetrics m;
  double se = 0.0;
  for (int c : interest) {
    m.trace += belief.cov(c, c);
    const double e = belief.mean[c] - truth.values[c];
    se += e * e;
  }
  m.rmse = std::sqrt(se / static_cast<double>(interest.size()));
  return m;
}

MissionResult run_mission(Planner& planner, const WorldModel& world, const MissionSpec& spec,
                          std::uint64_t seed) {
  spec.validate();
  MissionResult out;
  out.planner = planner.name();
  out.seed = seed;
  out.budget = world.total_budget();

  const GroundTruthField truth = generate_ground_truth(
      derive_seed(seed, {1}), world.terrain(), spec.kernel, world.interest_spec().threshold);
  GridMapBelief belief = build_prior(world.terrain(), spec.kernel, spec.prior_mean);
  int pose = world.lattice().nearest(spec.start);
  out.start_action = pose;
  const MapMetrics initial = metrics(belief, truth, world.interest(belief));
  out.initial_trace = initial.trace;
  out.initial_rmse = initial.rmse;

  planner.reset(seed);
  double remaining = world.total_budget();
  double effective = 0.0, travelled = 0.0;
  for (int step = 0;; ++step) {
    std::optional<int> action;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      action = planner.plan({belief, pose, remaining});
    } catch (const std::exception& e) {
      out.aborted = true;
      out.diagnostic = fmt::format("planner failed at step {}: {}", step, e.what());
      break;
    }
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const double planning = spec.fixed_planning_seconds.value_or(wall);
    out.total_planning_seconds += planning;
    ++out.planning_calls;
    remaining -= planning;
    if (!action) break;
    if (*action < 0 || *action >= world.action_count() || *action == pose) {
      out.aborted = true;
      out.diagnostic = fmt::format("planner returned invalid action {} at step {}", *action, step);
      break;
    }
    const double cost = world.cost(pose, *action);
    if (cost > remaining) break;

    const Position& target = world.lattice().pose(*action).position;
    const Measurement m = measure(truth, target, world.terrain(), world.sensor(),
                                  derive_seed(seed, {2, static_cast<std::uint64_t>(step)}));
    belief = kalman_fuse(belief, m.cells, m.values, m.noise_variance);
    pose = *action;
    remaining -= cost;
    travelled += cost;
    effective += planning + cost;

    StepLog log;
    log.step = step;
    log.action = pose;
    log.pose = target;
    log.planning_seconds = planning;
    log.travel_seconds = cost;
    const MapMetrics mm = metrics(belief, truth, world.interest(belief));
    log.trace = mm.trace;
    log.rmse = mm.rmse;
    log.effective_time = effective;
    log.travel_time = travelled;
    out.steps.push_back(log);
  }
  out.effective_time = out.total_planning_seconds + travelled;
  return out;
}

MapMetrics metrics_at(const MissionResult& mission, double fraction) {
  const double t = fraction * mission.budget;
  double t_prev = 0.0;
  MapMetrics prev{mission.initial_trace, mission.initial_rmse};
  for (const StepLog& s : mission.steps) {
    if (t <= s.effective_time) {
      const double span = s.effective_time - t_prev;
      const double w = span > 0.0 ? (t - t_prev) / span : 1.0;
      return {prev.trace + w * (s.trace - prev.trace), prev.rmse + w * (s.rmse - prev.rmse)};
    }
    t_prev = s.effective_time;
    prev = {s.trace, s.rmse};
  }
  return prev;
}

std::vector<AggregateRow> aggregate(const std::vector<MissionResult>& missions) {
  std::vector<std::string> order;
  std::map<std::string, std::vector<const MissionResult*>> groups;
  for (const MissionResult& m : missions) {
    if (!groups.contains(m.planner)) order.push_back(m.planner);
    groups[m.planner].push_back(&m);
  }
  std::vector<AggregateRow> rows;
  for (const std::string& name : order) {
    const auto& group = groups[name];
    const double n = static_cast<double>(group.size());
    double plan = 0.0;
    for (const MissionResult* m : group) plan += m->mean_planning_seconds() / n;
    for (double f : kCheckpointFractions) {
      AggregateRow row;
      row.planner = name;
      row.checkpoint = f;
      row.missions = static_cast<int>(group.size());
      row.mean_plan_seconds = plan;
      std::vector<MapMetrics> values;
      for (const MissionResult* m : group) values.push_back(metrics_at(*m, f));
      for (const MapMetrics& v : values) {
        row.trace_mean += v.trace / n;
        row.rmse_mean += v.rmse / n;
      }
      for (const MapMetrics& v : values) {
        row.trace_std += (v.trace - row.trace_mean) * (v.trace - row.trace_mean) / n;
        row.rmse_std += (v.rmse - row.rmse_mean) * (v.rmse - row.rmse_mean) / n;
      }
      row.trace_std = std::sqrt(row.trace_std);
      row.rmse_std = std::sqrt(row.rmse_std);
      // Identical missions give exactly zero spread, not rounding residue.
      auto same = [&](auto field) {
        return std::all_of(values.begin(), values.end(),
                           [&](const MapMetrics& v) { return v.*field == values.front().*field; });
      };
      if (same(&MapMetrics::trace)) {
        row.trace_mean = values.front().trace;
        row.trace_std = 0.0;
      }
      if (same(&MapMetrics::rmse)) {
        row.rmse_mean = values.front().rmse;
        row.rmse_std = 0.0;
      }
      rows.push_back(row);
    }
  }
  return rows;
}

Comparison compare(const std::vector<NamedPlanner>& planners,
                   const std::vector<std::uint64_t>& seeds, const WorldModel& world,
                   const MissionSpec& spec, int workers) {
  if (planners.empty()) throw ContractViolation("compare: no planners");
  if (seeds.empty()) throw ContractViolation("compare: no seeds");
  // A repeated seed reuses the first mission: measured planning time would
  // otherwise make the copies differ slightly.
  std::vector<std::size_t> first(seeds.size());
  std::vector<std::size_t> unique;
  for (std::size_t s = 0; s < seeds.size(); ++s) {
    first[s] = static_cast<std::size_t>(std::find(seeds.begin(), seeds.end(), seeds[s]) - seeds.begin());
    if (first[s] == s) unique.push_back(s);
  }
  Comparison out;
  out.missions.resize(planners.size() * seeds.size());
  const int n = static_cast<int>(planners.size() * unique.size());
  parallel_for(n, workers, [&](int job) {
    const auto p = static_cast<std::size_t>(job) / unique.size();
    const auto s = unique[static_cast<std::size_t>(job) % unique.size()];
    std::unique_ptr<Planner> planner = planners[p].make();
    MissionResult r = run_mission(*planner, world, spec, seeds[s]);
    r.planner = planners[p].name;
    out.missions[p * seeds.size() + s] = std::move(r);
  });
  for (std::size_t p = 0; p < planners.size(); ++p)
    for (std::size_t s = 0; s < seeds.size(); ++s)
      if (first[s] != s) out.missions[p * seeds.size() + s] = out.missions[p * seeds.size() + first[s]];
  out.table = aggregate(out.missions);
  return out;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

namespace {

std::vector<std::string> parse_csv_line(const std::string& line) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        fields.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        fields.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back();
    } else if (c != '\r') {
      fields.back() += c;
    }
  }
  return fields;
}

std::ofstream open_output(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

std::string checkpoint_label(double f) { return fmt::format("{:.0f}", 100.0 * f); }

}  // namespace

void write_aggregate_csv(const std::filesystem::path& path, const std::vector<AggregateRow>& rows) {
  std::ofstream out = open_output(path);
  out << "planner,checkpoint,missions,trace_mean,trace_std,rmse_mean,rmse_std,mean_plan_seconds\n";
  for (const AggregateRow& r : rows)
    out << fmt::format("{},{:.17g},{},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g}\n",
                       csv_field(r.planner), r.checkpoint, r.missions, r.trace_mean, r.trace_std,
                       r.rmse_mean, r.rmse_std, r.mean_plan_seconds);
}

std::vector<AggregateRow> read_aggregate_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  std::getline(in, line);
  std::vector<AggregateRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const std::vector<std::string> f = parse_csv_line(line);
    if (f.size() != 8) throw std::runtime_error("malformed aggregate row: " + line);
    AggregateRow r;
    r.planner = f[0];
    r.checkpoint = std::stod(f[1]);
    r.missions = std::stoi(f[2]);
    r.trace_mean = std::stod(f[3]);
    r.trace_std = std::stod(f[4]);
    r.rmse_mean = std::stod(f[5]);
    r.rmse_std = std::stod(f[6]);
    r.mean_plan_seconds = std::stod(f[7]);
    rows.push_back(r);
  }
  return rows;
}

void write_results_csv(const std::filesystem::path& path,
                       const std::vector<MissionResult>& missions) {
  std::ofstream out = open_output(path);
  out << "planner,seed,checkpoint,trace,rmse,mean_plan_seconds\n";
  for (const MissionResult& m : missions)
    for (double f : kCheckpointFractions) {
      const MapMetrics v = metrics_at(m, f);
      out << fmt::format("{},{},{},{:.17g},{:.17g},{:.17g}\n", csv_field(m.planner), m.seed,
                         checkpoint_label(f), v.trace, v.rmse, m.mean_planning_seconds());
    }
}

void write_step_log(const std::filesystem::path& path, const MissionResult& mission) {
  std::ofstream out = open_output(path);
  for (const StepLog& s : mission.steps) {
    const nlohmann::json j = {{"step", s.step},
                              {"action", s.action},
                              {"x", s.pose.x},
                              {"y", s.pose.y},
                              {"z", s.pose.z},
                              {"planning_seconds", s.planning_seconds},
                              {"travel_seconds", s.travel_seconds},
                              {"trace", s.trace},
                              {"rmse", s.rmse},
                              {"effective_time", s.effective_time},
                              {"travel_time", s.travel_time}};
    out << j.dump() << '\n';
  }
  if (mission.aborted) out << nlohmann::json{{"aborted", mission.diagnostic}}.dump() << '\n';
}

void write_path_csv(const std::filesystem::path& path, const MissionResult& mission) {
  std::ofstream out = open_output(path);
  out << "step,action,x,y,z\n";
  for (const StepLog& s : mission.steps)
    out << fmt::format("{},{},{},{},{}\n", s.step, s.action, s.pose.x, s.pose.y, s.pose.z);
}

}  // namespace ipp
