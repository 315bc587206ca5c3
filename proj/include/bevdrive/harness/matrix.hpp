#pragma once

#include <iomanip>
#include <sstream>

#include "bevdrive/harness/episode.hpp"

namespace bevdrive {

/// Named closed-loop evaluation routes with controlled shapes.
struct EvalRoute {
  std::string name;
  std::string map_id;
  Route route;
};

/// Deterministic route library: "straight", "left", "right", "mixed" (a
/// straight-through plus a turn). Goal noise varies with the seed.
inline EvalRoute buildEvalRoute(const std::string& name, std::uint64_t seed) {
  Rng rng(seed ^ 0x407E5ull);
  RouteParams rp;
  EvalRoute out;
  out.name = name;
  if (name == "straight") {
    out.map_id = "straight";
    RoadMap map = mapgen::byId(out.map_id);
    out.route = routeFromWalk(map, {0}, rng, rp);
    return out;
  }
  out.map_id = "town3x3";
  RoadMap map = mapgen::byId(out.map_id);
  auto findConn = [&](Command cmd, int skip = 0) -> const LaneConnection* {
    int seen = 0;
    for (const auto& c : map.connections) {
      if (c.cmd != cmd) continue;
      // Prefer connections whose incoming lane is long enough to settle in.
      if (map.lanes[c.from].center.length() < 20.0) continue;
      if (map.lanes[c.to].center.length() < 20.0) continue;
      if (seen++ == skip) return &c;
    }
    return nullptr;
  };
  if (name == "left" || name == "right") {
    const auto* conn =
        findConn(name == "left" ? Command::kTurnLeft : Command::kTurnRight, 1);
    if (!conn) throw std::runtime_error("eval route: no matching turn connection");
    out.route = routeFromWalk(map, {conn->from, conn->to}, rng, rp);
    return out;
  }
  if (name == "mixed") {
    // Straight through one intersection, then turn at the next.
    for (const auto& c1 : map.connections) {
      if (c1.cmd != Command::kGoStraight) continue;
      for (const auto& c2 : map.connections) {
        if (c2.from != c1.to || c2.cmd != Command::kTurnRight) continue;
        if (map.lanes[c1.from].center.length() < 20.0) continue;
        out.route = routeFromWalk(map, {c1.from, c1.to, c2.to}, rng, rp);
        return out;
      }
    }
    throw std::runtime_error("eval route: no mixed walk found");
  }
  throw std::invalid_argument("unknown eval route: " + name);
}

struct MatrixEntry {
  std::string name;
  std::filesystem::path checkpoint;
  int refine_override = -1;  // -1: use the bundle's K
  // Optional driver override (scripted baselines, tests); when empty the
  // checkpoint is loaded as a student bundle.
  std::function<std::unique_ptr<EpisodeDriver>(const NoisePreset&)> driver;
};

struct MatrixOptions {
  std::vector<std::string> routes = {"straight", "left", "right", "mixed"};
  std::vector<std::string> presets = {"clean"};
  std::vector<std::uint64_t> seeds = {0, 1, 2};
  int traffic = 0;
  std::vector<ScenarioKind> scenarios;
  double time_budget_s = 300.0;
  ScoreConfig score;
  double det_threshold = 0.3;
  ControlConfig control;
  bool write_logs = false;
  std::filesystem::path out_dir;
};

struct MatrixRow {
  std::string config;
  int episodes = 0;
  bool skipped = false;
  std::map<std::string, double> mean, stddev;
};

struct MatrixReport {
  std::vector<MatrixRow> rows;
  nlohmann::json detail;
};

namespace detail {

inline void accumulate(std::map<std::string, std::vector<double>>& acc,
                       const EpisodeScore& s) {
  acc["DS"].push_back(s.driving_score);
  acc["RC"].push_back(s.route_completion);
  acc["IS"].push_back(s.infraction_score);
  for (const auto& [k, v] : s.per_km) acc[k + "/km"].push_back(v);
}

inline std::pair<double, double> meanStd(const std::vector<double>& v) {
  if (v.empty()) return {0.0, 0.0};
  double m = 0;
  for (double x : v) m += x;
  m /= v.size();
  double s2 = 0;
  for (double x : v) s2 += (x - m) * (x - m);
  return {m, std::sqrt(s2 / v.size())};
}

}  // namespace detail

/// Run every config over routes x noise presets x seeds and aggregate
/// mean +/- std per metric. Missing checkpoints skip the config (reported).
inline MatrixReport runMatrix(const std::vector<MatrixEntry>& entries,
                              const MatrixOptions& opt,
                              std::ostream* progress = nullptr) {
  MatrixReport report;
  nlohmann::json detail = nlohmann::json::array();

  for (const auto& entry : entries) {
    MatrixRow row;
    row.config = entry.name;
    if (!entry.driver && !std::filesystem::exists(entry.checkpoint)) {
      row.skipped = true;
      report.rows.push_back(row);
      if (progress)
        (*progress) << "config " << entry.name << ": checkpoint not found, skipped ("
                    << entry.checkpoint.string() << ")\n";
      continue;
    }
    std::map<std::string, std::vector<double>> acc;
    for (const auto& route_name : opt.routes) {
      for (const auto& preset_name : opt.presets) {
        for (std::uint64_t seed : opt.seeds) {
          const std::uint64_t ep_seed =
              seed * 7919 + std::hash<std::string>{}(route_name + preset_name) % 104729;
          EvalRoute er = buildEvalRoute(route_name, ep_seed);
          RoadMap map = mapgen::byId(er.map_id);
          std::unique_ptr<EpisodeDriver> agent;
          if (entry.driver) {
            agent = entry.driver(noisePreset(preset_name));
          } else {
            agent = std::make_unique<StudentAgent>(
                loadStudentBundle(entry.checkpoint), noisePreset(preset_name),
                opt.control, opt.det_threshold, entry.refine_override);
          }
          EpisodeConfig ec;
          ec.seed = ep_seed;
          ec.time_budget_s = opt.time_budget_s;
          ec.traffic = opt.traffic;
          ec.scenarios = opt.scenarios;
          ec.score = opt.score;
          EpisodeLog log;
          EpisodeLog* log_ptr = opt.write_logs ? &log : nullptr;
          EpisodeResult res = runEpisode(*agent, map, er.route, ec, log_ptr);
          detail.push_back({{"config", entry.name},
                            {"route", route_name},
                            {"preset", preset_name},
                            {"seed", seed},
                            {"termination", res.termination},
                            {"score", res.score.toJson()}});
          if (opt.write_logs && !opt.out_dir.empty()) {
            std::ostringstream dir;
            dir << entry.name << "_" << route_name << "_" << preset_name << "_s" << seed;
            writeEpisodeLog(opt.out_dir / "episodes" / dir.str(), log);
          }
          detail::accumulate(acc, res.score);
          ++row.episodes;
          if (progress)
            (*progress) << entry.name << " " << route_name << "/" << preset_name << "/s"
                        << seed << ": RC " << res.score.route_completion << " DS "
                        << res.score.driving_score << " (" << res.termination << ")\n";
        }
      }
    }
    for (const auto& [k, v] : acc) {
      auto [m, s] = detail::meanStd(v);
      row.mean[k] = m;
      row.stddev[k] = s;
    }
    report.rows.push_back(row);
  }
  report.detail = detail;
  return report;
}

inline std::string formatReportTable(const MatrixReport& report) {
  std::ostringstream os;
  std::vector<std::string> cols = {"DS", "RC", "IS"};
  for (const auto& t : infractionTypes()) cols.push_back(t + "/km");
  os << std::left << std::setw(22) << "config" << std::setw(6) << "runs";
  for (const auto& c : cols) os << std::setw(18) << c;
  os << "\n";
  for (const auto& row : report.rows) {
    os << std::left << std::setw(22) << row.config;
    if (row.skipped) {
      os << "skipped (missing checkpoint)\n";
      continue;
    }
    os << std::setw(6) << row.episodes;
    for (const auto& c : cols) {
      std::ostringstream cell;
      if (row.mean.count(c))
        cell << std::fixed << std::setprecision(3) << row.mean.at(c) << " +/- "
             << std::setprecision(3) << row.stddev.at(c);
      else
        cell << "-";
      os << std::setw(18) << cell.str();
    }
    os << "\n";
  }
  return os.str();
}

inline void writeReport(const MatrixReport& report, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json j;
  j["rows"] = nlohmann::json::array();
  for (const auto& r : report.rows)
    j["rows"].push_back({{"config", r.config},
                         {"episodes", r.episodes},
                         {"skipped", r.skipped},
                         {"mean", r.mean},
                         {"stddev", r.stddev}});
  j["episodes"] = report.detail;
  std::ofstream jf(dir / "report.json");
  jf << j.dump(2) << "\n";
  std::ofstream tf(dir / "report.txt");
  tf << formatReportTable(report);
}

}  // namespace bevdrive
