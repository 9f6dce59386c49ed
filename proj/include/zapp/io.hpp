// Copyright 2026 The ZAPP Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "zapp/error.hpp"
#include "zapp/simulator.hpp"

namespace zapp::io {

using nlohmann::json;

inline json to_json(const Vector2d& v) { return json::array({v.x(), v.y()}); }
inline json to_json(const Eigen::Vector4d& v) { return json::array({v(0), v(1), v(2), v(3)}); }

inline Vector2d vec2(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }
inline Eigen::Vector4d vec4(const json& j) {
  Eigen::Vector4d v;
  for (int i = 0; i < 4; ++i) v(i) = j.at(static_cast<std::size_t>(i)).get<double>();
  return v;
}

// {"seed", "walls": [{"center", "generators": [[gx, gy], ...]}], "agents": [[px, py, vx, vy]],
//  "desired_velocity": [[vx, vy]], "ego_start": [px, py, vx, vy], "goal": [x, y]}
inline json scene_to_json(const sim::Scene& s) {
  json walls = json::array();
  for (const auto& w : s.walls) {
    json gens = json::array();
    for (Index j = 0; j < w.num_generators(); ++j) gens.push_back(json::array({w.generators()(0, j), w.generators()(1, j)}));
    walls.push_back({{"center", to_json(Vector2d(w.center().head<2>()))}, {"generators", gens}});
  }
  json agents = json::array();
  for (const auto& a : s.agents) agents.push_back(to_json(a));
  json desired = json::array();
  for (const auto& v : s.desired_velocity) desired.push_back(to_json(v));
  return {{"seed", s.seed},        {"walls", walls},         {"agents", agents}, {"desired_velocity", desired},
          {"ego_start", to_json(s.ego_start)}, {"goal", to_json(s.goal)}};
}

inline sim::Scene scene_from_json(const json& j) {
  sim::Scene s;
  try {
    s.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& w : j.at("walls")) {
      const auto& gens = w.at("generators");
      MatrixXd g(2, static_cast<Index>(gens.size()));
      for (std::size_t c = 0; c < gens.size(); ++c) g.col(static_cast<Index>(c)) = vec2(gens[c]);
      s.walls.emplace_back(vec2(w.at("center")), g);
    }
    for (const auto& a : j.at("agents")) s.agents.push_back(vec4(a));
    for (const auto& v : j.at("desired_velocity")) s.desired_velocity.push_back(vec2(v));
    s.ego_start = vec4(j.at("ego_start"));
    s.goal = vec2(j.at("goal"));
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("scene_from_json: ") + e.what());
  }
  return s;
}

// Episode record without wall-clock content; states are decimated by `stride`
// (the final state is always kept).
inline json log_to_json(const sim::EpisodeLog& log, int stride = 1) {
  if (stride < 1) throw InvalidArgument("log_to_json: stride must be >= 1");
  json states = json::array();
  const std::size_t n = log.states.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (i % static_cast<std::size_t>(stride) != 0 && i + 1 != n) continue;
    json agents = json::array();
    for (const auto& a : log.states[i].agents) agents.push_back(to_json(a));
    json row = {{"t", log.times[i]}, {"ego", to_json(log.states[i].ego)}, {"agents", agents}};
    if (i < log.controls.size()) row["u"] = to_json(log.controls[i]);
    states.push_back(std::move(row));
  }
  json plans = json::array();
  for (const auto& p : log.plans) {
    json controls = json::array();
    for (const auto& mode : p.mode_controls) {
      json seq = json::array();
      for (const auto& u : mode) seq.push_back(to_json(u));
      controls.push_back(std::move(seq));
    }
    plans.push_back({{"time", p.time},
                     {"feasible", p.feasible},
                     {"fallback", p.fallback},
                     {"outer_iterations", p.outer_iterations},
                     {"min_slack", p.min_slack},
                     {"audit_min_slack", p.audit_min_slack},
                     {"num_records", p.num_records},
                     {"gamma", p.gamma},
                     {"controls", controls}});
  }
  json crash = nullptr;
  if (log.crash) {
    crash = {{"time", log.crash->time},
             {"kind", sim::to_string(log.crash->kind)},
             {"index", log.crash->index},
             {"position", to_json(log.crash->ego_position)}};
  }
  return {{"seed", log.seed},
          {"variant", log.variant},
          {"outcome", sim::to_string(log.outcome())},
          {"end_time", log.end_time},
          {"distance", log.distance},
          {"x_progress", log.x_progress},
          {"crash", crash},
          {"state_stride", stride},
          {"states", states},
          {"plans", plans}};
}

inline void write_jsonl(const std::filesystem::path& path, const std::vector<json>& rows) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& r : rows) out << r.dump() << '\n';
}

inline std::vector<json> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path.string());
  std::vector<json> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) rows.push_back(json::parse(line));
  }
  return rows;
}

inline const char* kMetricsHeader =
    "variant,goals_pct,crashes_pct,avg_speed_mean,avg_speed_std,solve_time_mean,solve_time_std";

inline std::string format_fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

inline std::string metrics_csv(const std::vector<sim::MetricsTable>& rows) {
  std::ostringstream out;
  out << kMetricsHeader << '\n';
  for (const auto& m : rows) {
    out << m.variant << ',' << format_fixed(m.goals_pct, 6) << ',' << format_fixed(m.crashes_pct, 6) << ','
        << format_fixed(m.avg_speed_mean, 6) << ',' << format_fixed(m.avg_speed_std, 6) << ','
        << format_fixed(m.solve_time_mean, 6) << ',' << format_fixed(m.solve_time_std, 6) << '\n';
  }
  return out.str();
}

inline std::vector<sim::MetricsTable> parse_metrics_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kMetricsHeader) throw InvalidArgument("metrics csv: bad header");
  std::vector<sim::MetricsTable> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (cells.size() != 7) throw InvalidArgument("metrics csv: expected 7 columns in '" + line + "'");
    sim::MetricsTable m;
    m.variant = cells[0];
    try {
      m.goals_pct = std::stod(cells[1]);
      m.crashes_pct = std::stod(cells[2]);
      m.avg_speed_mean = std::stod(cells[3]);
      m.avg_speed_std = std::stod(cells[4]);
      m.solve_time_mean = std::stod(cells[5]);
      m.solve_time_std = std::stod(cells[6]);
    } catch (const std::exception&) {
      throw InvalidArgument("metrics csv: non-numeric cell in '" + line + "'");
    }
    rows.push_back(m);
  }
  return rows;
}

// Columns in fixed order: G/C, AS, ST. ST is measured wall-clock time.
inline std::string metrics_table(const std::vector<sim::MetricsTable>& rows) {
  std::size_t w = 8;
  for (const auto& m : rows) w = std::max(w, m.variant.size());
  auto pad = [](std::string s, std::size_t n) {
    s.resize(std::max(n, s.size()), ' ');
    return s;
  };
  std::ostringstream out;
  out << pad("variant", w) << "  " << pad("G/C [%]", 13) << "  " << pad("AS [m/s]", 13) << "  "
      << "ST [s] (wall clock)" << '\n';
  for (const auto& m : rows) {
    out << pad(m.variant, w) << "  " << pad(format_fixed(m.goals_pct, 1) + " / " + format_fixed(m.crashes_pct, 1), 13)
        << "  " << pad(format_fixed(m.avg_speed_mean, 2) + " +- " + format_fixed(m.avg_speed_std, 2), 13) << "  "
        << format_fixed(m.solve_time_mean, 3) << " +- " << format_fixed(m.solve_time_std, 3) << '\n';
  }
  return out.str();
}

inline std::string solve_times_csv(const std::vector<sim::EpisodeLog>& logs) {
  std::ostringstream out;
  out << "seed,plan_time,solve_time_s\n";
  for (const auto& log : logs)
    for (const auto& p : log.plans) out << log.seed << ',' << format_fixed(p.time, 2) << ',' << format_fixed(p.solve_time, 6) << '\n';
  return out.str();
}

// Overhead view: walls, agent squares fading in with time, executed ego path
// and the planned ego positions of every MPC execution.
inline std::string episode_svg(const sim::Scene& scene, const sim::EpisodeLog& log, double half_width = 0.5) {
  double x0 = 1e9, x1 = -1e9, y0 = 1e9, y1 = -1e9;
  for (const auto& w : scene.walls) {
    const auto b = dynamics::interval_hull(w);
    x0 = std::min(x0, b.lo.x());
    x1 = std::max(x1, b.hi.x());
    y0 = std::min(y0, b.lo.y());
    y1 = std::max(y1, b.hi.y());
  }
  if (scene.walls.empty()) {
    x0 = -5;
    x1 = 35;
    y0 = -5;
    y1 = 5;
  }
  const double s = 25.0;
  auto px = [&](double x) { return format_fixed((x - x0) * s, 2); };
  auto py = [&](double y) { return format_fixed((y1 - y) * s, 2); };
  const double t_end = std::max(log.end_time, 1e-9);
  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << format_fixed((x1 - x0) * s, 0) << "\" height=\""
    << format_fixed((y1 - y0) * s, 0) << "\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (const auto& w : scene.walls) {
    const auto b = dynamics::interval_hull(w);
    o << "<rect x=\"" << px(b.lo.x()) << "\" y=\"" << py(b.hi.y()) << "\" width=\""
      << format_fixed((b.hi.x() - b.lo.x()) * s, 2) << "\" height=\"" << format_fixed((b.hi.y() - b.lo.y()) * s, 2)
      << "\" fill=\"#777\"/>\n";
  }
  o << "<line x1=\"" << px(scene.goal.x()) << "\" y1=\"" << py(y0) << "\" x2=\"" << px(scene.goal.x()) << "\" y2=\""
    << py(y1) << "\" stroke=\"green\" stroke-dasharray=\"6,4\"/>\n";

  // agent squares every 0.5 s, opacity grows with time
  const int every = std::max<int>(1, static_cast<int>(std::lround(0.5 / std::max(1e-9, log.times.size() > 1 ? log.times[1] - log.times[0] : 0.5))));
  for (std::size_t i = 0; i < log.states.size(); i += static_cast<std::size_t>(every)) {
    const double alpha = 0.1 + 0.8 * log.times[i] / t_end;
    for (const auto& a : log.states[i].agents) {
      o << "<rect x=\"" << px(a.x() - half_width) << "\" y=\"" << py(a.y() + half_width) << "\" width=\""
        << format_fixed(2 * half_width * s, 2) << "\" height=\"" << format_fixed(2 * half_width * s, 2)
        << "\" fill=\"none\" stroke=\"#c0392b\" stroke-opacity=\"" << format_fixed(alpha, 3) << "\"/>\n";
    }
  }
  for (const auto& p : log.plans) {
    const double alpha = 0.15 + 0.6 * p.time / t_end;
    for (std::size_t m = 0; m < p.planned_positions.size(); ++m) {
      o << "<polyline fill=\"none\" stroke=\"#2e86c1\" stroke-width=\"1\" stroke-opacity=\"" << format_fixed(alpha, 3)
        << "\"" << (m > 0 ? " stroke-dasharray=\"3,3\"" : "") << " points=\"";
      for (const auto& q : p.planned_positions[m]) o << px(q.x()) << ',' << py(q.y()) << ' ';
      o << "\"/>\n";
    }
  }
  o << "<polyline fill=\"none\" stroke=\"#1a5276\" stroke-width=\"2\" points=\"";
  for (std::size_t i = 0; i < log.states.size(); i += 5) o << px(log.states[i].ego.x()) << ',' << py(log.states[i].ego.y()) << ' ';
  if (!log.states.empty()) o << px(log.states.back().ego.x()) << ',' << py(log.states.back().ego.y());
  o << "\"/>\n";
  if (log.crash) {
    o << "<circle cx=\"" << px(log.crash->ego_position.x()) << "\" cy=\"" << py(log.crash->ego_position.y())
      << "\" r=\"6\" fill=\"none\" stroke=\"black\" stroke-width=\"2\"/>\n";
  }
  o << "</svg>\n";
  return o.str();
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

}  // namespace zapp::io
