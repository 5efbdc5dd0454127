#pragma once

#include <fstream>
#include <iomanip>
#include <map>

#include "swoc/outer.hpp"

namespace swoc {

/// Writes a trajectory as CSV: z, t, x_1..x_nx, u_1..u_nu, one row per node,
/// 17 significant digits so values round-trip exactly.
inline void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
  const int nx = static_cast<int>(traj.x.front().size());
  const int nu = static_cast<int>(traj.u.front().size());
  os << "z,t";
  for (int i = 1; i <= nx; ++i) os << ",x_" << i;
  for (int i = 1; i <= nu; ++i) os << ",u_" << i;
  os << "\n";
  os << std::setprecision(17);
  for (std::size_t k = 0; k < traj.z.size(); ++k) {
    os << traj.z[k] << "," << traj.t[k];
    for (int i = 0; i < nx; ++i) os << "," << traj.x[k](i);
    for (int i = 0; i < nu; ++i) os << "," << traj.u[k](i);
    os << "\n";
  }
}

inline Trajectory read_trajectory_csv(std::istream& is) {
  std::string header;
  if (!std::getline(is, header))
    throw std::runtime_error("trajectory CSV: missing header");
  int nx = 0, nu = 0;
  {
    std::istringstream hs(header);
    std::string col;
    while (std::getline(hs, col, ',')) {
      if (col.rfind("x_", 0) == 0) ++nx;
      if (col.rfind("u_", 0) == 0) ++nu;
    }
  }
  Trajectory traj;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string cell;
    std::vector<double> row;
    while (std::getline(ls, cell, ',')) row.push_back(std::stod(cell));
    if (static_cast<int>(row.size()) != 2 + nx + nu)
      throw std::runtime_error("trajectory CSV: malformed row");
    traj.z.push_back(row[0]);
    traj.t.push_back(row[1]);
    Vec x(nx), u(nu);
    for (int i = 0; i < nx; ++i) x(i) = row[static_cast<std::size_t>(2 + i)];
    for (int i = 0; i < nu; ++i)
      u(i) = row[static_cast<std::size_t>(2 + nx + i)];
    traj.x.push_back(std::move(x));
    traj.u.push_back(std::move(u));
  }
  return traj;
}

inline std::string termination_name(OuterTermination t) {
  switch (t) {
    case OuterTermination::kGapSmall: return "gap-small";
    case OuterTermination::kStepSmall: return "step-small";
    case OuterTermination::kNoImprovement: return "no-improvement";
    case OuterTermination::kMaxIterations: return "max-iterations";
  }
  return "unknown";
}

/// Flat key = value report. The wall_time_ms field is the only entry that
/// varies between otherwise identical runs.
inline void write_report(std::ostream& os, const OuterReport& report,
                         const std::map<std::string, std::string>& settings) {
  os << std::setprecision(17);
  os << "cost = " << report.optimal_cost << "\n";
  os << "switching_times =";
  for (int j = 0; j < report.optimal_times.size(); ++j)
    os << " " << report.optimal_times[j];
  os << "\n";
  os << "outer_iterations = " << report.outer_iterations << "\n";
  os << "function_calls = " << report.function_calls << "\n";
  os << "total_inner_iterations = " << report.total_inner_iterations << "\n";
  os << "converged = " << (report.converged ? "true" : "false") << "\n";
  os << "termination = " << termination_name(report.termination_reason)
     << "\n";
  os << "gradient_at_solution =";
  if (!report.gradient_history.empty())
    for (double g : report.gradient_history.back()) os << " " << g;
  os << "\n";
  for (const auto& [k, v] : settings) os << k << " = " << v << "\n";
  os << "wall_time_ms = " << report.wall_time_ms << "\n";
}

inline std::map<std::string, std::string> parse_report(std::istream& is) {
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(is, line)) {
    const auto pos = line.find(" = ");
    if (pos == std::string::npos) continue;
    kv[line.substr(0, pos)] = line.substr(pos + 3);
  }
  return kv;
}

}  // namespace swoc
