#pragma once

#include <chrono>

#include "swoc/switch_gradient.hpp"

namespace swoc {

struct SolutionBagEntry {
  SwitchingTimes times;
  SlqPolicy policy;
  double cost{0.0};
};

/// Memo of converged inner solutions, queried by nearest switching-time
/// vector (sum of squared differences; ties broken by lowest cost, then
/// insertion order).
class SolutionBag {
 public:
  void store(SwitchingTimes times, SlqPolicy policy, double cost) {
    entries_.push_back({std::move(times), std::move(policy), cost});
  }

  const SolutionBagEntry* lookup(const SwitchingTimes& query) const {
    const SolutionBagEntry* best = nullptr;
    double best_ssd = 0.0;
    for (const auto& e : entries_) {
      double ssd = 0.0;
      for (int j = 0; j < query.size(); ++j) {
        const double d = e.times[j] - query[j];
        ssd += d * d;
      }
      if (!best || ssd < best_ssd ||
          (ssd == best_ssd && e.cost < best->cost)) {
        best = &e;
        best_ssd = ssd;
      }
    }
    return best;
  }

  bool empty() const { return entries_.empty(); }
  std::size_t size() const { return entries_.size(); }

 private:
  std::vector<SolutionBagEntry> entries_;
};

/// Linear minimization oracle over the switching-time polytope: the vertex
/// minimizing the inner product with the gradient (ties broken by lowest
/// vertex index).
inline SwitchingTimes fw_linear_minimizer(const std::vector<double>& grad,
                                          int num_modes, double t_start,
                                          double t_end) {
  const auto verts = polytope_vertices(num_modes, t_start, t_end);
  const SwitchingTimes* best = &verts.front();
  double best_val = std::numeric_limits<double>::infinity();
  for (const auto& v : verts) {
    double val = 0.0;
    for (std::size_t j = 0; j < grad.size(); ++j)
      val += grad[j] * v[static_cast<int>(j)];
    if (val < best_val) {
      best_val = val;
      best = &v;
    }
  }
  return *best;
}

struct OuterSettings {
  SlqSettings slq;
  GradientSettings gradient;
  double gap_tol{3e-4};   // scaled by (1 + |J|)
  double step_tol{1e-4};  // seconds, on the accepted time update
  int max_outer_iterations{30};
  std::vector<double> gamma_schedule{1.0, 0.5, 0.25, 0.125, 0.0625};
  // When enabled, after the first accepted step the backtracking schedule is
  // re-anchored at 4x the previously accepted step size and extended
  // geometrically down to gamma_floor, so late (small-step) iterations do
  // not re-evaluate the large steps that already failed.
  bool adaptive_gamma{true};
  double gamma_floor{1.0 / 1024.0};
  bool use_solution_bag{true};
};

enum class OuterTermination {
  kGapSmall,
  kStepSmall,
  kNoImprovement,
  kMaxIterations
};

struct OuterReport {
  SwitchingTimes optimal_times;
  SlqPolicy optimal_policy;
  double optimal_cost{0.0};
  int outer_iterations{0};
  int function_calls{0};  // inner solver runs
  int total_inner_iterations{0};
  std::vector<std::vector<double>> gradient_history;
  std::vector<double> cost_history;
  std::vector<SwitchingTimes> times_history;  // one entry per cost_history
  double wall_time_ms{0.0};
  bool converged{false};
  OuterTermination termination_reason{OuterTermination::kMaxIterations};
  Trajectory optimal_trajectory;
};

namespace detail {

/// One warm-started inner solve; falls back to the operating-point
/// controller when the warm-start policy cannot produce a finite rollout.
inline SlqReport inner_solve(const SwitchedProblem& problem,
                             const SwitchingTimes& times,
                             const NormalizedGrid& grid,
                             const SolutionBag& bag,
                             const OuterSettings& settings) {
  if (settings.use_solution_bag && !bag.empty()) {
    const SolutionBagEntry* entry = bag.lookup(times);
    try {
      return slq_solve(problem, times, entry->policy, grid, settings.slq);
    } catch (const std::runtime_error&) {
      // fall through to the cold-start path
    }
  }
  return cold_start_solve(problem, times, grid, settings.slq);
}

}  // namespace detail

/// Euclidean projection onto the switching-time polytope: isotonic
/// regression (pool adjacent violators) followed by clipping to the horizon,
/// which preserves the ordering.
inline SwitchingTimes project_to_polytope(std::vector<double> y,
                                          double t_start, double t_end) {
  const std::size_t n = y.size();
  std::vector<double> level;   // pooled block values
  std::vector<int> weight;     // block sizes
  for (std::size_t j = 0; j < n; ++j) {
    level.push_back(y[j]);
    weight.push_back(1);
    while (level.size() > 1 && level[level.size() - 2] > level.back()) {
      const double merged =
          (level[level.size() - 2] * weight[weight.size() - 2] +
           level.back() * weight.back()) /
          (weight[weight.size() - 2] + weight.back());
      weight[weight.size() - 2] += weight.back();
      level[level.size() - 2] = merged;
      level.pop_back();
      weight.pop_back();
    }
  }
  SwitchingTimes out;
  out.times.reserve(n);
  for (std::size_t b = 0; b < level.size(); ++b)
    for (int r = 0; r < weight[b]; ++r)
      out.times.push_back(std::clamp(level[b], t_start, t_end));
  return out;
}

struct FwStepResult {
  SwitchingTimes times;
  double cost{0.0};
  double gamma{0.0};  // accepted step size (0 when not improved)
  int function_calls{0};
  int inner_iterations{0};
  bool improved{false};
  SlqReport report;
};

/// Backtracking schedule for one outer iteration: the configured schedule on
/// the first iteration, afterwards a geometric descent re-anchored at 4x the
/// previously accepted step size.
inline std::vector<double> gamma_candidates(const OuterSettings& settings,
                                            double previous_gamma) {
  if (!settings.adaptive_gamma || previous_gamma <= 0.0)
    return settings.gamma_schedule;
  std::vector<double> schedule;
  double gamma = std::min(1.0, 4.0 * previous_gamma);
  while (gamma >= settings.gamma_floor) {
    schedule.push_back(gamma);
    gamma *= 0.5;
  }
  if (schedule.empty()) schedule.push_back(settings.gamma_floor);
  return schedule;
}

/// Backtracking step toward the vertex: candidates t + gamma (v - t) are
/// each evaluated by a full warm-started inner solve; the first candidate
/// with a strictly lower converged cost is accepted.
inline FwStepResult fw_step(const SwitchedProblem& problem,
                            const SwitchingTimes& times,
                            const SwitchingTimes& vertex, double current_cost,
                            const NormalizedGrid& grid, SolutionBag& bag,
                            const OuterSettings& settings,
                            double previous_gamma = 0.0) {
  FwStepResult result;
  result.times = times;
  result.cost = current_cost;

  for (double gamma : gamma_candidates(settings, previous_gamma)) {
    SwitchingTimes candidate = times;
    double move = 0.0;
    for (int j = 0; j < times.size(); ++j) {
      candidate.times[static_cast<std::size_t>(j)] =
          times[j] + gamma * (vertex[j] - times[j]);
      move = std::max(move, std::abs(gamma * (vertex[j] - times[j])));
    }
    if (move == 0.0) break;  // degenerate direction

    SlqReport rep;
    try {
      rep = detail::inner_solve(problem, candidate, grid, bag, settings);
    } catch (const std::exception&) {
      ++result.function_calls;
      continue;  // candidate skipped
    }
    ++result.function_calls;
    result.inner_iterations += rep.iterations;

    if (rep.final_trajectory.cost < current_cost) {
      if (settings.use_solution_bag)
        bag.store(candidate, rep.final_policy, rep.final_trajectory.cost);
      result.times = std::move(candidate);
      result.cost = rep.final_trajectory.cost;
      result.gamma = gamma;
      result.improved = true;
      result.report = std::move(rep);
      return result;
    }
  }
  return result;
}

/// Two-stage optimization: alternates converged inner solves with
/// Frank-Wolfe updates of the switching times until the FW gap or the
/// accepted step is small.
inline OuterReport optimize_switching_times(const SwitchedProblem& problem,
                                            const SwitchingTimes& initial_times,
                                            const NormalizedGrid& grid,
                                            const OuterSettings& settings = {}) {
  using Clock = std::chrono::steady_clock;
  const auto t_begin = Clock::now();

  if (!in_polytope(initial_times, problem.t_start, problem.t_end))
    throw std::invalid_argument(
        "optimize_switching_times: initial times outside the polytope");

  OuterReport report;
  SolutionBag bag;
  SwitchingTimes times = initial_times;
  double accepted_gamma = 0.0;
  std::vector<double> prev_times, prev_grad;  // Barzilai-Borwein memory

  SlqReport inner = detail::inner_solve(problem, times, grid, bag, settings);
  ++report.function_calls;
  report.total_inner_iterations += inner.iterations;
  report.cost_history.push_back(inner.final_trajectory.cost);
  report.times_history.push_back(times);

  for (int k = 0; k < settings.max_outer_iterations; ++k) {
    ++report.outer_iterations;
    if (settings.use_solution_bag)
      bag.store(times, inner.final_policy, inner.final_trajectory.cost);

    const std::vector<double> g =
        gradient(problem, times, inner, grid, settings.gradient);
    report.gradient_history.push_back(g);

    if (times.size() == 0) {
      report.converged = true;
      report.termination_reason = OuterTermination::kGapSmall;
      break;
    }

    const SwitchingTimes vertex = fw_linear_minimizer(
        g, problem.num_modes(), problem.t_start, problem.t_end);
    double gap = 0.0;
    for (int j = 0; j < times.size(); ++j)
      gap += g[static_cast<std::size_t>(j)] * (times[j] - vertex[j]);

    const double J = inner.final_trajectory.cost;
    if (gap <= settings.gap_tol * (1.0 + std::abs(J))) {
      report.converged = true;
      report.termination_reason = OuterTermination::kGapSmall;
      break;
    }

    // Step target: projected-gradient point with a Barzilai-Borwein scale
    // (the pure vertex direction zigzags for interior optima); the FW gap
    // above remains the convergence certificate.
    double beta = 0.0;
    if (!prev_times.empty()) {
      double num = 0.0, den = 0.0;
      for (int j = 0; j < times.size(); ++j) {
        const double dt = times[j] - prev_times[static_cast<std::size_t>(j)];
        const double dg = g[static_cast<std::size_t>(j)] -
                          prev_grad[static_cast<std::size_t>(j)];
        num += dt * dg;
        den += dg * dg;
      }
      if (den > 0.0 && num > 0.0) beta = num / den;
    }
    if (beta <= 0.0) {
      double gmax = 0.0;
      for (double gj : g) gmax = std::max(gmax, std::abs(gj));
      beta = 0.25 * (problem.t_end - problem.t_start) / std::max(gmax, 1e-12);
    }
    std::vector<double> target_raw(static_cast<std::size_t>(times.size()));
    for (int j = 0; j < times.size(); ++j)
      target_raw[static_cast<std::size_t>(j)] =
          times[j] - beta * g[static_cast<std::size_t>(j)];
    const SwitchingTimes target =
        project_to_polytope(std::move(target_raw), problem.t_start,
                            problem.t_end);
    prev_times = times.times;
    prev_grad = g;

    FwStepResult step = fw_step(problem, times, target, J, grid, bag,
                                settings, accepted_gamma);
    if (!step.improved) {
      // Fall back to the vertex direction before giving up.
      step = fw_step(problem, times, vertex, J, grid, bag, settings,
                     accepted_gamma);
      report.function_calls += step.function_calls;
      step.function_calls = 0;
    }
    if (step.improved) accepted_gamma = step.gamma;
    report.function_calls += step.function_calls;
    report.total_inner_iterations += step.inner_iterations;

    if (!step.improved) {
      report.converged = true;
      report.termination_reason = OuterTermination::kNoImprovement;
      break;
    }

    double dt_max = 0.0;
    for (int j = 0; j < times.size(); ++j)
      dt_max = std::max(dt_max, std::abs(step.times[j] - times[j]));

    times = std::move(step.times);
    inner = std::move(step.report);
    report.cost_history.push_back(inner.final_trajectory.cost);
    report.times_history.push_back(times);

    if (dt_max <= settings.step_tol) {
      report.converged = true;
      report.termination_reason = OuterTermination::kStepSmall;
      break;
    }
  }

  report.optimal_times = std::move(times);
  report.optimal_policy = inner.final_policy;
  report.optimal_cost = inner.final_trajectory.cost;
  report.optimal_trajectory = std::move(inner.final_trajectory);
  report.wall_time_ms =
      std::chrono::duration<double, std::milli>(Clock::now() - t_begin)
          .count();
  return report;
}

}  // namespace swoc
