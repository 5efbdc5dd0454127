#pragma once

#include "swoc/lq_approx.hpp"
#include "swoc/rollout.hpp"

namespace swoc {

/// Backward Riccati solution of the LQ subproblem: value-function quadratic
/// (S, s_vec, s_scalar) plus the optimal gains at every node.
struct RiccatiSolution {
  std::vector<Mat> S;
  std::vector<Vec> s_vec;
  std::vector<double> s_scalar;
  std::vector<Mat> L;
  std::vector<Vec> l;
  double alpha{1.0};
};

class RiccatiError : public std::runtime_error {
 public:
  RiccatiError(int node, std::string what)
      : std::runtime_error(std::move(what)), node_index(node) {}
  int node_index;
};

class InitializationError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SlqSettings {
  double l_min{1e-3};
  int max_iterations{50};
  int line_search_depth{10};
  double alpha_shrink{0.5};
  // Levenberg-style damping escalation when the undamped LQ step is not a
  // descent direction for the nonlinear cost.
  double damping_init{1e-3};
  double damping_growth{10.0};
  double damping_max{1e6};
  // Accepted steps whose relative cost improvement stays below this for two
  // consecutive iterations terminate the loop: the rollout resolution cannot
  // support further progress even when the feedforward norm sits above l_min.
  double progress_tol{1e-12};
};

enum class SlqTermination { kFeedforwardSmall, kMaxIterations, kLineSearchFailed };

struct SlqReport {
  int iterations{0};  // accepted line-search iterations
  std::vector<double> cost_history;
  std::vector<double> value_history;  // s(0) prediction per accepted iteration
  SlqPolicy final_policy;
  Trajectory final_trajectory;
  bool converged{false};
  SlqTermination termination_reason{SlqTermination::kMaxIterations};
};

namespace detail {

struct LqAtZ {
  Mat A, B, Q, P, R;
  Vec qx, ru;
  double q;
};

inline LqAtZ interpolate_model(const LqModel& model, const NormalizedGrid& grid,
                               double z, int interval) {
  LqAtZ m;
  m.A = sample(model.A, grid, z, interval);
  m.B = sample(model.B, grid, z, interval);
  m.Q = sample(model.Q, grid, z, interval);
  m.P = sample(model.P, grid, z, interval);
  m.R = sample(model.R, grid, z, interval);
  m.qx = sample(model.qx, grid, z, interval);
  m.ru = sample(model.ru, grid, z, interval);
  m.q = sample(model.q, grid, z, interval);
  return m;
}

}  // namespace detail

/// Backward RK4 integration of the value-function equations from the terminal
/// conditions, each right-hand side scaled by the active mode's duration.
/// Gains are recovered at every node through an SPD solve.
inline RiccatiSolution solve_riccati(const LqModel& model,
                                     const NormalizedGrid& grid,
                                     double alpha) {
  const int K = grid.num_intervals();
  const double h = grid.dz();
  const int nx = static_cast<int>(model.Qf.rows());
  const double acoef = 0.5 * alpha * (2.0 - alpha);

  RiccatiSolution ric;
  ric.alpha = alpha;
  ric.S.resize(static_cast<std::size_t>(K + 1));
  ric.s_vec.resize(static_cast<std::size_t>(K + 1));
  ric.s_scalar.resize(static_cast<std::size_t>(K + 1));
  ric.L.resize(static_cast<std::size_t>(K + 1));
  ric.l.resize(static_cast<std::size_t>(K + 1));

  Mat S = model.Qf;
  Vec s = model.qf_vec;
  double sc = model.qf;
  ric.S[static_cast<std::size_t>(K)] = S;
  ric.s_vec[static_cast<std::size_t>(K)] = s;
  ric.s_scalar[static_cast<std::size_t>(K)] = sc;

  struct Deriv {
    Mat dS;
    Vec ds;
    double dsc;
  };

  for (int k = K - 1; k >= 0; --k) {
    const double d = model.durations[static_cast<std::size_t>(grid.interval_mode(k))];
    const double z1 = grid.z(k + 1);

    auto rhs = [&](double z, const Mat& Sz, const Vec& sz) -> Deriv {
      const auto m = detail::interpolate_model(model, grid, z, k);
      Eigen::LLT<Mat> llt(m.R);
      const Mat L = -llt.solve(m.P.transpose() + m.B.transpose() * Sz);
      const Vec l = -llt.solve(m.ru + m.B.transpose() * sz);
      const Mat W = m.Q + m.A.transpose() * Sz + Sz * m.A -
                    L.transpose() * m.R * L;
      const Vec w = m.qx + m.A.transpose() * sz - L.transpose() * m.R * l;
      const double wsc = m.q - acoef * l.dot(m.R * l);
      return {-d * W, -d * w, -d * wsc};
    };

    // RK4 with a negative step from z_{k+1} down to z_k. Along coarse early
    // iterates the quadratic Riccati term can be stiff (eigenvalues up to
    // ~ d*||B R^-1 B^T||*||S||), so the interval is subdivided until the
    // step stays inside the explicit-RK4 stability region.
    const auto m0 = detail::interpolate_model(model, grid, grid.z(k), k);
    const double stiffness =
        d * (2.0 * m0.A.norm() +
             m0.B.norm() * m0.B.norm() * (S.norm() + 1.0) /
                 std::max(m0.R.norm() / std::sqrt((double)m0.R.rows()), 1e-6));
    const int n_sub =
        std::clamp(static_cast<int>(std::ceil(h * stiffness / 1.0)), 1, 4096);
    const double hs = -h / n_sub;
    for (int sub = 0; sub < n_sub; ++sub) {
      const double zs = z1 + sub * hs;
      const Deriv k1 = rhs(zs, S, s);
      const Deriv k2 =
          rhs(zs + 0.5 * hs, S + 0.5 * hs * k1.dS, s + 0.5 * hs * k1.ds);
      const Deriv k3 =
          rhs(zs + 0.5 * hs, S + 0.5 * hs * k2.dS, s + 0.5 * hs * k2.ds);
      const Deriv k4 = rhs(zs + hs, S + hs * k3.dS, s + hs * k3.ds);
      S += (hs / 6.0) * (k1.dS + 2.0 * k2.dS + 2.0 * k3.dS + k4.dS);
      s += (hs / 6.0) * (k1.ds + 2.0 * k2.ds + 2.0 * k3.ds + k4.ds);
      sc += (hs / 6.0) * (k1.dsc + 2.0 * k2.dsc + 2.0 * k3.dsc + k4.dsc);
      S = 0.5 * (S + S.transpose()).eval();
      if (!S.allFinite()) break;
    }

    if (!S.allFinite() || !s.allFinite() || !std::isfinite(sc))
      throw RiccatiError(k, "Riccati integration blew up at node " +
                                std::to_string(k));
    ric.S[static_cast<std::size_t>(k)] = S;
    ric.s_vec[static_cast<std::size_t>(k)] = s;
    ric.s_scalar[static_cast<std::size_t>(k)] = sc;
  }

  for (int k = 0; k <= K; ++k) {
    const std::size_t sk = static_cast<std::size_t>(k);
    Eigen::LLT<Mat> llt(model.R[sk]);
    ric.L[sk] = -llt.solve(model.P[sk].transpose() +
                           model.B[sk].transpose() * ric.S[sk]);
    ric.l[sk] = -llt.solve(model.ru[sk] +
                           model.B[sk].transpose() * ric.s_vec[sk]);
  }
  (void)nx;
  return ric;
}

/// Re-integrates only the scalar value equation for a given step size,
/// reusing the stored (alpha-independent) S and s_vec.
inline std::vector<double> recompute_scalar_value(const LqModel& model,
                                                  const NormalizedGrid& grid,
                                                  const RiccatiSolution& ric,
                                                  double alpha) {
  const int K = grid.num_intervals();
  const double h = grid.dz();
  const double acoef = 0.5 * alpha * (2.0 - alpha);

  std::vector<double> sc(static_cast<std::size_t>(K + 1));
  sc[static_cast<std::size_t>(K)] = model.qf;
  double v = model.qf;

  for (int k = K - 1; k >= 0; --k) {
    const double d = model.durations[static_cast<std::size_t>(grid.interval_mode(k))];
    const double z1 = grid.z(k + 1);
    auto rhs = [&](double z) -> double {
      const auto m = detail::interpolate_model(model, grid, z, k);
      const Vec s = detail::sample(ric.s_vec, grid, z, k);
      Eigen::LLT<Mat> llt(m.R);
      const Vec l = -llt.solve(m.ru + m.B.transpose() * s);
      return -d * (m.q - acoef * l.dot(m.R * l));
    };
    const double hs = -h;
    const double k1 = rhs(z1);
    const double k2 = rhs(z1 + 0.5 * hs);
    const double k3 = k2;
    const double k4 = rhs(z1 + hs);
    v += (hs / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    sc[static_cast<std::size_t>(k)] = v;
  }
  return sc;
}

inline double feedforward_rms(const RiccatiSolution& ric) {
  double acc = 0.0;
  for (const auto& l : ric.l) acc += l.squaredNorm();
  return std::sqrt(acc / static_cast<double>(ric.l.size()));
}

inline SlqPolicy update_policy(const Trajectory& nominal,
                               const RiccatiSolution& ric, double alpha) {
  return make_policy(nominal, ric.l, ric.L, alpha);
}

struct LineSearchResult {
  bool accepted{false};
  double alpha{0.0};
  Trajectory trajectory;
  SlqPolicy policy;
  int rollouts{0};
};

class LineSearchError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Backtracking search over the step schedule; accepts the first candidate
/// whose rollout cost is strictly below the nominal cost.
inline LineSearchResult line_search(const SwitchedProblem& problem,
                                    const SwitchingTimes& times,
                                    const Trajectory& nominal,
                                    const RiccatiSolution& ric,
                                    const NormalizedGrid& grid,
                                    const SlqSettings& settings) {
  LineSearchResult result;
  double alpha = 1.0;
  int diverged = 0;
  for (int c = 0; c < settings.line_search_depth; ++c) {
    SlqPolicy candidate = update_policy(nominal, ric, alpha);
    ++result.rollouts;
    try {
      Trajectory traj = rollout(problem, times, candidate, grid);
      if (traj.cost < nominal.cost) {
        result.accepted = true;
        result.alpha = alpha;
        result.trajectory = std::move(traj);
        result.policy = std::move(candidate);
        return result;
      }
    } catch (const RolloutDiverged&) {
      ++diverged;
    }
    alpha *= settings.alpha_shrink;
  }
  if (diverged == settings.line_search_depth)
    throw LineSearchError("all line-search candidate rollouts diverged");
  return result;
}

/// Sequential LQ iteration: rollout, LQ approximation, Riccati pass, line
/// search, policy update, until the feedforward update is small.
inline SlqReport slq_solve(const SwitchedProblem& problem,
                           const SwitchingTimes& times,
                           const SlqPolicy& init_policy,
                           const NormalizedGrid& grid,
                           const SlqSettings& settings = {}) {
  SlqReport report;
  SlqPolicy policy = init_policy;
  Trajectory traj = rollout(problem, times, policy, grid);
  report.cost_history.push_back(traj.cost);

  int stalled_steps = 0;
  for (int it = 0; it < settings.max_iterations; ++it) {
    const LqModel model = linearize(problem, times, traj, grid);
    RiccatiSolution ric;
    try {
      ric = solve_riccati(model, grid, 1.0);
    } catch (const RiccatiError& e) {
      throw RiccatiError(e.node_index,
                         std::string(e.what()) + " (slq iteration " +
                             std::to_string(it + 1) + ")");
    }

    if (feedforward_rms(ric) < settings.l_min) {
      report.converged = true;
      report.termination_reason = SlqTermination::kFeedforwardSmall;
      break;
    }

    LineSearchResult ls =
        line_search(problem, times, traj, ric, grid, settings);
    if (!ls.accepted) {
      // The undamped LQ step does not decrease the nonlinear cost. Damp the
      // input quadratic (Levenberg style) to shorten and bend the step toward
      // the rollout before giving up: close to the trajectory the LQ model is
      // trustworthy and a damped step usually restores descent.
      double mu = settings.damping_init;
      LqModel damped = model;
      const Mat eye = Mat::Identity(model.R.front().rows(),
                                    model.R.front().cols());
      while (!ls.accepted && mu <= settings.damping_max) {
        for (std::size_t k = 0; k < damped.R.size(); ++k)
          damped.R[k] = model.R[k] + mu * eye;
        try {
          ric = solve_riccati(damped, grid, 1.0);
          ls = line_search(problem, times, traj, ric, grid, settings);
        } catch (const RiccatiError&) {
          // Treat a diverged damped pass like a rejected step and escalate.
        } catch (const LineSearchError&) {
        }
        mu *= settings.damping_growth;
      }
      if (!ls.accepted) {
        // No damped step strictly improves the nominal rollout either: the
        // iteration is at a fixed point up to rollout resolution, even if the
        // feedforward norm has not reached l_min.
        report.converged = true;
        report.termination_reason = SlqTermination::kLineSearchFailed;
        break;
      }
    }

    const double improvement = traj.cost - ls.trajectory.cost;
    traj = std::move(ls.trajectory);
    policy = std::move(ls.policy);
    report.cost_history.push_back(traj.cost);
    report.value_history.push_back(
        recompute_scalar_value(model, grid, ric, ls.alpha).front());
    ++report.iterations;
    report.termination_reason = SlqTermination::kMaxIterations;

    if (improvement <= settings.progress_tol * (1.0 + std::abs(traj.cost))) {
      if (++stalled_steps >= 2) {
        report.converged = true;
        report.termination_reason = SlqTermination::kLineSearchFailed;
        break;
      }
    } else {
      stalled_steps = 0;
    }
  }

  report.final_policy = std::move(policy);
  report.final_trajectory = std::move(traj);
  return report;
}

/// Synthesizes the initial stabilizing controller from per-mode operating
/// points: a piecewise-constant LQ approximation whose Riccati gains close
/// the loop around the operating states.
inline SlqPolicy initial_controller(
    const SwitchedProblem& problem, const SwitchingTimes& times,
    const std::vector<std::pair<Vec, Vec>>& operating_points,
    const NormalizedGrid& grid) {
  const int I = problem.num_modes();
  if (static_cast<int>(operating_points.size()) != I)
    throw InitializationError("one operating point per mode is required");

  const int K = grid.num_nodes();
  LqModel model;
  model.A.resize(static_cast<std::size_t>(K));
  model.B.resize(static_cast<std::size_t>(K));
  model.q.resize(static_cast<std::size_t>(K));
  model.qx.resize(static_cast<std::size_t>(K));
  model.ru.resize(static_cast<std::size_t>(K));
  model.Q.resize(static_cast<std::size_t>(K));
  model.P.resize(static_cast<std::size_t>(K));
  model.R.resize(static_cast<std::size_t>(K));
  for (int k = 0; k < K; ++k) {
    const int m = grid.node_mode(k);
    const std::size_t sk = static_cast<std::size_t>(k);
    const auto& sub = problem.subsystems[static_cast<std::size_t>(m)];
    const auto& [x_op, u_op] = operating_points[static_cast<std::size_t>(m)];
    model.A[sk] = eval_A(sub, x_op, u_op);
    model.B[sk] = eval_B(sub, x_op, u_op);
    CostQuadratics c = eval_quadratics(sub, x_op, u_op);
    model.q[sk] = c.q;
    model.qx[sk] = c.qx;
    model.ru[sk] = c.ru;
    model.Q[sk] = 0.5 * (c.Q + c.Q.transpose());
    model.P[sk] = c.P;
    model.R[sk] = detail::regularize_spd(c.R);
  }
  const Vec& x_term = operating_points.back().first;
  model.qf = problem.terminal_cost.value(x_term);
  model.qf_vec = eval_terminal_gradient(problem.terminal_cost, x_term);
  const Mat Qf = eval_terminal_hessian(problem.terminal_cost, x_term);
  model.Qf = 0.5 * (Qf + Qf.transpose());
  model.durations = mode_durations(times, problem.t_start, problem.t_end);

  RiccatiSolution ric;
  try {
    ric = solve_riccati(model, grid, 0.0);
  } catch (const RiccatiError&) {
    throw InitializationError(
        "Riccati pass diverged for the operating-point approximation; "
        "try different operating points");
  }

  SlqPolicy policy;
  policy.alpha = 0.0;
  policy.u_ff.resize(static_cast<std::size_t>(K));
  policy.x_ref.resize(static_cast<std::size_t>(K));
  policy.l.assign(static_cast<std::size_t>(K), Vec::Zero(problem.input_dim));
  policy.L = ric.L;
  for (int k = 0; k < K; ++k) {
    const int m = grid.node_mode(k);
    const std::size_t sk = static_cast<std::size_t>(k);
    policy.u_ff[sk] = operating_points[static_cast<std::size_t>(m)].second;
    policy.x_ref[sk] = operating_points[static_cast<std::size_t>(m)].first;
  }
  return policy;
}

inline std::vector<std::pair<Vec, Vec>> default_operating_points(
    const SwitchedProblem& problem) {
  return std::vector<std::pair<Vec, Vec>>(
      static_cast<std::size_t>(problem.num_modes()),
      {problem.x0, Vec::Zero(problem.input_dim)});
}

/// Cold start without a prior solution: the operating-point controller is
/// tried first; if its rollout or LQ pass fails the open-loop zero policy is
/// used instead (its rollout may be expensive but stays finite whenever the
/// uncontrolled vector fields do).
inline SlqReport cold_start_solve(const SwitchedProblem& problem,
                                  const SwitchingTimes& times,
                                  const NormalizedGrid& grid,
                                  const SlqSettings& settings = {}) {
  try {
    const SlqPolicy init = initial_controller(
        problem, times, default_operating_points(problem), grid);
    return slq_solve(problem, times, init, grid, settings);
  } catch (const std::runtime_error&) {
    // InitializationError, RolloutDiverged, RiccatiError, LineSearchError:
    // retry from the zero policy.
  }
  return slq_solve(problem, times,
                   zero_policy(grid, problem.state_dim, problem.input_dim),
                   grid, settings);
}

}  // namespace swoc
