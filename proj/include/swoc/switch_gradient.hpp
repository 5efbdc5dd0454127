#pragma once

#include "swoc/slq.hpp"

namespace swoc {

/// All per-switching-time sensitivity fields plus the assembled gradient.
struct SensitivityBundle {
  // Indexed [j-1][node] for switching index j in {1, ..., I-1}.
  std::vector<std::vector<Vec>> dx_nodes;
  std::vector<std::vector<Vec>> du_nodes;
  std::vector<std::vector<Mat>> dS_nodes;
  std::vector<std::vector<Vec>> ds_nodes;
  std::vector<std::vector<double>> dsc_nodes;
  std::vector<double> gradient;  // dJ/dt_j = ds(0)
  bool at_converged_solution{true};
};

struct GradientSettings {
  // Feedback sign used when closing the input sensitivity through the fixed
  // policy (du = sign * L * dx).
  double feedback_sign{+1.0};
};

class SensitivityError : public std::runtime_error {
 public:
  SensitivityError(int node, std::string what)
      : std::runtime_error(std::move(what)), node_index(node) {}
  int node_index;
};

/// Indicator (delta_{i,j} - delta_{i-1,j}) for 1-based mode index i and
/// switching index j: +1 for the mode ending at t_j, -1 for the mode starting
/// there, 0 otherwise.
inline int switch_indicator(int mode_index, int switch_index, int num_modes) {
  if (mode_index < 1 || mode_index > num_modes)
    throw std::out_of_range("switch_indicator: mode index out of range");
  if (switch_index < 1 || switch_index > num_modes - 1)
    throw std::out_of_range("switch_indicator: switching index out of range");
  if (mode_index == switch_index) return 1;
  if (mode_index == switch_index + 1) return -1;
  return 0;
}

/// Forward sensitivity of the nominal state and input to switching time t_j:
/// RK4 integration from dx(0) = 0 with the input sensitivity closed through
/// the fixed feedback, du = sign * L * dx.
inline void forward_sensitivity(const SwitchedProblem& problem,
                                const Trajectory& nominal,
                                const SlqPolicy& policy, const LqModel& model,
                                const NormalizedGrid& grid, int j,
                                std::vector<Vec>& dx_nodes,
                                std::vector<Vec>& du_nodes,
                                double feedback_sign = +1.0) {
  const int K = grid.num_intervals();
  const double h = grid.dz();
  const int nx = problem.state_dim;

  dx_nodes.assign(static_cast<std::size_t>(K + 1), Vec::Zero(nx));
  du_nodes.assign(static_cast<std::size_t>(K + 1),
                  Vec::Zero(problem.input_dim));

  Vec dx = Vec::Zero(nx);
  for (int k = 0; k < K; ++k) {
    const int m = grid.interval_mode(k);
    const auto& sub = problem.subsystems[static_cast<std::size_t>(m)];
    const double d = model.durations[static_cast<std::size_t>(m)];
    const double chi =
        static_cast<double>(switch_indicator(m + 1, j, problem.num_modes()));
    const double z0 = grid.z(k);

    auto rhs = [&](double z, const Vec& dxz) -> Vec {
      const Vec xbar = detail::sample(nominal.x, grid, z, k);
      const Vec ubar = detail::sample(nominal.u, grid, z, k);
      const Mat A = detail::sample(model.A, grid, z, k);
      const Mat B = detail::sample(model.B, grid, z, k);
      const Mat L = detail::sample(policy.L, grid, z, k);
      const Vec du = feedback_sign * (L * dxz);
      Vec out = d * (A * dxz + B * du);
      if (chi != 0.0) out += chi * sub.dynamics(xbar, ubar);
      return out;
    };

    // The closed-loop matrix d*(A + B L) can be stiff near aggressive gains,
    // so the interval is subdivided until the step stays inside the explicit
    // RK4 stability region (mirroring the Riccati backward pass).
    const Mat A0 = detail::sample(model.A, grid, z0, k);
    const Mat B0 = detail::sample(model.B, grid, z0, k);
    const Mat L0 = detail::sample(policy.L, grid, z0, k);
    const double stiffness = d * (A0 + B0 * L0).norm();
    const int n_sub =
        std::clamp(static_cast<int>(std::ceil(h * stiffness / 1.0)), 1, 4096);
    const double hs = h / n_sub;
    for (int sub = 0; sub < n_sub; ++sub) {
      const double zs = z0 + sub * hs;
      const Vec k1 = rhs(zs, dx);
      const Vec k2 = rhs(zs + 0.5 * hs, dx + 0.5 * hs * k1);
      const Vec k3 = rhs(zs + 0.5 * hs, dx + 0.5 * hs * k2);
      const Vec k4 = rhs(zs + hs, dx + hs * k3);
      dx += (hs / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      if (!dx.allFinite()) break;
    }
    if (!dx.allFinite())
      throw SensitivityError(k, "forward sensitivity diverged at node " +
                                    std::to_string(k + 1));
    dx_nodes[static_cast<std::size_t>(k + 1)] = dx;
  }
  for (int k = 0; k <= K; ++k) {
    const std::size_t sk = static_cast<std::size_t>(k);
    du_nodes[sk] = feedback_sign * (policy.L[sk] * dx_nodes[sk]);
  }
}

/// Node-wise sensitivity of the cost expansion coefficients:
/// dq_vec = Q dx + P du, dr_vec = P' dx + R du, dq = qx'dx + ru'du.
inline void cost_coefficient_sensitivity(const LqModel& model,
                                         const std::vector<Vec>& dx_nodes,
                                         const std::vector<Vec>& du_nodes,
                                         std::vector<Vec>& dq_nodes,
                                         std::vector<Vec>& dr_nodes,
                                         std::vector<double>& dqs_nodes) {
  const std::size_t K = dx_nodes.size();
  dq_nodes.resize(K);
  dr_nodes.resize(K);
  dqs_nodes.resize(K);
  for (std::size_t k = 0; k < K; ++k) {
    dq_nodes[k] = model.Q[k] * dx_nodes[k] + model.P[k] * du_nodes[k];
    dr_nodes[k] =
        model.P[k].transpose() * dx_nodes[k] + model.R[k] * du_nodes[k];
    dqs_nodes[k] = model.qx[k].dot(dx_nodes[k]) + model.ru[k].dot(du_nodes[k]);
  }
}

/// Backward RK4 integration of the three coupled linear sensitivity
/// equations from dS(I) = 0, ds(I) = Qf dx(I), dsc(I) = qf'dx(I). Returns
/// the gradient entry dsc(0).
inline double backward_sensitivity(const LqModel& model,
                                   const RiccatiSolution& ric,
                                   const NormalizedGrid& grid, double alpha,
                                   int j, int num_modes,
                                   const std::vector<Vec>& dx_nodes,
                                   const std::vector<Vec>& du_nodes,
                                   std::vector<Mat>& dS_nodes,
                                   std::vector<Vec>& ds_nodes,
                                   std::vector<double>& dsc_nodes) {
  const int K = grid.num_intervals();
  const double h = grid.dz();
  const int nx = static_cast<int>(model.Qf.rows());
  const double acoef = 0.5 * alpha * (2.0 - alpha);

  dS_nodes.assign(static_cast<std::size_t>(K + 1), Mat::Zero(nx, nx));
  ds_nodes.assign(static_cast<std::size_t>(K + 1), Vec::Zero(nx));
  dsc_nodes.assign(static_cast<std::size_t>(K + 1), 0.0);

  const Vec& dx_term = dx_nodes[static_cast<std::size_t>(K)];
  Mat dS = Mat::Zero(nx, nx);
  Vec ds = model.Qf * dx_term;
  double dsc = model.qf_vec.dot(dx_term);
  dS_nodes[static_cast<std::size_t>(K)] = dS;
  ds_nodes[static_cast<std::size_t>(K)] = ds;
  dsc_nodes[static_cast<std::size_t>(K)] = dsc;

  struct Deriv {
    Mat dS;
    Vec ds;
    double dsc;
  };

  for (int k = K - 1; k >= 0; --k) {
    const int m = grid.interval_mode(k);
    const double d = model.durations[static_cast<std::size_t>(m)];
    const double chi =
        static_cast<double>(switch_indicator(m + 1, j, num_modes));
    const double z1 = grid.z(k + 1);

    auto rhs = [&](double z, const Mat& dSz, const Vec& dsz) -> Deriv {
      const auto mm = detail::interpolate_model(model, grid, z, k);
      const Mat S = detail::sample(ric.S, grid, z, k);
      const Vec s = detail::sample(ric.s_vec, grid, z, k);
      const Mat L = detail::sample(ric.L, grid, z, k);
      const Vec l = detail::sample(ric.l, grid, z, k);
      const Vec dx = detail::sample(dx_nodes, grid, z, k);
      const Vec du = detail::sample(du_nodes, grid, z, k);

      const Vec dq = mm.Q * dx + mm.P * du;
      const Vec dr = mm.P.transpose() * dx + mm.R * du;
      const double dqs = mm.qx.dot(dx) + mm.ru.dot(du);

      Eigen::LLT<Mat> llt(mm.R);
      const Mat dL = -llt.solve(mm.B.transpose() * dSz);
      const Vec dl = -llt.solve(dr + mm.B.transpose() * dsz);

      const Mat dW = mm.A.transpose() * dSz + dSz * mm.A -
                     dL.transpose() * mm.R * L - L.transpose() * mm.R * dL;
      const Vec dw = dq + mm.A.transpose() * dsz -
                     dL.transpose() * mm.R * l - L.transpose() * mm.R * dl;
      const double dwsc =
          dqs - acoef * (dl.dot(mm.R * l) + l.dot(mm.R * dl));

      Deriv out{-d * dW, -d * dw, -d * dwsc};
      if (chi != 0.0) {
        const Mat W = mm.Q + mm.A.transpose() * S + S * mm.A -
                      L.transpose() * mm.R * L;
        const Vec w = mm.qx + mm.A.transpose() * s - L.transpose() * mm.R * l;
        const double wsc = mm.q - acoef * l.dot(mm.R * l);
        out.dS -= chi * W;
        out.ds -= chi * w;
        out.dsc -= chi * wsc;
      }
      return out;
    };

    // Same stiffness-driven subdivision as the Riccati backward pass: the
    // sensitivity equations share its linearized flow and blow up under the
    // same coarse explicit steps.
    const auto m0 = detail::interpolate_model(model, grid, grid.z(k), k);
    const Mat S0 = detail::sample(ric.S, grid, grid.z(k), k);
    const double stiffness =
        d * (2.0 * m0.A.norm() +
             m0.B.norm() * m0.B.norm() * (S0.norm() + 1.0) /
                 std::max(m0.R.norm() / std::sqrt((double)m0.R.rows()), 1e-6));
    const int n_sub =
        std::clamp(static_cast<int>(std::ceil(h * stiffness / 1.0)), 1, 4096);
    const double hs = -h / n_sub;
    for (int sub = 0; sub < n_sub; ++sub) {
      const double zs = z1 + sub * hs;
      const Deriv k1 = rhs(zs, dS, ds);
      const Deriv k2 =
          rhs(zs + 0.5 * hs, dS + 0.5 * hs * k1.dS, ds + 0.5 * hs * k1.ds);
      const Deriv k3 =
          rhs(zs + 0.5 * hs, dS + 0.5 * hs * k2.dS, ds + 0.5 * hs * k2.ds);
      const Deriv k4 = rhs(zs + hs, dS + hs * k3.dS, ds + hs * k3.ds);
      dS += (hs / 6.0) * (k1.dS + 2.0 * k2.dS + 2.0 * k3.dS + k4.dS);
      ds += (hs / 6.0) * (k1.ds + 2.0 * k2.ds + 2.0 * k3.ds + k4.ds);
      dsc += (hs / 6.0) * (k1.dsc + 2.0 * k2.dsc + 2.0 * k3.dsc + k4.dsc);
      dS = 0.5 * (dS + dS.transpose()).eval();
      if (!dS.allFinite()) break;
    }

    if (!dS.allFinite() || !ds.allFinite() || !std::isfinite(dsc))
      throw SensitivityError(k, "backward sensitivity diverged at node " +
                                    std::to_string(k));
    dS_nodes[static_cast<std::size_t>(k)] = dS;
    ds_nodes[static_cast<std::size_t>(k)] = ds;
    dsc_nodes[static_cast<std::size_t>(k)] = dsc;
  }
  return dsc_nodes.front();
}

/// Full sensitivity computation for all switching indices.
inline SensitivityBundle compute_sensitivities(
    const SwitchedProblem& problem, const SwitchingTimes& times,
    const SlqReport& report, const NormalizedGrid& grid,
    const GradientSettings& settings = {}) {
  const int I = problem.num_modes();
  SensitivityBundle bundle;
  bundle.at_converged_solution = report.converged;
  if (I < 2) return bundle;

  const Trajectory& nominal = report.final_trajectory;
  const LqModel model = linearize(problem, times, nominal, grid);
  const RiccatiSolution ric =
      solve_riccati(model, grid, report.final_policy.alpha);

  bundle.dx_nodes.resize(static_cast<std::size_t>(I - 1));
  bundle.du_nodes.resize(static_cast<std::size_t>(I - 1));
  bundle.dS_nodes.resize(static_cast<std::size_t>(I - 1));
  bundle.ds_nodes.resize(static_cast<std::size_t>(I - 1));
  bundle.dsc_nodes.resize(static_cast<std::size_t>(I - 1));
  bundle.gradient.resize(static_cast<std::size_t>(I - 1));

  for (int j = 1; j <= I - 1; ++j) {
    const std::size_t sj = static_cast<std::size_t>(j - 1);
    forward_sensitivity(problem, nominal, report.final_policy, model, grid, j,
                        bundle.dx_nodes[sj], bundle.du_nodes[sj],
                        settings.feedback_sign);
    bundle.gradient[sj] = backward_sensitivity(
        model, ric, grid, ric.alpha, j, I, bundle.dx_nodes[sj],
        bundle.du_nodes[sj], bundle.dS_nodes[sj], bundle.ds_nodes[sj],
        bundle.dsc_nodes[sj]);
  }
  return bundle;
}

/// Gradient of the optimized cost with respect to the switching times,
/// assembled from the per-index sensitivity passes.
inline std::vector<double> gradient(const SwitchedProblem& problem,
                                    const SwitchingTimes& times,
                                    const SlqReport& report,
                                    const NormalizedGrid& grid,
                                    const GradientSettings& settings = {}) {
  return compute_sensitivities(problem, times, report, grid, settings)
      .gradient;
}

enum class FdOracleMode { kFrozenPolicy, kReconverged };

/// Independent finite-difference reference for the switching-time gradient.
/// Frozen-policy mode re-rolls the fixed policy at perturbed times;
/// reconverged mode re-runs the inner solver to convergence (the
/// authoritative reference). Steps are clipped to the polytope with
/// one-sided differences at its boundary.
inline std::vector<double> fd_gradient_oracle(
    const SwitchedProblem& problem, const SwitchingTimes& times,
    const NormalizedGrid& grid, double h, FdOracleMode mode,
    const SlqPolicy& policy, const SlqSettings& slq_settings = {}) {
  if (h <= 0.0) throw std::invalid_argument("fd_gradient_oracle: h > 0");
  const int I = problem.num_modes();
  std::vector<double> grad(static_cast<std::size_t>(I - 1));

  auto cost_at = [&](const SwitchingTimes& pert) -> double {
    if (mode == FdOracleMode::kFrozenPolicy)
      return rollout(problem, pert, policy, grid).cost;
    SlqReport rep = slq_solve(problem, pert, policy, grid, slq_settings);
    return rep.final_trajectory.cost;
  };

  const auto b = mode_boundaries(times, problem.t_start, problem.t_end);
  for (int j = 0; j < I - 1; ++j) {
    const std::size_t sj = static_cast<std::size_t>(j);
    const double lo = b[sj];      // t_{j-1} (or t_start)
    const double hi = b[sj + 2];  // t_{j+1} (or t_end)
    const double t = times[j];
    const bool can_plus = t + h <= hi;
    const bool can_minus = t - h >= lo;

    auto perturbed = [&](double tj) {
      SwitchingTimes p = times;
      p.times[sj] = tj;
      return p;
    };

    if (can_plus && can_minus) {
      grad[sj] = (cost_at(perturbed(t + h)) - cost_at(perturbed(t - h))) /
                 (2.0 * h);
    } else if (can_plus) {
      grad[sj] = (cost_at(perturbed(t + h)) - cost_at(times)) / h;
    } else if (can_minus) {
      grad[sj] = (cost_at(times) - cost_at(perturbed(t - h))) / h;
    } else {
      grad[sj] = 0.0;  // zero-width slab, derivative not identifiable
    }
  }
  return grad;
}

}  // namespace swoc
