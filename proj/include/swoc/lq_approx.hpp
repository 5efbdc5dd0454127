#pragma once

#include "swoc/finite_diff.hpp"
#include "swoc/rollout.hpp"

namespace swoc {

/// Time-varying LQ approximation of the equivalent (normalized-time) problem
/// along a nominal trajectory. All node arrays share the defining grid.
struct LqModel {
  std::vector<Mat> A, B;
  std::vector<double> q;
  std::vector<Vec> qx, ru;
  std::vector<Mat> Q, P, R;
  double qf{0.0};
  Vec qf_vec;
  Mat Qf;
  std::vector<double> durations;
};

class ModelError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

// Keeps R invertible: lifts the spectrum so the minimum eigenvalue is at
// least eps.
inline Mat regularize_spd(const Mat& R, double eps = 1e-6) {
  const Mat R_sym = 0.5 * (R + R.transpose());
  Eigen::SelfAdjointEigenSolver<Mat> es(R_sym);
  const double lmin = es.eigenvalues().minCoeff();
  if (lmin >= eps) return R_sym;
  if (!std::isfinite(lmin) || lmin < -1e6)
    throw ModelError("R is not positive definite and cannot be regularized");
  return R_sym + (eps - lmin) * Mat::Identity(R.rows(), R.cols());
}

}  // namespace detail

inline LqModel linearize(const SwitchedProblem& problem,
                         const SwitchingTimes& times,
                         const Trajectory& nominal,
                         const NormalizedGrid& grid) {
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
    const auto& sub = problem.subsystems[static_cast<std::size_t>(m)];
    const std::size_t sk = static_cast<std::size_t>(k);
    const Vec& x = nominal.x[sk];
    const Vec& u = nominal.u[sk];
    model.A[sk] = eval_A(sub, x, u);
    model.B[sk] = eval_B(sub, x, u);
    CostQuadratics c = eval_quadratics(sub, x, u);
    model.q[sk] = c.q;
    model.qx[sk] = c.qx;
    model.ru[sk] = c.ru;
    model.Q[sk] = 0.5 * (c.Q + c.Q.transpose());
    model.P[sk] = c.P;
    model.R[sk] = detail::regularize_spd(c.R);
  }

  const Vec& xf = nominal.x.back();
  model.qf = problem.terminal_cost.value(xf);
  model.qf_vec = eval_terminal_gradient(problem.terminal_cost, xf);
  const Mat Qf = eval_terminal_hessian(problem.terminal_cost, xf);
  model.Qf = 0.5 * (Qf + Qf.transpose());
  model.durations = mode_durations(times, problem.t_start, problem.t_end);
  return model;
}

}  // namespace swoc
