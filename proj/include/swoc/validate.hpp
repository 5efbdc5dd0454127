#pragma once

#include "swoc/finite_diff.hpp"
#include "swoc/problem.hpp"

namespace swoc {

struct ProblemDiagnostics {
  std::vector<std::string> errors;
  std::vector<std::string> warnings;

  bool ok() const { return errors.empty(); }

  std::string summary() const {
    std::ostringstream os;
    for (const auto& e : errors) os << "error: " << e << "\n";
    for (const auto& w : warnings) os << "warning: " << w << "\n";
    if (errors.empty() && warnings.empty()) os << "ok\n";
    return os.str();
  }
};

/// Audits a problem definition: dimension consistency, positive definiteness
/// of R, symmetry of Q and Q_f, and agreement of analytic Jacobians with
/// central finite differences at randomly sampled points. Never throws;
/// findings are returned as structured diagnostics.
inline ProblemDiagnostics validate_problem(const SwitchedProblem& problem,
                                           int num_samples = 20,
                                           unsigned seed = 12345) {
  ProblemDiagnostics diag;
  const int nx = problem.state_dim;
  const int nu = problem.input_dim;

  if (problem.subsystems.empty()) {
    diag.errors.push_back("no subsystems");
    return diag;
  }
  if (!(problem.t_start < problem.t_end))
    diag.errors.push_back("t_start must be < t_end");
  if (problem.x0.size() != nx)
    diag.errors.push_back("x0 dimension does not match state_dim");

  std::mt19937 rng(seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  auto sample = [&](int n) {
    Vec v(n);
    for (int i = 0; i < n; ++i) v(i) = dist(rng);
    return v;
  };

  for (std::size_t i = 0; i < problem.subsystems.size(); ++i) {
    const auto& sub = problem.subsystems[i];
    const std::string tag = "subsystem " + std::to_string(i + 1);
    const Vec x_probe = problem.x0.size() == nx ? problem.x0 : Vec::Zero(nx);
    const Vec u_probe = Vec::Zero(nu);

    Vec f;
    try {
      f = sub.dynamics(x_probe, u_probe);
    } catch (const std::exception& e) {
      diag.errors.push_back(tag + ": dynamics threw: " + e.what());
      continue;
    }
    if (f.size() != nx) {
      diag.errors.push_back(tag + ": dynamics output dimension mismatch");
      continue;
    }

    for (int s = 0; s < num_samples; ++s) {
      const Vec x = sample(nx);
      const Vec u = sample(nu);

      if (sub.jacobian_state) {
        const Mat A = sub.jacobian_state(x, u);
        const Mat A_fd = fd_jacobian_state(sub.dynamics, x, u);
        const double rel =
            (A - A_fd).norm() / std::max(1.0, A_fd.norm());
        if (rel > 1e-5) {
          diag.errors.push_back(tag + ": jacobian_state disagrees with "
                                      "finite differences (rel " +
                                std::to_string(rel) + ")");
          break;
        }
      }
      if (sub.jacobian_input) {
        const Mat B = sub.jacobian_input(x, u);
        const Mat B_fd = fd_jacobian_input(sub.dynamics, x, u);
        const double rel =
            (B - B_fd).norm() / std::max(1.0, B_fd.norm());
        if (rel > 1e-5) {
          diag.errors.push_back(tag + ": jacobian_input disagrees with "
                                      "finite differences (rel " +
                                std::to_string(rel) + ")");
          break;
        }
      }
    }

    // Cost curvature checks at a few sample points.
    for (int s = 0; s < std::min(num_samples, 5); ++s) {
      const Vec x = sample(nx);
      const Vec u = sample(nu);
      const CostQuadratics c = eval_quadratics(sub, x, u);
      if ((c.Q - c.Q.transpose()).norm() > 1e-8 * std::max(1.0, c.Q.norm()))
        diag.warnings.push_back(tag + ": Q not symmetric (symmetrized)");
      const Mat R_sym = 0.5 * (c.R + c.R.transpose());
      Eigen::LLT<Mat> llt(R_sym);
      if (llt.info() != Eigen::Success) {
        diag.errors.push_back(tag + ": R not positive definite");
        break;
      }
    }
  }

  if (problem.terminal_cost.value) {
    const Vec xf = problem.x0.size() == nx ? problem.x0 : Vec::Zero(nx);
    const Mat Qf = eval_terminal_hessian(problem.terminal_cost, xf);
    const Mat Qf_sym = 0.5 * (Qf + Qf.transpose());
    Eigen::SelfAdjointEigenSolver<Mat> es(Qf_sym);
    if (es.eigenvalues().minCoeff() < -1e-6)
      diag.warnings.push_back("terminal Hessian is not positive semidefinite");
  } else {
    diag.errors.push_back("terminal cost is not set");
  }

  return diag;
}

}  // namespace swoc
