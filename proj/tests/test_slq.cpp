#include "doctest.h"
#include "test_helpers.hpp"

using namespace swoc;
using namespace swoc::testing;

namespace {

SlqPolicy cold_start(const SwitchedProblem& p, const SwitchingTimes& st,
                     const NormalizedGrid& grid) {
  return initial_controller(p, st, default_operating_points(p), grid);
}

}  // namespace

TEST_CASE("zero problem: S stays at the terminal condition, gains vanish") {
  SubsystemModel sub;
  sub.dynamics = [](const Vec& x, const Vec&) -> Vec {
    return Vec::Zero(x.size());
  };
  sub.jacobian_state = [](const Vec&, const Vec&) { return Mat::Zero(2, 2); };
  sub.jacobian_input = [](const Vec&, const Vec&) { return Mat::Zero(2, 1); };
  sub.running_cost = [](const Vec&, const Vec&) { return 0.0; };
  sub.running_cost_quadratics = [](const Vec&, const Vec&) {
    CostQuadratics c;
    c.q = 0.0;
    c.qx = Vec::Zero(2);
    c.ru = Vec::Zero(1);
    c.Q = Mat::Zero(2, 2);
    c.P = Mat::Zero(2, 1);
    c.R = Mat::Identity(1, 1);
    return c;
  };
  SwitchedProblem p;
  p.subsystems = {sub, sub};
  p.terminal_cost = quadratic_terminal(3.0, Vec::Zero(2));
  p.t_start = 0.0;
  p.t_end = 2.0;
  p.x0 = (Vec(2) << 1.0, 0.5).finished();
  p.state_dim = 2;
  p.input_dim = 1;

  NormalizedGrid grid{40, 2};
  SwitchingTimes st({1.2});
  const auto traj = rollout(p, st, zero_policy(grid, 2, 1), grid);
  const auto model = linearize(p, st, traj, grid);
  const auto ric = solve_riccati(model, grid, 1.0);
  for (std::size_t k = 0; k < ric.S.size(); ++k) {
    CHECK((ric.S[k] - model.Qf).norm() < 1e-12);
    CHECK(ric.L[k].norm() < 1e-12);
    CHECK(ric.l[k].norm() < 1e-12);
  }
}

TEST_CASE("zero-duration mode leaves the Riccati solution frozen across it") {
  auto mode = scalar_linear_mode(-0.5, 1.0, 1.0, 1.0);
  auto p = scalar_problem({mode, mode, mode}, 1.0, 2.0, 1.0);
  NormalizedGrid grid{30, 3};
  SwitchingTimes st({1.0, 1.0});  // middle mode has zero duration
  const auto traj = rollout(p, st, cold_start(p, st, grid), grid);
  const auto model = linearize(p, st, traj, grid);
  const auto ric = solve_riccati(model, grid, 1.0);
  for (int k = grid.nodes_per_mode; k < 2 * grid.nodes_per_mode; ++k) {
    CHECK((ric.S[static_cast<std::size_t>(k)] -
           ric.S[static_cast<std::size_t>(2 * grid.nodes_per_mode)])
              .norm() < 1e-12);
  }
}

TEST_CASE("scalar Riccati oracle: dx = u, Q = 0, R = 1, Qf = 1 gives S(0) = 1/2") {
  // Closed form S(z) = 1 / (1 + (1 - z)).
  auto p = scalar_problem({scalar_linear_mode(0.0, 1.0, 0.0, 1.0)}, 1.0, 1.0,
                          1.0);
  NormalizedGrid grid{200, 1};
  const auto traj =
      rollout(p, SwitchingTimes({}), zero_policy(grid, 1, 1), grid);
  const auto model = linearize(p, SwitchingTimes({}), traj, grid);
  const auto ric = solve_riccati(model, grid, 1.0);
  CHECK(ric.S.front()(0, 0) == doctest::Approx(0.5).epsilon(1e-6));
  for (int k = 0; k <= grid.num_intervals(); k += 25) {
    const double z = grid.z(k);
    CHECK(ric.S[static_cast<std::size_t>(k)](0, 0) ==
          doctest::Approx(1.0 / (2.0 - z)).epsilon(1e-6));
  }
}

TEST_CASE("policy with zero feedforward replays the nominal trajectory") {
  const auto def = builtin("ex1");
  NormalizedGrid grid{100, 3};
  const auto traj = rollout(def.problem, def.initial_times,
                            cold_start(def.problem, def.initial_times, grid),
                            grid);
  RiccatiSolution ric;
  ric.l.assign(traj.x.size(), Vec::Zero(1));
  ric.L.assign(traj.x.size(), Mat::Zero(1, 2));
  const auto policy = update_policy(traj, ric, 1.0);
  const auto replay = rollout(def.problem, def.initial_times, policy, grid);
  for (std::size_t k = 0; k < traj.x.size(); ++k)
    CHECK((replay.x[k] - traj.x[k]).norm() < 1e-12);
}

TEST_CASE("full-step open-loop policy applies the feedforward update") {
  auto p = scalar_problem({scalar_linear_mode(0.0, 1.0, 0.0, 1.0)}, 0.0, 1.0,
                          0.0);
  NormalizedGrid grid{50, 1};
  const auto nominal =
      rollout(p, SwitchingTimes({}), zero_policy(grid, 1, 1), grid);
  RiccatiSolution ric;
  ric.l.assign(nominal.x.size(), (Vec(1) << 0.7).finished());
  ric.L.assign(nominal.x.size(), Mat::Zero(1, 1));
  const auto policy = update_policy(nominal, ric, 1.0);
  const auto traj = rollout(p, SwitchingTimes({}), policy, grid);
  for (const auto& u : traj.u) CHECK(u(0) == doctest::Approx(0.7));
}

TEST_CASE("line search takes the full step on an LQ problem") {
  const auto p = switched_linear_problem(2, 2, 1, 17);
  NormalizedGrid grid{60, 2};
  SwitchingTimes st({0.7});
  const auto nominal = rollout(p, st, cold_start(p, st, grid), grid);
  const auto model = linearize(p, st, nominal, grid);
  const auto ric = solve_riccati(model, grid, 1.0);
  const auto ls = line_search(p, st, nominal, ric, grid, SlqSettings{});
  CHECK(ls.accepted);
  CHECK(ls.alpha == 1.0);
}

TEST_CASE("first SLQ iteration on ex1 lowers the cost") {
  const auto def = builtin("ex1");
  NormalizedGrid grid{200, 3};
  const auto nominal = rollout(def.problem, def.initial_times,
                               cold_start(def.problem, def.initial_times, grid),
                               grid);
  const auto model = linearize(def.problem, def.initial_times, nominal, grid);
  const auto ric = solve_riccati(model, grid, 1.0);
  const auto ls = line_search(def.problem, def.initial_times, nominal, ric,
                              grid, SlqSettings{});
  CHECK(ls.accepted);
  CHECK(ls.trajectory.cost < nominal.cost);
}

TEST_CASE("LQ exactness: one accepted iteration, value prediction matches") {
  const auto p = switched_linear_problem(3, 3, 2, 23);
  NormalizedGrid grid{80, 3};
  SwitchingTimes st({0.4, 1.0});
  const auto report = slq_solve(p, st, cold_start(p, st, grid), grid);
  CHECK(report.converged);
  CHECK(report.iterations == 1);
  const double predicted = report.value_history.front();
  const double achieved = report.final_trajectory.cost;
  CHECK(std::abs(predicted - achieved) / std::abs(achieved) < 1e-6);
}

TEST_CASE("ex1 at the reference optimum reaches the reference cost") {
  const auto def = builtin("ex1");
  NormalizedGrid grid{200, 3};
  SwitchingTimes st({0.2324, 1.0236});
  const auto report =
      slq_solve(def.problem, st, cold_start(def.problem, st, grid), grid);
  CHECK(report.converged);
  CHECK(report.final_trajectory.cost ==
        doctest::Approx(5.4438).epsilon(0.01));
}

TEST_CASE("ex2 at the reference optimum reaches the reference cost") {
  const auto def = builtin("ex2");
  NormalizedGrid grid{200, 3};
  SwitchingTimes st({0.2973, 1.5978});
  const auto report =
      slq_solve(def.problem, st, cold_start(def.problem, st, grid), grid);
  CHECK(report.converged);
  CHECK(report.final_trajectory.cost ==
        doctest::Approx(10.3888).epsilon(0.01));
}

TEST_CASE("cost history is non-increasing") {
  for (const char* name : {"ex1", "ex2"}) {
    const auto def = builtin(name);
    NormalizedGrid grid{200, 3};
    const auto report =
        slq_solve(def.problem, def.initial_times,
                  cold_start(def.problem, def.initial_times, grid), grid);
    for (std::size_t i = 1; i < report.cost_history.size(); ++i)
      CHECK(report.cost_history[i] <= report.cost_history[i - 1]);
  }
}

TEST_CASE("S is positive semidefinite when all cost weights are") {
  const auto def = builtin("ex1");
  NormalizedGrid grid{100, 3};
  const auto traj = rollout(def.problem, def.initial_times,
                            cold_start(def.problem, def.initial_times, grid),
                            grid);
  const auto model = linearize(def.problem, def.initial_times, traj, grid);
  const auto ric = solve_riccati(model, grid, 1.0);
  for (const auto& S : ric.S) {
    Eigen::SelfAdjointEigenSolver<Mat> es(S);
    CHECK(es.eigenvalues().minCoeff() >= -1e-8);
  }
}

TEST_CASE("S and s_vec are independent of the line-search step") {
  const auto def = builtin("ex1");
  NormalizedGrid grid{60, 3};
  const auto traj = rollout(def.problem, def.initial_times,
                            cold_start(def.problem, def.initial_times, grid),
                            grid);
  const auto model = linearize(def.problem, def.initial_times, traj, grid);
  const auto a = solve_riccati(model, grid, 0.5);
  const auto b = solve_riccati(model, grid, 1.0);
  for (std::size_t k = 0; k < a.S.size(); ++k) {
    CHECK(a.S[k] == b.S[k]);  // bitwise
    CHECK(a.s_vec[k] == b.s_vec[k]);
  }
  CHECK(a.s_scalar.front() != b.s_scalar.front());
}

TEST_CASE("converged cost is stable under grid refinement") {
  for (const char* name : {"ex1", "ex2"}) {
    const auto def = builtin(name);
    NormalizedGrid g200{200, 3}, g400{400, 3};
    const double c200 =
        slq_solve(def.problem, def.initial_times,
                  cold_start(def.problem, def.initial_times, g200), g200)
            .final_trajectory.cost;
    const double c400 =
        slq_solve(def.problem, def.initial_times,
                  cold_start(def.problem, def.initial_times, g400), g400)
            .final_trajectory.cost;
    CHECK(std::abs(c200 - c400) / std::abs(c400) <= 1e-4);
  }
}
