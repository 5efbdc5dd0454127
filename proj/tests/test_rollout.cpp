#include "doctest.h"
#include "test_helpers.hpp"

using namespace swoc;
using namespace swoc::testing;

TEST_CASE("rollout of a zero vector field keeps the state at x0") {
  auto p = scalar_problem({scalar_linear_mode(0.0, 0.0, 0.0, 1.0),
                           scalar_linear_mode(0.0, 0.0, 0.0, 1.0)},
                          1.5, 2.0, 0.0);
  NormalizedGrid grid{50, 2};
  SwitchingTimes st({0.7});
  auto policy = zero_policy(grid, 1, 1);
  const auto traj = rollout(p, st, policy, grid);
  for (const auto& x : traj.x) CHECK(x(0) == doctest::Approx(1.5));
}

TEST_CASE("rollout integrates a constant input exactly") {
  auto p = scalar_problem({scalar_linear_mode(0.0, 1.0, 0.0, 1.0)}, 0.0, 1.0,
                          0.0);
  NormalizedGrid grid{100, 1};
  auto policy = zero_policy(grid, 1, 1);
  for (auto& u : policy.u_ff) u(0) = 1.0;
  const auto traj = rollout(p, SwitchingTimes({}), policy, grid);
  CHECK(traj.x.back()(0) == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("rollout cost equals terminal cost when running cost is zero") {
  auto p = scalar_problem({scalar_linear_mode(0.0, 0.0, 0.0, 1.0)}, 2.0, 1.0,
                          1.0);
  NormalizedGrid grid{50, 1};
  const auto traj = rollout(p, SwitchingTimes({}), zero_policy(grid, 1, 1), grid);
  CHECK(traj.cost == doctest::Approx(0.5 * 4.0));
}

TEST_CASE("evaluate_cost matches a hand-computed terminal-only cost") {
  // Zero dynamics and running cost; terminal 0.5*qf*||x||^2 with qf=2,
  // x0 = (1,-1) gives cost 2.
  SwitchedProblem p;
  SubsystemModel sub;
  sub.dynamics = [](const Vec& x, const Vec&) -> Vec {
    return Vec::Zero(x.size());
  };
  sub.running_cost = [](const Vec&, const Vec&) { return 0.0; };
  p.subsystems = {sub};
  p.terminal_cost = quadratic_terminal(2.0, Vec::Zero(2));
  p.t_start = 0.0;
  p.t_end = 1.0;
  p.x0 = (Vec(2) << 1.0, -1.0).finished();
  p.state_dim = 2;
  p.input_dim = 1;
  NormalizedGrid grid{20, 1};
  const auto traj = rollout(p, SwitchingTimes({}), zero_policy(grid, 2, 1), grid);
  CHECK(evaluate_cost(p, SwitchingTimes({}), traj, grid) ==
        doctest::Approx(2.0));
}

TEST_CASE("zero-duration mode contributes nothing to the cost") {
  auto mode = scalar_linear_mode(0.0, 0.0, 2.0, 1.0);
  auto p2 = scalar_problem({mode, mode}, 1.0, 1.0, 0.0);
  auto p1 = scalar_problem({mode}, 1.0, 1.0, 0.0);
  NormalizedGrid g2{50, 2}, g1{50, 1};
  const auto t2 = rollout(p2, SwitchingTimes({1.0}), zero_policy(g2, 1, 1), g2);
  const auto t1 = rollout(p1, SwitchingTimes({}), zero_policy(g1, 1, 1), g1);
  CHECK(t2.cost == doctest::Approx(t1.cost).epsilon(1e-12));
  CHECK(evaluate_cost(p2, SwitchingTimes({1.0}), t2, g2) ==
        doctest::Approx(t1.cost).epsilon(1e-6));
}

TEST_CASE("rollout cost agrees with trapezoidal cross-check on ex1") {
  // Nodes at mode boundaries store the next mode's policy values, so the
  // last interval of each mode carries an O(dz) mismatch between the two
  // quadratures; the difference must shrink linearly under refinement.
  const auto def = builtin("ex1");
  auto rel_gap = [&](int N) {
    NormalizedGrid grid{N, 3};
    const auto policy = initial_controller(
        def.problem, def.initial_times, default_operating_points(def.problem),
        grid);
    const auto traj = rollout(def.problem, def.initial_times, policy, grid);
    const double quad =
        evaluate_cost(def.problem, def.initial_times, traj, grid);
    return std::abs(traj.cost - quad) / std::abs(traj.cost);
  };
  const double coarse = rel_gap(500);
  const double fine = rel_gap(2000);
  CHECK(fine < 5e-4);
  CHECK(coarse / fine >= 3.0);
}

TEST_CASE("rollout cost matches the trapezoid tightly on a single mode") {
  // Without mode boundaries both quadratures see the same smooth integrand.
  auto p = scalar_problem({scalar_linear_mode(-0.8, 1.0, 1.0, 1.0)}, 1.5, 2.0,
                          1.0);
  NormalizedGrid grid{400, 1};
  const auto policy = initial_controller(
      p, SwitchingTimes({}), default_operating_points(p), grid);
  const auto traj = rollout(p, SwitchingTimes({}), policy, grid);
  const double quad = evaluate_cost(p, SwitchingTimes({}), traj, grid);
  CHECK(std::abs(traj.cost - quad) / std::abs(traj.cost) < 1e-5);
}

TEST_CASE("RK4 order check: halving the step shrinks the error by >= 12x") {
  // Constant open-loop input so the nodal policy is interpolated exactly
  // and only the integrator error remains.
  const auto def = builtin("ex1");
  auto roll_at = [&](int N) {
    NormalizedGrid grid{N, 3};
    auto policy = zero_policy(grid, 2, 1);
    for (auto& u : policy.u_ff) u(0) = 0.5;
    return rollout(def.problem, def.initial_times, policy, grid).x.back();
  };
  const Vec ref = roll_at(800);
  const double e_coarse = (roll_at(50) - ref).norm();
  const double e_fine = (roll_at(100) - ref).norm();
  CHECK(e_coarse / e_fine >= 12.0);
}

TEST_CASE("rollout is deterministic") {
  const auto def = builtin("ex1");
  NormalizedGrid grid{100, 3};
  const auto policy = initial_controller(
      def.problem, def.initial_times, default_operating_points(def.problem),
      grid);
  const auto a = rollout(def.problem, def.initial_times, policy, grid);
  const auto b = rollout(def.problem, def.initial_times, policy, grid);
  CHECK(a.cost == b.cost);
  for (std::size_t k = 0; k < a.x.size(); ++k) CHECK(a.x[k] == b.x[k]);
}

TEST_CASE("rollout reports divergence with the last valid node") {
  SwitchedProblem p;
  SubsystemModel sub;
  sub.dynamics = [](const Vec& x, const Vec&) -> Vec {
    return (Vec(1) << x(0) * x(0)).finished();
  };
  sub.running_cost = [](const Vec&, const Vec&) { return 0.0; };
  p.subsystems = {sub};
  p.terminal_cost = quadratic_terminal(0.0, Vec::Zero(1));
  p.t_start = 0.0;
  p.t_end = 5.0;
  p.x0 = (Vec(1) << 1.0).finished();
  p.state_dim = 1;
  p.input_dim = 1;
  NormalizedGrid grid{200, 1};
  CHECK_THROWS_AS(rollout(p, SwitchingTimes({}), zero_policy(grid, 1, 1), grid),
                  RolloutDiverged);
}

TEST_CASE("initial controller stabilizes an already-stable scalar mode") {
  auto p = scalar_problem({scalar_linear_mode(-1.0, 1.0, 1.0, 1.0)}, 1.0, 2.0,
                          1.0);
  NormalizedGrid grid{100, 1};
  const auto policy = initial_controller(
      p, SwitchingTimes({}), {{Vec::Zero(1), Vec::Zero(1)}}, grid);
  for (const auto& L : policy.L) CHECK(L.allFinite());
  const auto traj = rollout(p, SwitchingTimes({}), policy, grid);
  for (const auto& x : traj.x) CHECK(std::abs(x(0)) <= 1.0 + 1e-9);
}

TEST_CASE("initial controller on ex1 produces a finite-cost rollout") {
  const auto def = builtin("ex1");
  NormalizedGrid grid{200, 3};
  const auto policy = initial_controller(
      def.problem, def.initial_times, default_operating_points(def.problem),
      grid);
  const auto traj = rollout(def.problem, def.initial_times, policy, grid);
  CHECK(std::isfinite(traj.cost));
}

TEST_CASE("zero state cost gives no feedback incentive and an unstable rollout") {
  // dx = x + u with Q = 0, R = 1, Qf = 0: the Riccati solution is zero, the
  // gain is zero, and the uncontrolled rollout grows until the guard trips.
  auto p = scalar_problem({scalar_linear_mode(1.0, 1.0, 0.0, 1.0)}, 1.0, 25.0,
                          0.0);
  NormalizedGrid grid{200, 1};
  const auto policy = initial_controller(
      p, SwitchingTimes({}), {{Vec::Zero(1), Vec::Zero(1)}}, grid);
  for (const auto& L : policy.L) CHECK(L.norm() < 1e-9);
  CHECK_THROWS_AS(rollout(p, SwitchingTimes({}), policy, grid),
                  RolloutDiverged);
}

TEST_CASE("appending a zero-duration duplicate mode leaves the rollout unchanged") {
  const auto def = builtin("ex1");
  NormalizedGrid g3{100, 3};
  const auto p3 = initial_controller(def.problem, def.initial_times,
                                     default_operating_points(def.problem), g3);
  const auto base = rollout(def.problem, def.initial_times, p3, g3);

  auto dup = def.problem;
  dup.subsystems.push_back(dup.subsystems.back());
  SwitchingTimes times4({1.0, 2.0, 3.0});  // final mode has zero duration
  NormalizedGrid g4{100, 4};
  const auto p4 = initial_controller(dup, times4,
                                     default_operating_points(dup), g4);
  const auto aug = rollout(dup, times4, p4, g4);
  CHECK((aug.x.back() - base.x.back()).norm() < 1e-10);
}
