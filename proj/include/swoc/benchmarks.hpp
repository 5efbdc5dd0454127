#pragma once

#include "swoc/problem.hpp"

namespace swoc {

struct BenchmarkReference {
  double cost{0.0};
  std::vector<double> times;
  double cost_rel_tol{0.01};
  double times_abs_tol{0.05};
};

struct BenchmarkDefinition {
  std::string name;
  SwitchedProblem problem;
  SwitchingTimes initial_times;
  BenchmarkReference reference;
};

namespace detail {

inline SubsystemModel quadratic_tracking_cost(SubsystemModel sub,
                                              const Vec& x_goal) {
  const int nx = static_cast<int>(x_goal.size());
  sub.running_cost = [x_goal](const Vec& x, const Vec& u) {
    return 0.5 * ((x - x_goal).squaredNorm() + u.squaredNorm());
  };
  sub.running_cost_quadratics = [x_goal, nx](const Vec& x, const Vec& u) {
    CostQuadratics c;
    const int nu = static_cast<int>(u.size());
    c.q = 0.5 * ((x - x_goal).squaredNorm() + u.squaredNorm());
    c.qx = x - x_goal;
    c.ru = u;
    c.Q = Mat::Identity(nx, nx);
    c.P = Mat::Zero(nx, nu);
    c.R = Mat::Identity(nu, nu);
    return c;
  };
  return sub;
}

inline TerminalCost quadratic_terminal_cost(const Vec& x_goal) {
  const int nx = static_cast<int>(x_goal.size());
  TerminalCost phi;
  phi.value = [x_goal](const Vec& x) {
    return 0.5 * (x - x_goal).squaredNorm();
  };
  phi.gradient = [x_goal](const Vec& x) -> Vec { return x - x_goal; };
  phi.hessian = [nx](const Vec&) { return Mat::Identity(nx, nx); };
  return phi;
}

inline BenchmarkDefinition make_ex1() {
  const Vec x_goal = (Vec(2) << 1.0, -1.0).finished();

  SubsystemModel m1;
  m1.dynamics = [](const Vec& x, const Vec& u) -> Vec {
    return (Vec(2) << x(0) + u(0) * std::sin(x(0)),
            -x(1) + u(0) * std::cos(x(1)))
        .finished();
  };
  m1.jacobian_state = [](const Vec& x, const Vec& u) -> Mat {
    Mat A = Mat::Zero(2, 2);
    A(0, 0) = 1.0 + u(0) * std::cos(x(0));
    A(1, 1) = -1.0 - u(0) * std::sin(x(1));
    return A;
  };
  m1.jacobian_input = [](const Vec& x, const Vec&) -> Mat {
    return (Mat(2, 1) << std::sin(x(0)), std::cos(x(1))).finished();
  };

  SubsystemModel m2;
  m2.dynamics = [](const Vec& x, const Vec& u) -> Vec {
    return (Vec(2) << x(1) + u(0) * std::sin(x(1)),
            -x(0) - u(0) * std::cos(x(0)))
        .finished();
  };
  m2.jacobian_state = [](const Vec& x, const Vec& u) -> Mat {
    Mat A = Mat::Zero(2, 2);
    A(0, 1) = 1.0 + u(0) * std::cos(x(1));
    A(1, 0) = -1.0 + u(0) * std::sin(x(0));
    return A;
  };
  m2.jacobian_input = [](const Vec& x, const Vec&) -> Mat {
    return (Mat(2, 1) << std::sin(x(1)), -std::cos(x(0))).finished();
  };

  SubsystemModel m3;
  m3.dynamics = [](const Vec& x, const Vec& u) -> Vec {
    return (Vec(2) << -x(0) - u(0) * std::sin(x(0)),
            x(1) + u(0) * std::cos(x(1)))
        .finished();
  };
  m3.jacobian_state = [](const Vec& x, const Vec& u) -> Mat {
    Mat A = Mat::Zero(2, 2);
    A(0, 0) = -1.0 - u(0) * std::cos(x(0));
    A(1, 1) = 1.0 - u(0) * std::sin(x(1));
    return A;
  };
  m3.jacobian_input = [](const Vec& x, const Vec&) -> Mat {
    return (Mat(2, 1) << -std::sin(x(0)), std::cos(x(1))).finished();
  };

  BenchmarkDefinition def;
  def.name = "ex1";
  def.problem.subsystems = {quadratic_tracking_cost(std::move(m1), x_goal),
                            quadratic_tracking_cost(std::move(m2), x_goal),
                            quadratic_tracking_cost(std::move(m3), x_goal)};
  def.problem.terminal_cost = quadratic_terminal_cost(x_goal);
  def.problem.t_start = 0.0;
  def.problem.t_end = 3.0;
  def.problem.x0 = (Vec(2) << 2.0, 3.0).finished();
  def.problem.state_dim = 2;
  def.problem.input_dim = 1;
  def.initial_times = SwitchingTimes({1.0, 2.0});
  def.reference = {5.4438, {0.2324, 1.0236}, 0.01, 0.05};
  return def;
}

inline BenchmarkDefinition make_ex2() {
  const Vec x_goal = (Vec(4) << 1.0, -1.0, 2.0, 2.0).finished();
  BenchmarkDefinition ex1 = make_ex1();

  // Augmentation of mode m: (a, b) with dx3 = a1 x3 + b1 x3 u2,
  // dx4 = a2 x4 + b2 x4 u2.
  struct Aug {
    double a3, b3, a4, b4;
  };
  const Aug augs[3] = {{-1.0, 2.0, 1.0, 1.0},
                       {1.0, -3.0, 2.0, -2.0},
                       {2.0, 1.0, -1.0, 3.0}};

  BenchmarkDefinition def;
  def.name = "ex2";
  for (int m = 0; m < 3; ++m) {
    const SubsystemModel base = ex1.problem.subsystems[static_cast<std::size_t>(m)];
    const Aug a = augs[m];
    SubsystemModel sub;
    sub.dynamics = [base, a](const Vec& x, const Vec& u) -> Vec {
      const Vec f12 = base.dynamics(x.head(2), u.head(1));
      return (Vec(4) << f12(0), f12(1),
              a.a3 * x(2) + a.b3 * x(2) * u(1),
              a.a4 * x(3) + a.b4 * x(3) * u(1))
          .finished();
    };
    sub.jacobian_state = [base, a](const Vec& x, const Vec& u) -> Mat {
      Mat A = Mat::Zero(4, 4);
      A.topLeftCorner(2, 2) = base.jacobian_state(x.head(2), u.head(1));
      A(2, 2) = a.a3 + a.b3 * u(1);
      A(3, 3) = a.a4 + a.b4 * u(1);
      return A;
    };
    sub.jacobian_input = [base, a](const Vec& x, const Vec& u) -> Mat {
      Mat B = Mat::Zero(4, 2);
      B.block(0, 0, 2, 1) = base.jacobian_input(x.head(2), u.head(1));
      B(2, 1) = a.b3 * x(2);
      B(3, 1) = a.b4 * x(3);
      return B;
    };
    def.problem.subsystems.push_back(
        quadratic_tracking_cost(std::move(sub), x_goal));
  }
  def.problem.terminal_cost = quadratic_terminal_cost(x_goal);
  def.problem.t_start = 0.0;
  def.problem.t_end = 3.0;
  def.problem.x0 = (Vec(4) << 2.0, 3.0, 1.0, 1.0).finished();
  def.problem.state_dim = 4;
  def.problem.input_dim = 2;
  def.initial_times = SwitchingTimes({1.0, 2.0});
  def.reference = {10.3888, {0.2973, 1.5978}, 0.01, 0.05};
  return def;
}

}  // namespace detail

inline std::vector<std::string> builtin_names() { return {"ex1", "ex2"}; }

class UnknownBenchmark : public std::invalid_argument {
 public:
  explicit UnknownBenchmark(const std::string& name)
      : std::invalid_argument("unknown benchmark '" + name +
                              "'; available: ex1, ex2") {}
};

inline BenchmarkDefinition builtin(const std::string& name) {
  if (name == "ex1") return detail::make_ex1();
  if (name == "ex2") return detail::make_ex2();
  throw UnknownBenchmark(name);
}

}  // namespace swoc
