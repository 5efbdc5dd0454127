#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace swoc {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Value and Taylor coefficients of a running cost at one evaluation point:
/// L ~ q + qx'dx + ru'du + 0.5 dx'Q dx + dx'P du + 0.5 du'R du
struct CostQuadratics {
  double q{0.0};
  Vec qx;
  Vec ru;
  Mat Q;
  Mat P;
  Mat R;
};

using DynamicsFn = std::function<Vec(const Vec&, const Vec&)>;
using JacobianFn = std::function<Mat(const Vec&, const Vec&)>;
using RunningCostFn = std::function<double(const Vec&, const Vec&)>;
using QuadraticsFn = std::function<CostQuadratics(const Vec&, const Vec&)>;

/// One subsystem of the switched system. Jacobians and cost quadratics are
/// optional; finite differences are substituted when they are empty.
struct SubsystemModel {
  DynamicsFn dynamics;
  JacobianFn jacobian_state;
  JacobianFn jacobian_input;
  RunningCostFn running_cost;
  QuadraticsFn running_cost_quadratics;
};

struct TerminalCost {
  std::function<double(const Vec&)> value;
  std::function<Vec(const Vec&)> gradient;  // optional
  std::function<Mat(const Vec&)> hessian;   // optional
};

struct SwitchedProblem {
  std::vector<SubsystemModel> subsystems;
  TerminalCost terminal_cost;
  double t_start{0.0};
  double t_end{1.0};
  Vec x0;
  int state_dim{0};
  int input_dim{0};

  int num_modes() const { return static_cast<int>(subsystems.size()); }
};

/// Ordered switching instants t_1 <= ... <= t_{I-1}. Equal entries
/// (zero-duration modes) are legal.
struct SwitchingTimes {
  std::vector<double> times;

  SwitchingTimes() = default;
  explicit SwitchingTimes(std::vector<double> t) : times(std::move(t)) {}
  SwitchingTimes(std::initializer_list<double> t) : times(t) {}

  int size() const { return static_cast<int>(times.size()); }
  double operator[](int j) const { return times[static_cast<std::size_t>(j)]; }
};

inline bool in_polytope(const SwitchingTimes& st, double t_start, double t_end,
                        double tol = 0.0) {
  double prev = t_start;
  for (double t : st.times) {
    if (t < prev - tol) return false;
    prev = t;
  }
  return t_end >= prev - tol;
}

/// Boundaries t_0, t_1, ..., t_I including the fixed endpoints.
inline std::vector<double> mode_boundaries(const SwitchingTimes& st,
                                           double t_start, double t_end) {
  std::vector<double> b;
  b.reserve(st.times.size() + 2);
  b.push_back(t_start);
  b.insert(b.end(), st.times.begin(), st.times.end());
  b.push_back(t_end);
  return b;
}

inline std::vector<double> mode_durations(const SwitchingTimes& st,
                                          double t_start, double t_end) {
  const auto b = mode_boundaries(st, t_start, t_end);
  std::vector<double> d(b.size() - 1);
  for (std::size_t i = 0; i + 1 < b.size(); ++i) d[i] = b[i + 1] - b[i];
  return d;
}

/// Piecewise-affine map from normalized time z in [0, I] to physical time.
inline double map_z_to_t(double z, const SwitchingTimes& st, double t_start,
                         double t_end) {
  const int num_modes = st.size() + 1;
  if (z < 0.0 || z > static_cast<double>(num_modes))
    throw std::domain_error("map_z_to_t: z outside [0, I]");
  const auto b = mode_boundaries(st, t_start, t_end);
  const int i = std::min(static_cast<int>(std::floor(z)), num_modes - 1);
  return b[i] + (b[i + 1] - b[i]) * (z - i);
}

/// The I extreme points of the chain polytope
/// {t_start <= t_1 <= ... <= t_{I-1} <= t_end}: vertex k has its first k
/// entries at t_start and the remainder at t_end.
inline std::vector<SwitchingTimes> polytope_vertices(int num_modes,
                                                     double t_start,
                                                     double t_end) {
  if (num_modes < 1) throw std::invalid_argument("polytope_vertices: I >= 1");
  std::vector<SwitchingTimes> verts;
  verts.reserve(static_cast<std::size_t>(num_modes));
  for (int k = 0; k < num_modes; ++k) {
    std::vector<double> v(static_cast<std::size_t>(num_modes - 1));
    for (int j = 0; j < num_modes - 1; ++j)
      v[static_cast<std::size_t>(j)] = (j < k) ? t_start : t_end;
    verts.emplace_back(std::move(v));
  }
  return verts;
}

/// Uniform per-mode grid in z. Node k sits at z = k / nodes_per_mode; every
/// integer z is a node. Integer nodes belong to the mode starting there
/// (left-closed), except the terminal node which belongs to the last mode.
struct NormalizedGrid {
  int nodes_per_mode{200};
  int num_modes{1};

  int num_intervals() const { return num_modes * nodes_per_mode; }
  int num_nodes() const { return num_intervals() + 1; }
  double dz() const { return 1.0 / nodes_per_mode; }
  double z(int k) const {
    return static_cast<double>(k) / nodes_per_mode;
  }
  int interval_mode(int k) const { return k / nodes_per_mode; }
  int node_mode(int k) const {
    return std::min(k / nodes_per_mode, num_modes - 1);
  }
};

}  // namespace swoc
