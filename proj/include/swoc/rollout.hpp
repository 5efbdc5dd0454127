#pragma once

#include "swoc/finite_diff.hpp"
#include "swoc/problem.hpp"

namespace swoc {

struct Trajectory {
  std::vector<double> z;
  std::vector<double> t;
  std::vector<Vec> x;
  std::vector<Vec> u;
  double cost{0.0};
  // States and inputs seen at the three interior RK4 stages of each interval
  // (z + h/2 twice, then z + h). Policies built around this trajectory keep
  // these as their reference so a zero-update replay is a bit-exact fixed
  // point instead of drifting by the node-interpolation error.
  std::vector<std::array<Vec, 3>> x_stage;
  std::vector<std::array<Vec, 3>> u_stage;
};

/// Time-varying affine policy u(z, x) = u_ff(z) + alpha l(z) + L(z)(x - x_ref(z)),
/// stored at grid nodes and interpolated linearly in z in between. When the
/// stage references are present (policies derived from a rollout via
/// make_policy) the RK4 interior stages use them instead of interpolating.
struct SlqPolicy {
  std::vector<Vec> u_ff;
  std::vector<Vec> l;
  std::vector<Mat> L;
  std::vector<Vec> x_ref;
  std::vector<std::array<Vec, 3>> u_ff_stage;
  std::vector<std::array<Vec, 3>> x_ref_stage;
  double alpha{0.0};
};

class RolloutDiverged : public std::runtime_error {
 public:
  RolloutDiverged(int node, std::string what)
      : std::runtime_error(std::move(what)), last_valid_node(node) {}
  int last_valid_node;
};

namespace detail {

struct GridLocation {
  int k;        // lower node index
  double frac;  // in [0, 1]
};

inline GridLocation locate(const NormalizedGrid& grid, double z) {
  const double s = z * grid.nodes_per_mode;
  int k = static_cast<int>(std::floor(s));
  k = std::clamp(k, 0, grid.num_intervals() - 1);
  return {k, s - k};
}

/// Linear interpolation of nodal values inside a given interval. An interior
/// mode-boundary node stores the *next* mode's value, so in the last interval
/// of a mode the value is extrapolated from the two preceding same-mode nodes
/// instead of interpolating across the jump (same O(h^2) accuracy). The last
/// interval of the final mode is treated identically, which keeps the
/// sampling invariant under appending a zero-duration duplicate mode.
template <typename T>
T lerp_in_interval(const std::vector<T>& nodes, const NormalizedGrid& grid,
                   int interval, double frac) {
  const std::size_t k = static_cast<std::size_t>(interval);
  if (frac <= 0.0) return nodes[k];
  const int N = grid.nodes_per_mode;
  const bool last_of_mode = (interval + 1) % N == 0;
  if (!last_of_mode)
    return nodes[k] * (1.0 - frac) + nodes[k + 1] * frac;
  if (interval % N == 0) return nodes[k];  // single-interval mode: hold
  return nodes[k] + frac * (nodes[k] - nodes[k - 1]);
}

/// Samples nodal values at z, treated as belonging to the given interval
/// (z may equal the interval's right endpoint).
template <typename T>
T sample(const std::vector<T>& nodes, const NormalizedGrid& grid, double z,
         int interval) {
  const double frac =
      std::clamp(z * grid.nodes_per_mode - interval, 0.0, 1.0);
  return lerp_in_interval(nodes, grid, interval, frac);
}

template <typename T>
T lerp_nodes(const std::vector<T>& nodes, const NormalizedGrid& grid,
             double z) {
  const auto loc = locate(grid, z);
  if (loc.frac == 0.0) return nodes[static_cast<std::size_t>(loc.k)];
  return lerp_in_interval(nodes, grid, loc.k, loc.frac);
}

}  // namespace detail

inline Vec eval_policy(const SlqPolicy& policy, const NormalizedGrid& grid,
                       double z, const Vec& x, int interval = -1) {
  if (interval < 0) interval = detail::locate(grid, z).k;
  const Vec u_ff = detail::sample(policy.u_ff, grid, z, interval);
  const Vec l = detail::sample(policy.l, grid, z, interval);
  const Mat L = detail::sample(policy.L, grid, z, interval);
  const Vec x_ref = detail::sample(policy.x_ref, grid, z, interval);
  return u_ff + policy.alpha * l + L * (x - x_ref);
}

/// Forward RK4 integration of the duration-scaled dynamics under the policy,
/// with the running cost accumulated as an augmented quadrature state.
inline Trajectory rollout(const SwitchedProblem& problem,
                          const SwitchingTimes& times, const SlqPolicy& policy,
                          const NormalizedGrid& grid) {
  const auto durations =
      mode_durations(times, problem.t_start, problem.t_end);
  const int K = grid.num_intervals();
  const double h = grid.dz();

  Trajectory traj;
  traj.z.resize(static_cast<std::size_t>(K + 1));
  traj.t.resize(static_cast<std::size_t>(K + 1));
  traj.x.resize(static_cast<std::size_t>(K + 1));
  traj.u.resize(static_cast<std::size_t>(K + 1));
  traj.x_stage.resize(static_cast<std::size_t>(K));
  traj.u_stage.resize(static_cast<std::size_t>(K));

  const bool staged =
      policy.u_ff_stage.size() == static_cast<std::size_t>(K) &&
      policy.x_ref_stage.size() == static_cast<std::size_t>(K);

  Vec x = problem.x0;
  double cost = 0.0;

  auto record = [&](int k) {
    traj.z[static_cast<std::size_t>(k)] = grid.z(k);
    traj.t[static_cast<std::size_t>(k)] =
        map_z_to_t(grid.z(k), times, problem.t_start, problem.t_end);
    traj.x[static_cast<std::size_t>(k)] = x;
    const std::size_t sk = static_cast<std::size_t>(k);
    traj.u[sk] = policy.u_ff[sk] + policy.alpha * policy.l[sk] +
                 policy.L[sk] * (x - policy.x_ref[sk]);
  };
  record(0);

  for (int k = 0; k < K; ++k) {
    const int m = grid.interval_mode(k);
    const auto& sub = problem.subsystems[static_cast<std::size_t>(m)];
    const double d = durations[static_cast<std::size_t>(m)];
    const double z0 = grid.z(k);

    const std::size_t sk = static_cast<std::size_t>(k);
    auto rhs = [&](double z, const Vec& xs, int stage, double& dc) -> Vec {
      Vec u;
      if (stage == 0) {
        u = policy.u_ff[sk] + policy.alpha * policy.l[sk] +
            policy.L[sk] * (xs - policy.x_ref[sk]);
      } else {
        const Vec l = detail::sample(policy.l, grid, z, k);
        const Mat L = detail::sample(policy.L, grid, z, k);
        if (staged) {
          u = policy.u_ff_stage[sk][static_cast<std::size_t>(stage - 1)] +
              policy.alpha * l +
              L * (xs -
                   policy.x_ref_stage[sk][static_cast<std::size_t>(stage - 1)]);
        } else {
          const Vec u_ff = detail::sample(policy.u_ff, grid, z, k);
          const Vec x_ref = detail::sample(policy.x_ref, grid, z, k);
          u = u_ff + policy.alpha * l + L * (xs - x_ref);
        }
        traj.x_stage[sk][static_cast<std::size_t>(stage - 1)] = xs;
        traj.u_stage[sk][static_cast<std::size_t>(stage - 1)] = u;
      }
      dc = d * sub.running_cost(xs, u);
      return d * sub.dynamics(xs, u);
    };

    double c1, c2, c3, c4;
    const Vec k1 = rhs(z0, x, 0, c1);
    const Vec k2 = rhs(z0 + 0.5 * h, x + 0.5 * h * k1, 1, c2);
    const Vec k3 = rhs(z0 + 0.5 * h, x + 0.5 * h * k2, 2, c3);
    const Vec k4 = rhs(z0 + h, x + h * k3, 3, c4);
    x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    cost += (h / 6.0) * (c1 + 2.0 * c2 + 2.0 * c3 + c4);

    if (!x.allFinite() || x.lpNorm<Eigen::Infinity>() > 1e8)
      throw RolloutDiverged(k, "rollout diverged at node " +
                                   std::to_string(k + 1));
    record(k + 1);
  }

  cost += problem.terminal_cost.value(traj.x.back());
  traj.cost = cost;
  return traj;
}

/// Independent cost check: composite trapezoidal quadrature of the stored
/// node costs, duration-weighted per mode, plus the terminal cost.
inline double evaluate_cost(const SwitchedProblem& problem,
                            const SwitchingTimes& times,
                            const Trajectory& traj,
                            const NormalizedGrid& grid) {
  const auto durations =
      mode_durations(times, problem.t_start, problem.t_end);
  const double h = grid.dz();
  double cost = 0.0;
  for (int k = 0; k < grid.num_intervals(); ++k) {
    const int m = grid.interval_mode(k);
    const auto& sub = problem.subsystems[static_cast<std::size_t>(m)];
    const std::size_t sk = static_cast<std::size_t>(k);
    const double L0 = sub.running_cost(traj.x[sk], traj.u[sk]);
    // At an interior mode boundary the stored u belongs to the next mode;
    // take this mode's one-sided value instead.
    const Vec u1 = detail::lerp_in_interval(traj.u, grid, k, 1.0);
    const double L1 = sub.running_cost(traj.x[sk + 1], u1);
    cost += durations[static_cast<std::size_t>(m)] * 0.5 * h * (L0 + L1);
  }
  return cost + problem.terminal_cost.value(traj.x.back());
}

/// Policy whose rollout replays a stored trajectory when the feedforward
/// update is zero (u_ff and x_ref taken from the nodes, gains supplied).
inline SlqPolicy make_policy(const Trajectory& nominal, std::vector<Vec> l,
                             std::vector<Mat> L, double alpha) {
  SlqPolicy p;
  p.u_ff = nominal.u;
  p.x_ref = nominal.x;
  p.u_ff_stage = nominal.u_stage;
  p.x_ref_stage = nominal.x_stage;
  p.l = std::move(l);
  p.L = std::move(L);
  p.alpha = alpha;
  return p;
}

inline SlqPolicy zero_policy(const NormalizedGrid& grid, int nx, int nu) {
  SlqPolicy p;
  const std::size_t n = static_cast<std::size_t>(grid.num_nodes());
  p.u_ff.assign(n, Vec::Zero(nu));
  p.l.assign(n, Vec::Zero(nu));
  p.L.assign(n, Mat::Zero(nu, nx));
  p.x_ref.assign(n, Vec::Zero(nx));
  return p;
}

}  // namespace swoc
