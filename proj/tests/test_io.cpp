#include "doctest.h"
#include "test_helpers.hpp"

#include <sstream>

using namespace swoc;
using namespace swoc::testing;

namespace {

Trajectory small_trajectory() {
  const auto def = builtin("ex1");
  NormalizedGrid grid{20, 3};
  const auto policy = initial_controller(
      def.problem, def.initial_times, default_operating_points(def.problem),
      grid);
  return rollout(def.problem, def.initial_times, policy, grid);
}

}  // namespace

TEST_CASE("trajectory CSV round-trips exactly") {
  const auto traj = small_trajectory();
  std::stringstream ss;
  write_trajectory_csv(ss, traj);

  std::stringstream header_check(ss.str());
  std::string first_line;
  std::getline(header_check, first_line);
  CHECK(first_line == "z,t,x_1,x_2,u_1");

  const auto back = read_trajectory_csv(ss);
  REQUIRE(back.z.size() == traj.z.size());
  for (std::size_t k = 0; k < traj.z.size(); ++k) {
    CHECK(back.z[k] == traj.z[k]);  // 17 digits: bitwise round trip
    CHECK(back.t[k] == traj.t[k]);
    CHECK((back.x[k] - traj.x[k]).norm() == 0.0);
    CHECK((back.u[k] - traj.u[k]).norm() == 0.0);
  }
}

TEST_CASE("malformed CSV rows are rejected") {
  std::stringstream empty;
  CHECK_THROWS_AS(read_trajectory_csv(empty), std::runtime_error);

  std::stringstream bad("z,t,x_1,u_1\n0.0,0.0,1.0\n");
  CHECK_THROWS_AS(read_trajectory_csv(bad), std::runtime_error);
}

TEST_CASE("report writing is parseable and byte-stable") {
  OuterReport report;
  report.optimal_times = SwitchingTimes({0.25, 1.75});
  report.optimal_cost = 5.4321;
  report.outer_iterations = 6;
  report.function_calls = 11;
  report.total_inner_iterations = 42;
  report.converged = true;
  report.termination_reason = OuterTermination::kGapSmall;
  report.gradient_history = {{1.0, -2.0}, {0.001, -0.002}};
  report.wall_time_ms = 123.5;

  const std::map<std::string, std::string> settings{
      {"nodes_per_mode", "200"}, {"l_min", "0.001"}};

  std::stringstream a, b;
  write_report(a, report, settings);
  write_report(b, report, settings);
  CHECK(a.str() == b.str());

  // wall_time_ms is the only field allowed to differ between repeat runs,
  // and it is written last so everything before it is comparable.
  const auto pos = a.str().find("wall_time_ms");
  CHECK(pos != std::string::npos);
  CHECK(a.str().find('\n', pos) == a.str().size() - 1);

  const auto kv = parse_report(a);
  CHECK(kv.at("cost") == "5.4321000000000002");
  CHECK(kv.at("switching_times") == "0.25 1.75");
  CHECK(kv.at("outer_iterations") == "6");
  CHECK(kv.at("function_calls") == "11");
  CHECK(kv.at("converged") == "true");
  CHECK(kv.at("termination") == "gap-small");
  CHECK(kv.at("gradient_at_solution") == "0.001 -0.002");
  CHECK(kv.at("nodes_per_mode") == "200");
}

TEST_CASE("termination names") {
  CHECK(termination_name(OuterTermination::kGapSmall) == "gap-small");
  CHECK(termination_name(OuterTermination::kStepSmall) == "step-small");
  CHECK(termination_name(OuterTermination::kNoImprovement) ==
        "no-improvement");
  CHECK(termination_name(OuterTermination::kMaxIterations) ==
        "max-iterations");
}
