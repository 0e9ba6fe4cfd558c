#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "rch/design.hpp"
#include "rch/errors.hpp"
#include "rch/network.hpp"
#include "rch/rhythm.hpp"

using namespace rch;

namespace {

std::string data_file(const char* name) { return std::string(RCH_DATA_DIR) + "/" + name; }

// Toy corridor with its demand scaled to `beta` times the admissible maximum.
struct Toy {
  Scenario s;
  BackgroundRhythm r;

  explicit Toy(double beta, double omega = 0.9) {
    std::ifstream in(data_file("toy.scn"));
    s = parse_scenario(in);
    s.omega_p = omega;
    r = design_background_rhythm(s);
    const TrafficBounds tb = max_admissible_traffic(s, r);
    for (size_t i = 0; i < s.demands.size(); ++i)
      s.demands[i].rate = beta * tb.od_capacity[i] / s.Q();
  }
};

double trip_seconds(const BusItinerary& it) {
  double t = 0;
  for (const auto& [id, c] : it.links) t += c.time;
  for (const auto& [node, dw] : it.dwell) t += dw;
  return t;
}

}  // namespace

TEST_CASE("pace itineraries ride the background rhythm") {
  Toy toy(0.2);
  const auto its = pace_itineraries(toy.s, toy.r);
  REQUIRE(its.size() == 2);

  // line 1 walks links 2..10 from slot 1, four slots per 40 s dwell
  const BusItinerary& l1 = its[0];
  CHECK(l1.links.at(2).vp == PlatoonPair{1, 3});
  CHECK(l1.links.at(3).vp == PlatoonPair{7, 10});
  CHECK(l1.links.at(5).vp == PlatoonPair{4, 7});
  CHECK(l1.links.at(10).vp == PlatoonPair{4, 7});
  CHECK(l1.dwell == std::map<int, double>{{3, 40}, {5, 40}, {7, 40}, {8, 40}, {10, 40}});
  CHECK(trip_seconds(l1) == doctest::Approx(420));
  CHECK(trip_seconds(its[1]) == doctest::Approx(240));

  // entries chain into exits across consecutive links, shifted by the dwell
  int at = 0;
  bool first = true;
  for (int id : toy.s.route_links(toy.s.bus_lines[0])) {
    const BusLinkChoice& c = l1.links.at(id);
    if (!first) {
      int want = at;
      auto dw = l1.dwell.find(toy.s.find_link(id)->from);
      if (dw != l1.dwell.end()) want = (at - 1 + (int)(dw->second / toy.s.T)) % 12 + 1;
      CHECK(c.vp.entry == want);
    }
    CHECK(c.time >= toy.s.find_link(id)->bus_min_time);
    at = c.vp.exit;
    first = false;
  }
}

TEST_CASE("aligned itineraries share platoons on the overlap") {
  Toy toy(0.2);
  const auto its = aligned_itineraries(toy.s, toy.r);
  // lines 1 and 2 overlap on links 6..10 with the same dwell stations, so a
  // six-slot rotation of line 2 rides line 1's platoons the whole way
  for (int id : {6, 7, 8, 9, 10}) CHECK(its[1].links.at(id).vp == its[0].links.at(id).vp);
  CHECK(trip_seconds(its[1]) == doctest::Approx(240));
  CHECK_NOTHROW(build_milp_l(toy.s, toy.r, its));
}

TEST_CASE("joint model layout is stable") {
  Toy toy(0.2);
  BuildInfo info;
  build_milp_o(toy.s, toy.r, &info);
  CHECK(info.vars == 6057);
  CHECK(info.binaries == 4332);
  CHECK(info.integers == 36);
  CHECK(info.rows == 22817);
  CHECK(info.warnings.empty());

  // demand beyond the admissible maximum is flagged, not rejected
  Toy over(1.2);
  BuildInfo hot;
  build_milp_o(over.s, over.r, &hot);
  CHECK(!hot.warnings.empty());
}

TEST_CASE("fixed-itinerary solve prices the shared-platoon plan") {
  Toy toy(0.2);
  const auto its = aligned_itineraries(toy.s, toy.r);

  SolverOptions opt;
  opt.node_limit = 5000;
  const MilpSolution sol = solve_milp_l(toy.s, toy.r, its, opt);
  REQUIRE(sol.status == SolveStatus::Optimal);

  const RchPlan plan = extract_lower_plan(toy.s, toy.r, its, sol, false);
  const ObjectiveBreakdown ob = evaluate_objective(toy.s, toy.r, plan, toy.s.omega_p);
  CHECK(ob.bus_cost == doctest::Approx(13200));
  CHECK(ob.car_cost == doctest::Approx(3460.0 / 3));
  CHECK(ob.combined == doctest::Approx(sol.objective + 0.9 * 13200));
  CHECK(ob.car_floor == doctest::Approx(1040));
  CHECK(ob.bus_floor == doctest::Approx(13200));

  // the relaxation is exact here: same car cost without any binaries
  MilpModel lp = build_lp_l(toy.s, toy.r, its);
  const LpSolution rel = solve_lp(lp, {});
  REQUIRE(rel.status == SolveStatus::Optimal);
  CHECK(rel.objective == doctest::Approx(sol.objective));

  // plan text round-trips exactly
  std::stringstream buf;
  write_plan(plan, buf);
  CHECK(parse_plan(buf) == plan);

  // encode/extract are inverse on the joint layout
  MilpSolution point;
  point.status = SolveStatus::Optimal;
  point.x = encode_plan(toy.s, toy.r, plan);
  CHECK(extract_plan(toy.s, toy.r, point) == plan);

  // tampering breaks the named invariant
  {
    RchPlan bad = plan;
    bad.dedicated.at(6).clear();
    CHECK_THROWS_AS(validate_plan(toy.s, toy.r, bad), SolveError);
  }
  {
    RchPlan bad = plan;
    bad.buses[0].dwell.at(3) = 20;  // below the 40 s minimum
    CHECK_THROWS_AS(validate_plan(toy.s, toy.r, bad), SolveError);
  }
  {
    RchPlan bad = plan;
    const PlatoonPair taken = bad.dedicated.at(6).front();
    bad.flows.at(0).mixed[6][taken] += 1.0;  // cars riding the bus platoon
    CHECK_THROWS_AS(validate_plan(toy.s, toy.r, bad), SolveError);
  }
  {
    RchPlan bad = plan;
    bad.flows.at(0).rate += 1.0;  // demand row no longer balances
    CHECK_THROWS_AS(validate_plan(toy.s, toy.r, bad), SolveError);
  }
}

TEST_CASE("zero demand leaves only the bus cost") {
  Toy toy(0.0);
  const auto its = pace_itineraries(toy.s, toy.r);
  SolverOptions opt;
  opt.node_limit = 2000;
  const MilpSolution sol = solve_milp_l(toy.s, toy.r, its, opt);
  REQUIRE(sol.status == SolveStatus::Optimal);
  CHECK(sol.objective == doctest::Approx(0));
  const RchPlan plan = extract_lower_plan(toy.s, toy.r, its, sol, false);
  CHECK(plan.flows.empty());
  CHECK(evaluate_objective(toy.s, toy.r, plan, 0.9).combined == doctest::Approx(0.9 * 13200));
}

TEST_CASE("car-only joint solve reaches the free-flow floor") {
  Toy toy(0.2);
  toy.s.bus_lines.clear();
  SolverOptions opt;
  opt.node_limit = 3000;
  const MilpSolution sol = solve_milp_o(toy.s, toy.r, opt);
  REQUIRE(sol.has_incumbent());
  const RchPlan plan = extract_plan(toy.s, toy.r, sol);
  CHECK(evaluate_objective(toy.s, toy.r, plan, 0.9).car_cost == doctest::Approx(1040));
}
