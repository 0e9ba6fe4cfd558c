#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "rch/errors.hpp"
#include "rch/network.hpp"

using namespace rch;

namespace {

std::string data_file(const char* name) { return std::string(RCH_DATA_DIR) + "/" + name; }

std::string to_text(const Scenario& s) {
  std::ostringstream os;
  write_scenario(s, os);
  return os.str();
}

Scenario from_text(const std::string& text) {
  std::istringstream is(text);
  return parse_scenario(is);
}

// Every loop-free path as a link-id sequence, by recursive walk; the
// reference ordering for the k-shortest query.
void all_paths(const Scenario& s, int at, int destination, std::vector<int>& trail,
               std::set<int>& visited, std::vector<Path>& out) {
  if (at == destination) {
    double cost = 0;
    for (int lid : trail) cost += s.find_link(lid)->car_min_time;
    out.push_back({trail, cost});
    return;
  }
  for (const Link* l : s.links_out(at)) {
    if (visited.count(l->to)) continue;
    visited.insert(l->to);
    trail.push_back(l->id);
    all_paths(s, l->to, destination, trail, visited, out);
    trail.pop_back();
    visited.erase(l->to);
  }
}

std::vector<Path> brute_paths(const Scenario& s, int origin, int destination) {
  std::vector<int> trail;
  std::set<int> visited{origin};
  std::vector<Path> out;
  all_paths(s, origin, destination, trail, visited, out);
  std::sort(out.begin(), out.end(), [](const Path& a, const Path& b) {
    if (a.cost != b.cost) return a.cost < b.cost;
    return a.links < b.links;
  });
  return out;
}

}  // namespace

TEST_CASE("corridor scenario loads with its published geometry") {
  Scenario s = load_scenario(data_file("toy.scn"));
  CHECK(s.T == 10);
  CHECK(s.H == 120);
  CHECK(s.Q() == 12);
  CHECK(s.s_a == 4);
  CHECK(s.omega_p == doctest::Approx(0.9));
  CHECK(s.nodes.size() == 11);
  CHECK(s.links.size() == 10);
  CHECK(s.bus_lines.size() == 2);
  CHECK(s.demands.size() == 1);
  CHECK(s.conflicts.empty());

  // one virtual entrance, five signals, five side platforms
  int virt = 0, stations = 0, signals = 0;
  for (const auto& n : s.nodes) {
    virt += n.kind == NodeKind::Virtual;
    stations += n.kind == NodeKind::Station;
    signals += n.kind == NodeKind::Intersection;
  }
  CHECK(virt == 1);
  CHECK(stations == 5);
  CHECK(signals == 5);
  for (const auto& n : s.nodes)
    CHECK((n.kind == NodeKind::Station) == (n.platform == Platform::Side));

  // free-flow chain: 130 s by car, and the entrance link is free
  double car = 0;
  for (const auto& l : s.links) car += l.car_min_time;
  CHECK(car == 130);
  CHECK(s.find_link(1)->is_virtual);
  CHECK(s.find_link(1)->car_min_time == 0);
  CHECK(s.find_link(1)->bus_min_time == 0);
  for (const auto& l : s.links) CHECK(l.lanes == 1);

  // demand enters at the waiting zone with the single-lane maximum rate
  CHECK(s.demands[0].origin == 1);
  CHECK(s.demands[0].destination == 11);
  CHECK(s.demands[0].rate == doctest::Approx(10.0 / 3).epsilon(1e-12));

  // long line serves five platforms over 220 s of driving; short line three over 120 s
  const BusLine& a = s.bus_lines[0];
  const BusLine& b = s.bus_lines[1];
  CHECK(a.route.front() == 2);
  CHECK(a.route.back() == 11);
  CHECK(b.route.front() == 6);
  double drive_a = 0, drive_b = 0;
  for (int lid : s.route_links(a)) drive_a += s.find_link(lid)->bus_min_time;
  for (int lid : s.route_links(b)) drive_b += s.find_link(lid)->bus_min_time;
  CHECK(drive_a == 220);
  CHECK(drive_b == 120);
  CHECK(a.stations == std::vector<int>{3, 5, 7, 8, 10});
  CHECK(b.stations == std::vector<int>{7, 8, 10});
  for (const auto& [v, d] : a.min_dwell) CHECK(d == 40);
  CHECK(a.min_dwell.size() == 5);
  CHECK(b.min_dwell.size() == 3);
}

TEST_CASE("scenario text round trips exactly") {
  Scenario s = load_scenario(data_file("toy.scn"));
  std::string text = to_text(s);
  Scenario again = from_text(text);
  CHECK(again == s);
  CHECK(to_text(again) == text);  // canonical form is a fixed point
}

TEST_CASE("route and link cross references") {
  Scenario s = load_scenario(data_file("toy.scn"));
  CHECK(s.route_links(s.bus_lines[0]) == std::vector<int>{2, 3, 4, 5, 6, 7, 8, 9, 10});
  CHECK(s.route_links(s.bus_lines[1]) == std::vector<int>{6, 7, 8, 9, 10});
  CHECK(s.lines_on_link(1).empty());
  auto on2 = s.lines_on_link(2);
  REQUIRE(on2.size() == 1);
  CHECK(on2[0]->id == 1);
  auto on6 = s.lines_on_link(6);
  REQUIRE(on6.size() == 2);
  CHECK(on6[0]->id == 1);
  CHECK(on6[1]->id == 2);
  CHECK(s.find_link(2, 3)->id == 2);
  CHECK(s.find_link(3, 2) == nullptr);
}

TEST_CASE("validation rejects broken scenarios") {
  Scenario good = load_scenario(data_file("toy.scn"));

  SUBCASE("duplicate node id") {
    Scenario s = good;
    s.nodes.push_back({2, NodeKind::Intersection, {}});
    CHECK_THROWS_AS(validate_scenario(s), ValidationError);
  }
  SUBCASE("platform on a non-station") {
    Scenario s = good;
    s.nodes[1].platform = Platform::Side;
    CHECK_THROWS_AS(validate_scenario(s), ValidationError);
  }
  SUBCASE("station without platform") {
    Scenario s = good;
    s.nodes[2].platform.reset();
    CHECK_THROWS_AS(validate_scenario(s), ValidationError);
  }
  SUBCASE("bus slower bound below car bound") {
    Scenario s = good;
    s.links[3].bus_min_time = 5;
    CHECK_THROWS_AS(validate_scenario(s), ValidationError);
  }
  SUBCASE("dangling link endpoint") {
    Scenario s = good;
    s.links[3].to = 99;
    CHECK_THROWS_AS(validate_scenario(s), ValidationError);
  }
  SUBCASE("virtual link with travel time") {
    Scenario s = good;
    s.links[0].car_min_time = 1;
    s.links[0].bus_min_time = 1;
    CHECK_THROWS_AS(validate_scenario(s), ValidationError);
  }
  SUBCASE("virtual link with extra lanes") {
    Scenario s = good;
    s.links[0].lanes = 2;
    CHECK_THROWS_AS(validate_scenario(s), ValidationError);
  }
  SUBCASE("route with a missing hop") {
    Scenario s = good;
    s.bus_lines[0].route = {2, 4, 5};
    CHECK_THROWS_AS(validate_scenario(s), ValidationError);
  }
  SUBCASE("dwell node off the route") {
    Scenario s = good;
    s.bus_lines[1].stations.push_back(3);
    s.bus_lines[1].min_dwell[3] = 40;
    CHECK_THROWS_AS(validate_scenario(s), ValidationError);
  }
  SUBCASE("dwell at a route endpoint") {
    Scenario s = good;
    s.bus_lines[0].route = {3, 4, 5, 6, 7, 8, 9, 10, 11};
    CHECK_THROWS_AS(validate_scenario(s), ValidationError);
  }
  SUBCASE("dwell at a non-station node") {
    Scenario s = good;
    s.bus_lines[0].stations.push_back(4);
    s.bus_lines[0].min_dwell[4] = 40;
    CHECK_THROWS_AS(validate_scenario(s), ValidationError);
  }
  SUBCASE("missing dwell time") {
    Scenario s = good;
    s.bus_lines[0].min_dwell.erase(5);
    CHECK_THROWS_AS(validate_scenario(s), ValidationError);
  }
  SUBCASE("bus bigger than a platoon") {
    Scenario s = good;
    s.bus_lines[0].size = 5;
    CHECK_THROWS_AS(validate_scenario(s), ValidationError);
  }
  SUBCASE("horizon not a multiple of the cycle") {
    Scenario s = good;
    s.H = 125;
    CHECK_THROWS_AS(validate_scenario(s), ValidationError);
  }
  SUBCASE("weight outside the unit interval") {
    Scenario s = good;
    s.omega_p = 1.5;
    CHECK_THROWS_AS(validate_scenario(s), ValidationError);
  }
  SUBCASE("demand with equal endpoints") {
    Scenario s = good;
    s.demands[0].destination = 1;
    CHECK_THROWS_AS(validate_scenario(s), ValidationError);
  }
  SUBCASE("candidate path that misses its destination") {
    Scenario s = good;
    s.demands[0].candidate_paths = {{1, 2, 3}};
    CHECK_THROWS_AS(validate_scenario(s), ValidationError);
  }
  SUBCASE("candidate path that is disconnected") {
    Scenario s = good;
    s.demands[0].candidate_paths = {{1, 3, 4}};
    CHECK_THROWS_AS(validate_scenario(s), ValidationError);
  }
  SUBCASE("the untouched scenario stays valid") { CHECK_NOTHROW(validate_scenario(good)); }
}

TEST_CASE("parser reports malformed input") {
  auto bad = [](const std::string& text) {
    std::istringstream is(text);
    CHECK_THROWS_AS(parse_scenario(is), ParseError);
  };
  bad("");
  bad("version 2\n");
  bad("version 1\n[nope]\n");
  bad("version 1\nstray\n");
  bad("version 1\n[params]\nT ten\n");
  bad("version 1\n[params]\nbogus 1\n");
  bad("version 1\n[params]\nT 10\nH 120\n[nodes]\n1 widget\n");
  bad("version 1\n[params]\nT 10\nH 120\n[links]\n1 1 2 1 0\n");
  bad("version 1\n[params]\nT 10\nH 120\n[bus_lines]\n1 route 2,3\n");

  // fractions are numbers too
  std::istringstream ok(
      "version 1\n[params]\nT 10\nH 120\n[nodes]\n1 origin\n2 destination\n"
      "[links]\n1 1 2 1 5 5\n[demands]\n1 2 5/8\n");
  Scenario s = parse_scenario(ok);
  CHECK(s.demands[0].rate == doctest::Approx(0.625).epsilon(1e-15));
  CHECK(s.cross_time == 5);  // defaults to half the cycle
}

namespace {

// Four approaches around one junction; the smallest expandable case.
Scenario cross_scenario() {
  Scenario s;
  s.nodes = {{1, NodeKind::Origin, {}},
             {2, NodeKind::Origin, {}},
             {3, NodeKind::Destination, {}},
             {4, NodeKind::Destination, {}},
             {5, NodeKind::Intersection, {}}};
  s.links = {{1, 1, 5, 2, 20, 30, false, 'E'},
             {2, 2, 5, 2, 20, 30, false, 'N'},
             {3, 5, 3, 2, 20, 30, false, 'E'},
             {4, 5, 4, 2, 20, 30, false, 'N'}};
  BusLine b;
  b.id = 1;
  b.route = {1, 5, 3};
  s.bus_lines = {b};
  s.demands = {{1, 3, 1, {}}};
  validate_scenario(s);
  return s;
}

}  // namespace

TEST_CASE("expansion splits a crossing into corner nodes and turning links") {
  Scenario s = cross_scenario();
  Scenario e = expand_intersections(s);

  CHECK(e.nodes.size() == 8);  // centre replaced by four corners
  CHECK(e.links.size() == 8);  // four turning links added
  CHECK(e.find_node(5) == nullptr);

  // approach links keep their identity but end at entry corners 6,7;
  // departures start at exit corners 8,9
  CHECK(e.find_link(1)->to == 6);
  CHECK(e.find_link(2)->to == 7);
  CHECK(e.find_link(3)->from == 8);
  CHECK(e.find_link(4)->from == 9);
  CHECK(e.find_link(1)->car_min_time == 20);  // street geometry untouched

  // all four turning movements, deterministic ids, box-crossing time
  struct Turn { int id, from, to; };
  for (auto [id, from, to] : {Turn{5, 6, 8}, Turn{6, 6, 9}, Turn{7, 7, 8}, Turn{8, 7, 9}}) {
    const Link* l = e.find_link(id);
    REQUIRE(l != nullptr);
    CHECK(l->from == from);
    CHECK(l->to == to);
    CHECK(l->car_min_time == s.cross_time);
    CHECK(l->bus_min_time == s.cross_time);
    CHECK(l->lanes == 2);
  }

  // the two entry corners hold the half-cycle offset pair
  REQUIRE(e.conflicts.size() == 1);
  CHECK(e.conflicts[0].a == 6);
  CHECK(e.conflicts[0].b == 7);

  // the route now passes entry then exit corner
  CHECK(e.bus_lines[0].route == std::vector<int>{1, 6, 8, 3});
  CHECK_NOTHROW(validate_scenario(e));

  // repeatable
  Scenario e2 = expand_intersections(cross_scenario());
  CHECK(e2 == e);
}

TEST_CASE("expansion leaves pass-through signals alone") {
  Scenario s = load_scenario(data_file("toy.scn"));
  Scenario e = expand_intersections(s);
  CHECK(e == s);  // a corridor has no crossing streets
}

TEST_CASE("expansion rejects what it cannot model") {
  SUBCASE("five approaches") {
    Scenario s = cross_scenario();
    s.nodes.push_back({6, NodeKind::Origin, {}});
    s.links.push_back({5, 6, 5, 2, 20, 30, false, 0});
    validate_scenario(s);
    CHECK_THROWS_AS(expand_intersections(s), ValidationError);
  }
  SUBCASE("demand anchored on the junction itself") {
    Scenario s = cross_scenario();
    s.demands.push_back({2, 5, 1, {}});
    validate_scenario(s);
    CHECK_THROWS_AS(expand_intersections(s), ValidationError);
  }
}

TEST_CASE("equal-cost paths come out in link order") {
  Scenario s;
  s.nodes = {{1, NodeKind::Origin, {}},
             {2, NodeKind::Intersection, {}},
             {3, NodeKind::Intersection, {}},
             {4, NodeKind::Destination, {}}};
  s.links = {{1, 1, 2, 1, 10, 10, false, 0},
             {2, 1, 3, 1, 10, 10, false, 0},
             {3, 2, 4, 1, 10, 10, false, 0},
             {4, 3, 4, 1, 10, 10, false, 0},
             {5, 2, 3, 1, 5, 5, false, 0}};
  validate_scenario(s);

  auto paths = k_shortest_paths(s, 1, 4, 10);
  REQUIRE(paths.size() == 3);
  CHECK(paths[0].links == std::vector<int>{1, 3});
  CHECK(paths[0].cost == 20);
  CHECK(paths[1].links == std::vector<int>{2, 4});
  CHECK(paths[1].cost == 20);
  CHECK(paths[2].links == std::vector<int>{1, 5, 4});
  CHECK(paths[2].cost == 25);
  CHECK(paths == brute_paths(s, 1, 4));

  CHECK(k_shortest_paths(s, 1, 4, 0).empty());
  CHECK(k_shortest_paths(s, 1, 4, 2).size() == 2);
  CHECK_THROWS_AS(k_shortest_paths(s, 4, 1, 1), ValidationError);  // one-way
}

TEST_CASE("grid benchmark has the advertised shape") {
  Scenario g = make_grid_scenario();
  CHECK(g.nodes.size() == 47);
  CHECK(g.links.size() == 57);
  CHECK(g.bus_lines.size() == 4);
  CHECK(g.demands.size() == 6);
  CHECK(g.conflicts.empty());

  int stations = 0, virtuals = 0, crossings = 0;
  for (const auto& n : g.nodes) {
    stations += n.kind == NodeKind::Station;
    virtuals += n.kind == NodeKind::Virtual;
    if (n.kind == NodeKind::Intersection)
      crossings += g.links_in(n.id).size() >= 2 && g.links_out(n.id).size() >= 2;
  }
  CHECK(stations == 12);
  CHECK(virtuals == 5);
  CHECK(crossings == 18);

  // every crossing is two in, two out, so the whole grid expands cleanly
  for (const auto& n : g.nodes) {
    if (n.kind != NodeKind::Intersection) continue;
    size_t fi = g.links_in(n.id).size(), fo = g.links_out(n.id).size();
    CHECK(fi + fo <= 4);
    if (fi >= 2 && fo >= 2) {
      CHECK(fi == 2);
      CHECK(fo == 2);
    }
  }

  Scenario e = expand_intersections(g);
  CHECK(e.nodes.size() == 101);
  CHECK(e.links.size() == 129);
  CHECK(e.conflicts.size() == 18);
  CHECK_NOTHROW(validate_scenario(e));
  CHECK(expand_intersections(make_grid_scenario()) == e);

  // demand stays routable after expansion, along loop-free paths
  enumerate_candidate_paths(e, 3);
  for (const auto& d : e.demands) {
    CHECK(!d.candidate_paths.empty());
    CHECK(d.candidate_paths.size() <= 3);
  }
  CHECK_NOTHROW(validate_scenario(e));

  // bus routes survive expansion; dwell stations still interior
  for (const auto& line : e.bus_lines) CHECK_NOTHROW(e.route_links(line));

  // text round trip of both forms
  CHECK(from_text(to_text(g)) == g);
  CHECK(from_text(to_text(e)) == e);
}

TEST_CASE("k shortest agrees with exhaustive enumeration on the grid") {
  Scenario g = make_grid_scenario();
  for (const auto& d : g.demands) {
    auto brute = brute_paths(g, d.origin, d.destination);
    REQUIRE(!brute.empty());
    int k = std::min<int>(4, brute.size());
    auto fast = k_shortest_paths(g, d.origin, d.destination, k);
    REQUIRE(static_cast<int>(fast.size()) == k);
    for (int i = 0; i < k; ++i) {
      CHECK(fast[i].links == brute[i].links);
      CHECK(fast[i].cost == doctest::Approx(brute[i].cost).epsilon(1e-12));
    }
  }
}
