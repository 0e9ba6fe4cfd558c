#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <sstream>

#include "doctest.h"
#include "rch/errors.hpp"
#include "rch/network.hpp"
#include "rch/rhythm.hpp"

using namespace rch;

namespace {

std::string data_file(const char* name) { return std::string(RCH_DATA_DIR) + "/" + name; }

// Hand-assembled one-link rhythm; alpha fixes time = tau_to - tau_from + alpha*T.
BackgroundRhythm one_link(double tau_from, double tau_to, int alpha, double T = 10, int Q = 12) {
  BackgroundRhythm r;
  r.T = T;
  r.Q = Q;
  r.tau = {{1, tau_from}, {2, tau_to}};
  RhythmLink l{tau_from, tau_to, alpha, tau_to - tau_from + alpha * T};
  r.links[7] = l;
  return r;
}

// Smallest whole number of long cycles lifting the pair time onto the pace.
int brute_beta(const BackgroundRhythm& r, const RhythmLink& l, int q, int q_hat) {
  for (int beta = 0;; ++beta) {
    double t = l.tau_to - l.tau_from + (q_hat - q) * r.T + beta * r.H();
    if (t >= l.time - 1e-9) return beta;
  }
}

// A platoon pair crosses another when entry order and exit order disagree.
int brute_crossing(const BackgroundRhythm& r, int link, int qm, int qhm, int qn, int qhn) {
  double em = r.links.at(link).tau_from + qm * r.T;
  double en = r.links.at(link).tau_from + qn * r.T;
  double xm = em + realized_travel_time(r, link, qm, qhm).t;
  double xn = en + realized_travel_time(r, link, qn, qhn).t;
  auto sgn = [](double d) { return (d > 1e-9) - (d < -1e-9); };
  return sgn(em - en) != sgn(xm - xn) ? 1 : 2;
}

Scenario crossing_scenario() {
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
  validate_scenario(s);
  return s;
}

}  // namespace

TEST_CASE("realized travel time follows the pace in closed form") {
  BackgroundRhythm flat = one_link(0, 0, 2);  // pace 20 s
  CHECK(realized_travel_time(flat, 7, 1, 3).t == 20);
  CHECK(realized_travel_time(flat, 7, 1, 3).beta == 0);
  CHECK(realized_travel_time(flat, 7, 3, 1).t == 100);  // -20 + one long cycle
  CHECK(realized_travel_time(flat, 7, 3, 1).beta == 1);

  BackgroundRhythm offset = one_link(3, 6, 2);  // pace 23 s
  CHECK(realized_travel_time(offset, 7, 2, 3).t == 133);  // 13 s short, wait a cycle
  CHECK(realized_travel_time(offset, 7, 2, 3).beta == 1);
}

TEST_CASE("the cycle count is always the smallest feasible one") {
  for (int alpha : {0, 1, 2, 3, 4}) {
    for (auto [tf, tt] : {std::pair{0.0, 0.0}, {3.0, 6.0}, {7.0, 2.0}}) {
      BackgroundRhythm r = one_link(tf, tt, alpha);
      const RhythmLink& l = r.links.at(7);
      for (int q = 1; q <= 12; ++q)
        for (int qh = 1; qh <= 12; ++qh) {
          auto [t, beta] = realized_travel_time(r, 7, q, qh);
          CHECK(beta == brute_beta(r, l, q, qh));
          CHECK(t >= l.time - 1e-9);
          double excess = t - l.time;
          CHECK(std::abs(excess / r.T - std::round(excess / r.T)) < 1e-9);
          if (beta > 0) CHECK(t - r.H() < l.time - 1e-9);
        }
    }
  }
}

TEST_CASE("overtake verdicts match the trajectory picture exactly") {
  // spot checks first: nested, parallel-shifted, and wrapped shapes
  BackgroundRhythm r1 = one_link(0, 0, 1);
  CHECK(fifo_conflict(r1, 7, 1, 5, 2, 3) == 1);
  BackgroundRhythm r2 = one_link(0, 0, 2);
  CHECK(fifo_conflict(r2, 7, 1, 4, 2, 3) == 2);
  CHECK(fifo_conflict(r2, 7, 1, 4, 2, 5) == 2);

  for (int alpha : {1, 2, 3}) {
    for (auto [tf, tt] : {std::pair{0.0, 0.0}, {3.0, 6.0}}) {
      BackgroundRhythm r = one_link(tf, tt, alpha);
      int checked = 0;
      for (int qm = 1; qm <= 12; ++qm)
        for (int qhm = 1; qhm <= 12; ++qhm)
          for (int qn = 1; qn <= 12; ++qn)
            for (int qhn = 1; qhn <= 12; ++qhn) {
              if (qm == qn && qhm == qhn) continue;
              int got = fifo_conflict(r, 7, qm, qhm, qn, qhn);
              int want = brute_crossing(r, 7, qm, qhm, qn, qhn);
              if (got != want) {
                CAPTURE(alpha);
                CAPTURE(qm);
                CAPTURE(qhm);
                CAPTURE(qn);
                CAPTURE(qhn);
                REQUIRE(got == want);
              }
              if (got != fifo_conflict(r, 7, qn, qhn, qm, qhm)) {
                REQUIRE(got == fifo_conflict(r, 7, qn, qhn, qm, qhm));
              }
              ++checked;
            }
      CHECK(checked == 12 * 12 * 12 * 12 - 144);
    }
  }
}

TEST_CASE("background pairs trace the pace diagonal") {
  BackgroundRhythm r = one_link(0, 0, 2);
  CHECK(background_pair(r, 7, 1, 3));
  CHECK(background_pair(r, 7, 3, 5));
  CHECK(background_pair(r, 7, 11, 1));  // wraps around the long cycle
  CHECK(background_pair(r, 7, 12, 2));
  CHECK(!background_pair(r, 7, 1, 4));
  CHECK(!background_pair(r, 7, 1, 2));
  for (int q = 1; q <= 12; ++q) {
    int hits = 0;
    for (int qh = 1; qh <= 12; ++qh) hits += background_pair(r, 7, q, qh);
    CHECK(hits == 1);
  }
}

TEST_CASE("corridor rhythm needs no residual delay") {
  Scenario s = load_scenario(data_file("toy.scn"));
  BackgroundRhythm r = design_background_rhythm(s);
  CHECK(r.objective == doctest::Approx(0).epsilon(1e-9));
  CHECK(r.Q == 12);
  for (const auto& [id, v] : r.tau) CHECK(v == doctest::Approx(0).epsilon(1e-9));
  for (const auto& l : s.links) {
    CHECK(r.links.at(l.id).time == doctest::Approx(l.car_min_time).epsilon(1e-9));
    CHECK(r.links.at(l.id).alpha == static_cast<int>(l.car_min_time / 10));
  }
  CHECK(r.bus_links.size() == 9);  // every street of the corridor carries a line
  for (const auto& [id, bl] : r.bus_links)
    CHECK(bl.time == doctest::Approx(s.find_link(id)->bus_min_time).epsilon(1e-9));
  CHECK(design_background_rhythm(s) == r);
}

TEST_CASE("crossing movements end up half a cycle apart") {
  Scenario e = expand_intersections(crossing_scenario());
  REQUIRE(e.conflicts.size() == 1);
  BackgroundRhythm r = design_background_rhythm(e);
  double d = std::fmod(std::abs(r.tau.at(e.conflicts[0].a) - r.tau.at(e.conflicts[0].b)), 10.0);
  CHECK(d == doctest::Approx(5).epsilon(1e-9));
  for (const auto& l : e.links) {
    double pace = r.links.at(l.id).time;
    CHECK(pace >= l.car_min_time - 1e-9);
    CHECK(pace < l.car_min_time + 10);
  }
  CHECK(r.objective >= -1e-9);
}

TEST_CASE("grid rhythm honors every conflict pair") {
  Scenario e = expand_intersections(make_grid_scenario());
  BackgroundRhythm r = design_background_rhythm(e);
  REQUIRE(e.conflicts.size() == 18);
  for (const auto& c : e.conflicts) {
    double d = std::fmod(std::abs(r.tau.at(c.a) - r.tau.at(c.b)), 10.0);
    CHECK(d == doctest::Approx(5).epsilon(1e-9));
  }
  for (const auto& l : e.links) {
    double pace = r.links.at(l.id).time;
    CHECK(pace >= l.car_min_time - 1e-9);
    CHECK(pace < l.car_min_time + 10);
    if (r.bus_links.count(l.id)) {
      double bus = r.bus_links.at(l.id).time;
      CHECK(bus >= l.bus_min_time - 1e-9);
      CHECK(bus < l.bus_min_time + 10);
    }
  }
}

TEST_CASE("admissible traffic counts platoons minus the bus share") {
  Scenario toy = load_scenario(data_file("toy.scn"));
  BackgroundRhythm rt = design_background_rhythm(toy);
  TrafficBounds bt = max_admissible_traffic(toy, rt);
  CHECK(bt.link_capacity.at(1) == 48);  // waiting zone, no bus
  for (int lid = 2; lid <= 10; ++lid) CHECK(bt.link_capacity.at(lid) == 40);
  REQUIRE(bt.od_capacity.size() == 1);
  CHECK(bt.od_capacity[0] == 40);

  Scenario g = make_grid_scenario();
  BackgroundRhythm rg = design_background_rhythm(g);
  TrafficBounds bg = max_admissible_traffic(g, rg);
  CHECK(bg.link_capacity.at(g.find_link(1, 19)->id) == 88);   // two lanes, bus
  CHECK(bg.link_capacity.at(g.find_link(36, 13)->id) == 96);  // two lanes, free
  CHECK(bg.link_capacity.at(g.find_link(31, 1)->id) == 48);   // waiting zone
}

TEST_CASE("rhythm text block round trips") {
  Scenario s = load_scenario(data_file("toy.scn"));
  BackgroundRhythm r = design_background_rhythm(s);
  std::ostringstream os;
  write_rhythm(r, os);
  std::istringstream is(os.str());
  BackgroundRhythm again = parse_rhythm(is);
  CHECK(again == r);
  std::ostringstream os2;
  write_rhythm(again, os2);
  CHECK(os2.str() == os.str());
}
