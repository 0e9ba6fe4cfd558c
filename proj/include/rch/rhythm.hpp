#pragma once

#include <iosfwd>
#include <map>

#include "rch/network.hpp"

namespace rch {

// Per-link slice of a designed rhythm.  `time` is the background pace
// tau_to - tau_from + alpha*T, always within [min_time, min_time + T).
struct RhythmLink {
  double tau_from = 0;
  double tau_to = 0;
  int alpha = 0;      // whole cycles spent on the link at background pace
  double time = 0;    // seconds at background pace

  friend bool operator==(const RhythmLink&, const RhythmLink&) = default;
};

// Network-wide background rhythm: node offsets plus per-link paces for the
// car layer and, where bus lines run, the bus layer.
struct BackgroundRhythm {
  double T = 10;
  int Q = 12;
  double s_a = 4;
  double objective = 0;  // design-model residual cost

  std::map<int, double> tau;           // node -> offset in [0, T)
  std::map<int, RhythmLink> links;     // every link
  std::map<int, RhythmLink> bus_links; // links carrying at least one line

  double H() const { return T * Q; }

  friend bool operator==(const BackgroundRhythm&, const BackgroundRhythm&) = default;
};

// Minimum-residual offset design: one offset per node, one whole-cycle count
// per link and layer, opposing movements at every conflict pair half a cycle
// apart.  Deterministic; throws SolveError when the conflict graph cannot be
// met within T.
BackgroundRhythm design_background_rhythm(const Scenario& s);

struct RealizedTime {
  double t = 0;  // seconds from entry platoon to exit platoon
  int beta = 0;  // long cycles waited
};

// Travel time of the virtual platoon entering link in platoon q and leaving
// in platoon q_hat (both 1-based, wrapping each long cycle).  beta is the
// smallest whole number of long cycles making the time reach the link pace.
RealizedTime realized_travel_time(const BackgroundRhythm& r, int link_id, int q, int q_hat);

// 1 when the two platoon trajectories on the link cross (an overtake, which
// ordered service forbids), 2 when they nest or run parallel.  Symmetric in
// the two platoons.
int fifo_conflict(const BackgroundRhythm& r, int link_id, int q_m, int q_hat_m, int q_n,
                  int q_hat_n);

// True when (q, q_hat) is one of the link's background-pace pairs.
bool background_pair(const BackgroundRhythm& r, int link_id, int q, int q_hat);

// Admissible vehicles per long cycle, after bus platoons are set aside.
struct TrafficBounds {
  std::map<int, double> link_capacity;  // per link
  std::vector<double> od_capacity;      // per demand, min over its best path
};

TrafficBounds max_admissible_traffic(const Scenario& s, const BackgroundRhythm& r);

// Text block used inside result files; parse(write(r)) == r.
void write_rhythm(const BackgroundRhythm& r, std::ostream& out);
BackgroundRhythm parse_rhythm(std::istream& in);

}  // namespace rch
