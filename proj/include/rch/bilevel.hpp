#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "rch/design.hpp"
#include "rch/rng.hpp"

namespace rch {

// Upper-level decision of the heuristic: when each line enters the network
// and how long it holds at each station.  Links stay at the background bus
// pace, so these two dials pin the whole itinerary.
struct UpperSolution {
  std::map<int, double> offset;                // line id -> seconds on the slot grid
  std::map<int, std::map<int, double>> dwell;  // line id -> station node -> seconds

  friend bool operator==(const UpperSolution&, const UpperSolution&) = default;
};

// Search knobs.  Step sizes left at zero fall back to the scenario's natural
// units: one slot (T) for step0 and step_gain, one long cycle (H) for
// step_max.
struct VnsParams {
  double step0 = 0;         // initial neighborhood radius, seconds
  double step_gain = 0;     // radius growth after a barren stretch
  double step_max = 0;      // radius ceiling
  double p_low = 0.3;       // early chance of a -step move per variable
  double p_high = 0.7;      // draws above it move +step
  int stagnation = 50;      // barren rounds before the radius grows
  int iterations = 2000;    // neighborhood rounds
  int batch = 1;            // neighbors priced per round, in parallel
  int64_t exact_nodes = 0;  // node cap of the closing exact solve, 0 = open
  uint64_t seed = 1;
};

// One row of the search log.  candidate is the best neighbor priced in the
// round, infinity when every neighbor was rejected.
struct VnsIterate {
  int iteration = 0;
  double candidate = 0;
  double incumbent = 0;
  double step = 0;

  friend bool operator==(const VnsIterate&, const VnsIterate&) = default;
};

// Repair result: crossings between same-destination car flows are traded
// away at unchanged cost; each crossing left in place is reported.
struct RepairOutcome {
  RchPlan plan;
  int swaps = 0;
  std::vector<std::string> skipped;
};

// Heuristic outcome: the exact lower plan at the best upper solution found.
struct BilevelResult {
  RchPlan plan;
  UpperSolution upper;
  ObjectiveBreakdown objective;
  std::vector<VnsIterate> log;
  int repairs = 0;                 // tail swaps in the closing repair sweep
  std::vector<std::string> notes;  // crossings the sweep could not resolve
};

// Itineraries induced by an upper solution: every link at pace, entries
// shifted by the line offset, dwells as chosen (the floor when unset).
std::vector<BusItinerary> realize_upper(const Scenario& s, const BackgroundRhythm& r,
                                        const UpperSolution& u);

// Collaborative start: lines sharing links are rotated onto common platoons
// where the sizes fit, dwells at their minimum.
UpperSolution initial_bus_plan(const Scenario& s, const BackgroundRhythm& r);

// One neighborhood move: each variable steps down on a draw below p_low, up
// on a draw above p_high, else stays, then clamps to its bounds.  Draws run
// per line as listed, offset first, stations in route order.
UpperSolution local_search_step(const Scenario& s, const UpperSolution& base,
                                double step, double p_low, double p_high, Rng& rng);

// Uncrosses overtaking car flows by trading platoon tails between vehicles
// bound for the same destination, which leaves the total cost unchanged.
// Crossings with distinct destinations or non-interchangeable tails stay.
RepairOutcome repair_fifo_violations(const Scenario& s, const BackgroundRhythm& r,
                                     const RchPlan& plan);

// The full heuristic: a VNS over upper solutions priced by the relaxed
// lower model, then one exact lower solve at the winner plus repair.
BilevelResult run_bilevel(const Scenario& s, const BackgroundRhythm& r,
                          const VnsParams& p = {});

// Search log as CSV: iteration, candidate, incumbent, step.
void write_iteration_log(const std::vector<VnsIterate>& log, std::ostream& out);

}  // namespace rch
