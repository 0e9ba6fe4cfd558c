#pragma once

#include <iosfwd>
#include <map>
#include <utility>
#include <vector>

#include "rch/rhythm.hpp"
#include "rch/solver.hpp"

namespace rch {

// One virtual platoon on a link: entry platoon -> exit platoon, 1-based.
struct PlatoonPair {
  int entry = 0;
  int exit = 0;

  friend auto operator<=>(const PlatoonPair&, const PlatoonPair&) = default;
};

// A bus line's committed movement on one link.
struct BusLinkChoice {
  PlatoonPair vp;
  double time = 0;  // realized seconds on the link

  friend bool operator==(const BusLinkChoice&, const BusLinkChoice&) = default;
};

// Full itinerary of one line: the dedicated platoon per route link plus the
// dwell spent at each of its stations.
struct BusItinerary {
  int line = 0;
  std::map<int, BusLinkChoice> links;  // link id -> choice
  std::map<int, double> dwell;         // station node id -> seconds

  friend bool operator==(const BusItinerary&, const BusItinerary&) = default;
};

// Car flow of one candidate path.  Rates are vehicles per cycle T; platoon
// loads are vehicles per long cycle H.
struct PathFlow {
  int demand = 0;           // index into Scenario::demands
  std::vector<int> links;   // traversed link ids, in order
  double rate = 0;          // share of the demand routed here

  // link id -> platoon loads on the shared lane / the other lanes.
  std::map<int, std::map<PlatoonPair, double>> mixed;
  std::map<int, std::map<int, double>> regular;  // entry platoon -> load

  // Marginals per entry platoon / exit platoon of the mixed loads.
  std::map<int, double> entry_loads(int link_id) const;
  std::map<int, double> exit_loads(int link_id) const;

  friend bool operator==(const PathFlow&, const PathFlow&) = default;
};

// Joint operating plan: which platoons run, which serve buses, how every
// line threads the network, and where the car traffic rides.
struct RchPlan {
  std::map<int, std::vector<PlatoonPair>> realized;   // link id -> platoons
  std::map<int, std::vector<PlatoonPair>> dedicated;  // subset held by buses
  std::vector<BusItinerary> buses;
  std::vector<PathFlow> flows;

  friend bool operator==(const RchPlan&, const RchPlan&) = default;
};

// Weighted plan cost next to its free-flow floor.
struct ObjectiveBreakdown {
  double omega = 0;          // priority weight used
  double car_cost = 0;       // vehicle-seconds per long cycle
  double bus_cost = 0;       // passenger-seconds per long cycle
  double combined = 0;       // (1-omega)*car + omega*bus
  double car_floor = 0;      // all cars at background pace
  double bus_floor = 0;      // all buses at pace with minimum dwells
  double car_gap = 0;        // (cost - floor) / floor, 0 when floor is 0
  double bus_gap = 0;
  double total_gap = 0;      // on the unweighted sums

  double table_total() const { return car_cost + bus_cost; }

  friend bool operator==(const ObjectiveBreakdown&, const ObjectiveBreakdown&) = default;
};

// Size report and non-fatal notes from a model build.
struct BuildInfo {
  int vars = 0;
  int binaries = 0;
  int integers = 0;
  int rows = 0;
  std::vector<std::string> warnings;
};

// Joint design model: realization, dedication, itineraries and assignment
// in one MILP.  Candidate paths are taken from the demands (filled via
// enumerate_candidate_paths when absent).  Demand above the admissible
// bound only warns; an unreachable route link throws ValidationError.
MilpModel build_milp_o(const Scenario& s, const BackgroundRhythm& r,
                       BuildInfo* info = nullptr);

// Lower-level exact model: itineraries fixed, realization and assignment
// free, objective the weighted car cost alone.  Throws ValidationError when
// the fixed itineraries break dedication rules.
MilpModel build_milp_l(const Scenario& s, const BackgroundRhythm& r,
                       const std::vector<BusItinerary>& buses,
                       BuildInfo* info = nullptr);

// Lower-level relaxation: platoon choice collapses to fixed availability
// (bus-held slots closed, platoons slower than the co-link bus dropped),
// ordering rows left out, loads free to split.  Continuous variables only.
MilpModel build_lp_l(const Scenario& s, const BackgroundRhythm& r,
                     const std::vector<BusItinerary>& buses,
                     BuildInfo* info = nullptr);

// Every line at background bus pace with minimum dwells, first line entering
// its first link in slot 1.  The cheapest itinerary shape and the canonical
// seed for the joint solve and the heuristic.
std::vector<BusItinerary> pace_itineraries(const Scenario& s, const BackgroundRhythm& r);

// Pace itineraries with each line rotated so it rides the platoons of
// earlier lines wherever routes overlap and the sizes fit.  Sharing frees
// slots for cars, so this seed often beats plain pace.
std::vector<BusItinerary> aligned_itineraries(const Scenario& s, const BackgroundRhythm& r);

// Decodes a solution of build_milp_o's column layout and re-validates every
// plan invariant from scratch.  Throws SolveError on a violation, which
// signals a model or solver bug rather than bad input.
RchPlan extract_plan(const Scenario& s, const BackgroundRhythm& r,
                     const MilpSolution& sol);

// Inverse of extract_plan: the plan as a point in build_milp_o's column
// space, e.g. to seed SolverOptions::warm_start.  The plan must be valid.
std::vector<double> encode_plan(const Scenario& s, const BackgroundRhythm& r,
                                const RchPlan& plan);

// Same for the lower-level layouts (relaxed = built by build_lp_l).  The
// relaxed extraction skips the invariants its model does not enforce.
RchPlan extract_lower_plan(const Scenario& s, const BackgroundRhythm& r,
                           const std::vector<BusItinerary>& buses,
                           const MilpSolution& sol, bool relaxed);

// Independent invariant check used by the extractors; throws SolveError.
// `relaxed` skips whole-platoon and ordering rules.
void validate_plan(const Scenario& s, const BackgroundRhythm& r,
                   const RchPlan& plan, bool relaxed = false);

// Recomputes plan cost from first principles (never from solver numbers).
ObjectiveBreakdown evaluate_objective(const Scenario& s, const BackgroundRhythm& r,
                                      const RchPlan& plan, double omega);

// Exact joint solve.  Ordering rows are generated lazily: solve, test the
// realized platoons pairwise, add the violated rows, repeat.  Returns the
// same optimum as solving build_milp_o whole.
MilpSolution solve_milp_o(const Scenario& s, const BackgroundRhythm& r,
                          const SolverOptions& opt = {});

// Exact lower-level solve with the same lazy ordering loop.
MilpSolution solve_milp_l(const Scenario& s, const BackgroundRhythm& r,
                          const std::vector<BusItinerary>& buses,
                          const SolverOptions& opt = {});

// Plan file (docs/plan-format.md); parse(write(p)) == p.
void write_plan(const RchPlan& p, std::ostream& out);
RchPlan parse_plan(std::istream& in);
void save_plan(const RchPlan& p, const std::string& path);
RchPlan load_plan(const std::string& path);

}  // namespace rch
