#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace rch {

enum class NodeKind : uint8_t { Origin, Destination, Station, Intersection, Virtual };
enum class Platform : uint8_t { Mainline, Side };

const char* to_string(NodeKind k);
const char* to_string(Platform p);

struct Node {
  int id = 0;
  NodeKind kind = NodeKind::Intersection;
  std::optional<Platform> platform;  // stations only

  friend bool operator==(const Node&, const Node&) = default;
};

struct Link {
  int id = 0;
  int from = 0;
  int to = 0;
  int lanes = 1;
  double car_min_time = 0;  // free-flow seconds, cars
  double bus_min_time = 0;  // free-flow seconds, buses
  bool is_virtual = false;  // zero-length entrance waiting zone
  char dir = 0;             // optional compass tag (N/E/S/W), signal phasing

  friend bool operator==(const Link&, const Link&) = default;
};

struct BusLine {
  int id = 0;
  std::vector<int> route;          // node sequence, a directed path
  std::vector<int> stations;       // dwell nodes, subset of route
  std::map<int, double> min_dwell; // station node -> seconds
  double passengers = 20;          // occupancy used to weigh bus time
  double size = 2;                 // platoon-size units taken by one bus

  friend bool operator==(const BusLine&, const BusLine&) = default;
};

struct OdDemand {
  int origin = 0;
  int destination = 0;
  double rate = 0;  // vehicles per RC cycle T
  std::vector<std::vector<int>> candidate_paths;  // link-id sequences

  friend bool operator==(const OdDemand&, const OdDemand&) = default;
};

struct ConflictPair {
  int a = 0;
  int b = 0;

  friend bool operator==(const ConflictPair&, const ConflictPair&) = default;
};

// The single input record: network, bus lines, demands, control parameters.
// Immutable after load; all pipeline stages share it by const reference.
struct Scenario {
  double T = 10;          // RC cycle, seconds
  double H = 120;         // RC-H cycle, seconds; H = Q*T
  double s_a = 4;         // platoon size, vehicles
  double omega_p = 0.9;   // bus priority weight in [0,1]
  double epsilon = 1e-3;  // strict-inequality slack, seconds
  double cross_time = 5;  // turning-link time inside expanded intersections

  std::vector<Node> nodes;
  std::vector<Link> links;
  std::vector<BusLine> bus_lines;
  std::vector<OdDemand> demands;
  std::vector<ConflictPair> conflicts;

  int Q() const { return static_cast<int>(H / T + 0.5); }

  const Node* find_node(int id) const;
  const Link* find_link(int id) const;
  const Link* find_link(int from, int to) const;
  std::vector<const Link*> links_out(int node_id) const;
  std::vector<const Link*> links_in(int node_id) const;

  // Link ids along a line's route, in travel order.
  std::vector<int> route_links(const BusLine& line) const;
  // Lines whose route traverses the link, in line-id order.
  std::vector<const BusLine*> lines_on_link(int link_id) const;

  friend bool operator==(const Scenario&, const Scenario&) = default;
};

// Throws ValidationError naming the violated invariant.
void validate_scenario(const Scenario& s);

// Text format v1 (docs/scenario-format.md).  Round trip is exact:
// parse(write(s)) == s, and write() emits canonical ordering.
Scenario parse_scenario(std::istream& in);
Scenario load_scenario(const std::string& path);
void write_scenario(const Scenario& s, std::ostream& out);
void save_scenario(const Scenario& s, const std::string& path);

// Replaces every compact intersection (single junction node) by one entry
// node per approach and one exit node per departure, fully connected by
// internal turning links, and records one conflict pair per junction.
// Junction degree above 4 approaches is rejected.
Scenario expand_intersections(const Scenario& s);

struct Path {
  std::vector<int> links;
  double cost = 0;  // summed car_min_time

  friend bool operator==(const Path&, const Path&) = default;
};

// Loop-free paths by rising free-flow car time; ties resolved by
// lexicographic link-id order.  Fewer than k when the graph runs out.
std::vector<Path> k_shortest_paths(const Scenario& s, int origin, int destination, int k);

// Fills every demand's candidate_paths with its k shortest paths.
void enumerate_candidate_paths(Scenario& s, int k = 3);

// Procedural one-way-grid benchmark scenario (compact form): 18 junctions,
// 12 stations, 4 bus lines, 6 OD pairs; expands to 101 nodes / 129 links.
Scenario make_grid_scenario();

}  // namespace rch
