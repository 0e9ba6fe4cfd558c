#include "rch/network.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <string>

#include "rch/errors.hpp"
#include "text_util.hpp"

namespace rch {

using text::Cursor;
using text::num;
using text::parse_int;
using text::parse_int_list;
using text::parse_num;
using text::split_ws;

const char* to_string(NodeKind k) {
  switch (k) {
    case NodeKind::Origin: return "origin";
    case NodeKind::Destination: return "destination";
    case NodeKind::Station: return "station";
    case NodeKind::Intersection: return "intersection";
    case NodeKind::Virtual: return "virtual";
  }
  return "?";
}

const char* to_string(Platform p) {
  return p == Platform::Mainline ? "mainline" : "side";
}

const Node* Scenario::find_node(int id) const {
  for (const auto& n : nodes)
    if (n.id == id) return &n;
  return nullptr;
}

const Link* Scenario::find_link(int id) const {
  for (const auto& l : links)
    if (l.id == id) return &l;
  return nullptr;
}

const Link* Scenario::find_link(int from, int to) const {
  for (const auto& l : links)
    if (l.from == from && l.to == to) return &l;
  return nullptr;
}

std::vector<const Link*> Scenario::links_out(int node_id) const {
  std::vector<const Link*> out;
  for (const auto& l : links)
    if (l.from == node_id) out.push_back(&l);
  return out;
}

std::vector<const Link*> Scenario::links_in(int node_id) const {
  std::vector<const Link*> in;
  for (const auto& l : links)
    if (l.to == node_id) in.push_back(&l);
  return in;
}

std::vector<int> Scenario::route_links(const BusLine& line) const {
  std::vector<int> ids;
  for (size_t i = 0; i + 1 < line.route.size(); ++i) {
    const Link* l = find_link(line.route[i], line.route[i + 1]);
    if (!l)
      throw ValidationError("bus line " + std::to_string(line.id) + ": no link " +
                            std::to_string(line.route[i]) + " -> " +
                            std::to_string(line.route[i + 1]));
    ids.push_back(l->id);
  }
  return ids;
}

std::vector<const BusLine*> Scenario::lines_on_link(int link_id) const {
  std::vector<const BusLine*> out;
  for (const auto& line : bus_lines) {
    auto ids = route_links(line);
    if (std::find(ids.begin(), ids.end(), link_id) != ids.end()) out.push_back(&line);
  }
  return out;
}

namespace {

[[noreturn]] void fail(const std::string& what) { throw ValidationError(what); }

}  // namespace

void validate_scenario(const Scenario& s) {
  if (!(s.T > 0)) fail("T must be positive");
  if (!(s.H > 0)) fail("H must be positive");
  double q = s.H / s.T;
  if (std::abs(q - std::round(q)) > 1e-9 || std::round(q) < 1)
    fail("H must be a positive integer multiple of T");
  if (!(s.s_a >= 1)) fail("s_a must be at least 1");
  if (s.omega_p < 0 || s.omega_p > 1) fail("omega_p must lie in [0,1]");
  if (!(s.epsilon > 0) || s.epsilon >= s.T) fail("epsilon must lie in (0,T)");
  if (!(s.cross_time > 0)) fail("cross_time must be positive");

  std::set<int> node_ids;
  for (const auto& n : s.nodes) {
    if (n.id <= 0) fail("node ids must be positive");
    if (!node_ids.insert(n.id).second) fail("duplicate node id " + std::to_string(n.id));
    bool station = n.kind == NodeKind::Station;
    if (station != n.platform.has_value())
      fail("node " + std::to_string(n.id) + ": platform must be set exactly for stations");
  }

  std::set<int> link_ids;
  std::set<std::pair<int, int>> arcs;
  for (const auto& l : s.links) {
    std::string tag = "link " + std::to_string(l.id);
    if (l.id <= 0) fail("link ids must be positive");
    if (!link_ids.insert(l.id).second) fail("duplicate link id " + std::to_string(l.id));
    if (!node_ids.count(l.from) || !node_ids.count(l.to)) fail(tag + ": unknown endpoint");
    if (l.from == l.to) fail(tag + ": self loop");
    if (!arcs.insert({l.from, l.to}).second) fail(tag + ": parallel arc");
    if (l.lanes < 1) fail(tag + ": lanes must be at least 1");
    if (l.car_min_time < 0) fail(tag + ": negative car time");
    if (l.bus_min_time < l.car_min_time) fail(tag + ": bus time below car time");
    if (l.is_virtual) {
      if (l.car_min_time != 0 || l.bus_min_time != 0) fail(tag + ": virtual link must take zero time");
      if (l.lanes != 1) fail(tag + ": virtual link must have one lane");
    }
    if (l.dir && !std::strchr("NESW", l.dir)) fail(tag + ": dir must be one of N,E,S,W");
  }

  std::set<int> line_ids;
  for (const auto& line : s.bus_lines) {
    std::string tag = "bus line " + std::to_string(line.id);
    if (line.id <= 0) fail(tag + ": ids must be positive");
    if (!line_ids.insert(line.id).second) fail("duplicate bus line id " + std::to_string(line.id));
    if (line.route.size() < 2) fail(tag + ": route needs at least two nodes");
    std::set<int> seen;
    for (int v : line.route) {
      if (!node_ids.count(v)) fail(tag + ": unknown route node " + std::to_string(v));
      if (!seen.insert(v).second) fail(tag + ": route revisits node " + std::to_string(v));
    }
    s.route_links(line);  // throws if any hop is missing
    for (int v : line.stations) {
      auto it = std::find(line.route.begin(), line.route.end(), v);
      if (it == line.route.end()) fail(tag + ": station " + std::to_string(v) + " off route");
      if (it == line.route.begin() || it + 1 == line.route.end())
        fail(tag + ": station " + std::to_string(v) + " must be interior to the route");
      if (s.find_node(v)->kind != NodeKind::Station)
        fail(tag + ": dwell node " + std::to_string(v) + " is not a station");
      if (!line.min_dwell.count(v)) fail(tag + ": no dwell time for station " + std::to_string(v));
    }
    for (const auto& [v, d] : line.min_dwell) {
      if (std::find(line.stations.begin(), line.stations.end(), v) == line.stations.end())
        fail(tag + ": dwell entry for non-station node " + std::to_string(v));
      if (d < 0) fail(tag + ": negative dwell");
      if (d > s.H - s.epsilon) fail(tag + ": dwell exceeds the long cycle");
    }
    if (!(line.size > 0)) fail(tag + ": size must be positive");
    if (line.size > s.s_a) fail(tag + ": size exceeds platoon size");
    if (line.passengers < 0) fail(tag + ": negative passengers");
  }

  std::set<std::pair<int, int>> ods;
  for (const auto& d : s.demands) {
    std::string tag = "demand " + std::to_string(d.origin) + "->" + std::to_string(d.destination);
    if (!node_ids.count(d.origin) || !node_ids.count(d.destination)) fail(tag + ": unknown endpoint");
    if (d.origin == d.destination) fail(tag + ": origin equals destination");
    if (!ods.insert({d.origin, d.destination}).second) fail(tag + ": duplicate pair");
    if (d.rate < 0) fail(tag + ": negative rate");
    for (const auto& p : d.candidate_paths) {
      if (p.empty()) fail(tag + ": empty candidate path");
      int at = d.origin;
      std::set<int> visited{at};
      for (int lid : p) {
        const Link* l = s.find_link(lid);
        if (!l) fail(tag + ": unknown link " + std::to_string(lid) + " in path");
        if (l->from != at) fail(tag + ": disconnected candidate path");
        at = l->to;
        if (!visited.insert(at).second) fail(tag + ": candidate path revisits a node");
      }
      if (at != d.destination) fail(tag + ": candidate path misses destination");
    }
  }

  for (const auto& c : s.conflicts) {
    if (!node_ids.count(c.a) || !node_ids.count(c.b)) fail("conflict pair names unknown node");
    if (c.a == c.b) fail("conflict pair repeats a node");
  }
}

// ---------------------------------------------------------------------------
// text format

namespace {

NodeKind parse_kind(const Cursor& c, const std::string& tok) {
  if (tok == "origin") return NodeKind::Origin;
  if (tok == "destination") return NodeKind::Destination;
  if (tok == "station") return NodeKind::Station;
  if (tok == "intersection") return NodeKind::Intersection;
  if (tok == "virtual") return NodeKind::Virtual;
  c.die("unknown node kind '" + tok + "'");
}

Platform parse_platform(const Cursor& c, const std::string& tok) {
  if (tok == "mainline") return Platform::Mainline;
  if (tok == "side") return Platform::Side;
  c.die("unknown platform '" + tok + "'");
}

}  // namespace

Scenario parse_scenario(std::istream& in) {
  Cursor c{in};
  std::string line;
  if (!c.next(line)) c.die("empty input");
  {
    auto toks = split_ws(line);
    if (toks.size() != 2 || toks[0] != "version") c.die("expected 'version 1'");
    if (toks[1] != "1") c.die("unsupported version '" + toks[1] + "'");
  }

  Scenario s;
  s.cross_time = 0;  // defaulted to T/2 after [params] unless given
  bool cross_given = false;
  enum class Sec { None, Params, Nodes, Links, Lines, Demands, Conflicts };
  Sec sec = Sec::None;

  while (c.next(line)) {
    if (line.front() == '[') {
      if (line == "[params]") sec = Sec::Params;
      else if (line == "[nodes]") sec = Sec::Nodes;
      else if (line == "[links]") sec = Sec::Links;
      else if (line == "[bus_lines]") sec = Sec::Lines;
      else if (line == "[demands]") sec = Sec::Demands;
      else if (line == "[conflicts]") sec = Sec::Conflicts;
      else c.die("unknown section " + line);
      continue;
    }
    auto toks = split_ws(line);
    switch (sec) {
      case Sec::None:
        c.die("content before the first section");
      case Sec::Params: {
        if (toks.size() != 2) c.die("params take 'key value'");
        double v = parse_num(c, toks[1]);
        if (toks[0] == "T") s.T = v;
        else if (toks[0] == "H") s.H = v;
        else if (toks[0] == "s_a") s.s_a = v;
        else if (toks[0] == "omega_p") s.omega_p = v;
        else if (toks[0] == "epsilon") s.epsilon = v;
        else if (toks[0] == "cross_time") { s.cross_time = v; cross_given = true; }
        else c.die("unknown parameter '" + toks[0] + "'");
        break;
      }
      case Sec::Nodes: {
        if (toks.size() < 2 || toks.size() > 3) c.die("nodes take 'id kind [platform]'");
        Node n;
        n.id = parse_int(c, toks[0]);
        n.kind = parse_kind(c, toks[1]);
        if (toks.size() == 3) n.platform = parse_platform(c, toks[2]);
        s.nodes.push_back(n);
        break;
      }
      case Sec::Links: {
        if (toks.size() < 6) c.die("links take 'id from to lanes car_time bus_time [flags]'");
        Link l;
        l.id = parse_int(c, toks[0]);
        l.from = parse_int(c, toks[1]);
        l.to = parse_int(c, toks[2]);
        l.lanes = parse_int(c, toks[3]);
        l.car_min_time = parse_num(c, toks[4]);
        l.bus_min_time = parse_num(c, toks[5]);
        for (size_t i = 6; i < toks.size(); ++i) {
          if (toks[i] == "virtual") l.is_virtual = true;
          else if (toks[i].rfind("dir=", 0) == 0 && toks[i].size() == 5) l.dir = toks[i][4];
          else c.die("unknown link flag '" + toks[i] + "'");
        }
        s.links.push_back(l);
        break;
      }
      case Sec::Lines: {
        if (toks.empty()) c.die("bus line needs an id");
        BusLine b;
        b.id = parse_int(c, toks[0]);
        double dwell_all = -1;
        std::map<int, double> dwell_at;
        for (size_t i = 1; i < toks.size(); ++i) {
          auto eq = toks[i].find('=');
          if (eq == std::string::npos) c.die("bus line fields are key=value, got '" + toks[i] + "'");
          std::string key = toks[i].substr(0, eq), val = toks[i].substr(eq + 1);
          if (key == "route") b.route = parse_int_list(c, val);
          else if (key == "stations") b.stations = parse_int_list(c, val);
          else if (key == "size") b.size = parse_num(c, val);
          else if (key == "passengers") b.passengers = parse_num(c, val);
          else if (key == "dwell") dwell_all = parse_num(c, val);
          else if (key.rfind("dwell@", 0) == 0) dwell_at[parse_int(c, key.substr(6))] = parse_num(c, val);
          else c.die("unknown bus line field '" + key + "'");
        }
        for (int v : b.stations)
          if (dwell_all >= 0) b.min_dwell[v] = dwell_all;
        for (const auto& [v, d] : dwell_at) b.min_dwell[v] = d;
        s.bus_lines.push_back(b);
        break;
      }
      case Sec::Demands: {
        if (toks.size() < 3 || toks.size() > 4)
          c.die("demands take 'origin destination rate [paths=...]'");
        OdDemand d;
        d.origin = parse_int(c, toks[0]);
        d.destination = parse_int(c, toks[1]);
        d.rate = parse_num(c, toks[2]);
        if (toks.size() == 4) {
          if (toks[3].rfind("paths=", 0) != 0) c.die("unknown demand field '" + toks[3] + "'");
          std::string lists = toks[3].substr(6);
          size_t pos = 0;
          while (pos < lists.size()) {
            size_t semi = lists.find(';', pos);
            if (semi == std::string::npos) semi = lists.size();
            d.candidate_paths.push_back(parse_int_list(c, lists.substr(pos, semi - pos)));
            pos = semi + 1;
          }
        }
        s.demands.push_back(d);
        break;
      }
      case Sec::Conflicts: {
        if (toks.size() != 2) c.die("conflicts take 'a b'");
        s.conflicts.push_back({parse_int(c, toks[0]), parse_int(c, toks[1])});
        break;
      }
    }
  }

  if (!cross_given) s.cross_time = s.T / 2;
  validate_scenario(s);
  return s;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  try {
    return parse_scenario(in);
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

void write_scenario(const Scenario& s, std::ostream& out) {
  out << "version 1\n\n[params]\n";
  out << "T " << num(s.T) << "\n";
  out << "H " << num(s.H) << "\n";
  out << "s_a " << num(s.s_a) << "\n";
  out << "omega_p " << num(s.omega_p) << "\n";
  out << "epsilon " << num(s.epsilon) << "\n";
  out << "cross_time " << num(s.cross_time) << "\n";

  auto nodes = s.nodes;
  std::sort(nodes.begin(), nodes.end(), [](auto& a, auto& b) { return a.id < b.id; });
  out << "\n[nodes]\n";
  for (const auto& n : nodes) {
    out << n.id << " " << to_string(n.kind);
    if (n.platform) out << " " << to_string(*n.platform);
    out << "\n";
  }

  auto links = s.links;
  std::sort(links.begin(), links.end(), [](auto& a, auto& b) { return a.id < b.id; });
  out << "\n[links]\n";
  for (const auto& l : links) {
    out << l.id << " " << l.from << " " << l.to << " " << l.lanes << " "
        << num(l.car_min_time) << " " << num(l.bus_min_time);
    if (l.is_virtual) out << " virtual";
    if (l.dir) out << " dir=" << l.dir;
    out << "\n";
  }

  auto lines = s.bus_lines;
  std::sort(lines.begin(), lines.end(), [](auto& a, auto& b) { return a.id < b.id; });
  out << "\n[bus_lines]\n";
  for (const auto& b : lines) {
    out << b.id << " size=" << num(b.size) << " passengers=" << num(b.passengers);
    bool uniform = true;
    double d0 = b.min_dwell.empty() ? 0 : b.min_dwell.begin()->second;
    for (const auto& [v, d] : b.min_dwell) uniform = uniform && d == d0;
    if (!b.min_dwell.empty() && uniform) out << " dwell=" << num(d0);
    else
      for (const auto& [v, d] : b.min_dwell) out << " dwell@" << v << "=" << num(d);
    out << " route=";
    for (size_t i = 0; i < b.route.size(); ++i) out << (i ? "," : "") << b.route[i];
    if (!b.stations.empty()) {
      out << " stations=";
      for (size_t i = 0; i < b.stations.size(); ++i) out << (i ? "," : "") << b.stations[i];
    }
    out << "\n";
  }

  auto demands = s.demands;
  std::sort(demands.begin(), demands.end(), [](auto& a, auto& b) {
    return std::pair(a.origin, a.destination) < std::pair(b.origin, b.destination);
  });
  out << "\n[demands]\n";
  for (const auto& d : demands) {
    out << d.origin << " " << d.destination << " " << num(d.rate);
    if (!d.candidate_paths.empty()) {
      out << " paths=";
      for (size_t p = 0; p < d.candidate_paths.size(); ++p) {
        if (p) out << ";";
        for (size_t i = 0; i < d.candidate_paths[p].size(); ++i)
          out << (i ? "," : "") << d.candidate_paths[p][i];
      }
    }
    out << "\n";
  }

  auto conflicts = s.conflicts;
  for (auto& cp : conflicts)
    if (cp.a > cp.b) std::swap(cp.a, cp.b);
  std::sort(conflicts.begin(), conflicts.end(),
            [](auto& a, auto& b) { return std::pair(a.a, a.b) < std::pair(b.a, b.b); });
  out << "\n[conflicts]\n";
  for (const auto& cp : conflicts) out << cp.a << " " << cp.b << "\n";
}

void save_scenario(const Scenario& s, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  write_scenario(s, out);
  if (!out) throw IoError("write failed for " + path);
}

// ---------------------------------------------------------------------------
// intersection expansion

Scenario expand_intersections(const Scenario& s) {
  validate_scenario(s);
  Scenario out = s;

  std::vector<int> junctions;
  for (const auto& n : s.nodes) {
    if (n.kind != NodeKind::Intersection) continue;
    size_t fan_in = s.links_in(n.id).size(), fan_out = s.links_out(n.id).size();
    if (fan_in + fan_out > 4)
      fail("junction " + std::to_string(n.id) + " has more than 4 approaches");
    if (fan_in >= 2 && fan_out >= 2) junctions.push_back(n.id);
  }
  std::sort(junctions.begin(), junctions.end());

  int next_node = 0, next_link = 0;
  for (const auto& n : out.nodes) next_node = std::max(next_node, n.id);
  for (const auto& l : out.links) next_link = std::max(next_link, l.id);

  for (int v : junctions) {
    for (const auto& d : out.demands)
      if (d.origin == v || d.destination == v)
        fail("demand endpoint sits on expanded junction " + std::to_string(v));

    std::vector<int> ins, outs;
    for (const auto& l : out.links) {
      if (l.to == v) ins.push_back(l.id);
      if (l.from == v) outs.push_back(l.id);
    }
    std::sort(ins.begin(), ins.end());
    std::sort(outs.begin(), outs.end());

    std::map<int, int> entry, exit;  // approach link id -> corner node id
    for (int lid : ins) entry[lid] = ++next_node;
    for (int lid : outs) exit[lid] = ++next_node;

    // Corner nodes, then rewrite routes while (prev, v, next) hops still resolve.
    for (auto& [lid, nid] : entry) out.nodes.push_back({nid, NodeKind::Intersection, {}});
    for (auto& [lid, nid] : exit) out.nodes.push_back({nid, NodeKind::Intersection, {}});

    for (auto& line : out.bus_lines) {
      auto it = std::find(line.route.begin(), line.route.end(), v);
      if (it == line.route.end()) continue;
      size_t pos = it - line.route.begin();
      std::vector<int> repl;
      if (pos > 0) repl.push_back(entry.at(out.find_link(line.route[pos - 1], v)->id));
      if (pos + 1 < line.route.size()) repl.push_back(exit.at(out.find_link(v, line.route[pos + 1])->id));
      line.route.erase(line.route.begin() + pos);
      line.route.insert(line.route.begin() + pos, repl.begin(), repl.end());
    }

    for (auto& l : out.links) {
      if (l.to == v) l.to = entry.at(l.id);
      if (l.from == v) l.from = exit.at(l.id);
    }
    for (int in_id : ins)
      for (int out_id : outs) {
        Link t;
        t.id = ++next_link;
        t.from = entry.at(in_id);
        t.to = exit.at(out_id);
        t.lanes = out.find_link(in_id)->lanes;
        t.car_min_time = t.bus_min_time = s.cross_time;
        out.links.push_back(t);
      }

    if (ins.size() == 2) {
      int a = entry.at(ins[0]), b = entry.at(ins[1]);
      out.conflicts.push_back({std::min(a, b), std::max(a, b)});
    }

    out.nodes.erase(std::remove_if(out.nodes.begin(), out.nodes.end(),
                                   [v](const Node& n) { return n.id == v; }),
                    out.nodes.end());
  }

  validate_scenario(out);
  return out;
}

// ---------------------------------------------------------------------------
// k shortest paths

namespace {

struct Label {
  double cost = 0;
  std::vector<int> links;
  bool set = false;
};

bool better(double ca, const std::vector<int>& pa, double cb, const std::vector<int>& pb) {
  if (ca < cb - 1e-12) return true;
  if (ca > cb + 1e-12) return false;
  return pa < pb;
}

// Cheapest loop-free path with banned links/nodes; lexicographic tie break.
// Label-correcting sweep; fine at these sizes, needs no positive-cycle care
// because candidate paths are kept simple explicitly.
bool cheapest(const Scenario& s, int origin, int destination, const std::set<int>& banned_links,
              const std::set<int>& banned_nodes, Path& out) {
  std::map<int, Label> lab;
  lab[origin] = {0, {}, true};
  bool changed = true;
  while (changed) {
    changed = false;
    for (const auto& l : s.links) {
      if (banned_links.count(l.id) || banned_nodes.count(l.from) || banned_nodes.count(l.to))
        continue;
      auto& from = lab[l.from];
      if (!from.set) continue;
      // keep paths simple: a hop may not revisit a node already on the label
      bool revisit = l.to == origin;
      int at = origin;
      for (int lid : from.links) {
        at = s.find_link(lid)->to;
        if (at == l.to) revisit = true;
      }
      if (revisit) continue;
      double cost = from.cost + l.car_min_time;
      std::vector<int> path = from.links;
      path.push_back(l.id);
      auto& to = lab[l.to];
      if (!to.set || better(cost, path, to.cost, to.links)) {
        to = {cost, std::move(path), true};
        changed = true;
      }
    }
  }
  auto it = lab.find(destination);
  if (it == lab.end() || !it->second.set) return false;
  out = {it->second.links, it->second.cost};
  return true;
}

std::vector<int> path_nodes(const Scenario& s, int origin, const std::vector<int>& links) {
  std::vector<int> nodes{origin};
  for (int lid : links) nodes.push_back(s.find_link(lid)->to);
  return nodes;
}

}  // namespace

std::vector<Path> k_shortest_paths(const Scenario& s, int origin, int destination, int k) {
  if (k <= 0) return {};
  if (!s.find_node(origin) || !s.find_node(destination))
    fail("path query names unknown node");
  if (origin == destination) fail("path query with origin equal to destination");

  std::vector<Path> accepted;
  Path first;
  if (!cheapest(s, origin, destination, {}, {}, first))
    fail("no path from " + std::to_string(origin) + " to " + std::to_string(destination));
  accepted.push_back(first);

  auto path_less = [](const Path& a, const Path& b) {
    if (a.cost < b.cost - 1e-12) return true;
    if (a.cost > b.cost + 1e-12) return false;
    return a.links < b.links;
  };
  std::vector<Path> candidates;

  while (static_cast<int>(accepted.size()) < k) {
    const Path& prev = accepted.back();
    auto prev_nodes = path_nodes(s, origin, prev.links);
    for (size_t i = 0; i < prev.links.size(); ++i) {
      int spur = prev_nodes[i];
      std::vector<int> root(prev.links.begin(), prev.links.begin() + i);
      std::set<int> banned_links, banned_nodes;
      for (const auto& p : accepted)
        if (p.links.size() > i && std::equal(root.begin(), root.end(), p.links.begin()))
          banned_links.insert(p.links[i]);
      for (size_t j = 0; j < i; ++j) banned_nodes.insert(prev_nodes[j]);
      Path tail;
      if (!cheapest(s, spur, destination, banned_links, banned_nodes, tail)) continue;
      Path cand;
      cand.links = root;
      cand.links.insert(cand.links.end(), tail.links.begin(), tail.links.end());
      cand.cost = 0;
      for (int lid : cand.links) cand.cost += s.find_link(lid)->car_min_time;
      bool dup = false;
      for (const auto& p : accepted) dup = dup || p.links == cand.links;
      for (const auto& p : candidates) dup = dup || p.links == cand.links;
      if (!dup) candidates.push_back(std::move(cand));
    }
    if (candidates.empty()) break;
    auto best = std::min_element(candidates.begin(), candidates.end(), path_less);
    accepted.push_back(*best);
    candidates.erase(best);
  }
  return accepted;
}

void enumerate_candidate_paths(Scenario& s, int k) {
  for (auto& d : s.demands) {
    d.candidate_paths.clear();
    for (const auto& p : k_shortest_paths(s, d.origin, d.destination, k))
      d.candidate_paths.push_back(p.links);
  }
}

// ---------------------------------------------------------------------------
// bundled grid benchmark

namespace {

// One-way grid, 3 rows x 6 columns of junctions.  Rows run E,W,E bottom to
// top; columns alternate N,S starting southbound at x=0, except x=5 which
// runs north so the northeast corner can host the bus U-turn.
struct GridBuilder {
  Scenario s;
  int next_link = 0;

  int junction(int x, int y) const { return y * 6 + x + 1; }

  void node(int id, NodeKind kind, std::optional<Platform> plat = {}) {
    s.nodes.push_back({id, kind, plat});
  }

  int link(int from, int to, double car, double bus, char dir, int lanes = 2, bool virt = false) {
    Link l;
    l.id = ++next_link;
    l.from = from;
    l.to = to;
    l.lanes = lanes;
    l.car_min_time = car;
    l.bus_min_time = bus;
    l.is_virtual = virt;
    l.dir = dir;
    s.links.push_back(l);
    return l.id;
  }

  // Junction-to-junction street, optionally split by a station node.
  void street(int from, int to, char dir, int station = 0) {
    if (station) {
      link(from, station, 10, 15, dir);
      link(station, to, 10, 15, dir);
    } else {
      link(from, to, 20, 30, dir);
    }
  }
};

}  // namespace

Scenario make_grid_scenario() {
  GridBuilder g;
  g.s.T = 10;
  g.s.H = 120;
  g.s.s_a = 4;
  g.s.omega_p = 0.9;
  g.s.epsilon = 1e-3;
  g.s.cross_time = 5;

  for (int y = 0; y < 3; ++y)
    for (int x = 0; x < 6; ++x) g.node(g.junction(x, y), NodeKind::Intersection);
  for (int id = 19; id <= 30; ++id) g.node(id, NodeKind::Station, Platform::Side);
  for (int id : {31, 32, 33, 34, 35}) g.node(id, NodeKind::Virtual);
  for (int id : {36, 37, 38}) g.node(id, NodeKind::Origin);
  for (int id = 39; id <= 46; ++id) g.node(id, NodeKind::Destination);
  g.node(47, NodeKind::Intersection);  // U-turn corner, row 2 into row 1

  // streets; stations 19..30 sit mid-segment
  g.street(1, 2, 'E', 19);
  g.street(2, 3, 'E');
  g.street(3, 4, 'E', 20);
  g.street(4, 5, 'E');
  g.street(5, 6, 'E', 21);
  g.street(12, 11, 'W', 22);
  g.street(11, 10, 'W');
  g.street(10, 9, 'W', 23);
  g.street(9, 8, 'W');
  g.street(8, 7, 'W', 24);
  g.street(13, 14, 'E', 25);
  g.street(14, 15, 'E');
  g.street(15, 16, 'E', 26);
  g.street(16, 17, 'E');
  g.street(17, 18, 'E', 27);
  g.street(13, 7, 'S');
  g.street(7, 1, 'S');
  g.street(2, 8, 'N');
  g.street(8, 14, 'N');
  g.street(15, 9, 'S', 28);
  g.street(9, 3, 'S', 29);
  g.street(4, 10, 'N', 30);
  g.street(10, 16, 'N');
  g.street(17, 11, 'S');
  g.street(11, 5, 'S');
  g.street(6, 12, 'N');
  g.street(12, 18, 'N');

  // boundary feeds: five demand entrances are virtual waiting zones
  g.link(31, 1, 0, 0, 'E', 1, true);
  g.link(32, 13, 0, 0, 'E', 1, true);
  g.link(33, 2, 0, 0, 'N', 1, true);
  g.link(34, 4, 0, 0, 'N', 1, true);
  g.link(35, 15, 0, 0, 'S', 1, true);
  g.link(36, 13, 10, 15, 'S');
  g.link(37, 17, 10, 15, 'S');
  g.link(38, 6, 10, 15, 'N');
  g.link(47, 12, 10, 15, 'W');  // U-turn re-entry into row 1

  // boundary drains
  g.link(6, 39, 10, 15, 'E');
  g.link(7, 40, 10, 15, 'W');
  g.link(14, 41, 10, 15, 'N');
  g.link(16, 42, 10, 15, 'N');
  g.link(3, 43, 10, 15, 'S');
  g.link(5, 44, 10, 15, 'S');
  g.link(1, 45, 10, 15, 'S');
  g.link(18, 46, 10, 15, 'N');
  g.link(18, 47, 10, 15, 'E');  // U-turn exit of row 2

  auto line = [&](int id, std::vector<int> route, std::vector<int> stations) {
    BusLine b;
    b.id = id;
    b.route = std::move(route);
    b.stations = std::move(stations);
    for (int v : b.stations) b.min_dwell[v] = 40;
    g.s.bus_lines.push_back(b);
  };
  line(1, {1, 19, 2, 3, 20, 4, 5, 21, 6}, {19, 20, 21});
  line(2, {12, 22, 11, 10, 23, 9, 8, 24, 7}, {22, 23, 24});
  line(3, {15, 28, 9, 29, 3, 20, 4, 5, 21, 6}, {28, 29, 20, 21});
  line(4, {13, 25, 14, 15, 26, 16, 17, 27, 18, 47, 12, 22, 11, 10, 23, 9, 8, 24, 7},
       {25, 26, 27, 22, 24});

  // canonical (origin, destination) order
  auto demand = [&](int o, int d) { g.s.demands.push_back({o, d, 3, {}}); };
  demand(26, 44);  // interior station to exit
  demand(29, 39);  // interior station to exit
  demand(31, 39);  // entrance to exit, straight along row 0
  demand(32, 41);  // entrance to exit, row 2 then out north
  demand(33, 23);  // entrance to interior station
  demand(35, 24);  // entrance to interior station

  validate_scenario(g.s);
  return g.s;
}

}  // namespace rch
