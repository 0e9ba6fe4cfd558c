#include "rch/rhythm.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <string>

#include "rch/errors.hpp"
#include "rch/solver.hpp"
#include "text_util.hpp"

namespace rch {

namespace {

// ceil(a/b) for b > 0
long ceil_div(long a, long b) { return a >= 0 ? (a + b - 1) / b : -((-a) / b); }

// Whole long cycles needed before exit platoon q_hat can follow entry q at
// the link's background pace.
int cycles_needed(const RhythmLink& l, int Q, int q, int q_hat) {
  return static_cast<int>(std::max(0L, ceil_div(l.alpha - (q_hat - q), Q)));
}

}  // namespace

RealizedTime realized_travel_time(const BackgroundRhythm& r, int link_id, int q, int q_hat) {
  const RhythmLink& l = r.links.at(link_id);
  int beta = cycles_needed(l, r.Q, q, q_hat);
  double t = l.tau_to - l.tau_from + (q_hat - q) * r.T + beta * r.H();
  return {t, beta};
}

int fifo_conflict(const BackgroundRhythm& r, int link_id, int q_m, int q_hat_m, int q_n,
                  int q_hat_n) {
  const RhythmLink& l = r.links.at(link_id);
  // Unwrapped exit index: the exit order of two platoons is the order of
  // q_hat + Q*beta, entry order that of q.  An overtake is a sign mismatch.
  long xm = q_hat_m + static_cast<long>(r.Q) * cycles_needed(l, r.Q, q_m, q_hat_m);
  long xn = q_hat_n + static_cast<long>(r.Q) * cycles_needed(l, r.Q, q_n, q_hat_n);
  int entry = (q_m > q_n) - (q_m < q_n);
  int exit = (xm > xn) - (xm < xn);
  return entry != exit ? 1 : 2;
}

bool background_pair(const BackgroundRhythm& r, int link_id, int q, int q_hat) {
  const RhythmLink& l = r.links.at(link_id);
  int d = (q_hat - q - l.alpha) % r.Q;
  return d == 0;
}

BackgroundRhythm design_background_rhythm(const Scenario& s) {
  validate_scenario(s);
  const double T = s.T;
  const int Q = s.Q();

  // bus-layer weight per link: summed occupancy of the lines crossing it
  std::map<int, double> bus_weight;
  std::map<int, double> bus_floor;
  for (const auto& line : s.bus_lines)
    for (int lid : s.route_links(line)) {
      bus_weight[lid] += line.passengers;
      bus_floor[lid] = s.find_link(lid)->bus_min_time;
    }

  MilpModel m;
  std::map<int, int> tau_col;
  std::vector<int> node_ids;
  for (const auto& n : s.nodes) node_ids.push_back(n.id);
  std::sort(node_ids.begin(), node_ids.end());
  for (int id : node_ids)
    tau_col[id] = m.add_var(0, T - s.epsilon, 0, VarKind::Continuous, "tau_" + std::to_string(id));
  m.set_bounds(tau_col[node_ids.front()], 0, 0);  // pin the gauge freedom

  std::vector<int> link_ids;
  for (const auto& l : s.links) link_ids.push_back(l.id);
  std::sort(link_ids.begin(), link_ids.end());

  // layer rows: tau_to - tau_from + T*alpha - r = floor_time, r in [0, T)
  struct LayerRef {
    int from, to;
    double floor_time;
    int r_col;
  };
  std::vector<LayerRef> layers;
  auto add_layer = [&](const Link& l, double floor_time, double weight,
                       const std::string& tag) {
    int r_col = m.add_var(0, T - s.epsilon, weight, VarKind::Continuous, "r" + tag);
    int base = static_cast<int>(std::floor(floor_time / T));
    int a_col = m.add_var(base - 1, base + 2, 0, VarKind::Integer, "a" + tag);
    m.add_row(RowSense::Eq, floor_time,
              {{tau_col.at(l.to), 1}, {tau_col.at(l.from), -1}, {a_col, T}, {r_col, -1}},
              "pace" + tag);
    layers.push_back({l.from, l.to, floor_time, r_col});
    return std::pair{r_col, a_col};
  };

  std::map<int, int> alpha_col, bus_alpha_col;
  for (int lid : link_ids) {
    const Link& l = *s.find_link(lid);
    alpha_col[lid] = add_layer(l, l.car_min_time, Q * s.s_a, "_" + std::to_string(lid)).second;
    if (bus_weight.count(lid))
      bus_alpha_col[lid] =
          add_layer(l, bus_floor[lid], bus_weight[lid], "b_" + std::to_string(lid)).second;
  }

  // opposing movements at a conflict point sit half a cycle apart
  int ci = 0;
  for (const auto& c : s.conflicts) {
    int theta = m.add_var(0, 1, 0, VarKind::Binary, "theta_" + std::to_string(++ci));
    m.add_row(RowSense::Eq, T / 2, {{tau_col.at(c.a), 1}, {tau_col.at(c.b), -1}, {theta, T}},
              "conflict_" + std::to_string(ci));
  }

  // Residual floor cuts.  Whenever two pace rows have a forced offset
  // d != 0 modulo T (same endpoints, or endpoints tied by a conflict's
  // half-cycle shift), their residuals differ by exactly d or d - T, so
  // r1 + r2 >= min(d, T - d).  Redundant for integral solutions, but they
  // lift the relaxation off zero, which the search needs to prune.
  auto fmodT = [&](double v) {
    double d = std::fmod(v, T);
    return d < 0 ? d + T : d;
  };
  int cut = 0;
  auto add_cut = [&](const LayerRef& p, const LayerRef& q, double shift) {
    double d = fmodT(q.floor_time - p.floor_time + shift);
    if (d < 1e-9 || T - d < 1e-9) return;
    m.add_row(RowSense::Ge, std::min(d, T - d), {{p.r_col, 1}, {q.r_col, 1}},
              "floor_cut_" + std::to_string(++cut));
  };
  for (size_t i = 0; i < layers.size(); ++i)
    for (size_t j = i + 1; j < layers.size(); ++j) {
      const LayerRef &p = layers[i], &q = layers[j];
      if (p.from == q.from && p.to == q.to) add_cut(p, q, 0);
    }
  for (const auto& c : s.conflicts)
    for (const LayerRef& p : layers)
      for (const LayerRef& q : layers) {
        if (p.from == c.a && q.from == c.b && p.to == q.to) add_cut(p, q, T / 2);
        if (p.to == c.a && q.to == c.b && p.from == q.from) add_cut(p, q, T / 2);
      }

  MilpSolution sol = solve_milp(m);
  if (sol.status != SolveStatus::Optimal)
    throw SolveError("rhythm design: " + std::string(to_string(sol.status)));

  BackgroundRhythm r;
  r.T = T;
  r.Q = Q;
  r.s_a = s.s_a;
  r.objective = sol.objective;
  for (int id : node_ids) {
    double v = sol.x[tau_col[id]];
    r.tau[id] = std::abs(v) < 1e-9 ? 0 : v;
  }
  auto snap = [&](const Link& l, int a_col) {
    RhythmLink rl;
    rl.tau_from = r.tau.at(l.from);
    rl.tau_to = r.tau.at(l.to);
    rl.alpha = static_cast<int>(std::llround(sol.x[a_col]));
    rl.time = rl.tau_to - rl.tau_from + rl.alpha * T;
    return rl;
  };
  for (int lid : link_ids) {
    const Link& l = *s.find_link(lid);
    r.links[lid] = snap(l, alpha_col[lid]);
    if (bus_alpha_col.count(lid)) r.bus_links[lid] = snap(l, bus_alpha_col[lid]);
  }
  return r;
}

TrafficBounds max_admissible_traffic(const Scenario& s, const BackgroundRhythm& r) {
  TrafficBounds b;
  for (const auto& l : s.links) {
    bool bus = !s.lines_on_link(l.id).empty();
    b.link_capacity[l.id] = (l.lanes * r.Q - (bus ? 2 : 0)) * r.s_a;
  }
  for (const auto& d : s.demands) {
    std::vector<int> path;
    if (!d.candidate_paths.empty()) path = d.candidate_paths.front();
    else path = k_shortest_paths(s, d.origin, d.destination, 1).front().links;
    double cap = kInf;
    for (int lid : path) cap = std::min(cap, b.link_capacity.at(lid));
    b.od_capacity.push_back(cap);
  }
  return b;
}

void write_rhythm(const BackgroundRhythm& r, std::ostream& out) {
  out << "[rhythm]\n";
  out << "T " << text::num(r.T) << "\n";
  out << "Q " << r.Q << "\n";
  out << "s_a " << text::num(r.s_a) << "\n";
  out << "objective " << text::num(r.objective) << "\n";
  for (const auto& [id, v] : r.tau) out << "tau " << id << " " << text::num(v) << "\n";
  auto rows = [&](const char* key, const std::map<int, RhythmLink>& m) {
    for (const auto& [id, l] : m)
      out << key << " " << id << " " << l.alpha << " " << text::num(l.time) << " "
          << text::num(l.tau_from) << " " << text::num(l.tau_to) << "\n";
  };
  rows("link", r.links);
  rows("busl", r.bus_links);
  out << "[/rhythm]\n";
}

BackgroundRhythm parse_rhythm(std::istream& in) {
  text::Cursor c{in};
  std::string line;
  if (!c.next(line) || line != "[rhythm]") c.die("expected [rhythm]");
  BackgroundRhythm r;
  while (c.next(line)) {
    if (line == "[/rhythm]") return r;
    auto toks = text::split_ws(line);
    if (toks[0] == "T" && toks.size() == 2) r.T = text::parse_num(c, toks[1]);
    else if (toks[0] == "Q" && toks.size() == 2) r.Q = text::parse_int(c, toks[1]);
    else if (toks[0] == "s_a" && toks.size() == 2) r.s_a = text::parse_num(c, toks[1]);
    else if (toks[0] == "objective" && toks.size() == 2) r.objective = text::parse_num(c, toks[1]);
    else if (toks[0] == "tau" && toks.size() == 3)
      r.tau[text::parse_int(c, toks[1])] = text::parse_num(c, toks[2]);
    else if ((toks[0] == "link" || toks[0] == "busl") && toks.size() == 6) {
      RhythmLink l;
      int id = text::parse_int(c, toks[1]);
      l.alpha = text::parse_int(c, toks[2]);
      l.time = text::parse_num(c, toks[3]);
      l.tau_from = text::parse_num(c, toks[4]);
      l.tau_to = text::parse_num(c, toks[5]);
      (toks[0] == "link" ? r.links : r.bus_links)[id] = l;
    } else {
      c.die("unknown rhythm row '" + toks[0] + "'");
    }
  }
  c.die("missing [/rhythm]");
}

}  // namespace rch
