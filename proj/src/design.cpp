#include "rch/design.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <string>

#include "rch/errors.hpp"
#include "text_util.hpp"

namespace rch {
namespace {

constexpr double kTimeTol = 1e-6;
constexpr double kLoadTol = 1e-5;

std::string lk_tag(int link) { return "link " + std::to_string(link); }
std::string ln_tag(int line) { return "line " + std::to_string(line); }

// Entry slot of the background pair exiting link `bg` at slot q.
int shift_back(int q, int alpha, int Q) {
  int v = (q - 1 - alpha) % Q;
  if (v < 0) v += Q;
  return v + 1;
}

int pair_col(int Q, int q, int q_hat) { return (q - 1) * Q + (q_hat - 1); }

// ---- fixed-itinerary screening ---------------------------------------------

struct FixedBusFacts {
  // link -> pair -> platoon-size units held by buses
  std::map<int, std::map<PlatoonPair, double>> dedicated;
  std::map<int, double> slowest;  // link -> largest committed bus time
};

// Full semantic check of a set of itineraries against the scenario and the
// rhythm; throws ValidationError naming the first offence.
FixedBusFacts check_itineraries(const Scenario& s, const BackgroundRhythm& r,
                                const std::vector<BusItinerary>& buses) {
  const int Q = s.Q();
  if (buses.size() != s.bus_lines.size())
    throw ValidationError("expected one itinerary per bus line, got " +
                          std::to_string(buses.size()));
  FixedBusFacts facts;
  for (size_t i = 0; i < buses.size(); ++i) {
    const BusLine& line = s.bus_lines[i];
    const BusItinerary& it = buses[i];
    if (it.line != line.id)
      throw ValidationError("itinerary order must follow the scenario lines; slot " +
                            std::to_string(i) + " is " + ln_tag(it.line));
    const std::vector<int> route = s.route_links(line);
    if (it.links.size() != route.size())
      throw ValidationError(ln_tag(line.id) + ": " + std::to_string(it.links.size()) +
                            " link choices for " + std::to_string(route.size()) +
                            " route links");
    int dwell_hits = 0;
    int prev_exit = 0;
    bool have_prev = false;
    for (int id : route) {
      auto f = it.links.find(id);
      if (f == it.links.end())
        throw ValidationError(ln_tag(line.id) + ": no choice on " + lk_tag(id));
      const BusLinkChoice& c = f->second;
      if (c.vp.entry < 1 || c.vp.entry > Q || c.vp.exit < 1 || c.vp.exit > Q)
        throw ValidationError(ln_tag(line.id) + ", " + lk_tag(id) + ": platoon out of range");
      const Link& lk = *s.find_link(id);
      const double t = realized_travel_time(r, id, c.vp.entry, c.vp.exit).t;
      if (t + kTimeTol < lk.bus_min_time)
        throw ValidationError(ln_tag(line.id) + ", " + lk_tag(id) +
                              ": platoon faster than the bus floor");
      if (std::abs(c.time - t) > kTimeTol)
        throw ValidationError(ln_tag(line.id) + ", " + lk_tag(id) + ": time " +
                              text::num(c.time) + " is not the realized " + text::num(t));
      if (have_prev) {
        const int node = lk.from;
        const bool dwells =
            std::find(line.stations.begin(), line.stations.end(), node) != line.stations.end();
        if (dwells) {
          ++dwell_hits;
          auto d = it.dwell.find(node);
          if (d == it.dwell.end())
            throw ValidationError(ln_tag(line.id) + ": no dwell at node " +
                                  std::to_string(node));
          const double dwell = d->second;
          const double floor = line.min_dwell.at(node);
          if (dwell < floor - kTimeTol || dwell > s.H - s.epsilon + kTimeTol)
            throw ValidationError(ln_tag(line.id) + ": dwell " + text::num(dwell) +
                                  " at node " + std::to_string(node) + " outside [" +
                                  text::num(floor) + ", " + text::num(s.H - s.epsilon) + "]");
          double gap = std::fmod((c.vp.entry - prev_exit) * s.T - dwell, s.H);
          if (gap < 0) gap += s.H;
          if (std::min(gap, s.H - gap) > kTimeTol)
            throw ValidationError(ln_tag(line.id) + ": dwell " + text::num(dwell) +
                                  " at node " + std::to_string(node) +
                                  " does not match the platoon gap");
          const Node* n = s.find_node(node);
          if (!n->platform || *n->platform != Platform::Side)
            throw ValidationError(ln_tag(line.id) + ": node " + std::to_string(node) +
                                  " has no side platform to dwell at");
        } else if (c.vp.entry != prev_exit) {
          throw ValidationError(ln_tag(line.id) + ": platoon break at node " +
                                std::to_string(node));
        }
      }
      prev_exit = c.vp.exit;
      have_prev = true;
      facts.dedicated[id][c.vp] += line.size;
      auto& slow = facts.slowest[id];
      slow = std::max(slow, t);
    }
    if (dwell_hits != static_cast<int>(it.dwell.size()))
      throw ValidationError(ln_tag(line.id) + ": dwell entries off the route");
  }
  for (const auto& [id, pairs] : facts.dedicated) {
    const Link& lk = *s.find_link(id);
    if (lk.is_virtual) continue;
    std::set<int> ins, outs;
    for (const auto& [vp, size] : pairs) {
      if (size > s.s_a + kTimeTol)
        throw ValidationError(lk_tag(id) + ": buses of size " + text::num(size) +
                              " exceed the platoon");
      if (!ins.insert(vp.entry).second || !outs.insert(vp.exit).second)
        throw ValidationError(lk_tag(id) + ": dedicated platoons share a slot");
    }
    for (auto a = pairs.begin(); a != pairs.end(); ++a)
      for (auto b = std::next(a); b != pairs.end(); ++b)
        if (fifo_conflict(r, id, a->first.entry, a->first.exit, b->first.entry,
                          b->first.exit) == 1)
          throw ValidationError(lk_tag(id) + ": dedicated platoons overtake each other");
  }
  return facts;
}

// ---- model construction -----------------------------------------------------

enum class Mode { Joint, FixedBus, Relaxed };

struct BusPairChoice {
  PlatoonPair vp;
  double time = 0;
  int col = -1;
};

struct LineLinkCols {
  int link = 0;
  int entry_col = -1, exit_col = -1;
  std::vector<BusPairChoice> pairs;
};

struct LineDwellCols {
  int node = 0;
  int time_col = -1, wrap_col = -1;
};

struct LineCols {
  const BusLine* line = nullptr;
  std::vector<LineLinkCols> links;    // route order
  std::vector<LineDwellCols> dwells;  // route order
};

struct LinkFlowCols {
  int link = 0;
  std::vector<std::pair<PlatoonPair, int>> pi;  // available pairs, entry-major
  int lam = -1, mu = -1;                        // Q columns each
  int reg = -1;                                 // Q columns, -1 when absent
};

struct PathCols {
  int demand = 0;
  std::vector<int> links;
  int f_col = -1;
  std::vector<LinkFlowCols> per_link;
};

struct Build {
  Mode mode = Mode::Joint;
  MilpModel model;
  const Scenario* s = nullptr;
  Scenario owned;  // set when candidate paths had to be enumerated
  std::vector<int> used;                              // link ids, sorted
  std::vector<LineCols> lines;                        // Joint only
  std::map<int, std::map<PlatoonPair, int>> ded_col;  // Joint, real links
  std::map<int, int> theta_base;                      // real links, Q*Q block
  FixedBusFacts fixed;                                // FixedBus/Relaxed
  std::vector<PathCols> paths;
};

bool pair_available(const Build& b, const BackgroundRhythm& r, const Link& lk, int q,
                    int q_hat) {
  if (b.mode != Mode::Relaxed || lk.is_virtual) return true;
  auto d = b.fixed.dedicated.find(lk.id);
  if (d != b.fixed.dedicated.end()) {
    for (const auto& [vp, size] : d->second)
      if (vp.entry == q || vp.exit == q_hat ||
          fifo_conflict(r, lk.id, q, q_hat, vp.entry, vp.exit) == 1)
        return false;
    auto slow = b.fixed.slowest.find(lk.id);
    if (slow != b.fixed.slowest.end() &&
        realized_travel_time(r, lk.id, q, q_hat).t > slow->second + kTimeTol)
      return false;
  }
  return true;
}

Build construct(const Scenario& sin, const BackgroundRhythm& r, Mode mode,
                const std::vector<BusItinerary>* buses, bool ordering_rows,
                BuildInfo* info) {
  Build b;
  b.mode = mode;
  b.s = &sin;
  for (const OdDemand& w : sin.demands)
    if (w.candidate_paths.empty()) {
      b.owned = sin;
      b.s = &b.owned;
      for (OdDemand& d : b.owned.demands)
        if (d.candidate_paths.empty())
          for (const Path& p : k_shortest_paths(b.owned, d.origin, d.destination, 3))
            d.candidate_paths.push_back(p.links);
      break;
    }
  const Scenario& s = *b.s;
  const int Q = s.Q();
  const double T = s.T, H = s.H, sa = s.s_a, w = s.omega_p;
  MilpModel& m = b.model;

  if (mode != Mode::Joint) b.fixed = check_itineraries(s, r, *buses);

  std::set<int> used;
  for (const OdDemand& d : s.demands)
    for (const auto& path : d.candidate_paths) used.insert(path.begin(), path.end());
  for (const BusLine& line : s.bus_lines) {
    const auto route = s.route_links(line);
    used.insert(route.begin(), route.end());
  }
  b.used.assign(used.begin(), used.end());

  // -- columns: bus layer (joint mode only) --
  if (mode == Mode::Joint) {
    for (const BusLine& line : s.bus_lines) {
      LineCols lc;
      lc.line = &line;
      const auto route = s.route_links(line);
      const std::string ln = "l" + std::to_string(line.id);
      for (int id : route) {
        const Link& lk = *s.find_link(id);
        LineLinkCols llc;
        llc.link = id;
        for (int q = 1; q <= Q; ++q)
          for (int qh = 1; qh <= Q; ++qh) {
            const double t = realized_travel_time(r, id, q, qh).t;
            if (t + kTimeTol >= lk.bus_min_time)
              llc.pairs.push_back({{q, qh}, t, -1});
          }
        if (llc.pairs.empty())
          throw ValidationError(ln_tag(line.id) + ", " + lk_tag(id) +
                                ": no platoon reaches the bus floor");
        const std::string at = ln + "." + std::to_string(id);
        llc.entry_col = m.add_var(1, Q, 0, VarKind::Integer, at + ".in");
        llc.exit_col = m.add_var(1, Q, 0, VarKind::Integer, at + ".out");
        for (auto& p : llc.pairs)
          p.col = m.add_var(0, 1, w * line.passengers * p.time, VarKind::Binary);
        lc.links.push_back(std::move(llc));
      }
      // the model is invariant under a global slot rotation (times and rows
      // only ever see slot differences, entrances load every slot alike), so
      // the first line may enter its first link in slot 1
      if (b.lines.empty() && !lc.links.empty())
        m.set_bounds(lc.links.front().entry_col, 1, 1);
      for (size_t i = 1; i < route.size(); ++i) {
        const int node = s.find_link(route[i])->from;
        if (std::find(line.stations.begin(), line.stations.end(), node) ==
            line.stations.end())
          continue;
        const Node* n = s.find_node(node);
        if (!n->platform || *n->platform != Platform::Side)
          throw ValidationError(ln_tag(line.id) + ": node " + std::to_string(node) +
                                " has no side platform to dwell at");
        LineDwellCols dc;
        dc.node = node;
        const std::string at = ln + ".n" + std::to_string(node);
        dc.time_col = m.add_var(line.min_dwell.at(node), H - s.epsilon, w * line.passengers,
                                VarKind::Continuous, at + ".dwell");
        dc.wrap_col = m.add_var(0, 1, 0, VarKind::Integer, at + ".wrap");
        lc.dwells.push_back(dc);
      }
      b.lines.push_back(std::move(lc));
    }
    // aggregate dedication indicators on real links
    std::map<int, std::set<PlatoonPair>> agg;
    for (const LineCols& lc : b.lines)
      for (const LineLinkCols& llc : lc.links) {
        if (s.find_link(llc.link)->is_virtual) continue;
        for (const auto& p : llc.pairs) agg[llc.link].insert(p.vp);
      }
    for (const auto& [id, pairs] : agg)
      for (const PlatoonPair& vp : pairs)
        b.ded_col[id][vp] = m.add_var(0, 1, 0, VarKind::Binary);
  }

  // -- columns: realized platoons --
  if (mode != Mode::Relaxed)
    for (int id : b.used) {
      if (s.find_link(id)->is_virtual) continue;
      b.theta_base[id] = m.num_vars();
      for (int q = 1; q <= Q; ++q)
        for (int qh = 1; qh <= Q; ++qh) m.add_var(0, 1, 0, VarKind::Binary);
    }

  // -- columns: car flows --
  for (size_t wi = 0; wi < s.demands.size(); ++wi) {
    const OdDemand& d = s.demands[wi];
    for (size_t pi = 0; pi < d.candidate_paths.size(); ++pi) {
      PathCols pc;
      pc.demand = static_cast<int>(wi);
      pc.links = d.candidate_paths[pi];
      pc.f_col = m.add_var(0, kInf, 0, VarKind::Continuous,
                           "f.w" + std::to_string(wi) + "." + std::to_string(pi));
      for (int id : pc.links) {
        const Link& lk = *s.find_link(id);
        LinkFlowCols fc;
        fc.link = id;
        for (int q = 1; q <= Q; ++q)
          for (int qh = 1; qh <= Q; ++qh) {
            if (!pair_available(b, r, lk, q, qh)) continue;
            const double t = realized_travel_time(r, id, q, qh).t;
            fc.pi.push_back({{q, qh}, m.add_var(0, kInf, (1 - w) * t, VarKind::Continuous)});
          }
        fc.lam = m.num_vars();
        for (int q = 1; q <= Q; ++q) m.add_var(0, kInf, 0, VarKind::Continuous);
        fc.mu = m.num_vars();
        for (int q = 1; q <= Q; ++q) m.add_var(0, kInf, 0, VarKind::Continuous);
        if (lk.lanes >= 2 && !lk.is_virtual) {
          fc.reg = m.num_vars();
          const double ta = r.links.at(id).time;
          for (int q = 1; q <= Q; ++q) m.add_var(0, kInf, (1 - w) * ta, VarKind::Continuous);
        }
        pc.per_link.push_back(std::move(fc));
      }
      b.paths.push_back(std::move(pc));
    }
  }

  // -- fixed-bus variable pinning --
  if (mode == Mode::FixedBus)
    for (const auto& [id, pairs] : b.fixed.dedicated) {
      auto tb = b.theta_base.find(id);
      if (tb == b.theta_base.end()) continue;  // virtual link
      for (const auto& [vp, size] : pairs) {
        m.set_bounds(tb->second + pair_col(Q, vp.entry, vp.exit), 1, 1);
        // implied by occupancy and ordering once the platoon is held
        for (int q = 1; q <= Q; ++q)
          for (int qh = 1; qh <= Q; ++qh) {
            if (q == vp.entry && qh == vp.exit) continue;
            if (q == vp.entry || qh == vp.exit ||
                fifo_conflict(r, id, q, qh, vp.entry, vp.exit) == 1)
              m.set_bounds(tb->second + pair_col(Q, q, qh), 0, 0);
          }
      }
    }

  // -- rows: bus layer --
  if (mode == Mode::Joint) {
    for (const LineCols& lc : b.lines) {
      for (const LineLinkCols& llc : lc.links) {
        std::vector<std::pair<int, double>> one, ein, eout;
        ein.push_back({llc.entry_col, 1});
        eout.push_back({llc.exit_col, 1});
        for (const auto& p : llc.pairs) {
          one.push_back({p.col, 1});
          ein.push_back({p.col, -p.vp.entry});
          eout.push_back({p.col, -p.vp.exit});
        }
        m.add_row(RowSense::Eq, 1, one);
        m.add_row(RowSense::Eq, 0, ein);
        m.add_row(RowSense::Eq, 0, eout);
      }
      size_t dw = 0;
      for (size_t i = 1; i < lc.links.size(); ++i) {
        const int prev_exit = lc.links[i - 1].exit_col;
        const int next_entry = lc.links[i].entry_col;
        const int node = s.find_link(lc.links[i].link)->from;
        if (dw < lc.dwells.size() && lc.dwells[dw].node == node) {
          const LineDwellCols& dc = lc.dwells[dw++];
          m.add_row(RowSense::Eq, 0,
                    {{dc.time_col, 1}, {next_entry, -T}, {prev_exit, T}, {dc.wrap_col, -T * Q}});
        } else {
          m.add_row(RowSense::Eq, 0, {{next_entry, 1}, {prev_exit, -1}});
        }
      }
    }
    for (const auto& [id, pairs] : b.ded_col) {
      const int base = b.theta_base.at(id);
      for (const auto& [vp, agg] : pairs) {
        std::vector<std::pair<int, double>> hold{{agg, sa}}, any{{agg, 1}};
        for (const LineCols& lc : b.lines)
          for (const LineLinkCols& llc : lc.links) {
            if (llc.link != id) continue;
            for (const auto& p : llc.pairs)
              if (p.vp == vp) {
                hold.push_back({p.col, -lc.line->size});
                any.push_back({p.col, -1});
              }
          }
        m.add_row(RowSense::Ge, 0, hold);
        m.add_row(RowSense::Le, 0, any);
        m.add_row(RowSense::Ge, 0, {{base + pair_col(Q, vp.entry, vp.exit), 1}, {agg, -1}});
      }
    }
  }

  // -- rows: occupancy and ordering --
  for (const auto& [id, base] : b.theta_base) {
    for (int q = 1; q <= Q; ++q) {
      std::vector<std::pair<int, double>> row;
      for (int qh = 1; qh <= Q; ++qh) row.push_back({base + pair_col(Q, q, qh), 1});
      m.add_row(RowSense::Le, 1, row);
    }
    for (int qh = 1; qh <= Q; ++qh) {
      std::vector<std::pair<int, double>> row;
      for (int q = 1; q <= Q; ++q) row.push_back({base + pair_col(Q, q, qh), 1});
      m.add_row(RowSense::Le, 1, row);
    }
    if (ordering_rows)
      for (int qm = 1; qm <= Q; ++qm)
        for (int qn = qm + 1; qn <= Q; ++qn)
          for (int qhm = 1; qhm <= Q; ++qhm)
            for (int qhn = 1; qhn <= Q; ++qhn) {
              if (qhm == qhn) continue;
              if (fifo_conflict(r, id, qm, qhm, qn, qhn) != 1) continue;
              m.add_row(RowSense::Le, 1,
                        {{base + pair_col(Q, qm, qhm), 1}, {base + pair_col(Q, qn, qhn), 1}});
            }
  }

  // -- rows: demand split --
  {
    size_t at = 0;
    for (size_t wi = 0; wi < s.demands.size(); ++wi) {
      std::vector<std::pair<int, double>> row;
      for (; at < b.paths.size() && b.paths[at].demand == static_cast<int>(wi); ++at)
        row.push_back({b.paths[at].f_col, 1});
      if (!row.empty()) m.add_row(RowSense::Eq, s.demands[wi].rate, row);
    }
  }

  // -- rows: per-path marginals --
  for (const PathCols& pc : b.paths)
    for (const LinkFlowCols& fc : pc.per_link) {
      for (int q = 1; q <= Q; ++q) {
        std::vector<std::pair<int, double>> row{{fc.lam + q - 1, -1}};
        for (const auto& [vp, col] : fc.pi)
          if (vp.entry == q) row.push_back({col, 1});
        m.add_row(RowSense::Eq, 0, row);
      }
      for (int qh = 1; qh <= Q; ++qh) {
        std::vector<std::pair<int, double>> row{{fc.mu + qh - 1, -1}};
        for (const auto& [vp, col] : fc.pi)
          if (vp.exit == qh) row.push_back({col, 1});
        m.add_row(RowSense::Eq, 0, row);
      }
    }

  // -- rows: platoon capacity --
  {
    // link -> traversals, in path order
    std::map<int, std::vector<const LinkFlowCols*>> on;
    for (const PathCols& pc : b.paths)
      for (const LinkFlowCols& fc : pc.per_link) on[fc.link].push_back(&fc);
    for (const auto& [id, cols] : on) {
      const Link& lk = *s.find_link(id);
      if (!lk.is_virtual) {
        for (int q = 1; q <= Q; ++q)
          for (int qh = 1; qh <= Q; ++qh) {
            if (!pair_available(b, r, lk, q, qh)) continue;
            std::vector<std::pair<int, double>> row;
            for (const LinkFlowCols* fc : cols)
              for (const auto& [vp, col] : fc->pi)
                if (vp.entry == q && vp.exit == qh) row.push_back({col, 1});
            double rhs = 0;
            if (mode == Mode::Relaxed) {
              rhs = sa;
            } else {
              row.push_back({b.theta_base.at(id) + pair_col(Q, q, qh), -sa});
              if (mode == Mode::Joint) {
                auto dl = b.ded_col.find(id);
                if (dl != b.ded_col.end()) {
                  auto dc = dl->second.find({q, qh});
                  if (dc != dl->second.end()) row.push_back({dc->second, sa});
                }
              } else {
                auto dl = b.fixed.dedicated.find(id);
                if (dl != b.fixed.dedicated.end() && dl->second.count({q, qh})) rhs = -sa;
              }
            }
            m.add_row(RowSense::Le, rhs, row);
          }
        if (lk.lanes >= 2)
          for (int q = 1; q <= Q; ++q) {
            std::vector<std::pair<int, double>> row;
            for (const LinkFlowCols* fc : cols)
              if (fc->reg >= 0) row.push_back({fc->reg + q - 1, 1});
            if (!row.empty()) m.add_row(RowSense::Le, sa * (lk.lanes - 1), row);
          }
      }
    }
  }

  // -- rows: conservation, entrance, exit --
  for (const PathCols& pc : b.paths) {
    for (size_t i = 1; i < pc.links.size(); ++i) {
      const LinkFlowCols& prev = pc.per_link[i - 1];
      const LinkFlowCols& next = pc.per_link[i];
      const int alpha = r.links.at(prev.link).alpha;
      for (int q = 1; q <= Q; ++q) {
        std::vector<std::pair<int, double>> row{{next.lam + q - 1, 1}, {prev.mu + q - 1, -1}};
        if (next.reg >= 0) row.push_back({next.reg + q - 1, 1});
        if (prev.reg >= 0) row.push_back({prev.reg + shift_back(q, alpha, Q) - 1, -1});
        m.add_row(RowSense::Eq, 0, row);
      }
    }
    const LinkFlowCols& first = pc.per_link.front();
    for (int q = 1; q <= Q; ++q) {
      std::vector<std::pair<int, double>> row{{first.lam + q - 1, 1}, {pc.f_col, -1}};
      if (first.reg >= 0) row.push_back({first.reg + q - 1, 1});
      m.add_row(RowSense::Eq, 0, row);
    }
    const LinkFlowCols& last = pc.per_link.back();
    std::vector<std::pair<int, double>> row{{pc.f_col, -Q}};
    for (int qh = 1; qh <= Q; ++qh) row.push_back({last.mu + qh - 1, 1});
    if (last.reg >= 0)
      for (int q = 1; q <= Q; ++q) row.push_back({last.reg + q - 1, 1});
    m.add_row(RowSense::Eq, 0, row);
  }

  if (info) {
    info->vars = m.num_vars();
    info->rows = m.num_rows();
    info->binaries = info->integers = 0;
    for (int j = 0; j < m.num_vars(); ++j) {
      if (m.kind(j) == VarKind::Binary) ++info->binaries;
      if (m.kind(j) == VarKind::Integer) ++info->integers;
    }
    const TrafficBounds tb = max_admissible_traffic(s, r);
    for (size_t wi = 0; wi < s.demands.size(); ++wi)
      if (Q * s.demands[wi].rate > tb.od_capacity[wi] + kTimeTol)
        info->warnings.push_back("demand " + std::to_string(wi) + " asks " +
                                 text::num(Q * s.demands[wi].rate) + " per long cycle, above "
                                 "the admissible " + text::num(tb.od_capacity[wi]));
  }
  return b;
}

// ---- solution decoding ------------------------------------------------------

RchPlan decode(const Build& b, const BackgroundRhythm& r, const std::vector<BusItinerary>* buses,
               const MilpSolution& sol) {
  const bool usable = !sol.x.empty() && (sol.status == SolveStatus::Optimal ||
                                         sol.status == SolveStatus::NodeLimit ||
                                         sol.status == SolveStatus::IterationLimit);
  if (!usable) throw SolveError("plan extraction needs a feasible point");
  if (static_cast<int>(sol.x.size()) != b.model.num_vars())
    throw SolveError("solution does not match the model layout");
  const Scenario& s = *b.s;
  const int Q = s.Q();
  const std::vector<double>& x = sol.x;
  RchPlan plan;

  if (b.mode == Mode::Joint) {
    for (const LineCols& lc : b.lines) {
      BusItinerary it;
      it.line = lc.line->id;
      for (const LineLinkCols& llc : lc.links) {
        const BusPairChoice* hit = nullptr;
        for (const auto& p : llc.pairs)
          if (x[p.col] > 0.5) {
            if (hit) throw SolveError("two platoons picked on " + lk_tag(llc.link));
            hit = &p;
          }
        if (!hit) throw SolveError("no platoon picked on " + lk_tag(llc.link));
        it.links[llc.link] = {hit->vp, hit->time};
      }
      for (const LineDwellCols& dc : lc.dwells)
        it.dwell[dc.node] = s.T * std::round(x[dc.time_col] / s.T);
      plan.buses.push_back(std::move(it));
    }
  } else {
    plan.buses = *buses;
  }
  for (const BusItinerary& it : plan.buses)
    for (const auto& [id, c] : it.links) {
      auto& ded = plan.dedicated[id];
      if (std::find(ded.begin(), ded.end(), c.vp) == ded.end()) ded.push_back(c.vp);
    }
  for (auto& [id, ded] : plan.dedicated) std::sort(ded.begin(), ded.end());

  std::map<int, std::set<PlatoonPair>> realized;
  for (const auto& [id, base] : b.theta_base)
    for (int q = 1; q <= Q; ++q)
      for (int qh = 1; qh <= Q; ++qh)
        if (x[base + pair_col(Q, q, qh)] > 0.5) realized[id].insert({q, qh});

  for (const PathCols& pc : b.paths) {
    PathFlow pf;
    pf.demand = pc.demand;
    pf.links = pc.links;
    pf.rate = std::max(0.0, x[pc.f_col]);
    bool any = pf.rate > kLoadTol;
    for (const LinkFlowCols& fc : pc.per_link) {
      for (const auto& [vp, col] : fc.pi)
        if (x[col] > kLoadTol) {
          pf.mixed[fc.link][vp] = x[col];
          any = true;
          if (!b.theta_base.count(fc.link)) realized[fc.link].insert(vp);
        }
      if (fc.reg >= 0)
        for (int q = 1; q <= Q; ++q)
          if (x[fc.reg + q - 1] > kLoadTol) {
            pf.regular[fc.link][q] = x[fc.reg + q - 1];
            any = true;
          }
    }
    if (any) plan.flows.push_back(std::move(pf));
  }

  // bus pairs always count as realized, Theta columns or not
  for (const auto& [id, ded] : plan.dedicated) realized[id].insert(ded.begin(), ded.end());
  for (const auto& [id, pairs] : realized)
    plan.realized[id].assign(pairs.begin(), pairs.end());

  validate_plan(s, r, plan, b.mode == Mode::Relaxed);
  return plan;
}

// ---- lazy ordering-row loop --------------------------------------------------

MilpSolution solve_lazy(Build& b, const BackgroundRhythm& r, const SolverOptions& opt) {
  const int Q = b.s->Q();
  for (int round = 0; round < 1000; ++round) {
    MilpSolution sol = solve_milp(b.model, opt);
    if (sol.status != SolveStatus::Optimal) return sol;
    int added = 0;
    for (const auto& [id, base] : b.theta_base) {
      std::vector<std::pair<PlatoonPair, int>> on;
      for (int q = 1; q <= Q; ++q)
        for (int qh = 1; qh <= Q; ++qh) {
          const int col = base + pair_col(Q, q, qh);
          if (sol.x[col] > 0.5) on.push_back({{q, qh}, col});
        }
      for (size_t i = 0; i < on.size(); ++i)
        for (size_t j = i + 1; j < on.size(); ++j)
          if (fifo_conflict(r, id, on[i].first.entry, on[i].first.exit, on[j].first.entry,
                            on[j].first.exit) == 1) {
            b.model.add_row(RowSense::Le, 1, {{on[i].second, 1}, {on[j].second, 1}});
            ++added;
          }
    }
    if (!added) return sol;
  }
  throw SolveError("ordering rows kept appearing; model looks inconsistent");
}

}  // namespace

// ---- public surface ----------------------------------------------------------

std::map<int, double> PathFlow::entry_loads(int link_id) const {
  std::map<int, double> out;
  auto it = mixed.find(link_id);
  if (it != mixed.end())
    for (const auto& [vp, load] : it->second) out[vp.entry] += load;
  return out;
}

std::map<int, double> PathFlow::exit_loads(int link_id) const {
  std::map<int, double> out;
  auto it = mixed.find(link_id);
  if (it != mixed.end())
    for (const auto& [vp, load] : it->second) out[vp.exit] += load;
  return out;
}

MilpModel build_milp_o(const Scenario& s, const BackgroundRhythm& r, BuildInfo* info) {
  return std::move(construct(s, r, Mode::Joint, nullptr, true, info).model);
}

MilpModel build_milp_l(const Scenario& s, const BackgroundRhythm& r,
                       const std::vector<BusItinerary>& buses, BuildInfo* info) {
  return std::move(construct(s, r, Mode::FixedBus, &buses, true, info).model);
}

MilpModel build_lp_l(const Scenario& s, const BackgroundRhythm& r,
                     const std::vector<BusItinerary>& buses, BuildInfo* info) {
  return std::move(construct(s, r, Mode::Relaxed, &buses, false, info).model);
}

std::vector<BusItinerary> pace_itineraries(const Scenario& s, const BackgroundRhythm& r) {
  const int Q = s.Q();
  std::vector<BusItinerary> out;
  out.reserve(s.bus_lines.size());
  for (const BusLine& line : s.bus_lines) {
    BusItinerary it;
    it.line = line.id;
    int entry = 1;
    bool first = true;
    for (int id : s.route_links(line)) {
      if (!first) {
        const int node = s.find_link(id)->from;
        if (std::find(line.stations.begin(), line.stations.end(), node) !=
            line.stations.end()) {
          // shortest dwell that still lines up with the slot grid
          const double dwell = s.T * std::ceil((line.min_dwell.at(node) - kTimeTol) / s.T);
          it.dwell[node] = dwell;
          entry = (entry - 1 + static_cast<int>(std::lround(dwell / s.T))) % Q + 1;
        }
      }
      const int exit = (entry - 1 + r.bus_links.at(id).alpha) % Q + 1;
      it.links[id] = {{entry, exit}, realized_travel_time(r, id, entry, exit).t};
      entry = exit;
      first = false;
    }
    out.push_back(std::move(it));
  }
  return out;
}

std::vector<BusItinerary> aligned_itineraries(const Scenario& s, const BackgroundRhythm& r) {
  std::vector<BusItinerary> out = pace_itineraries(s, r);
  const int Q = s.Q();
  std::map<int, std::map<PlatoonPair, double>> held;  // link -> pair -> bus size
  auto rotated = [&](const PlatoonPair& vp, int rot) {
    return PlatoonPair{(vp.entry - 1 + rot) % Q + 1, (vp.exit - 1 + rot) % Q + 1};
  };
  for (size_t i = 0; i < out.size(); ++i) {
    BusItinerary& it = out[i];
    const double size = s.bus_lines[i].size;
    int best_rot = -1, best_hits = -1;
    for (int rot = 0; rot < Q; ++rot) {
      int hits = 0;
      bool ok = true;
      for (const auto& [id, c] : it.links) {
        if (s.find_link(id)->is_virtual) continue;
        auto hl = held.find(id);
        if (hl == held.end()) continue;
        const PlatoonPair vp = rotated(c.vp, rot);
        auto hp = hl->second.find(vp);
        if (hp != hl->second.end()) {
          if (hp->second + size > s.s_a + kLoadTol)
            ok = false;
          else
            ++hits;
        } else {
          for (const auto& [ovp, osz] : hl->second)
            if (ovp.entry == vp.entry || ovp.exit == vp.exit) ok = false;
        }
        if (!ok) break;
      }
      if (ok && hits > best_hits) {
        best_hits = hits;
        best_rot = rot;
      }
    }
    if (best_rot > 0)
      for (auto& [id, c] : it.links) {
        c.vp = rotated(c.vp, best_rot);
        c.time = realized_travel_time(r, id, c.vp.entry, c.vp.exit).t;
      }
    if (best_rot >= 0)
      for (const auto& [id, c] : it.links)
        if (!s.find_link(id)->is_virtual) held[id][c.vp] += size;
  }
  return out;
}

RchPlan extract_plan(const Scenario& s, const BackgroundRhythm& r, const MilpSolution& sol) {
  Build b = construct(s, r, Mode::Joint, nullptr, false, nullptr);
  return decode(b, r, nullptr, sol);
}

std::vector<double> encode_plan(const Scenario& s, const BackgroundRhythm& r,
                                const RchPlan& plan) {
  validate_plan(s, r, plan, false);
  Build b = construct(s, r, Mode::Joint, nullptr, false, nullptr);
  const Scenario& sc = *b.s;
  const int Q = sc.Q();
  std::vector<double> x(b.model.num_vars(), 0.0);

  for (size_t i = 0; i < b.lines.size(); ++i) {
    const LineCols& lc = b.lines[i];
    const BusItinerary& it = plan.buses[i];
    for (const LineLinkCols& llc : lc.links) {
      const BusLinkChoice& c = it.links.at(llc.link);
      x[llc.entry_col] = c.vp.entry;
      x[llc.exit_col] = c.vp.exit;
      bool hit = false;
      for (const BusPairChoice& p : llc.pairs)
        if (p.vp == c.vp) {
          x[p.col] = 1;
          hit = true;
          break;
        }
      if (!hit)
        throw ValidationError(ln_tag(it.line) + ", " + lk_tag(llc.link) +
                              ": platoon below the bus floor");
    }
    size_t dw = 0;
    for (size_t k = 1; k < lc.links.size() && dw < lc.dwells.size(); ++k) {
      const int node = sc.find_link(lc.links[k].link)->from;
      if (lc.dwells[dw].node != node) continue;
      const LineDwellCols& dc = lc.dwells[dw++];
      const double dwell = it.dwell.at(node);
      const int gap = it.links.at(lc.links[k].link).vp.entry -
                      it.links.at(lc.links[k - 1].link).vp.exit;
      x[dc.time_col] = dwell;
      x[dc.wrap_col] = std::lround((dwell / sc.T - gap) / Q);
    }
  }
  for (const auto& [id, vps] : plan.dedicated) {
    auto dl = b.ded_col.find(id);
    if (dl == b.ded_col.end()) continue;  // virtual link
    for (const PlatoonPair& vp : vps) x[dl->second.at(vp)] = 1;
  }
  for (const auto& [id, vps] : plan.realized) {
    auto tb = b.theta_base.find(id);
    if (tb == b.theta_base.end()) continue;  // virtual link
    for (const PlatoonPair& vp : vps) x[tb->second + pair_col(Q, vp.entry, vp.exit)] = 1;
  }
  for (const PathFlow& pf : plan.flows) {
    const PathCols* pc = nullptr;
    for (const PathCols& cand : b.paths)
      if (cand.demand == pf.demand && cand.links == pf.links) {
        pc = &cand;
        break;
      }
    if (!pc) throw ValidationError("flow path is not a candidate path");
    x[pc->f_col] += pf.rate;
    for (const LinkFlowCols& fc : pc->per_link) {
      auto ml = pf.mixed.find(fc.link);
      if (ml != pf.mixed.end())
        for (const auto& [vp, load] : ml->second) {
          const auto at = std::lower_bound(
              fc.pi.begin(), fc.pi.end(), vp,
              [](const std::pair<PlatoonPair, int>& a, const PlatoonPair& v) {
                return a.first < v;
              });
          if (at == fc.pi.end() || !(at->first == vp))
            throw ValidationError(lk_tag(fc.link) + ": loaded platoon not in the layout");
          x[at->second] += load;
        }
      for (const auto& [q, load] : pf.entry_loads(fc.link)) x[fc.lam + q - 1] += load;
      for (const auto& [qh, load] : pf.exit_loads(fc.link)) x[fc.mu + qh - 1] += load;
      if (fc.reg >= 0) {
        auto rl = pf.regular.find(fc.link);
        if (rl != pf.regular.end())
          for (const auto& [q, load] : rl->second) x[fc.reg + q - 1] += load;
      }
    }
  }
  return x;
}

RchPlan extract_lower_plan(const Scenario& s, const BackgroundRhythm& r,
                           const std::vector<BusItinerary>& buses, const MilpSolution& sol,
                           bool relaxed) {
  Build b = construct(s, r, relaxed ? Mode::Relaxed : Mode::FixedBus, &buses, false, nullptr);
  return decode(b, r, &buses, sol);
}

MilpSolution solve_milp_o(const Scenario& s, const BackgroundRhythm& r,
                          const SolverOptions& opt) {
  Build b = construct(s, r, Mode::Joint, nullptr, false, nullptr);
  SolverOptions o = opt;
  if (o.warm_start.empty() && !s.bus_lines.empty()) {
    // seed the incumbent from pace-shaped itineraries: rank the plain and
    // the platoon-sharing variant by their relaxations, price the winner
    // exactly; the joint optimum can only match or beat it
    SolverOptions seed = opt;
    seed.node_limit = opt.node_limit > 0 ? std::min<int64_t>(opt.node_limit, 5000) : 5000;
    std::vector<std::vector<BusItinerary>> cands;
    try {
      cands.push_back(pace_itineraries(s, r));
      std::vector<BusItinerary> aligned = aligned_itineraries(s, r);
      if (!(aligned == cands.front())) cands.push_back(std::move(aligned));
    } catch (const std::runtime_error&) {
    }
    const std::vector<BusItinerary>* pick = nullptr;
    double best = kInf;
    for (const auto& cand : cands) {
      try {
        double fixed = 0;
        for (size_t i = 0; i < cand.size(); ++i) {
          double trip = 0;
          for (const auto& [id, c] : cand[i].links) trip += c.time;
          for (const auto& [node, dw] : cand[i].dwell) trip += dw;
          fixed += s.bus_lines[i].passengers * trip;
        }
        MilpModel lp = build_lp_l(s, r, cand, nullptr);
        const LpSolution rel = solve_lp(lp, opt);
        if (rel.status != SolveStatus::Optimal) continue;
        const double score = rel.objective + s.omega_p * fixed;
        if (score < best) {
          best = score;
          pick = &cand;
        }
      } catch (const std::runtime_error&) {
      }
    }
    if (pick) {
      try {
        const MilpSolution low = solve_milp_l(s, r, *pick, seed);
        o.warm_start = encode_plan(s, r, extract_lower_plan(s, r, *pick, low, false));
      } catch (const std::runtime_error&) {
        // no fixed-itinerary plan to lean on; solve cold
      }
    }
  }
  return solve_lazy(b, r, o);
}

MilpSolution solve_milp_l(const Scenario& s, const BackgroundRhythm& r,
                          const std::vector<BusItinerary>& buses, const SolverOptions& opt) {
  Build b = construct(s, r, Mode::FixedBus, &buses, false, nullptr);
  return solve_lazy(b, r, opt);
}

void validate_plan(const Scenario& s, const BackgroundRhythm& r, const RchPlan& plan,
                   bool relaxed) {
  const int Q = s.Q();
  auto fail = [](const std::string& what) { throw SolveError(what); };
  auto in_range = [&](const PlatoonPair& vp) {
    return vp.entry >= 1 && vp.entry <= Q && vp.exit >= 1 && vp.exit <= Q;
  };
  auto listed = [](const std::map<int, std::vector<PlatoonPair>>& book, int id,
                   const PlatoonPair& vp) {
    auto it = book.find(id);
    return it != book.end() &&
           std::find(it->second.begin(), it->second.end(), vp) != it->second.end();
  };

  for (const auto& [id, pairs] : plan.realized) {
    const Link* lk = s.find_link(id);
    if (!lk) fail("realized platoons on unknown " + lk_tag(id));
    std::set<int> ins, outs;
    for (const PlatoonPair& vp : pairs) {
      if (!in_range(vp)) fail(lk_tag(id) + ": platoon out of range");
      if (!ins.insert(vp.entry).second && !relaxed && !lk->is_virtual)
        fail(lk_tag(id) + ": entry slot " + std::to_string(vp.entry) + " used twice");
      if (!outs.insert(vp.exit).second && !relaxed && !lk->is_virtual)
        fail(lk_tag(id) + ": exit slot " + std::to_string(vp.exit) + " used twice");
    }
    if (!relaxed && !lk->is_virtual)
      for (size_t i = 0; i < pairs.size(); ++i)
        for (size_t j = i + 1; j < pairs.size(); ++j)
          if (fifo_conflict(r, id, pairs[i].entry, pairs[i].exit, pairs[j].entry,
                            pairs[j].exit) == 1)
            fail(lk_tag(id) + ": realized platoons overtake each other");
  }
  for (const auto& [id, pairs] : plan.dedicated)
    for (const PlatoonPair& vp : pairs)
      if (!listed(plan.realized, id, vp))
        fail(lk_tag(id) + ": dedicated platoon is not realized");

  FixedBusFacts facts;
  try {
    facts = check_itineraries(s, r, plan.buses);
  } catch (const ValidationError& e) {
    fail(e.what());
  }
  for (const auto& [id, pairs] : facts.dedicated)
    for (const auto& [vp, size] : pairs)
      if (!listed(plan.dedicated, id, vp))
        fail(lk_tag(id) + ": bus platoon missing from the dedicated set");
  for (const auto& [id, pairs] : plan.dedicated)
    for (const PlatoonPair& vp : pairs) {
      auto it = facts.dedicated.find(id);
      if (it == facts.dedicated.end() || !it->second.count(vp))
        fail(lk_tag(id) + ": dedicated platoon no bus asked for");
    }

  // flow shape and loads
  std::map<int, std::map<PlatoonPair, double>> mixed_total;
  std::map<int, std::map<int, double>> reg_total;
  std::vector<double> served(s.demands.size(), 0.0);
  for (const PathFlow& pf : plan.flows) {
    if (pf.demand < 0 || pf.demand >= static_cast<int>(s.demands.size()))
      fail("flow for unknown demand");
    const OdDemand& w = s.demands[pf.demand];
    if (pf.rate < -kLoadTol) fail("negative path rate");
    served[pf.demand] += pf.rate;
    if (pf.links.empty()) fail("flow with no links");
    int at = w.origin;
    for (int id : pf.links) {
      const Link* lk = s.find_link(id);
      if (!lk) fail("flow on unknown " + lk_tag(id));
      if (lk->from != at) fail("flow path breaks at node " + std::to_string(at));
      at = lk->to;
    }
    if (at != w.destination) fail("flow path misses its destination");
    for (const auto& [id, loads] : pf.mixed) {
      const Link& lk = *s.find_link(id);
      if (std::find(pf.links.begin(), pf.links.end(), id) == pf.links.end())
        fail("mixed loads off the flow path on " + lk_tag(id));
      for (const auto& [vp, load] : loads) {
        if (!in_range(vp)) fail(lk_tag(id) + ": loaded platoon out of range");
        if (load < -kLoadTol) fail(lk_tag(id) + ": negative platoon load");
        mixed_total[id][vp] += load;
        if (lk.is_virtual) continue;
        if (relaxed) {
          auto d = facts.dedicated.find(id);
          if (d != facts.dedicated.end()) {
            for (const auto& [bvp, size] : d->second)
              if (bvp.entry == vp.entry || bvp.exit == vp.exit)
                fail(lk_tag(id) + ": cars on a bus-held slot");
            if (realized_travel_time(r, id, vp.entry, vp.exit).t >
                facts.slowest.at(id) + kTimeTol)
              fail(lk_tag(id) + ": cars behind the slowest bus");
          }
        } else {
          if (!listed(plan.realized, id, vp))
            fail(lk_tag(id) + ": cars on an unrealized platoon");
          if (listed(plan.dedicated, id, vp)) fail(lk_tag(id) + ": cars on a bus platoon");
        }
      }
    }
    for (const auto& [id, loads] : pf.regular) {
      const Link& lk = *s.find_link(id);
      if (std::find(pf.links.begin(), pf.links.end(), id) == pf.links.end())
        fail("regular loads off the flow path on " + lk_tag(id));
      if (lk.lanes < 2 || lk.is_virtual) fail(lk_tag(id) + ": no regular lane");
      for (const auto& [q, load] : loads) {
        if (q < 1 || q > Q) fail(lk_tag(id) + ": regular slot out of range");
        if (load < -kLoadTol) fail(lk_tag(id) + ": negative regular load");
        reg_total[id][q] += load;
      }
    }
    // conservation along the path
    auto reg_at = [&](int id, int q) {
      auto it = pf.regular.find(id);
      if (it == pf.regular.end()) return 0.0;
      auto jt = it->second.find(q);
      return jt == it->second.end() ? 0.0 : jt->second;
    };
    for (size_t i = 1; i < pf.links.size(); ++i) {
      const int prev = pf.links[i - 1], next = pf.links[i];
      const int alpha = r.links.at(prev).alpha;
      const auto out_prev = pf.exit_loads(prev);
      const auto in_next = pf.entry_loads(next);
      for (int q = 1; q <= Q; ++q) {
        const double a = (out_prev.count(q) ? out_prev.at(q) : 0.0) +
                         reg_at(prev, shift_back(q, alpha, Q));
        const double c = (in_next.count(q) ? in_next.at(q) : 0.0) + reg_at(next, q);
        if (std::abs(a - c) > kLoadTol)
          fail("flow loses vehicles between " + lk_tag(prev) + " and " + lk_tag(next));
      }
    }
    const auto in_first = pf.entry_loads(pf.links.front());
    for (int q = 1; q <= Q; ++q) {
      const double v = (in_first.count(q) ? in_first.at(q) : 0.0) + reg_at(pf.links.front(), q);
      if (std::abs(v - pf.rate) > kLoadTol)
        fail("entrance slot " + std::to_string(q) + " carries " + text::num(v) +
             " instead of " + text::num(pf.rate));
    }
    double leave = 0;
    for (const auto& [q, v] : pf.exit_loads(pf.links.back())) leave += v;
    for (int q = 1; q <= Q; ++q) leave += reg_at(pf.links.back(), q);
    if (std::abs(leave - Q * pf.rate) > kLoadTol * Q)
      fail("flow exits " + text::num(leave) + " of " + text::num(Q * pf.rate));
  }
  for (size_t wi = 0; wi < s.demands.size(); ++wi)
    if (std::abs(served[wi] - s.demands[wi].rate) > kLoadTol)
      fail("demand " + std::to_string(wi) + " served " + text::num(served[wi]) + " of " +
           text::num(s.demands[wi].rate));
  for (const auto& [id, loads] : mixed_total) {
    if (s.find_link(id)->is_virtual) continue;
    for (const auto& [vp, load] : loads)
      if (load > s.s_a + kLoadTol)
        fail(lk_tag(id) + ": platoon load " + text::num(load) + " above " + text::num(s.s_a));
  }
  for (const auto& [id, loads] : reg_total) {
    const Link& lk = *s.find_link(id);
    for (const auto& [q, load] : loads)
      if (load > s.s_a * (lk.lanes - 1) + kLoadTol)
        fail(lk_tag(id) + ": regular slot load " + text::num(load) + " above " +
             text::num(s.s_a * (lk.lanes - 1)));
  }
}

ObjectiveBreakdown evaluate_objective(const Scenario& s, const BackgroundRhythm& r,
                                      const RchPlan& plan, double omega) {
  const int Q = s.Q();
  ObjectiveBreakdown out;
  out.omega = omega;
  for (const PathFlow& pf : plan.flows) {
    for (const auto& [id, loads] : pf.mixed)
      for (const auto& [vp, load] : loads)
        out.car_cost += load * realized_travel_time(r, id, vp.entry, vp.exit).t;
    for (const auto& [id, loads] : pf.regular) {
      const double ta = r.links.at(id).time;
      for (const auto& [q, load] : loads) out.car_cost += load * ta;
    }
  }
  for (const BusItinerary& it : plan.buses) {
    const BusLine* line = nullptr;
    for (const BusLine& l : s.bus_lines)
      if (l.id == it.line) line = &l;
    if (!line) throw SolveError("itinerary for unknown " + ln_tag(it.line));
    double trip = 0;
    for (const auto& [id, c] : it.links) trip += c.time;
    for (const auto& [node, dwell] : it.dwell) trip += dwell;
    out.bus_cost += line->passengers * trip;
  }
  out.combined = (1 - omega) * out.car_cost + omega * out.bus_cost;

  for (const OdDemand& w : s.demands) {
    double best = kInf;
    if (w.candidate_paths.empty()) {
      for (const Path& p : k_shortest_paths(s, w.origin, w.destination, 3)) {
        double pace = 0;
        for (int id : p.links) pace += r.links.at(id).time;
        best = std::min(best, pace);
      }
    }
    for (const auto& path : w.candidate_paths) {
      double pace = 0;
      for (int id : path) pace += r.links.at(id).time;
      best = std::min(best, pace);
    }
    if (best < kInf) out.car_floor += Q * w.rate * best;
  }
  for (const BusLine& line : s.bus_lines) {
    double trip = 0;
    for (int id : s.route_links(line)) trip += r.bus_links.at(id).time;
    for (const auto& [node, dwell] : line.min_dwell) trip += dwell;
    out.bus_floor += line.passengers * trip;
  }
  if (out.car_floor > 0) out.car_gap = (out.car_cost - out.car_floor) / out.car_floor;
  if (out.bus_floor > 0) out.bus_gap = (out.bus_cost - out.bus_floor) / out.bus_floor;
  const double floor = out.car_floor + out.bus_floor;
  if (floor > 0) out.total_gap = (out.table_total() - floor) / floor;
  return out;
}

// ---- plan text ----------------------------------------------------------------

void write_plan(const RchPlan& p, std::ostream& out) {
  out << "plan 1\n";
  for (const auto& [id, pairs] : p.realized)
    for (const PlatoonPair& vp : pairs)
      out << "realized " << id << ' ' << vp.entry << ' ' << vp.exit << '\n';
  for (const auto& [id, pairs] : p.dedicated)
    for (const PlatoonPair& vp : pairs)
      out << "dedicated " << id << ' ' << vp.entry << ' ' << vp.exit << '\n';
  for (const BusItinerary& it : p.buses) {
    out << "bus " << it.line << '\n';
    for (const auto& [id, c] : it.links)
      out << "  vp " << id << ' ' << c.vp.entry << ' ' << c.vp.exit << ' '
          << text::num(c.time) << '\n';
    for (const auto& [node, dwell] : it.dwell)
      out << "  dwell " << node << ' ' << text::num(dwell) << '\n';
  }
  for (const PathFlow& pf : p.flows) {
    out << "flow " << pf.demand << " rate " << text::num(pf.rate) << " links ";
    for (size_t i = 0; i < pf.links.size(); ++i) out << (i ? "," : "") << pf.links[i];
    out << '\n';
    for (const auto& [id, loads] : pf.mixed)
      for (const auto& [vp, load] : loads)
        out << "  mixed " << id << ' ' << vp.entry << ' ' << vp.exit << ' '
            << text::num(load) << '\n';
    for (const auto& [id, loads] : pf.regular)
      for (const auto& [q, load] : loads)
        out << "  regular " << id << ' ' << q << ' ' << text::num(load) << '\n';
  }
}

RchPlan parse_plan(std::istream& in) {
  text::Cursor cur{in};
  std::string line;
  if (!cur.next(line)) throw ParseError("empty plan file");
  {
    auto tok = text::split_ws(line);
    if (tok.size() != 2 || tok[0] != "plan" || tok[1] != "1")
      cur.die("expected 'plan 1', got '" + line + "'");
  }
  RchPlan p;
  BusItinerary* bus = nullptr;
  PathFlow* flow = nullptr;
  while (cur.next(line)) {
    const auto tok = text::split_ws(line);
    const std::string& key = tok[0];
    auto want = [&](size_t n) {
      if (tok.size() != n) cur.die("'" + key + "' takes " + std::to_string(n - 1) + " fields");
    };
    if (key == "realized" || key == "dedicated") {
      want(4);
      PlatoonPair vp{text::parse_int(cur, tok[2]), text::parse_int(cur, tok[3])};
      auto& book = key == "realized" ? p.realized : p.dedicated;
      book[text::parse_int(cur, tok[1])].push_back(vp);
    } else if (key == "bus") {
      want(2);
      p.buses.push_back({text::parse_int(cur, tok[1]), {}, {}});
      bus = &p.buses.back();
      flow = nullptr;
    } else if (key == "vp") {
      want(5);
      if (!bus) cur.die("'vp' outside a bus block");
      bus->links[text::parse_int(cur, tok[1])] = {
          {text::parse_int(cur, tok[2]), text::parse_int(cur, tok[3])},
          text::parse_num(cur, tok[4])};
    } else if (key == "dwell") {
      want(3);
      if (!bus) cur.die("'dwell' outside a bus block");
      bus->dwell[text::parse_int(cur, tok[1])] = text::parse_num(cur, tok[2]);
    } else if (key == "flow") {
      want(6);
      if (tok[2] != "rate" || tok[4] != "links") cur.die("malformed flow header");
      PathFlow pf;
      pf.demand = text::parse_int(cur, tok[1]);
      pf.rate = text::parse_num(cur, tok[3]);
      pf.links = text::parse_int_list(cur, tok[5]);
      p.flows.push_back(std::move(pf));
      flow = &p.flows.back();
      bus = nullptr;
    } else if (key == "mixed") {
      want(5);
      if (!flow) cur.die("'mixed' outside a flow block");
      flow->mixed[text::parse_int(cur, tok[1])]
                 [{text::parse_int(cur, tok[2]), text::parse_int(cur, tok[3])}] =
          text::parse_num(cur, tok[4]);
    } else if (key == "regular") {
      want(4);
      if (!flow) cur.die("'regular' outside a flow block");
      flow->regular[text::parse_int(cur, tok[1])][text::parse_int(cur, tok[2])] =
          text::parse_num(cur, tok[3]);
    } else {
      cur.die("unknown record '" + key + "'");
    }
  }
  return p;
}

void save_plan(const RchPlan& p, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  write_plan(p, out);
  if (!out.flush()) throw IoError("short write to " + path);
}

RchPlan load_plan(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path);
  return parse_plan(in);
}

}  // namespace rch
