#include "rch/bilevel.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <ostream>
#include <set>
#include <string>

#include "rch/errors.hpp"
#include "text_util.hpp"

namespace rch {
namespace {

constexpr double kTimeTol = 1e-6;
constexpr double kDust = 1e-9;

std::string lk_tag(int link) { return "link " + std::to_string(link); }

std::string vp_tag(const PlatoonPair& vp) {
  return std::to_string(vp.entry) + "->" + std::to_string(vp.exit);
}

// Dwell floor snapped up to the slot grid.
double dwell_floor(const Scenario& s, const BusLine& line, int node) {
  return s.T * std::ceil((line.min_dwell.at(node) - kTimeTol) / s.T);
}

// Largest on-grid value below the long cycle, the shared variable ceiling.
double grid_top(const Scenario& s) { return s.T * std::floor((s.H - s.epsilon) / s.T); }

// Passenger cost of a fixed itinerary set: link times plus dwells.
double fixed_bus_cost(const Scenario& s, const std::vector<BusItinerary>& its) {
  double total = 0;
  for (size_t i = 0; i < its.size(); ++i) {
    double t = 0;
    for (const auto& [id, c] : its[i].links) t += c.time;
    for (const auto& [node, d] : its[i].dwell) t += d;
    total += s.bus_lines[i].passengers * t;
  }
  return total;
}

// Relaxed lower-level price of an upper solution; infinity when the lower
// model rejects the itineraries or has no feasible assignment.
double price(const Scenario& s, const BackgroundRhythm& r, const UpperSolution& u) {
  try {
    const std::vector<BusItinerary> its = realize_upper(s, r, u);
    MilpModel lp = build_lp_l(s, r, its);
    const LpSolution rel = solve_lp(lp);
    if (rel.status != SolveStatus::Optimal) return kInf;
    return rel.objective + s.omega_p * fixed_bus_cost(s, its);
  } catch (const ValidationError&) {
    return kInf;
  }
}

// Flat key of an upper solution for the repeat-neighbor cache.
std::vector<double> flat_key(const Scenario& s, const UpperSolution& u) {
  std::vector<double> key;
  for (const BusLine& line : s.bus_lines) {
    auto off = u.offset.find(line.id);
    key.push_back(off == u.offset.end() ? 0.0 : off->second);
    auto dw = u.dwell.find(line.id);
    for (int node : line.stations) {
      double d = dwell_floor(s, line, node);
      if (dw != u.dwell.end())
        if (auto it = dw->second.find(node); it != dw->second.end()) d = it->second;
      key.push_back(d);
    }
  }
  return key;
}

// ---- FIFO repair ---------------------------------------------------------

// One bundle of vehicles following its flow's path; per link either a mixed
// platoon pair or a regular-lane entry slot.
struct Choice {
  bool on_mixed = true;
  PlatoonPair vp;
  int reg = 0;

  friend bool operator==(const Choice&, const Choice&) = default;
};

struct Strand {
  int flow = 0;
  double amount = 0;
  std::vector<Choice> choices;  // one per link of the flow's path
};

// Splits every flow into strands by walking its loads link by link, always
// taking the heaviest continuation.  Conservation makes the walk total; any
// numerical dust below kDust is dropped.
std::vector<Strand> decompose(const Scenario& s, const BackgroundRhythm& r,
                              const RchPlan& plan) {
  const int Q = s.Q();
  std::vector<Strand> out;
  for (size_t fi = 0; fi < plan.flows.size(); ++fi) {
    const PathFlow& pf = plan.flows[fi];
    const size_t n = pf.links.size();
    if (n == 0) continue;
    std::vector<std::map<PlatoonPair, double>> mix(n);
    std::vector<std::map<int, double>> reg(n);
    for (size_t p = 0; p < n; ++p) {
      if (auto it = pf.mixed.find(pf.links[p]); it != pf.mixed.end()) mix[p] = it->second;
      if (auto it = pf.regular.find(pf.links[p]); it != pf.regular.end()) reg[p] = it->second;
    }
    auto arrival = [&](const Choice& c, size_t p) {
      if (c.on_mixed) return c.vp.exit;
      return (c.reg - 1 + r.links.at(pf.links[p]).alpha) % Q + 1;
    };
    // heaviest choice at position p entering slot v (v = 0 means any)
    auto pick = [&](size_t p, int v, Choice& c) {
      double best = kDust;
      bool found = false;
      for (const auto& [vp, amt] : mix[p])
        if ((v == 0 || vp.entry == v) && amt > best) {
          best = amt;
          c = {true, vp, 0};
          found = true;
        }
      for (const auto& [slot, amt] : reg[p])
        if ((v == 0 || slot == v) && amt > best) {
          best = amt;
          c = {false, {}, slot};
          found = true;
        }
      return found;
    };
    while (true) {
      Choice c;
      if (!pick(0, 0, c)) break;
      Strand st;
      st.flow = static_cast<int>(fi);
      st.choices.push_back(c);
      double m = c.on_mixed ? mix[0][c.vp] : reg[0][c.reg];
      bool dead = false;
      int v = arrival(c, 0);
      for (size_t p = 1; p < n; ++p) {
        if (!pick(p, v, c)) {
          dead = true;
          break;
        }
        m = std::min(m, c.on_mixed ? mix[p][c.vp] : reg[p][c.reg]);
        st.choices.push_back(c);
        v = arrival(c, p);
      }
      auto drain = [&](size_t p, const Choice& ch, double amt) {
        double& res = ch.on_mixed ? mix[p][ch.vp] : reg[p][ch.reg];
        res -= amt;
        if (res <= kDust) {
          if (ch.on_mixed)
            mix[p].erase(ch.vp);
          else
            reg[p].erase(ch.reg);
        }
      };
      if (dead) {
        // conservation dust: retire the start choice and move on
        drain(0, st.choices.front(), kInf);
        continue;
      }
      for (size_t p = 0; p < n; ++p) drain(p, st.choices[p], m);
      st.amount = m;
      out.push_back(std::move(st));
    }
  }
  return out;
}

// Absolute exit event of a pair, in slots counted from its entry cycle.
long exit_stamp(const BackgroundRhythm& r, int link, const PlatoonPair& vp) {
  return vp.exit + static_cast<long>(r.Q) * realized_travel_time(r, link, vp.entry, vp.exit).beta;
}

// Per-flow load movements accumulated by the swaps.
struct FlowDelta {
  std::map<int, std::map<PlatoonPair, double>> mixed;
  std::map<int, std::map<int, double>> reg;

  void bump(int link, const Choice& c, double v) {
    if (c.on_mixed)
      mixed[link][c.vp] += v;
    else
      reg[link][c.reg] += v;
  }
};

struct RepairState {
  const Scenario& s;
  const BackgroundRhythm& r;
  const RchPlan& plan;
  std::vector<Strand> strands;
  std::map<int, std::map<PlatoonPair, double>> totals;  // link -> pair -> load
  std::vector<FlowDelta> delta;
  int swaps = 0;

  bool dedicated_holds(int link, const PlatoonPair& vp) const {
    auto it = plan.dedicated.find(link);
    return it != plan.dedicated.end() &&
           std::find(it->second.begin(), it->second.end(), vp) != it->second.end();
  }
};

// Mixed-lane strand stops on one link, rebuilt after every swap.
struct Stop {
  size_t strand = 0;
  size_t pos = 0;
};

std::vector<Stop> stops_on(const RepairState& st, int link) {
  std::vector<Stop> out;
  for (size_t i = 0; i < st.strands.size(); ++i) {
    const Strand& sd = st.strands[i];
    if (sd.amount <= kDust) continue;
    const std::vector<int>& links = st.plan.flows[sd.flow].links;
    for (size_t p = 0; p < sd.choices.size(); ++p)
      if (links[p] == link && sd.choices[p].on_mixed) out.push_back({i, p});
  }
  return out;
}

// Trades the tails of two crossing strands on `link` when that is legal and
// cost neutral; on success updates strands, totals and deltas.  A skip
// reason is appended otherwise.
bool try_swap(RepairState& st, int link, const Stop& a, const Stop& b,
              std::set<std::string>* skipped) {
  Strand& s1 = st.strands[a.strand];
  Strand& s2 = st.strands[b.strand];
  const PathFlow& f1 = st.plan.flows[s1.flow];
  const PathFlow& f2 = st.plan.flows[s2.flow];
  const PlatoonPair p1 = s1.choices[a.pos].vp;
  const PlatoonPair p2 = s2.choices[b.pos].vp;
  auto skip = [&](const std::string& why) {
    if (skipped)
      skipped->insert(lk_tag(link) + ": " + vp_tag(p1) + " and " + vp_tag(p2) + " cross, " + why);
    return false;
  };

  if (st.s.demands[f1.demand].destination != st.s.demands[f2.demand].destination)
    return skip("destinations differ");
  if (p1.entry == p2.entry) return skip("platoons share an entry slot");
  const long x1 = exit_stamp(st.r, link, p1);
  const long x2 = exit_stamp(st.r, link, p2);
  if (x1 == x2) return skip("platoons share an exit event");
  if (!std::equal(f1.links.begin() + a.pos + 1, f1.links.end(), f2.links.begin() + b.pos + 1,
                  f2.links.end()))
    return skip("paths diverge downstream");

  const PlatoonPair n1{p1.entry, p2.exit};
  const PlatoonPair n2{p2.entry, p1.exit};
  // a crossing guarantees the traded exits stay within one long cycle of
  // each entry, so the canonical wrap lands on the other platoon's event
  if (exit_stamp(st.r, link, n1) != x2 || exit_stamp(st.r, link, n2) != x1)
    return skip("exits drift across cycles");
  if (st.dedicated_holds(link, n1) || st.dedicated_holds(link, n2))
    return skip("a bus holds the traded platoon");

  auto spare = [&](const PlatoonPair& vp) {
    auto lt = st.totals.find(link);
    const double used =
        lt != st.totals.end() && lt->second.count(vp) ? lt->second.at(vp) : 0.0;
    return st.s.s_a - used;
  };
  const double m = std::min({s1.amount, s2.amount, spare(n1), spare(n2)});
  if (m <= kDust) return skip("no spare platoon capacity");

  auto& lt = st.totals[link];
  auto take = [&](const PlatoonPair& vp, double v) {
    double& load = lt[vp];
    load += v;
    if (load <= kDust) lt.erase(vp);
  };
  take(p1, -m);
  take(p2, -m);
  take(n1, m);
  take(n2, m);

  FlowDelta& d1 = st.delta[s1.flow];
  FlowDelta& d2 = st.delta[s2.flow];
  d1.bump(link, {true, p1, 0}, -m);
  d1.bump(link, {true, n1, 0}, m);
  d2.bump(link, {true, p2, 0}, -m);
  d2.bump(link, {true, n2, 0}, m);
  for (size_t t = a.pos + 1; t < f1.links.size(); ++t) {
    const size_t u = b.pos + (t - a.pos);
    d1.bump(f1.links[t], s1.choices[t], -m);
    d1.bump(f1.links[t], s2.choices[u], m);
    d2.bump(f2.links[u], s2.choices[u], -m);
    d2.bump(f2.links[u], s1.choices[t], m);
  }

  Strand t1{s1.flow, m, {s1.choices.begin(), s1.choices.begin() + a.pos}};
  t1.choices.push_back({true, n1, 0});
  t1.choices.insert(t1.choices.end(), s2.choices.begin() + b.pos + 1, s2.choices.end());
  Strand t2{s2.flow, m, {s2.choices.begin(), s2.choices.begin() + b.pos}};
  t2.choices.push_back({true, n2, 0});
  t2.choices.insert(t2.choices.end(), s1.choices.begin() + a.pos + 1, s1.choices.end());
  s1.amount -= m;
  s2.amount -= m;
  st.strands.push_back(std::move(t1));
  st.strands.push_back(std::move(t2));
  ++st.swaps;
  return true;
}

// One greedy sweep over a link: every crossing is tried once against the
// current strand set.  Returns the number of swaps applied.
int sweep_link(RepairState& st, int link, std::set<std::string>* skipped) {
  int applied = 0;
  const std::vector<Stop> stops = stops_on(st, link);
  for (size_t i = 0; i < stops.size(); ++i)
    for (size_t j = i + 1; j < stops.size(); ++j) {
      // stops index the pre-sweep strand list; swapped tails re-enter the
      // next sweep via the fresh stop scan
      const Strand& s1 = st.strands[stops[i].strand];
      const Strand& s2 = st.strands[stops[j].strand];
      if (s1.amount <= kDust || s2.amount <= kDust) continue;
      const PlatoonPair p1 = s1.choices[stops[i].pos].vp;
      const PlatoonPair p2 = s2.choices[stops[j].pos].vp;
      if (p1 == p2) continue;
      if (fifo_conflict(st.r, link, p1.entry, p1.exit, p2.entry, p2.exit) != 1) continue;
      if (try_swap(st, link, stops[i], stops[j], skipped)) ++applied;
    }
  return applied;
}

}  // namespace

// ---- public surface ----------------------------------------------------------

std::vector<BusItinerary> realize_upper(const Scenario& s, const BackgroundRhythm& r,
                                        const UpperSolution& u) {
  const int Q = s.Q();
  std::vector<BusItinerary> out;
  out.reserve(s.bus_lines.size());
  for (const BusLine& line : s.bus_lines) {
    BusItinerary it;
    it.line = line.id;
    auto uo = u.offset.find(line.id);
    const double off = uo == u.offset.end() ? 0.0 : uo->second;
    const auto ud = u.dwell.find(line.id);
    int entry = ((static_cast<int>(std::lround(off / s.T)) % Q) + Q) % Q + 1;
    bool first = true;
    for (int id : s.route_links(line)) {
      if (!first) {
        const int node = s.find_link(id)->from;
        if (std::find(line.stations.begin(), line.stations.end(), node) !=
            line.stations.end()) {
          double d = dwell_floor(s, line, node);
          if (ud != u.dwell.end())
            if (auto un = ud->second.find(node); un != ud->second.end()) d = un->second;
          it.dwell[node] = d;
          entry = (entry - 1 + static_cast<int>(std::lround(d / s.T))) % Q + 1;
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

UpperSolution initial_bus_plan(const Scenario& s, const BackgroundRhythm& r) {
  UpperSolution u;
  const std::vector<BusItinerary> its = aligned_itineraries(s, r);
  for (size_t i = 0; i < its.size(); ++i) {
    const std::vector<int> route = s.route_links(s.bus_lines[i]);
    u.offset[its[i].line] = (its[i].links.at(route.front()).vp.entry - 1) * s.T;
    u.dwell[its[i].line] = its[i].dwell;
  }
  return u;
}

UpperSolution local_search_step(const Scenario& s, const UpperSolution& base,
                                double step, double p_low, double p_high, Rng& rng) {
  UpperSolution out = base;
  const double top = grid_top(s);
  auto moved = [&](double v) {
    const double p = rng.next_double();
    if (p < p_low) return v - step;
    if (p > p_high) return v + step;
    return v;
  };
  for (const BusLine& line : s.bus_lines) {
    double& off = out.offset[line.id];
    off = std::clamp(moved(off), 0.0, top);
    auto& dw = out.dwell[line.id];
    for (int node : line.stations) {
      const double lo = dwell_floor(s, line, node);
      auto it = dw.try_emplace(node, lo).first;
      it->second = std::clamp(moved(it->second), lo, std::max(lo, top));
    }
  }
  return out;
}

RepairOutcome repair_fifo_violations(const Scenario& s, const BackgroundRhythm& r,
                                     const RchPlan& plan) {
  RepairState st{s, r, plan, decompose(s, r, plan), {}, {}, 0};
  st.delta.resize(plan.flows.size());
  for (const Strand& sd : st.strands) {
    const std::vector<int>& links = plan.flows[sd.flow].links;
    for (size_t p = 0; p < sd.choices.size(); ++p)
      if (sd.choices[p].on_mixed && !s.find_link(links[p])->is_virtual)
        st.totals[links[p]][sd.choices[p].vp] += sd.amount;
  }
  std::vector<int> links;
  for (const auto& [id, pairs] : st.totals) links.push_back(id);

  for (int pass = 0; pass < 64; ++pass) {
    int applied = 0;
    for (int id : links) applied += sweep_link(st, id, nullptr);
    if (applied == 0) break;
  }
  std::set<std::string> skipped;
  for (int id : links) sweep_link(st, id, &skipped);

  RepairOutcome out;
  out.swaps = st.swaps;
  out.skipped.assign(skipped.begin(), skipped.end());
  if (st.swaps == 0) {
    out.plan = plan;
    return out;
  }

  RchPlan fixed = plan;
  std::set<int> touched;
  for (size_t fi = 0; fi < fixed.flows.size(); ++fi) {
    PathFlow& pf = fixed.flows[fi];
    for (const auto& [id, moves] : st.delta[fi].mixed) {
      touched.insert(id);
      auto& loads = pf.mixed[id];
      for (const auto& [vp, v] : moves) {
        double& load = loads[vp];
        load += v;
        if (load < -1e-6) throw SolveError(lk_tag(id) + ": repair drove a load negative");
        if (load <= kDust) loads.erase(vp);
      }
      if (loads.empty()) pf.mixed.erase(id);
    }
    for (const auto& [id, moves] : st.delta[fi].reg) {
      auto& loads = pf.regular[id];
      for (const auto& [slot, v] : moves) {
        double& load = loads[slot];
        load += v;
        if (load < -1e-6) throw SolveError(lk_tag(id) + ": repair drove a load negative");
        if (load <= kDust) loads.erase(slot);
      }
      if (loads.empty()) pf.regular.erase(id);
    }
  }
  // realized sets of touched links shrink to the platoons still in use
  for (int id : touched) {
    std::set<PlatoonPair> live;
    if (auto it = fixed.dedicated.find(id); it != fixed.dedicated.end())
      live.insert(it->second.begin(), it->second.end());
    for (const PathFlow& pf : fixed.flows)
      if (auto it = pf.mixed.find(id); it != pf.mixed.end())
        for (const auto& [vp, load] : it->second)
          if (load > kDust) live.insert(vp);
    fixed.realized[id].assign(live.begin(), live.end());
  }
  out.plan = std::move(fixed);
  return out;
}

BilevelResult run_bilevel(const Scenario& s, const BackgroundRhythm& r, const VnsParams& p) {
  VnsParams vp = p;
  if (vp.step0 <= 0) vp.step0 = s.T;
  if (vp.step_gain <= 0) vp.step_gain = s.T;
  if (vp.step_max <= 0) vp.step_max = s.H;
  if (vp.batch < 1) vp.batch = 1;
  if (vp.stagnation < 1) vp.stagnation = 1;
  if (vp.iterations < 0) vp.iterations = 0;

  UpperSolution best = initial_bus_plan(s, r);
  double incumbent = price(s, r, best);
  if (!std::isfinite(incumbent))
    throw SolveError("the collaborative start has no feasible assignment");

  BilevelResult out;
  out.log.reserve(vp.iterations + 1);
  double step = vp.step0;
  out.log.push_back({0, incumbent, incumbent, step});

  Rng rng(vp.seed);
  std::map<std::vector<double>, double> seen;
  seen.emplace(flat_key(s, best), incumbent);
  int barren = 0;
  for (int k = 1; k <= vp.iterations; ++k) {
    // instruction parameters drift toward 1/2: moves start selective and
    // end up stirring every variable around the incumbent
    const double frac = static_cast<double>(k) / vp.iterations;
    const double pl = vp.p_low * (1 - frac) + 0.5 * frac;
    const double pu = vp.p_high * (1 - frac) + 0.5 * frac;

    std::vector<UpperSolution> cand(vp.batch);
    std::vector<double> score(vp.batch, kInf);
    std::vector<int> miss;
    for (int b = 0; b < vp.batch; ++b) {
      cand[b] = local_search_step(s, best, step, pl, pu, rng);
      if (auto it = seen.find(flat_key(s, cand[b])); it != seen.end())
        score[b] = it->second;
      else
        miss.push_back(b);
    }
    if (miss.size() == 1) {
      score[miss[0]] = price(s, r, cand[miss[0]]);
    } else if (!miss.empty()) {
      std::vector<std::future<double>> jobs;
      jobs.reserve(miss.size());
      for (int b : miss)
        jobs.push_back(std::async(std::launch::async,
                                  [&, b] { return price(s, r, cand[b]); }));
      for (size_t i = 0; i < miss.size(); ++i) score[miss[i]] = jobs[i].get();
    }
    for (int b : miss) seen.emplace(flat_key(s, cand[b]), score[b]);
    if (seen.size() > 65536) seen.clear();

    int pick = 0;
    for (int b = 1; b < vp.batch; ++b)
      if (score[b] < score[pick]) pick = b;
    if (score[pick] < incumbent) {
      incumbent = score[pick];
      best = std::move(cand[pick]);
      step = vp.step0;
      barren = 0;
    } else if (++barren >= vp.stagnation) {
      step = std::min(step + vp.step_gain, vp.step_max);
      barren = 0;
    }
    out.log.push_back({k, score[pick], incumbent, step});
  }

  const std::vector<BusItinerary> its = realize_upper(s, r, best);
  SolverOptions opt;
  opt.node_limit = vp.exact_nodes;
  const MilpSolution exact = solve_milp_l(s, r, its, opt);
  RepairOutcome rep = repair_fifo_violations(s, r, extract_lower_plan(s, r, its, exact, false));
  out.plan = std::move(rep.plan);
  out.upper = std::move(best);
  out.objective = evaluate_objective(s, r, out.plan, s.omega_p);
  out.repairs = rep.swaps;
  out.notes = std::move(rep.skipped);
  return out;
}

void write_iteration_log(const std::vector<VnsIterate>& log, std::ostream& out) {
  out << "iteration,candidate,incumbent,step\n";
  for (const VnsIterate& it : log) {
    out << it.iteration << ',';
    if (std::isfinite(it.candidate))
      out << text::num(it.candidate);
    else
      out << "inf";
    out << ',' << text::num(it.incumbent) << ',' << text::num(it.step) << '\n';
  }
}

}  // namespace rch
