#include "rch/solver.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <ostream>
#include <queue>
#include <sstream>

#include "rch/errors.hpp"

namespace rch {

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::Infeasible: return "infeasible";
    case SolveStatus::Unbounded: return "unbounded";
    case SolveStatus::IterationLimit: return "iteration-limit";
    case SolveStatus::NodeLimit: return "node-limit";
  }
  return "unknown";
}

int MilpModel::add_var(double lb, double ub, double obj, VarKind kind, std::string name) {
  if (kind == VarKind::Binary) {
    lb = std::max(lb, 0.0);
    ub = std::min(ub, 1.0);
  }
  if (lb > ub) throw ValidationError("variable with empty domain: " + name);
  lb_.push_back(lb);
  ub_.push_back(ub);
  obj_.push_back(obj);
  kind_.push_back(kind);
  names_.push_back(std::move(name));
  return static_cast<int>(obj_.size()) - 1;
}

void MilpModel::add_row(RowSense sense, double rhs,
                        std::vector<std::pair<int, double>> terms, std::string name) {
  std::sort(terms.begin(), terms.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<std::pair<int, double>> merged;
  merged.reserve(terms.size());
  for (const auto& [col, coef] : terms) {
    if (col < 0 || col >= num_vars()) throw ValidationError("row references unknown column");
    if (!merged.empty() && merged.back().first == col) {
      merged.back().second += coef;
    } else {
      merged.emplace_back(col, coef);
    }
  }
  std::erase_if(merged, [](const auto& t) { return t.second == 0.0; });
  rows_.push_back(Row{std::move(merged), sense, rhs, std::move(name)});
}

void MilpModel::set_bounds(int var, double lb, double ub) {
  if (lb > ub) throw ValidationError("set_bounds would empty the domain");
  lb_[var] = lb;
  ub_[var] = ub;
}

void MilpModel::set_objective(int var, double coeff) { obj_[var] = coeff; }

namespace {

constexpr double kDualTol = 1e-9;    // reduced-cost threshold
constexpr double kPivotTol = 1e-9;   // smallest acceptable pivot element
constexpr double kZeroTol = 1e-11;   // drop threshold for eta entries

enum class Stat : uint8_t { Lower, Upper, Basic, Free };

enum class RunStatus : uint8_t {
  Optimal,
  Infeasible,
  Unbounded,
  IterLimit,
  NeedPrimal,  // dual warm start was not dual-feasible
  Cutoff,      // objective passed the incumbent cutoff (branch and bound)
};

using SpMat = Eigen::SparseMatrix<double>;

// Bounded-variable revised simplex over a lazily activated row subset.
// Equality rows are active from the start; inequality rows join the working
// set once the current optimum violates them.  The basis is factorized with
// a sparse LU (one factor for B, one for B^T) and updated in product form
// between refactorizations.
class SimplexEngine {
 public:
  SimplexEngine(const MilpModel& m, const SolverOptions& opt)
      : model_(m), opt_(opt), n_(m.num_vars()), rows_(m.num_rows()) {
    const int total = n_ + rows_;
    lb_.resize(total);
    ub_.resize(total);
    cost_.assign(total, 0.0);
    const double sign = m.minimize ? 1.0 : -1.0;
    for (int j = 0; j < n_; ++j) {
      lb_[j] = m.lower(j);
      ub_[j] = m.upper(j);
      cost_[j] = sign * m.objective(j);
    }
    for (int i = 0; i < rows_; ++i) {
      const int sc = n_ + i;
      switch (m.row(i).sense) {
        case RowSense::Le: lb_[sc] = 0.0; ub_[sc] = kInf; break;
        case RowSense::Ge: lb_[sc] = -kInf; ub_[sc] = 0.0; break;
        case RowSense::Eq: lb_[sc] = 0.0; ub_[sc] = 0.0; break;
      }
    }
    cols_.resize(n_);
    for (int i = 0; i < rows_; ++i)
      for (const auto& [c, a] : m.row(i).terms) cols_[c].emplace_back(i, a);
    row_pos_.assign(rows_, -1);
    base_lb_ = lb_;
    base_ub_ = ub_;
  }

  // Intersects with the current bounds (branching chains accumulate).
  void tighten_col_bounds(int j, double lo, double hi) {
    lb_[j] = std::max(lb_[j], lo);
    ub_[j] = std::min(ub_[j], hi);
  }
  void reset_col_bounds(int j) {
    lb_[j] = base_lb_[j];
    ub_[j] = base_ub_[j];
  }
  bool bounds_consistent() const {
    for (int j = 0; j < n_; ++j)
      if (lb_[j] > ub_[j]) return false;
    return true;
  }
  double col_value(int j) const { return x_[j]; }
  int64_t iterations() const { return iters_; }

  // Solves to optimality over the full row set.  `cutoff`: abandon as soon
  // as the objective provably exceeds it (minimization).  Only the dual
  // sweep may bail out this way: its objective climbs toward the optimum
  // from below, so crossing the cutoff is a proof.  The primal objective
  // falls from above and proves nothing until it converges.
  RunStatus solve(double cutoff = kInf) {
    if (!bounds_consistent()) return RunStatus::Infeasible;
    RunStatus st;
    if (!basis_ready_) {
      cold_start();
      st = primal();
    } else {
      reposition_nonbasics();
      refactor();
      st = dual(cutoff);
      if (st == RunStatus::NeedPrimal) st = primal();
    }
    // Lazy outer loop: pull violated inactive rows into the working set.
    while (true) {
      if (st == RunStatus::Optimal) {
        if (activate_violated() == 0) return RunStatus::Optimal;
        st = dual(cutoff);
        if (st == RunStatus::NeedPrimal) st = primal();
      } else if (st == RunStatus::Unbounded) {
        if (activate_ray_blockers() == 0) return RunStatus::Unbounded;
        st = primal();
      } else {
        return st;  // Infeasible / IterLimit / Cutoff
      }
    }
  }

  double objective() const {
    double z = 0.0;
    for (int j = 0; j < n_; ++j) z += cost_[j] * x_[j];
    return z;
  }

  std::vector<double> solution() const {
    return std::vector<double>(x_.begin(), x_.begin() + n_);
  }

  void invalidate_basis() { basis_ready_ = false; }

 private:
  const MilpModel& model_;
  SolverOptions opt_;
  int n_ = 0;
  int rows_ = 0;

  std::vector<double> lb_, ub_, cost_;
  std::vector<double> base_lb_, base_ub_;
  std::vector<std::vector<std::pair<int, double>>> cols_;  // structural columns

  // Working set and basis.
  std::vector<int> act_;        // basis position -> row id
  std::vector<int> row_pos_;    // row id -> basis position or -1
  std::vector<int> basis_;      // basis position -> column id
  std::vector<Stat> stat_;      // column id -> state
  std::vector<double> x_;       // current value of every column
  bool basis_ready_ = false;

  // Factorization of the basis plus product-form updates.
  Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>> lu_, lut_;
  struct Eta {
    int pos;
    std::vector<std::pair<int, double>> w;
    double pivot;
  };
  std::vector<Eta> etas_;
  bool factor_ok_ = false;

  std::vector<double> ray_;  // structural direction when unbounded
  int64_t iters_ = 0;

  int k() const { return static_cast<int>(act_.size()); }

  bool fixed(int j) const { return lb_[j] == ub_[j]; }

  void cold_start() {
    act_.clear();
    for (int i = 0; i < rows_; ++i) row_pos_[i] = -1;
    for (int i = 0; i < rows_; ++i) {
      if (model_.row(i).sense == RowSense::Eq) {
        row_pos_[i] = k();
        act_.push_back(i);
      }
    }
    stat_.assign(n_ + rows_, Stat::Lower);
    x_.assign(n_ + rows_, 0.0);
    for (int j = 0; j < n_ + rows_; ++j) {
      if (lb_[j] > -kInf) {
        stat_[j] = Stat::Lower;
        x_[j] = lb_[j];
      } else if (ub_[j] < kInf) {
        stat_[j] = Stat::Upper;
        x_[j] = ub_[j];
      } else {
        stat_[j] = Stat::Free;
        x_[j] = 0.0;
      }
    }
    basis_.clear();
    for (int p = 0; p < k(); ++p) {
      const int slack = n_ + act_[p];
      basis_.push_back(slack);
      stat_[slack] = Stat::Basic;
    }
    basis_ready_ = true;
    refactor();
  }

  void refactor() {
    etas_.clear();
    const int m = k();
    if (m == 0) {
      factor_ok_ = true;
      return;
    }
    std::vector<Eigen::Triplet<double>> trip;
    for (int p = 0; p < m; ++p) {
      const int c = basis_[p];
      if (c < n_) {
        for (const auto& [r, a] : cols_[c])
          if (row_pos_[r] >= 0) trip.emplace_back(row_pos_[r], p, a);
      } else {
        trip.emplace_back(row_pos_[c - n_], p, 1.0);
      }
    }
    SpMat B(m, m);
    B.setFromTriplets(trip.begin(), trip.end());
    B.makeCompressed();
    lu_.compute(B);
    if (lu_.info() != Eigen::Success) {
      // Degenerate pivoting produced a (near) singular basis; rebuild from
      // slacks and let the primal recover.
      rebuild_slack_basis();
      return;
    }
    SpMat BT = SpMat(B.transpose());
    BT.makeCompressed();
    lut_.compute(BT);
    if (lut_.info() != Eigen::Success) {
      rebuild_slack_basis();
      return;
    }
    factor_ok_ = true;
    recompute_basics();
  }

  void rebuild_slack_basis() {
    for (int p = 0; p < k(); ++p) {
      const int c = basis_[p];
      stat_[c] = nonbasic_state_for(c);
      x_[c] = nonbasic_value(c);
    }
    basis_.clear();
    for (int p = 0; p < k(); ++p) {
      const int slack = n_ + act_[p];
      basis_.push_back(slack);
      stat_[slack] = Stat::Basic;
    }
    etas_.clear();
    const int m = k();
    std::vector<Eigen::Triplet<double>> trip;
    for (int p = 0; p < m; ++p) trip.emplace_back(p, p, 1.0);
    SpMat B(m, m);
    B.setFromTriplets(trip.begin(), trip.end());
    lu_.compute(B);
    lut_.compute(B);
    factor_ok_ = true;
    recompute_basics();
  }

  Stat nonbasic_state_for(int j) const {
    if (lb_[j] > -kInf) return Stat::Lower;
    if (ub_[j] < kInf) return Stat::Upper;
    return Stat::Free;
  }
  double nonbasic_value(int j) const {
    switch (nonbasic_state_for(j)) {
      case Stat::Lower: return lb_[j];
      case Stat::Upper: return ub_[j];
      default: return 0.0;
    }
  }

  // Basic values from scratch: x_B = B^{-1} (b_act - N x_N).
  void recompute_basics() {
    const int m = k();
    if (m == 0) return;
    Eigen::VectorXd rhs(m);
    for (int p = 0; p < m; ++p) rhs[p] = model_.row(act_[p]).rhs;
    for (int j = 0; j < n_; ++j) {
      if (stat_[j] == Stat::Basic || x_[j] == 0.0) continue;
      for (const auto& [r, a] : cols_[j])
        if (row_pos_[r] >= 0) rhs[row_pos_[r]] -= a * x_[j];
    }
    for (int i = 0; i < rows_; ++i) {
      const int sc = n_ + i;
      if (row_pos_[i] >= 0 && stat_[sc] != Stat::Basic && x_[sc] != 0.0)
        rhs[row_pos_[i]] -= x_[sc];
    }
    Eigen::VectorXd xb = ftran(rhs);
    for (int p = 0; p < m; ++p) x_[basis_[p]] = xb[p];
  }

  Eigen::VectorXd ftran(const Eigen::VectorXd& v) const {
    if (k() == 0) return v;
    Eigen::VectorXd y = lu_.solve(v);
    for (const auto& e : etas_) {
      const double yp = y[e.pos] / e.pivot;
      for (const auto& [i, wi] : e.w) y[i] -= wi * yp;
      y[e.pos] = yp;
    }
    return y;
  }

  Eigen::VectorXd btran(const Eigen::VectorXd& c) const {
    if (k() == 0) return c;
    Eigen::VectorXd z = c;
    for (auto it = etas_.rbegin(); it != etas_.rend(); ++it) {
      double zp = z[it->pos];
      for (const auto& [i, wi] : it->w) zp -= wi * z[i];
      z[it->pos] = zp / it->pivot;
    }
    return lut_.solve(z);
  }

  Eigen::VectorXd column_dense(int j) const {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(k());
    if (j < n_) {
      for (const auto& [r, a] : cols_[j])
        if (row_pos_[r] >= 0) v[row_pos_[r]] += a;
    } else if (row_pos_[j - n_] >= 0) {
      v[row_pos_[j - n_]] = 1.0;
    }
    return v;
  }

  double dot_col(const Eigen::VectorXd& y, int j) const {
    double s = 0.0;
    if (j < n_) {
      for (const auto& [r, a] : cols_[j])
        if (row_pos_[r] >= 0) s += y[row_pos_[r]] * a;
    } else if (row_pos_[j - n_] >= 0) {
      s = y[row_pos_[j - n_]];
    }
    return s;
  }

  void push_eta(int pos, const Eigen::VectorXd& w) {
    Eta e;
    e.pos = pos;
    e.pivot = w[pos];
    for (int i = 0; i < w.size(); ++i)
      if (i != pos && std::abs(w[i]) > kZeroTol) e.w.emplace_back(i, w[i]);
    etas_.push_back(std::move(e));
  }

  bool budget_exceeded() const {
    const int64_t cap = opt_.iter_limit > 0 ? opt_.iter_limit : 5000000;
    return iters_ >= cap;
  }

  double infeas_of(int j) const {
    if (x_[j] < lb_[j] - opt_.feas_tol) return lb_[j] - x_[j];
    if (x_[j] > ub_[j] + opt_.feas_tol) return x_[j] - ub_[j];
    return 0.0;
  }

  // ---- primal simplex, phase 1 (infeasibility sum) folded in -------------

  RunStatus primal() {
    int64_t stall = 0;
    double last_obj = kInf;
    bool bland = false;
    bool was_phase1 = true;
    while (true) {
      if (budget_exceeded()) return RunStatus::IterLimit;
      ++iters_;
      if (static_cast<int>(etas_.size()) >= opt_.refactor_interval) refactor();

      const int m = k();
      double infeas = 0.0;
      Eigen::VectorXd cb = Eigen::VectorXd::Zero(m);
      for (int p = 0; p < m; ++p) {
        const int b = basis_[p];
        if (x_[b] < lb_[b] - opt_.feas_tol) {
          cb[p] = -1.0;
          infeas += lb_[b] - x_[b];
        } else if (x_[b] > ub_[b] + opt_.feas_tol) {
          cb[p] = 1.0;
          infeas += x_[b] - ub_[b];
        }
      }
      const bool phase1 = infeas > opt_.feas_tol;
      if (phase1 != was_phase1) {  // fresh yardstick when the phase flips
        was_phase1 = phase1;
        last_obj = kInf;
        stall = 0;
        bland = false;
      }
      if (!phase1) {
        for (int p = 0; p < m; ++p) cb[p] = cost_[basis_[p]];
        const double z = objective();
        if (z < last_obj - 1e-12) {
          last_obj = z;
          stall = 0;
          bland = false;
        }
      } else if (infeas < last_obj - 1e-12) {
        last_obj = infeas;
        stall = 0;
        bland = false;
      }
      // Sticky anti-cycling: once a degenerate streak trips the guard the
      // lowest-index rule stays on until the objective strictly improves.
      if (++stall > 500) bland = true;

      const Eigen::VectorXd y = btran(cb);

      // Entering column.
      int enter = -1;
      double best = kDualTol;
      int sigma = +1;
      auto consider = [&](int j) {
        if (stat_[j] == Stat::Basic || fixed(j)) return;
        const double cj = phase1 ? 0.0 : cost_[j];
        const double d = cj - dot_col(y, j);
        if (stat_[j] == Stat::Lower || stat_[j] == Stat::Free) {
          if (d < -best) {
            enter = j;
            sigma = +1;
            if (bland) return;
            best = -d;
          }
        }
        if (stat_[j] == Stat::Upper || stat_[j] == Stat::Free) {
          if (d > best) {
            enter = j;
            sigma = -1;
            if (bland) return;
            best = d;
          }
        }
      };
      if (bland) {
        for (int j = 0; j < n_ + rows_; ++j) {
          if (j >= n_ && row_pos_[j - n_] < 0) continue;
          consider(j);
          if (enter >= 0) break;
        }
      } else {
        for (int j = 0; j < n_; ++j) consider(j);
        for (int i = 0; i < rows_; ++i)
          if (row_pos_[i] >= 0) consider(n_ + i);
      }

      if (enter < 0) {
        if (phase1) return RunStatus::Infeasible;
        return RunStatus::Optimal;
      }

      const Eigen::VectorXd w = ftran(column_dense(enter));

      // Ratio test.  Entering moves by t >= 0 in direction sigma; basic i
      // changes at rate -sigma*w_p.  Phase 1 stops at the first breakpoint
      // (a violated basic reaching the bound it violates counts).
      double t_max = kInf;
      int leave_pos = -1;
      double leave_to = 0.0;  // bound the leaving variable lands on
      double best_piv = 0.0;
      if (ub_[enter] - lb_[enter] < t_max) {
        t_max = ub_[enter] - lb_[enter];
        leave_pos = -2;  // bound flip
      }
      for (int p = 0; p < m; ++p) {
        const double rate = -sigma * w[p];
        if (std::abs(rate) < kPivotTol) continue;
        const int b = basis_[p];
        double limit = kInf;
        double land = 0.0;
        const bool below = x_[b] < lb_[b] - opt_.feas_tol;
        const bool above = x_[b] > ub_[b] + opt_.feas_tol;
        if (below) {
          if (rate > 0) {
            limit = (lb_[b] - x_[b]) / rate;
            land = lb_[b];
          }
        } else if (above) {
          if (rate < 0) {
            limit = (ub_[b] - x_[b]) / rate;
            land = ub_[b];
          }
        } else if (rate > 0) {
          if (ub_[b] < kInf) {
            limit = (ub_[b] - x_[b]) / rate;
            land = ub_[b];
          }
        } else {
          if (lb_[b] > -kInf) {
            limit = (lb_[b] - x_[b]) / rate;
            land = lb_[b];
          }
        }
        if (limit == kInf) continue;
        limit = std::max(limit, 0.0);
        const bool better =
            bland ? (limit < t_max - 1e-12 ||
                     (limit < t_max + 1e-12 && leave_pos >= 0 && b < basis_[leave_pos]))
                  : (limit < t_max - 1e-12 ||
                     (limit < t_max + 1e-12 && std::abs(w[p]) > best_piv));
        if (better) {
          t_max = std::min(limit, t_max);
          leave_pos = p;
          leave_to = land;
          best_piv = std::abs(w[p]);
        }
      }

      if (t_max == kInf) {
        if (phase1) throw SolveError("phase-1 ray; inconsistent bounds");
        ray_.assign(n_, 0.0);
        if (enter < n_) ray_[enter] = sigma;
        for (int p = 0; p < m; ++p) {
          const int b = basis_[p];
          if (b < n_) ray_[b] = -sigma * w[p];
        }
        return RunStatus::Unbounded;
      }

      // Apply the step.
      for (int p = 0; p < m; ++p) x_[basis_[p]] -= sigma * t_max * w[p];
      if (leave_pos == -2) {
        stat_[enter] = (sigma > 0) ? Stat::Upper : Stat::Lower;
        x_[enter] = (sigma > 0) ? ub_[enter] : lb_[enter];
      } else {
        const int out = basis_[leave_pos];
        x_[enter] = x_[enter] + sigma * t_max;
        x_[out] = leave_to;
        stat_[out] = (leave_to == lb_[out]) ? Stat::Lower : Stat::Upper;
        stat_[enter] = Stat::Basic;
        basis_[leave_pos] = enter;
        push_eta(leave_pos, w);
      }
    }
  }

  // ---- dual simplex (warm restarts after bound changes / new rows) -------

  void reposition_nonbasics() {
    for (int j = 0; j < n_ + rows_; ++j) {
      if (j >= n_ && row_pos_[j - n_] < 0) continue;
      if (stat_[j] == Stat::Basic) continue;
      stat_[j] = nonbasic_state_for(j);
      x_[j] = nonbasic_value(j);
    }
  }

  RunStatus dual(double cutoff) {
    // Re-seat nonbasic columns on the dual-feasible side.
    {
      const int m = k();
      Eigen::VectorXd cb(m);
      for (int p = 0; p < m; ++p) cb[p] = cost_[basis_[p]];
      const Eigen::VectorXd y = btran(cb);
      for (int j = 0; j < n_ + rows_; ++j) {
        if (j >= n_ && row_pos_[j - n_] < 0) continue;
        if (stat_[j] == Stat::Basic || fixed(j)) continue;
        const double d = cost_[j] - dot_col(y, j);
        if (stat_[j] != Stat::Upper && d < -kDualTol) {
          if (ub_[j] == kInf) return RunStatus::NeedPrimal;
          stat_[j] = Stat::Upper;
          x_[j] = ub_[j];
        } else if (stat_[j] != Stat::Lower && d > kDualTol) {
          if (lb_[j] == -kInf) return RunStatus::NeedPrimal;
          stat_[j] = Stat::Lower;
          x_[j] = lb_[j];
        } else if (stat_[j] == Stat::Free) {
          if (std::abs(d) > kDualTol) return RunStatus::NeedPrimal;
        }
      }
      recompute_basics();
    }

    int64_t stall = 0;
    double last_obj = -kInf;
    bool bland = false;
    int bad_pivots = 0;
    while (true) {
      if (budget_exceeded()) return RunStatus::IterLimit;
      ++iters_;
      if (static_cast<int>(etas_.size()) >= opt_.refactor_interval) refactor();
      const int m = k();

      const double z = objective();
      if (z > cutoff) return RunStatus::Cutoff;
      if (z > last_obj + 1e-12) {
        last_obj = z;
        stall = 0;
        bland = false;
      }
      if (++stall > 500) bland = true;

      // Leaving row: largest primal violation.
      int pos = -1;
      double worst = opt_.feas_tol;
      for (int p = 0; p < m; ++p) {
        const double v = infeas_of(basis_[p]);
        if (v > worst) {
          pos = p;
          worst = v;
          if (bland) break;
        }
      }
      if (pos < 0) return RunStatus::Optimal;
      const int out = basis_[pos];
      const int s = (x_[out] < lb_[out]) ? +1 : -1;  // direction x_out must move
      const double target = (s > 0) ? lb_[out] : ub_[out];

      Eigen::VectorXd e = Eigen::VectorXd::Zero(m);
      e[pos] = 1.0;
      const Eigen::VectorXd rho = btran(e);

      Eigen::VectorXd cb(m);
      for (int p = 0; p < m; ++p) cb[p] = cost_[basis_[p]];
      const Eigen::VectorXd y = btran(cb);

      int enter = -1;
      double best_ratio = kInf;
      double best_alpha = 0.0;
      auto consider = [&](int j) {
        if (stat_[j] == Stat::Basic || fixed(j)) return;
        const double alpha = dot_col(rho, j);
        if (std::abs(alpha) < kPivotTol) return;
        const bool ok = (stat_[j] == Stat::Lower && s * alpha < 0) ||
                        (stat_[j] == Stat::Upper && s * alpha > 0) ||
                        stat_[j] == Stat::Free;
        if (!ok) return;
        const double d = cost_[j] - dot_col(y, j);
        const double ratio = std::abs(d) / std::abs(alpha);
        const bool better =
            bland ? (enter < 0)
                  : (ratio < best_ratio - 1e-12 ||
                     (ratio < best_ratio + 1e-12 && std::abs(alpha) > std::abs(best_alpha)));
        if (better) {
          enter = j;
          best_ratio = ratio;
          best_alpha = alpha;
        }
      };
      if (bland) {
        for (int j = 0; j < n_ + rows_ && enter < 0; ++j) {
          if (j >= n_ && row_pos_[j - n_] < 0) continue;
          consider(j);
        }
      } else {
        for (int j = 0; j < n_; ++j) consider(j);
        for (int i = 0; i < rows_; ++i)
          if (row_pos_[i] >= 0) consider(n_ + i);
      }
      if (enter < 0) return RunStatus::Infeasible;

      const Eigen::VectorXd w = ftran(column_dense(enter));
      const double alpha = w[pos];
      if (std::abs(alpha) < kPivotTol) {
        // Disagreement with the row estimate means numerical drift; one
        // refactor may fix it, otherwise hand over to the primal.
        if (++bad_pivots > 2) return RunStatus::NeedPrimal;
        refactor();
        continue;
      }
      bad_pivots = 0;
      const double delta = (x_[out] - target) / alpha;  // change of x_enter
      for (int p = 0; p < m; ++p) x_[basis_[p]] -= delta * w[p];
      x_[enter] = x_[enter] + delta;
      x_[out] = target;
      stat_[out] = (target == lb_[out]) ? Stat::Lower : Stat::Upper;
      stat_[enter] = Stat::Basic;
      basis_[pos] = enter;
      push_eta(pos, w);
    }
  }

  // ---- lazy row activation ------------------------------------------------

  double row_value(int i) const {
    double v = 0.0;
    for (const auto& [c, a] : model_.row(i).terms) v += a * x_[c];
    return v;
  }

  double row_violation(int i) const {
    const auto& r = model_.row(i);
    const double v = row_value(i);
    const double tol = opt_.feas_tol * (1.0 + std::abs(r.rhs));
    switch (r.sense) {
      case RowSense::Le: return (v - r.rhs > tol) ? v - r.rhs : 0.0;
      case RowSense::Ge: return (r.rhs - v > tol) ? r.rhs - v : 0.0;
      case RowSense::Eq: return (std::abs(v - r.rhs) > tol) ? std::abs(v - r.rhs) : 0.0;
    }
    return 0.0;
  }

  int activate_violated() {
    std::vector<int> add;
    for (int i = 0; i < rows_; ++i)
      if (row_pos_[i] < 0 && row_violation(i) > 0.0) add.push_back(i);
    activate_rows(add);
    return static_cast<int>(add.size());
  }

  int activate_ray_blockers() {
    std::vector<int> add;
    for (int i = 0; i < rows_; ++i) {
      if (row_pos_[i] >= 0) continue;
      const auto& r = model_.row(i);
      double rate = 0.0;
      for (const auto& [c, a] : r.terms) rate += a * ray_[c];
      const bool blocks = (r.sense == RowSense::Le && rate > 1e-9) ||
                          (r.sense == RowSense::Ge && rate < -1e-9) ||
                          (r.sense == RowSense::Eq && std::abs(rate) > 1e-9);
      if (blocks) add.push_back(i);
    }
    activate_rows(add);
    return static_cast<int>(add.size());
  }

  void activate_rows(const std::vector<int>& add) {
    if (add.empty()) return;
    for (int i : add) {
      row_pos_[i] = k();
      act_.push_back(i);
      const int slack = n_ + i;
      basis_.push_back(slack);
      stat_[slack] = Stat::Basic;
      x_[slack] = model_.row(i).rhs - row_value(i);
    }
    refactor();
  }
};

double snap_int(double v) { return std::round(v); }

}  // namespace

LpSolution solve_lp(const MilpModel& model, const SolverOptions& opt) {
  SimplexEngine eng(model, opt);
  const RunStatus st = eng.solve();
  LpSolution out;
  out.iterations = eng.iterations();
  switch (st) {
    case RunStatus::Optimal: {
      out.status = SolveStatus::Optimal;
      out.x = eng.solution();
      double z = 0.0;
      for (int j = 0; j < model.num_vars(); ++j) z += model.objective(j) * out.x[j];
      out.objective = z;
      break;
    }
    case RunStatus::Infeasible: out.status = SolveStatus::Infeasible; break;
    case RunStatus::Unbounded: out.status = SolveStatus::Unbounded; break;
    default: out.status = SolveStatus::IterationLimit; break;
  }
  return out;
}

MilpSolution solve_milp(const MilpModel& model, const SolverOptions& opt) {
  std::vector<int> int_cols;
  for (int j = 0; j < model.num_vars(); ++j) {
    if (model.kind(j) != VarKind::Continuous) {
      if (model.lower(j) == -kInf || model.upper(j) == kInf)
        throw ValidationError("integer column without finite bounds: " + model.var_name(j));
      int_cols.push_back(j);
    }
  }

  SimplexEngine eng(model, opt);
  const double sign = model.minimize ? 1.0 : -1.0;

  struct Node {
    double bound;  // minimization-sense bound inherited from the parent
    int64_t id;
    int parent;
    int var;
    double nlb, nub;
  };
  std::vector<Node> arena;
  // best bound first; on ties plunge into the newest node, otherwise flat
  // relaxations degenerate into breadth-first wandering
  auto cmp = [&arena](int a, int b) {
    if (arena[a].bound != arena[b].bound) return arena[a].bound > arena[b].bound;
    return arena[a].id < arena[b].id;
  };
  std::priority_queue<int, std::vector<int>, decltype(cmp)> open(cmp);

  MilpSolution out;
  out.status = SolveStatus::Infeasible;
  double incumbent = kInf;  // minimization sense
  std::vector<double> inc_x;
  int64_t next_id = 0;
  double frontier_bound = kInf;  // tightest bound among pruned-by-gap pops

  if (!opt.warm_start.empty()) {
    if (static_cast<int>(opt.warm_start.size()) != model.num_vars())
      throw ValidationError("warm start carries " + std::to_string(opt.warm_start.size()) +
                            " values for " + std::to_string(model.num_vars()) + " columns");
    std::vector<double> xs = opt.warm_start;
    bool ok = true;
    for (int j = 0; j < model.num_vars() && ok; ++j) {
      if (model.kind(j) != VarKind::Continuous) {
        const double r = snap_int(xs[j]);
        if (std::abs(xs[j] - r) > opt.int_tol) ok = false;
        xs[j] = r;
      }
      if (xs[j] < model.lower(j) - opt.feas_tol || xs[j] > model.upper(j) + opt.feas_tol)
        ok = false;
    }
    for (int i = 0; i < model.num_rows() && ok; ++i) {
      const auto& r = model.row(i);
      double v = 0, mass = std::abs(r.rhs);
      for (const auto& [c, a] : r.terms) {
        v += a * xs[c];
        mass += std::abs(a * xs[c]);
      }
      const double tol = 100 * opt.feas_tol * (1.0 + mass);
      if (r.sense != RowSense::Ge && v - r.rhs > tol) ok = false;
      if (r.sense != RowSense::Le && r.rhs - v > tol) ok = false;
    }
    if (ok) {
      double z = 0;
      for (int j = 0; j < model.num_vars(); ++j) z += model.objective(j) * xs[j];
      incumbent = sign * z;
      inc_x = std::move(xs);
    }
  }

  arena.push_back(Node{-kInf, next_id++, -1, -1, 0, 0});
  open.push(0);

  auto apply_bounds = [&](int node) {
    for (int j : int_cols) eng.reset_col_bounds(j);
    for (int v = node; v > 0; v = arena[v].parent) {
      const Node& nd = arena[v];
      eng.tighten_col_bounds(nd.var, nd.nlb, nd.nub);
    }
  };

  bool root_unbounded = false;
  int dive = -1;  // child processed ahead of the queue, -1 when backtracked
  while (dive >= 0 || !open.empty()) {
    if (opt.node_limit > 0 && out.nodes >= opt.node_limit) {
      if (dive >= 0) open.push(dive);
      out.status = SolveStatus::NodeLimit;
      break;
    }
    int cur;
    if (dive >= 0) {
      cur = dive;
      dive = -1;
    } else {
      cur = open.top();
      open.pop();
    }
    const double cut_abs = opt.gap_tol * std::max(1.0, std::abs(incumbent));
    if (arena[cur].bound >= incumbent - cut_abs) {
      frontier_bound = std::min(frontier_bound, arena[cur].bound);
      continue;  // best-first: everything left is at least as bad
    }
    ++out.nodes;
    apply_bounds(cur);
    const RunStatus st = eng.solve(incumbent - cut_abs);
    out.iterations = eng.iterations();
    if (st == RunStatus::Infeasible || st == RunStatus::Cutoff) {
      if (st == RunStatus::Cutoff) frontier_bound = std::min(frontier_bound, incumbent - cut_abs);
      continue;
    }
    if (st == RunStatus::Unbounded) {
      if (cur == 0) root_unbounded = true;
      break;
    }
    if (st == RunStatus::IterLimit) {
      out.status = SolveStatus::IterationLimit;
      break;
    }
    const double z = eng.objective();  // minimization sense
    if (z >= incumbent - cut_abs) {
      frontier_bound = std::min(frontier_bound, z);
      continue;
    }

    // Most fractional column; ties toward the lowest index.
    int branch = -1;
    double best_dist = 0;
    for (int j : int_cols) {
      const double v = eng.col_value(j);
      const double frac = v - std::floor(v);
      const double dist = std::min(frac, 1.0 - frac);
      if (dist <= opt.int_tol) continue;
      if (dist > best_dist + 1e-12) {
        branch = j;
        best_dist = dist;
      }
    }
    if (branch < 0) {
      incumbent = z;
      inc_x = eng.solution();
      for (int j : int_cols) inc_x[j] = snap_int(inc_x[j]);
      continue;
    }
    const double v = eng.col_value(branch);
    arena.push_back(Node{z, next_id++, cur, branch, -kInf, std::floor(v)});
    const int down = static_cast<int>(arena.size()) - 1;
    arena.push_back(Node{z, next_id++, cur, branch, std::ceil(v), kInf});
    const int up = static_cast<int>(arena.size()) - 1;
    // dive into the child the relaxation leans toward; queued siblings keep
    // the bound honest and pure best-first never finds an incumbent here.
    // free switches dive up instead: enabling one costs nothing, while
    // pinning it to zero strands the fractional point it was supporting
    if (model.objective(branch) != 0.0 && v - std::floor(v) <= 0.5) {
      dive = down;
      open.push(up);
    } else {
      dive = up;
      open.push(down);
    }
  }

  if (root_unbounded) {
    out.status = SolveStatus::Unbounded;
    return out;
  }

  double open_bound = frontier_bound;
  if (!open.empty()) open_bound = std::min(open_bound, arena[open.top()].bound);

  if (!inc_x.empty()) {
    out.x = inc_x;
    double z = 0.0;
    for (int j = 0; j < model.num_vars(); ++j) z += model.objective(j) * inc_x[j];
    out.objective = z;
    const double inc_min = sign * z;
    const double bound_min =
        open.empty() ? std::min(inc_min, frontier_bound) : std::min(open_bound, inc_min);
    out.best_bound = sign * bound_min;
    out.gap = (inc_min - bound_min) / std::max(1.0, std::abs(inc_min));
    if (out.status != SolveStatus::NodeLimit && out.status != SolveStatus::IterationLimit)
      out.status = SolveStatus::Optimal;
  } else if (out.status != SolveStatus::NodeLimit && out.status != SolveStatus::IterationLimit) {
    out.status = SolveStatus::Infeasible;
  }
  return out;
}

// ---- plain-text model export ----------------------------------------------

namespace {
std::string col_name(const MilpModel& m, int j) {
  if (!m.var_name(j).empty()) return m.var_name(j);
  return "x" + std::to_string(j);
}

void write_terms(std::ostream& os, const MilpModel& m,
                 const std::vector<std::pair<int, double>>& terms) {
  bool first = true;
  for (const auto& [c, a] : terms) {
    if (a >= 0 && !first) os << " + ";
    if (a < 0) os << (first ? "- " : " - ");
    const double mag = std::abs(a);
    if (mag != 1.0) os << mag << ' ';
    os << col_name(m, c);
    first = false;
  }
  if (first) os << "0";
}
}  // namespace

void write_lp_text(const MilpModel& m, std::ostream& os) {
  os << (m.minimize ? "Minimize\n" : "Maximize\n") << " obj:";
  std::vector<std::pair<int, double>> obj;
  for (int j = 0; j < m.num_vars(); ++j)
    if (m.objective(j) != 0.0) obj.emplace_back(j, m.objective(j));
  os << ' ';
  write_terms(os, m, obj);
  os << "\nSubject To\n";
  for (int i = 0; i < m.num_rows(); ++i) {
    const auto& r = m.row(i);
    os << ' ' << (r.name.empty() ? "c" + std::to_string(i) : r.name) << ": ";
    write_terms(os, m, r.terms);
    switch (r.sense) {
      case RowSense::Le: os << " <= "; break;
      case RowSense::Ge: os << " >= "; break;
      case RowSense::Eq: os << " = "; break;
    }
    os << r.rhs << '\n';
  }
  os << "Bounds\n";
  for (int j = 0; j < m.num_vars(); ++j) {
    const double lo = m.lower(j), hi = m.upper(j);
    os << ' ';
    if (lo == -kInf && hi == kInf) {
      os << col_name(m, j) << " free";
    } else {
      if (lo == -kInf)
        os << "-inf";
      else
        os << lo;
      os << " <= " << col_name(m, j) << " <= ";
      if (hi == kInf)
        os << "+inf";
      else
        os << hi;
    }
    os << '\n';
  }
  bool any_bin = false, any_int = false;
  for (int j = 0; j < m.num_vars(); ++j) {
    any_bin |= m.kind(j) == VarKind::Binary;
    any_int |= m.kind(j) == VarKind::Integer;
  }
  if (any_bin) {
    os << "Binaries\n";
    for (int j = 0; j < m.num_vars(); ++j)
      if (m.kind(j) == VarKind::Binary) os << ' ' << col_name(m, j) << '\n';
  }
  if (any_int) {
    os << "Generals\n";
    for (int j = 0; j < m.num_vars(); ++j)
      if (m.kind(j) == VarKind::Integer) os << ' ' << col_name(m, j) << '\n';
  }
  os << "End\n";
}

std::string to_lp_text(const MilpModel& m) {
  std::ostringstream os;
  write_lp_text(m, os);
  return os.str();
}

}  // namespace rch
