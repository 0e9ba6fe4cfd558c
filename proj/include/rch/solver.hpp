#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <string>
#include <utility>
#include <vector>

namespace rch {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class VarKind : uint8_t { Continuous, Binary, Integer };
enum class RowSense : uint8_t { Le, Eq, Ge };

enum class SolveStatus : uint8_t {
  Optimal,
  Infeasible,
  Unbounded,
  IterationLimit,
  NodeLimit,
};

const char* to_string(SolveStatus s);

struct SolverOptions {
  double feas_tol = 1e-7;      // bound / row feasibility
  double int_tol = 1e-6;       // integrality
  double gap_tol = 1e-6;       // relative branch-and-bound gap
  int64_t node_limit = 0;      // 0 = unlimited
  int64_t iter_limit = 0;      // simplex pivots, 0 = unlimited
  int refactor_interval = 96;  // basis refactorization cadence

  // Optional known solution, one value per column.  When it checks out
  // against bounds, rows and integrality it seeds the incumbent; a vector
  // that does not fit the model throws ValidationError.
  std::vector<double> warm_start;
};

// A mixed-integer linear model: sparse rows over bounded columns.
// Construction order is part of the model identity; solving the same
// model twice yields bit-identical results.
class MilpModel {
 public:
  int add_var(double lb, double ub, double obj, VarKind kind, std::string name = {});
  // Terms may list a column several times; coefficients are accumulated.
  void add_row(RowSense sense, double rhs,
               std::vector<std::pair<int, double>> terms, std::string name = {});

  // Tightens bounds of an existing column (used for fixings).
  void set_bounds(int var, double lb, double ub);
  void set_objective(int var, double coeff);

  int num_vars() const { return static_cast<int>(obj_.size()); }
  int num_rows() const { return static_cast<int>(rows_.size()); }

  double lower(int j) const { return lb_[j]; }
  double upper(int j) const { return ub_[j]; }
  double objective(int j) const { return obj_[j]; }
  VarKind kind(int j) const { return kind_[j]; }
  const std::string& var_name(int j) const { return names_[j]; }

  struct Row {
    std::vector<std::pair<int, double>> terms;  // sorted by column, merged
    RowSense sense;
    double rhs;
    std::string name;
  };
  const Row& row(int i) const { return rows_[i]; }

  bool minimize = true;

 private:
  std::vector<double> lb_, ub_, obj_;
  std::vector<VarKind> kind_;
  std::vector<std::string> names_;
  std::vector<Row> rows_;
};

struct LpSolution {
  SolveStatus status = SolveStatus::Infeasible;
  double objective = 0.0;
  std::vector<double> x;
  int64_t iterations = 0;
};

struct MilpSolution {
  SolveStatus status = SolveStatus::Infeasible;
  double objective = 0.0;   // incumbent value when has_incumbent()
  double best_bound = 0.0;  // proven bound on the optimum
  double gap = kInf;        // relative gap at termination
  std::vector<double> x;    // incumbent assignment, integers snapped
  int64_t nodes = 0;
  int64_t iterations = 0;

  bool has_incumbent() const { return !x.empty(); }
};

// Exact LP solve (integrality ignored). Deterministic.
LpSolution solve_lp(const MilpModel& model, const SolverOptions& opt = {});

// Branch and bound over LP relaxations: best-first node order, branching on
// the most fractional integer column (ties resolved toward the lowest
// index). Returns a proven optimum when gap <= gap_tol and limits permit.
MilpSolution solve_milp(const MilpModel& model, const SolverOptions& opt = {});

// Plain-text export of a model (grammar documented in docs/lp-format.md).
void write_lp_text(const MilpModel& model, std::ostream& out);
std::string to_lp_text(const MilpModel& model);

}  // namespace rch
