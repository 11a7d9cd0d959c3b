#pragma once

#include <optional>

#include "tpt/interp.hpp"

namespace tpt {

struct LpBuildOptions {
  bool milp = true;    // binary marks on parameter-cell global marginals
  bool hard = true;    // pin factor-marginal entries with zero score to 0
  bool ghosts = true;  // instantiate ghost marginals (off only for the
                       // contradiction demonstration)
};

// Columns are created in a fixed order (unaries by variable then gate, ghost
// sites, factor marginals); rows in construction order. Names are
// deterministic: mu_<cell>_<v> (global scope), mu_<cell>_g<gate>_<v>
// (in-gate), mu_<cell>_F<family>_ghost_<v>, muf<factor>_<config>.
struct LpModel {
  struct Column {
    enum Kind { Unary, Ghost, FactorMarg } kind;
    std::string name;
    VarId var = -1;   // Unary/Ghost
    int gate = 0;     // Unary
    int family = -1;  // Ghost
    int value = 0;    // Unary/Ghost
    int factor = -1;  // FactorMarg
    int config = 0;   // FactorMarg: out * prod(in_domains) + input config
    bool binary = false;
    bool fixed_zero = false;  // hard mode: theta = 0 entries
  };
  struct Row {
    std::string name;
    std::vector<std::pair<int, double>> coeffs;  // column -> coefficient
    double rhs = 0;  // all rows are equalities: coeffs . x = rhs
  };

  std::vector<Column> columns;
  std::vector<Row> rows;
  std::vector<std::pair<int, double>> objective;
  bool milp = false;

  std::map<std::pair<VarId, int>, int> unary_base;   // (var, gate) -> column of value 0
  std::map<std::pair<VarId, int>, int> ghost_base;   // (var, family) -> column
  std::vector<int> factor_base;                      // per factor -> column of config 0

  int unary(VarId v, int gate, int value) const {
    return unary_base.at({v, gate}) + value;
  }
  double objective_value(const std::vector<double>& x) const;
};

LpModel build_lp(const GatedFactorGraph& graph, const LpBuildOptions& options = {});

// CPLEX LP text: Maximize, Subject To, Bounds (0 <= mu <= 1, fixed columns
// pinned), Binary when MILP, End. Byte-identical across runs.
std::string emit_lp(const LpModel& model);

struct LpSolution {
  std::string status;  // optimal | infeasible | unbounded | fallback-...
  std::vector<double> values;  // per column
  double objective = 0;
  bool integral = false;  // all parameter-cell marginals 0/1 within tol
  std::optional<ParamAssignment> assignment;
  bool verified = false;
  std::string solver_output;
};

// External solve via `solver_command <model.lp> <solution.out>`; the
// solution file holds `<column> <value>` lines plus a status line. Without a
// command, falls back to the enumerative oracle and reports the integral
// vertex the found assignment induces.
LpSolution solve_lp(const GatedFactorGraph& graph, const LpModel& model,
                    const std::optional<std::string>& solver_command,
                    const std::string& workdir = "", long long fallback_budget = 1ll << 24);

// Column values of the integral configuration induced by a consistent
// assignment: indicator marginals along the executed path, ghosts carrying
// the inactive-branch mass.
std::vector<double> integral_vertex(const GatedFactorGraph& graph, const LpModel& model,
                                    const ParamAssignment& assignment);

// Largest absolute row violation (also checks fixed columns); 0 for a
// feasible point.
double max_violation(const LpModel& model, const std::vector<double>& x);

constexpr double kIntegralityTol = 1e-6;

}  // namespace tpt
