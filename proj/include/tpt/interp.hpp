#pragma once

#include <optional>

#include "tpt/graph.hpp"

namespace tpt {

// Total assignment to the parameter cells, parallel to graph.params.
// The synthesized "source code".
struct ParamAssignment {
  std::vector<int> values;

  bool operator==(const ParamAssignment&) const = default;
};

// Deterministic execution record: every assignment in order, final values of
// the observation sites, and the leak fault (if any).
struct ExecTrace {
  std::vector<std::pair<VarId, int>> assignments;
  std::vector<int> values;  // per VarId, -1 when never assigned
  struct Obs {
    VarId var;
    int expected;
    int actual;  // -1 when never assigned
  };
  std::vector<Obs> observations;
  std::optional<int> fault_factor;  // factor index of an out-of-range hit

  bool faulted() const { return fault_factor.has_value(); }
  bool consistent() const {
    if (faulted()) return false;
    for (const Obs& o : observations)
      if (o.actual != o.expected) return false;
    return true;
  }
};

// Evaluates factors in dependency order, descending only into gates whose
// condition matches the current value. Input pins in the graph may be
// overridden. An out-of-range table hit on the taken path is reported as a
// leak fault, not an error.
ExecTrace execute(const GatedFactorGraph& graph, const ParamAssignment& params,
                  const std::vector<std::pair<VarId, int>>& input_overrides = {});

// True iff execution reproduces every observed value with no fault.
bool check_consistency(const GatedFactorGraph& graph, const ParamAssignment& params);

enum class EnumStatus { Found, NoSolution, BudgetExhausted };

struct EnumResult {
  EnumStatus status = EnumStatus::NoSolution;
  std::optional<ParamAssignment> assignment;
  long long tried = 0;
};

// Brute-force scan of the free parameter space in lexicographic order of
// parameter ids (values ascending). Returns the first consistent assignment;
// NoSolution only after the full space was scanned.
EnumResult enumerate_solve(const GatedFactorGraph& graph, long long max_enumerations);

// Helpers shared by back-ends and the CLI.
ParamAssignment assignment_with_pins(const GatedFactorGraph& graph,
                                     const std::map<VarId, int>& free_values);
std::map<std::string, int> assignment_to_names(const GatedFactorGraph& graph,
                                               const ParamAssignment& a);
ParamAssignment assignment_from_names(const GatedFactorGraph& graph,
                                      const std::map<std::string, int>& names);

}  // namespace tpt
