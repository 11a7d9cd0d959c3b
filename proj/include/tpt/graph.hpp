#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "tpt/sema.hpp"
#include "tpt/unroll.hpp"

namespace tpt {

using VarId = int;

constexpr int kOutOfRange = -1;

// Dense function table over finite domains. `table` maps every input
// configuration (row-major over in_domains) to an output value, or
// kOutOfRange when the computed value falls outside the output domain.
// A table with any out-of-range entry carries the leak flag and is only
// legal inside a gate.
struct FactorTable {
  std::string label;
  std::vector<int> in_domains;
  int out_domain = 0;
  std::vector<int> table;
  bool leak = false;

  size_t config_count() const { return table.size(); }
  // Decodes configuration index k into per-input values.
  void decode(size_t k, std::vector<int>& values) const {
    values.resize(in_domains.size());
    for (size_t i = in_domains.size(); i-- > 0;) {
      values[i] = static_cast<int>(k % static_cast<size_t>(in_domains[i]));
      k /= static_cast<size_t>(in_domains[i]);
    }
  }
};

struct Factor {
  int table = -1;                // index into Graph::tables
  std::vector<VarId> inputs;     // distinct cells, first-occurrence order
  VarId output = -1;
  int gate = 0;                  // owning gate
  SourceLoc loc;
  bool is_copy = false;
};

// One arm of an if/elif chain. Gate 0 is the global scope (no condition).
struct Gate {
  int id = 0;
  int parent = -1;
  int family = -1;               // owning family, -1 for the root
  int cond_value = 0;
  std::vector<std::pair<VarId, int>> path_condition;  // outermost first
  std::vector<int> children_families;
  // Execution-ordered body: factors and nested families.
  struct Item {
    enum Kind { FactorItem, FamilyItem } kind;
    int index;
  };
  std::vector<Item> body;
};

// A sibling group of gates conditioned on the same variable.
struct GateFamily {
  int id = 0;
  int parent_gate = 0;
  VarId subject = -1;
  std::vector<int> arm_gates;    // parallel to arm_values
  std::vector<int> arm_values;
  std::vector<int> unhandled_values;
  bool full_coverage = false;
  // Cells assigned in every arm (family covering the full domain): their
  // parent-scope marginals are formed by the gate-marginal average on exit.
  std::vector<VarId> exports;
  SourceLoc loc;
};

struct GhostSite {
  VarId var = -1;
  int family = -1;
};

struct GatedFactorGraph {
  // Variables.
  std::vector<int> var_domain;
  std::vector<std::string> var_name;
  std::vector<bool> var_is_param;
  std::vector<VarId> params;     // ascending
  struct ArrayRef {
    std::string name;
    bool is_param;
    int domain;
    std::vector<long long> dims;
    VarId base;
    long long cells;
  };
  std::vector<ArrayRef> arrays;

  std::vector<std::pair<VarId, int>> inputs;        // set_to_constant pins
  std::vector<std::pair<VarId, int>> observations;  // observe_value sites

  std::vector<FactorTable> tables;
  std::vector<Factor> factors;
  std::vector<Gate> gates;       // gates[0] is the root scope
  std::vector<GateFamily> families;
  std::vector<std::set<VarId>> active_sets;  // per gate
  std::vector<GhostSite> ghost_sites;

  int n_vars() const { return static_cast<int>(var_domain.size()); }
  VarId cell_id(const std::string& array, std::initializer_list<long long> idx) const;
  VarId find_var(const std::string& cell) const;  // by debug name, -1 if absent

  // Number of parameter configurations as log10 (the enumeration space of
  // the free, unpinned parameter cells).
  double log10_param_space() const;

  // Deterministic text rendering used for golden tests.
  std::string dump() const;
};

// Builds the dense table of a @CompileMe function by evaluating its body on
// every input configuration; outputs outside the declared output domain are
// recorded as out-of-range rather than raised.
FactorTable tabulate_function(const CheckedModel& model, const FuncInfo& fn);

// Lowers an unrolled program to the gated factor graph. Expects a model that
// passed check_semantics; residual violations throw TptError.
GatedFactorGraph build_graph(const CheckedModel& model, const Ast& unrolled);

// Convenience pipeline: preprocessed source -> graph.
GatedFactorGraph compile_to_graph(const CheckedModel& model);

}  // namespace tpt
