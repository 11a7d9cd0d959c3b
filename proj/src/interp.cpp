#include "tpt/interp.hpp"

namespace tpt {

namespace {

struct Executor {
  const GatedFactorGraph& g;
  ExecTrace& trace;

  bool run_gate(int gate) {
    for (const Gate::Item& item : g.gates[static_cast<size_t>(gate)].body) {
      if (item.kind == Gate::Item::FactorItem) {
        const Factor& f = g.factors[static_cast<size_t>(item.index)];
        const FactorTable& t = g.tables[static_cast<size_t>(f.table)];
        size_t k = 0;
        for (size_t i = 0; i < f.inputs.size(); ++i)
          k = k * static_cast<size_t>(t.in_domains[i]) +
              static_cast<size_t>(trace.values[static_cast<size_t>(f.inputs[i])]);
        int out = t.table[k];
        if (out == kOutOfRange) {
          trace.fault_factor = item.index;
          return false;
        }
        trace.values[static_cast<size_t>(f.output)] = out;
        trace.assignments.emplace_back(f.output, out);
      } else {
        const GateFamily& fam = g.families[static_cast<size_t>(item.index)];
        int v = trace.values[static_cast<size_t>(fam.subject)];
        for (size_t a = 0; a < fam.arm_values.size(); ++a) {
          if (fam.arm_values[a] == v) {
            if (!run_gate(fam.arm_gates[a])) return false;
            break;
          }
        }
      }
    }
    return true;
  }
};

}  // namespace

ExecTrace execute(const GatedFactorGraph& graph, const ParamAssignment& params,
                  const std::vector<std::pair<VarId, int>>& input_overrides) {
  ExecTrace trace;
  trace.values.assign(static_cast<size_t>(graph.n_vars()), -1);
  for (size_t i = 0; i < graph.params.size(); ++i) {
    trace.values[static_cast<size_t>(graph.params[i])] = params.values[i];
    trace.assignments.emplace_back(graph.params[i], params.values[i]);
  }
  for (const auto& [v, val] : graph.inputs) {
    trace.values[static_cast<size_t>(v)] = val;
    trace.assignments.emplace_back(v, val);
  }
  for (const auto& [v, val] : input_overrides) {
    trace.values[static_cast<size_t>(v)] = val;
    trace.assignments.emplace_back(v, val);
  }
  Executor{graph, trace}.run_gate(0);
  for (const auto& [v, val] : graph.observations)
    trace.observations.push_back(
        ExecTrace::Obs{v, val, trace.values[static_cast<size_t>(v)]});
  return trace;
}

bool check_consistency(const GatedFactorGraph& graph, const ParamAssignment& params) {
  return execute(graph, params).consistent();
}

EnumResult enumerate_solve(const GatedFactorGraph& graph, long long max_enumerations) {
  // Pinned parameter cells are fixed by their input value and not scanned.
  std::map<VarId, int> pins;
  for (const auto& [v, val] : graph.inputs)
    if (graph.var_is_param[static_cast<size_t>(v)]) pins[v] = val;

  std::vector<size_t> free_slots;  // indices into graph.params
  ParamAssignment a;
  a.values.assign(graph.params.size(), 0);
  for (size_t i = 0; i < graph.params.size(); ++i) {
    auto it = pins.find(graph.params[i]);
    if (it != pins.end())
      a.values[i] = it->second;
    else
      free_slots.push_back(i);
  }

  EnumResult result;
  for (;;) {
    if (result.tried >= max_enumerations) {
      result.status = EnumStatus::BudgetExhausted;
      return result;
    }
    ++result.tried;
    if (check_consistency(graph, a)) {
      result.status = EnumStatus::Found;
      result.assignment = a;
      return result;
    }
    // Advance the odometer; most significant digit is the smallest VarId.
    size_t d = free_slots.size();
    while (d-- > 0) {
      size_t slot = free_slots[d];
      int dom = graph.var_domain[static_cast<size_t>(graph.params[slot])];
      if (++a.values[slot] < dom) break;
      a.values[slot] = 0;
      if (d == 0) {
        result.status = EnumStatus::NoSolution;
        return result;
      }
    }
    if (free_slots.empty()) {
      result.status = EnumStatus::NoSolution;
      return result;
    }
  }
}

ParamAssignment assignment_with_pins(const GatedFactorGraph& graph,
                                     const std::map<VarId, int>& free_values) {
  std::map<VarId, int> pins;
  for (const auto& [v, val] : graph.inputs)
    if (graph.var_is_param[static_cast<size_t>(v)]) pins[v] = val;
  ParamAssignment a;
  a.values.assign(graph.params.size(), 0);
  for (size_t i = 0; i < graph.params.size(); ++i) {
    VarId p = graph.params[i];
    auto pin = pins.find(p);
    if (pin != pins.end()) {
      a.values[i] = pin->second;
    } else {
      auto it = free_values.find(p);
      if (it != free_values.end()) a.values[i] = it->second;
    }
  }
  return a;
}

std::map<std::string, int> assignment_to_names(const GatedFactorGraph& graph,
                                               const ParamAssignment& a) {
  std::map<std::string, int> out;
  for (size_t i = 0; i < graph.params.size(); ++i)
    out[graph.var_name[static_cast<size_t>(graph.params[i])]] = a.values[i];
  return out;
}

ParamAssignment assignment_from_names(const GatedFactorGraph& graph,
                                      const std::map<std::string, int>& names) {
  ParamAssignment a;
  a.values.assign(graph.params.size(), 0);
  for (size_t i = 0; i < graph.params.size(); ++i) {
    const std::string& name = graph.var_name[static_cast<size_t>(graph.params[i])];
    auto it = names.find(name);
    if (it == names.end())
      throw TptError("assignment", "missing value for parameter cell '" + name + "'");
    int v = it->second;
    if (v < 0 || v >= graph.var_domain[static_cast<size_t>(graph.params[i])])
      throw TptError("assignment", "value for '" + name + "' outside its domain");
    a.values[i] = v;
  }
  return a;
}

}  // namespace tpt
