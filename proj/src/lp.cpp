#include "tpt/lp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "tpt/smt.hpp"

namespace tpt {

namespace {

std::string sanitize(const std::string& cell) {
  std::string s;
  s.reserve(cell.size());
  for (char c : cell) {
    if (c == '[' || c == ',') {
      s += '_';
    } else if (c == ']') {
      // dropped
    } else {
      s += c;
    }
  }
  return s;
}

}  // namespace

double LpModel::objective_value(const std::vector<double>& x) const {
  double v = 0;
  for (const auto& [col, c] : objective) v += c * x[static_cast<size_t>(col)];
  return v;
}

LpModel build_lp(const GatedFactorGraph& g, const LpBuildOptions& opt) {
  LpModel m;
  m.milp = opt.milp;

  // Unary marginal columns for every (variable, gate) active pair. The
  // global scope counts every variable (the root lies on every
  // declaration-to-use path; unused variables still get their normalized
  // global marginal).
  for (VarId v = 0; v < g.n_vars(); ++v) {
    for (const Gate& gt : g.gates) {
      bool active = gt.id == 0 || g.active_sets[static_cast<size_t>(gt.id)].count(v) > 0;
      if (!active) continue;
      m.unary_base[{v, gt.id}] = static_cast<int>(m.columns.size());
      for (int x = 0; x < g.var_domain[static_cast<size_t>(v)]; ++x) {
        LpModel::Column col;
        col.kind = LpModel::Column::Unary;
        col.var = v;
        col.gate = gt.id;
        col.value = x;
        col.name = "mu_" + sanitize(g.var_name[static_cast<size_t>(v)]) +
                   (gt.id == 0 ? "" : "_g" + std::to_string(gt.id)) + "_" + std::to_string(x);
        col.binary = opt.milp && gt.id == 0 && g.var_is_param[static_cast<size_t>(v)];
        m.columns.push_back(std::move(col));
      }
    }
  }

  if (opt.ghosts) {
    for (const GhostSite& gs : g.ghost_sites) {
      m.ghost_base[{gs.var, gs.family}] = static_cast<int>(m.columns.size());
      for (int x = 0; x < g.var_domain[static_cast<size_t>(gs.var)]; ++x) {
        LpModel::Column col;
        col.kind = LpModel::Column::Ghost;
        col.var = gs.var;
        col.family = gs.family;
        col.value = x;
        col.name = "mu_" + sanitize(g.var_name[static_cast<size_t>(gs.var)]) + "_F" +
                   std::to_string(gs.family) + "_ghost_" + std::to_string(x);
        m.columns.push_back(std::move(col));
      }
    }
  }

  m.factor_base.resize(g.factors.size());
  for (size_t j = 0; j < g.factors.size(); ++j) {
    const FactorTable& t = g.tables[static_cast<size_t>(g.factors[j].table)];
    size_t in_configs = t.config_count();
    m.factor_base[j] = static_cast<int>(m.columns.size());
    for (int y = 0; y < t.out_domain; ++y) {
      for (size_t k = 0; k < in_configs; ++k) {
        LpModel::Column col;
        col.kind = LpModel::Column::FactorMarg;
        col.factor = static_cast<int>(j);
        col.config = static_cast<int>(static_cast<size_t>(y) * in_configs + k);
        col.name = "muf" + std::to_string(j) + "_" + std::to_string(col.config);
        bool matched = t.table[k] == y;
        if (opt.hard && !matched) col.fixed_zero = true;
        if (matched) m.objective.emplace_back(static_cast<int>(m.columns.size()), 1.0);
        m.columns.push_back(std::move(col));
      }
    }
  }

  auto add_row = [&](std::string name, std::vector<std::pair<int, double>> coeffs, double rhs) {
    m.rows.push_back(LpModel::Row{std::move(name), std::move(coeffs), rhs});
  };

  // (2) Normalization: global marginals sum to 1; in-gate marginals sum to
  // the gate marginal (the condition value's marginal in the parent scope).
  for (const auto& [key, base] : m.unary_base) {
    auto [v, gate] = key;
    std::vector<std::pair<int, double>> coeffs;
    for (int x = 0; x < g.var_domain[static_cast<size_t>(v)]; ++x) coeffs.emplace_back(base + x, 1.0);
    std::string cn = sanitize(g.var_name[static_cast<size_t>(v)]);
    if (gate == 0) {
      add_row("norm_" + cn, std::move(coeffs), 1.0);
    } else {
      const Gate& gt = g.gates[static_cast<size_t>(gate)];
      const GateFamily& fam = g.families[static_cast<size_t>(gt.family)];
      coeffs.emplace_back(m.unary(fam.subject, fam.parent_gate, gt.cond_value), -1.0);
      add_row("norm_" + cn + "_g" + std::to_string(gate), std::move(coeffs), 0.0);
    }
  }

  // (3) Factor local consistency: fixing one scope variable and summing the
  // factor marginal equals the variable's in-scope unary marginal.
  for (size_t j = 0; j < g.factors.size(); ++j) {
    const Factor& f = g.factors[j];
    const FactorTable& t = g.tables[static_cast<size_t>(f.table)];
    size_t in_configs = t.config_count();
    std::vector<int> vals;
    // Output variable.
    for (int y = 0; y < t.out_domain; ++y) {
      std::vector<std::pair<int, double>> coeffs;
      for (size_t k = 0; k < in_configs; ++k)
        coeffs.emplace_back(m.factor_base[j] + static_cast<int>(static_cast<size_t>(y) * in_configs + k),
                            1.0);
      coeffs.emplace_back(m.unary(f.output, f.gate, y), -1.0);
      add_row("fc_f" + std::to_string(j) + "_out_" + std::to_string(y), std::move(coeffs), 0.0);
    }
    // Input variables. Repeated cells in one scope do not occur (factor
    // inputs are distinct by construction).
    for (size_t i = 0; i < f.inputs.size(); ++i) {
      for (int x = 0; x < t.in_domains[i]; ++x) {
        std::vector<std::pair<int, double>> coeffs;
        for (size_t k = 0; k < in_configs; ++k) {
          t.decode(k, vals);
          if (vals[i] != x) continue;
          for (int y = 0; y < t.out_domain; ++y)
            coeffs.emplace_back(
                m.factor_base[j] + static_cast<int>(static_cast<size_t>(y) * in_configs + k), 1.0);
        }
        coeffs.emplace_back(m.unary(f.inputs[i], f.gate, x), -1.0);
        add_row("fc_f" + std::to_string(j) + "_in" + std::to_string(i) + "_" + std::to_string(x),
                std::move(coeffs), 0.0);
      }
    }
  }

  // (4)+(5) Parent-child consistency with ghost marginals.
  for (const GateFamily& fam : g.families) {
    // Variables of the parent scope that are active in at least one arm.
    std::set<VarId> candidates;
    for (int arm : fam.arm_gates)
      for (VarId v : g.active_sets[static_cast<size_t>(arm)]) candidates.insert(v);
    for (VarId v : candidates) {
      bool parent_active = fam.parent_gate == 0 ||
                           g.active_sets[static_cast<size_t>(fam.parent_gate)].count(v) > 0;
      if (!parent_active) continue;
      bool has_ghost = opt.ghosts && m.ghost_base.count({v, fam.id}) > 0;
      for (int x = 0; x < g.var_domain[static_cast<size_t>(v)]; ++x) {
        std::vector<std::pair<int, double>> coeffs;
        coeffs.emplace_back(m.unary(v, fam.parent_gate, x), 1.0);
        for (int arm : fam.arm_gates) {
          if (g.active_sets[static_cast<size_t>(arm)].count(v))
            coeffs.emplace_back(m.unary(v, arm, x), -1.0);
        }
        if (has_ghost) coeffs.emplace_back(m.ghost_base.at({v, fam.id}) + x, -1.0);
        add_row("pc_" + sanitize(g.var_name[static_cast<size_t>(v)]) + "_F" + std::to_string(fam.id) +
                    "_" + std::to_string(x),
                std::move(coeffs), 0.0);
      }
      if (has_ghost) {
        // Ghost normalization: total ghost mass equals the subject mass of
        // the branches where the variable is undefined.
        std::vector<std::pair<int, double>> coeffs;
        int base = m.ghost_base.at({v, fam.id});
        for (int x = 0; x < g.var_domain[static_cast<size_t>(v)]; ++x) coeffs.emplace_back(base + x, 1.0);
        for (size_t a = 0; a < fam.arm_gates.size(); ++a) {
          if (!g.active_sets[static_cast<size_t>(fam.arm_gates[a])].count(v))
            coeffs.emplace_back(m.unary(fam.subject, fam.parent_gate, fam.arm_values[a]), -1.0);
        }
        for (int uv : fam.unhandled_values)
          coeffs.emplace_back(m.unary(fam.subject, fam.parent_gate, uv), -1.0);
        add_row("ghostnorm_" + sanitize(g.var_name[static_cast<size_t>(v)]) + "_F" +
                    std::to_string(fam.id),
                std::move(coeffs), 0.0);
      }
    }
  }

  // (6) Observation and input pinning in the global scope.
  auto pin = [&](VarId v, int value, const char* tag, size_t idx) {
    for (int x = 0; x < g.var_domain[static_cast<size_t>(v)]; ++x) {
      if (x == value) continue;
      add_row(std::string(tag) + std::to_string(idx) + "_" + std::to_string(x),
              {{m.unary(v, 0, x), 1.0}}, 0.0);
    }
  };
  for (size_t i = 0; i < g.inputs.size(); ++i) pin(g.inputs[i].first, g.inputs[i].second, "pin_in", i);
  for (size_t i = 0; i < g.observations.size(); ++i)
    pin(g.observations[i].first, g.observations[i].second, "pin_obs", i);

  return m;
}

std::string emit_lp(const LpModel& m) {
  std::ostringstream os;
  os << "\\ gated relaxation, " << m.columns.size() << " columns, " << m.rows.size() << " rows\n";
  os << "Maximize\n obj:";
  if (m.objective.empty()) os << " 0 " << (m.columns.empty() ? "x0" : m.columns[0].name);
  int per_line = 0;
  for (size_t i = 0; i < m.objective.size(); ++i) {
    os << " + " << m.columns[static_cast<size_t>(m.objective[i].first)].name;
    if (++per_line == 8 && i + 1 < m.objective.size()) {
      os << "\n     ";
      per_line = 0;
    }
  }
  os << "\nSubject To\n";
  for (const LpModel::Row& r : m.rows) {
    os << " " << r.name << ":";
    per_line = 0;
    for (size_t i = 0; i < r.coeffs.size(); ++i) {
      double c = r.coeffs[i].second;
      const std::string& name = m.columns[static_cast<size_t>(r.coeffs[i].first)].name;
      if (c >= 0)
        os << " + " << (c == 1.0 ? "" : std::to_string(c) + " ") << name;
      else
        os << " - " << (c == -1.0 ? "" : std::to_string(-c) + " ") << name;
      if (++per_line == 8 && i + 1 < r.coeffs.size()) {
        os << "\n     ";
        per_line = 0;
      }
    }
    os << " = " << r.rhs << "\n";
  }
  os << "Bounds\n";
  for (const LpModel::Column& c : m.columns) {
    if (c.fixed_zero)
      os << " " << c.name << " = 0\n";
    else
      os << " 0 <= " << c.name << " <= 1\n";
  }
  if (m.milp) {
    os << "Binary\n";
    for (const LpModel::Column& c : m.columns)
      if (c.binary) os << " " << c.name << "\n";
  }
  os << "End\n";
  return os.str();
}

std::vector<double> integral_vertex(const GatedFactorGraph& g, const LpModel& m,
                                    const ParamAssignment& assignment) {
  ExecTrace trace = execute(g, assignment);
  if (!trace.consistent())
    throw TptError("lp-vertex", "assignment is not consistent; no integral vertex exists");

  auto value_of = [&](VarId v) {
    int x = trace.values[static_cast<size_t>(v)];
    return x < 0 ? 0 : x;  // never-executed variables take the default 0
  };

  std::vector<char> taken(g.gates.size(), 0);
  taken[0] = 1;
  for (const Gate& gt : g.gates) {
    if (gt.id == 0) continue;
    const GateFamily& fam = g.families[static_cast<size_t>(gt.family)];
    taken[static_cast<size_t>(gt.id)] =
        taken[static_cast<size_t>(gt.parent)] &&
        trace.values[static_cast<size_t>(fam.subject)] == gt.cond_value;
  }

  std::vector<double> x(m.columns.size(), 0.0);
  for (size_t ci = 0; ci < m.columns.size(); ++ci) {
    const LpModel::Column& col = m.columns[ci];
    switch (col.kind) {
      case LpModel::Column::Unary:
        if (taken[static_cast<size_t>(col.gate)] && value_of(col.var) == col.value) x[ci] = 1.0;
        break;
      case LpModel::Column::Ghost: {
        const GateFamily& fam = g.families[static_cast<size_t>(col.family)];
        if (!taken[static_cast<size_t>(fam.parent_gate)]) break;
        int s = trace.values[static_cast<size_t>(fam.subject)];
        bool inactive_branch = true;
        for (size_t a = 0; a < fam.arm_values.size(); ++a) {
          if (fam.arm_values[a] == s) {
            inactive_branch = !g.active_sets[static_cast<size_t>(fam.arm_gates[a])].count(col.var);
            break;
          }
        }
        if (inactive_branch && value_of(col.var) == col.value) x[ci] = 1.0;
        break;
      }
      case LpModel::Column::FactorMarg: {
        const Factor& f = g.factors[static_cast<size_t>(col.factor)];
        if (!taken[static_cast<size_t>(f.gate)]) break;
        const FactorTable& t = g.tables[static_cast<size_t>(f.table)];
        size_t in_configs = t.config_count();
        size_t k = 0;
        for (size_t i = 0; i < f.inputs.size(); ++i)
          k = k * static_cast<size_t>(t.in_domains[i]) +
              static_cast<size_t>(trace.values[static_cast<size_t>(f.inputs[i])]);
        size_t cfg = static_cast<size_t>(trace.values[static_cast<size_t>(f.output)]) * in_configs + k;
        if (static_cast<size_t>(col.config) == cfg) x[ci] = 1.0;
        break;
      }
    }
  }
  return x;
}

double max_violation(const LpModel& m, const std::vector<double>& x) {
  double worst = 0;
  for (const LpModel::Row& r : m.rows) {
    double lhs = 0;
    for (const auto& [col, c] : r.coeffs) lhs += c * x[static_cast<size_t>(col)];
    worst = std::max(worst, std::abs(lhs - r.rhs));
  }
  for (size_t ci = 0; ci < m.columns.size(); ++ci) {
    if (m.columns[ci].fixed_zero) worst = std::max(worst, std::abs(x[ci]));
    worst = std::max(worst, std::max(-x[ci], x[ci] - 1.0));
  }
  return worst;
}

namespace {

LpSolution classify(const GatedFactorGraph& g, const LpModel& m, std::vector<double> values,
                    std::string status) {
  LpSolution sol;
  sol.values = std::move(values);
  sol.status = std::move(status);
  sol.objective = m.objective_value(sol.values);
  sol.integral = true;
  std::map<VarId, int> free_values;
  for (VarId p : g.params) {
    int base = m.unary_base.at({p, 0});
    int chosen = -1;
    for (int x = 0; x < g.var_domain[static_cast<size_t>(p)]; ++x) {
      double v = sol.values[static_cast<size_t>(base + x)];
      if (std::abs(v - 1.0) <= kIntegralityTol) {
        chosen = x;
      } else if (std::abs(v) > kIntegralityTol) {
        sol.integral = false;
      }
    }
    if (chosen < 0) sol.integral = false;
    if (sol.integral) free_values[p] = chosen;
  }
  if (sol.integral) {
    ParamAssignment a = assignment_with_pins(g, free_values);
    sol.assignment = a;
    sol.verified = check_consistency(g, a);
  }
  return sol;
}

}  // namespace

LpSolution solve_lp(const GatedFactorGraph& g, const LpModel& m,
                    const std::optional<std::string>& solver_command, const std::string& workdir,
                    long long fallback_budget) {
  if (!solver_command) {
    // Documented fallback: the enumerative oracle finds an assignment and we
    // report the integral vertex it induces.
    EnumResult r = enumerate_solve(g, fallback_budget);
    LpSolution sol;
    if (r.status == EnumStatus::Found) {
      sol = classify(g, m, integral_vertex(g, m, *r.assignment), "optimal");
      sol.solver_output = "fallback: enumerative oracle";
    } else if (r.status == EnumStatus::NoSolution) {
      sol.status = "infeasible";
      sol.solver_output = "fallback: enumerative oracle";
    } else {
      throw TptError("lp-fallback", "enumeration budget exhausted and no external solver configured");
    }
    return sol;
  }

  std::string dir = workdir.empty() ? "." : workdir;
  std::string base = dir + "/lpmodel_" + std::to_string(reinterpret_cast<uintptr_t>(&m) & 0xffff);
  std::string model_path = base + ".lp";
  std::string sol_path = base + ".out";
  {
    std::ofstream f(model_path, std::ios::binary);
    if (!f) throw TptError("lp-io", "cannot write " + model_path);
    f << emit_lp(m);
  }
  std::string out;
  int rc = run_command(*solver_command + " " + model_path + " " + sol_path, &out);
  if (rc == -1) throw TptError("lp-process", "failed to launch solver: " + *solver_command);

  std::ifstream sf(sol_path);
  if (!sf) throw TptError("lp-solver", "solver produced no solution file; output:\n" + out);
  std::map<std::string, double> by_name;
  std::string status;
  std::string line;
  while (std::getline(sf, line)) {
    std::istringstream ls(line);
    std::string name;
    if (!(ls >> name)) continue;
    if (name == "optimal" || name == "infeasible" || name == "unbounded") {
      status = name;
      continue;
    }
    double v;
    if (ls >> v) by_name[name] = v;
  }
  std::remove(model_path.c_str());
  std::remove(sol_path.c_str());
  if (status.empty())
    throw TptError("lp-solver", "solution file lacks a status line; output:\n" + out);

  if (status != "optimal") {
    LpSolution sol;
    sol.status = status;
    sol.solver_output = out;
    return sol;
  }
  std::vector<double> values(m.columns.size(), 0.0);
  for (size_t ci = 0; ci < m.columns.size(); ++ci) {
    auto it = by_name.find(m.columns[ci].name);
    if (it != by_name.end()) values[ci] = it->second;
  }
  LpSolution sol = classify(g, m, std::move(values), status);
  sol.solver_output = out;
  return sol;
}

}  // namespace tpt
