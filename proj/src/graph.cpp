#include "tpt/graph.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>

#include "tpt/unroll.hpp"

namespace tpt {

VarId GatedFactorGraph::cell_id(const std::string& array, std::initializer_list<long long> idx) const {
  for (const ArrayRef& a : arrays) {
    if (a.name != array) continue;
    if (a.dims.size() != idx.size()) return -1;
    long long flat = 0;
    size_t d = 0;
    for (long long i : idx) flat = flat * a.dims[d++] + i;
    return a.base + static_cast<VarId>(flat);
  }
  return -1;
}

VarId GatedFactorGraph::find_var(const std::string& cell) const {
  for (int i = 0; i < n_vars(); ++i)
    if (var_name[static_cast<size_t>(i)] == cell) return i;
  return -1;
}

double GatedFactorGraph::log10_param_space() const {
  std::set<VarId> pinned;
  for (const auto& [v, val] : inputs) {
    (void)val;
    pinned.insert(v);
  }
  double lg = 0;
  for (VarId p : params)
    if (!pinned.count(p)) lg += std::log10(static_cast<double>(var_domain[static_cast<size_t>(p)]));
  return lg;
}

FactorTable tabulate_function(const CheckedModel& model, const FuncInfo& fn) {
  FactorTable t;
  t.label = fn.name;
  for (long long d : fn.in_domains) t.in_domains.push_back(static_cast<int>(d));
  t.out_domain = static_cast<int>(fn.out_domain);
  size_t configs = 1;
  for (int d : t.in_domains) configs *= static_cast<size_t>(d);
  t.table.resize(configs);
  std::vector<int> vals;
  std::vector<long long> args(t.in_domains.size());
  for (size_t k = 0; k < configs; ++k) {
    t.decode(k, vals);
    for (size_t i = 0; i < vals.size(); ++i) args[i] = vals[i];
    long long out = call_function(model, fn, args);
    if (out < 0 || out >= fn.out_domain) {
      t.table[k] = kOutOfRange;
      t.leak = true;
    } else {
      t.table[k] = static_cast<int>(out);
    }
  }
  return t;
}

namespace {

constexpr size_t kMaxTableConfigs = 1u << 22;

class GraphBuilder {
 public:
  GraphBuilder(const CheckedModel& model, const Ast& unrolled) : model_(model), unrolled_(unrolled) {}

  GatedFactorGraph run() {
    // Variables, in declaration order.
    for (const ArrayInfo& arr : model_.arrays) {
      GatedFactorGraph::ArrayRef ref;
      ref.name = arr.name;
      ref.is_param = arr.is_param;
      ref.domain = static_cast<int>(arr.domain);
      ref.dims = arr.dims;
      ref.base = g_.n_vars();
      ref.cells = arr.cells;
      for (long long c = 0; c < arr.cells; ++c) {
        g_.var_domain.push_back(static_cast<int>(arr.domain));
        g_.var_name.push_back(cell_name(arr, c));
        g_.var_is_param.push_back(arr.is_param);
        if (arr.is_param) g_.params.push_back(g_.n_vars() - 1);
      }
      g_.arrays.push_back(std::move(ref));
    }

    Gate root;
    root.id = 0;
    g_.gates.push_back(root);

    build_block(unrolled_.stmts, 0);

    compute_active_sets();
    compute_ghosts_and_exports();
    check_leak_placement();
    return std::move(g_);
  }

 private:
  const CheckedModel& model_;
  const Ast& unrolled_;
  GatedFactorGraph g_;
  std::map<std::string, int> table_cache_;  // content key -> table index

  VarId resolve(const std::string& name, const std::vector<ExprPtr>& indices) const {
    for (const auto& a : g_.arrays) {
      if (a.name != name) continue;
      long long flat = 0;
      for (size_t d = 0; d < indices.size(); ++d)
        flat = flat * a.dims[d] + indices[d]->as<Expr::IntLit>()->value;
      return a.base + static_cast<VarId>(flat);
    }
    throw TptError("internal", "unknown array '" + name + "'");
  }

  VarId resolve_lvalue(const LValue& lv) const { return resolve(lv.name, lv.indices); }

  VarId resolve_ref(const ExprPtr& e) const {
    if (const auto* n = e->as<Expr::Name>()) return resolve(n->name, {});
    const auto* ix = e->as<Expr::Index>();
    return resolve(ix->name, ix->indices);
  }

  // Collects distinct data cells referenced by an expression, in order of
  // first occurrence. These become the factor inputs.
  void collect_cells(const ExprPtr& e, std::vector<VarId>& out) const {
    if (const auto* n = e->as<Expr::Name>()) {
      if (!model_.array_index.count(n->name)) return;
      VarId v = resolve(n->name, {});
      if (std::find(out.begin(), out.end(), v) == out.end()) out.push_back(v);
      return;
    }
    if (e->as<Expr::Index>()) {
      VarId v = resolve_ref(e);
      if (std::find(out.begin(), out.end(), v) == out.end()) out.push_back(v);
      return;
    }
    if (const auto* c = e->as<Expr::Call>()) {
      for (const auto& a : c->args) collect_cells(a, out);
      return;
    }
    if (const auto* b = e->as<Expr::Bin>()) {
      collect_cells(b->lhs, out);
      collect_cells(b->rhs, out);
      return;
    }
    if (const auto* nt = e->as<Expr::Not>()) collect_cells(nt->arg, out);
  }

  // Evaluates a model-level arithmetic expression with cells bound to
  // concrete values.
  long long eval_with_cells(const ExprPtr& e, const std::map<VarId, long long>& cells) const {
    if (const auto* i = e->as<Expr::IntLit>()) return i->value;
    if (const auto* n = e->as<Expr::Name>()) {
      if (model_.array_index.count(n->name)) return cells.at(resolve(n->name, {}));
      return eval_runtime(model_, e, {});
    }
    if (e->as<Expr::Index>()) return cells.at(resolve_ref(e));
    if (const auto* c = e->as<Expr::Call>()) {
      const FuncInfo& fn = model_.functions.at(c->name);
      std::vector<long long> args;
      for (const auto& a : c->args) args.push_back(eval_with_cells(a, cells));
      return call_function(model_, fn, args);
    }
    if (const auto* b = e->as<Expr::Bin>()) {
      long long lhs = eval_with_cells(b->lhs, cells);
      long long rhs = eval_with_cells(b->rhs, cells);
      // Reuse the shared checked arithmetic via a synthetic expression.
      switch (b->op) {
        case BinOp::Add: return lhs + rhs;
        case BinOp::Sub: return lhs - rhs;
        case BinOp::Mul: return lhs * rhs;
        case BinOp::Div:
        case BinOp::Mod: {
          if (rhs <= 0) throw TptError("arith-div", "division by nonpositive divisor", e->loc);
          long long q = lhs / rhs;
          if ((lhs % rhs != 0) && lhs < 0) --q;
          return b->op == BinOp::Div ? q : lhs - q * rhs;
        }
        default: throw TptError("type", "boolean operator in set_to expression", e->loc);
      }
    }
    throw TptError("type", "unsupported expression", e->loc);
  }

  // Tabulates the right-hand side of a set_to over the domains of the cells
  // it references.
  int tabulate_rhs(const ExprPtr& rhs, const std::vector<VarId>& inputs, int out_domain,
                   SourceLoc loc) {
    FactorTable t;
    if (const auto* c = rhs->as<Expr::Call>()) {
      bool plain = c->args.size() == inputs.size();
      if (plain) {
        for (size_t i = 0; i < c->args.size() && plain; ++i) {
          const auto& a = c->args[i];
          plain = (a->as<Expr::Name>() || a->as<Expr::Index>()) && resolve_ref(a) == inputs[i];
        }
      }
      t.label = plain ? c->name : "<expr>";
    } else if (rhs->as<Expr::Name>() || rhs->as<Expr::Index>()) {
      t.label = "<copy>";
    } else {
      t.label = "<expr>";
    }
    for (VarId v : inputs) t.in_domains.push_back(g_.var_domain[static_cast<size_t>(v)]);
    t.out_domain = out_domain;
    size_t configs = 1;
    for (int d : t.in_domains) {
      configs *= static_cast<size_t>(d);
      if (configs > kMaxTableConfigs)
        throw TptError("table-size", "factor table exceeds the configuration limit", loc);
    }
    t.table.resize(configs);
    std::vector<int> vals;
    std::map<VarId, long long> cells;
    for (size_t k = 0; k < configs; ++k) {
      t.decode(k, vals);
      for (size_t i = 0; i < inputs.size(); ++i) cells[inputs[i]] = vals[i];
      long long out;
      try {
        out = eval_with_cells(rhs, cells);
      } catch (const TptError& e) {
        throw TptError("tabulate", std::string("while tabulating set_to expression: ") + e.message(),
                       loc);
      }
      if (out < 0 || out >= out_domain) {
        t.table[k] = kOutOfRange;
        t.leak = true;
      } else {
        t.table[k] = static_cast<int>(out);
      }
    }
    return intern_table(std::move(t));
  }

  int intern_table(FactorTable t) {
    std::ostringstream key;
    key << t.out_domain << "|";
    for (int d : t.in_domains) key << d << ",";
    key << "|";
    for (int v : t.table) key << v << ",";
    auto [it, inserted] = table_cache_.emplace(key.str(), static_cast<int>(g_.tables.size()));
    if (inserted) g_.tables.push_back(std::move(t));
    return it->second;
  }

  void build_block(const Block& stmts, int gate) {
    for (const auto& s : stmts) build_stmt(s, gate);
  }

  void build_stmt(const StmtPtr& s, int gate) {
    if (s->as<Stmt::Assign>() || s->as<Stmt::Decl>() || s->as<Stmt::FuncDef>()) return;
    if (const auto* st = s->as<Stmt::SetTo>()) {
      Factor f;
      f.output = resolve_lvalue(st->target);
      collect_cells(st->value, f.inputs);
      f.gate = gate;
      f.loc = s->loc;
      f.is_copy = st->value->as<Expr::Name>() || st->value->as<Expr::Index>();
      f.table = tabulate_rhs(st->value, f.inputs, g_.var_domain[static_cast<size_t>(f.output)], s->loc);
      g_.gates[static_cast<size_t>(gate)].body.push_back(
          Gate::Item{Gate::Item::FactorItem, static_cast<int>(g_.factors.size())});
      g_.factors.push_back(std::move(f));
      return;
    }
    if (const auto* sc = s->as<Stmt::SetToConst>()) {
      g_.inputs.emplace_back(resolve_lvalue(sc->target),
                             static_cast<int>(sc->value->as<Expr::IntLit>()->value));
      return;
    }
    if (const auto* ob = s->as<Stmt::Observe>()) {
      g_.observations.emplace_back(resolve_lvalue(ob->target),
                                   static_cast<int>(ob->value->as<Expr::IntLit>()->value));
      return;
    }
    if (const auto* iff = s->as<Stmt::If>()) {
      GateFamily fam;
      fam.id = static_cast<int>(g_.families.size());
      fam.parent_gate = gate;
      fam.loc = s->loc;
      fam.subject = resolve_ref(iff->arms[0].cond->as<Expr::Bin>()->lhs);
      g_.families.push_back(fam);
      int fam_id = fam.id;
      g_.gates[static_cast<size_t>(gate)].body.push_back(Gate::Item{Gate::Item::FamilyItem, fam_id});
      g_.gates[static_cast<size_t>(gate)].children_families.push_back(fam_id);

      std::vector<bool> handled(static_cast<size_t>(g_.var_domain[static_cast<size_t>(fam.subject)]),
                                false);
      for (const auto& arm : iff->arms) {
        int value = static_cast<int>(arm.cond->as<Expr::Bin>()->rhs->as<Expr::IntLit>()->value);
        handled[static_cast<size_t>(value)] = true;
        Gate child;
        child.id = static_cast<int>(g_.gates.size());
        child.parent = gate;
        child.family = fam_id;
        child.cond_value = value;
        child.path_condition = g_.gates[static_cast<size_t>(gate)].path_condition;
        child.path_condition.emplace_back(g_.families[static_cast<size_t>(fam_id)].subject, value);
        g_.gates.push_back(std::move(child));
        int child_id = g_.gates.back().id;
        g_.families[static_cast<size_t>(fam_id)].arm_gates.push_back(child_id);
        g_.families[static_cast<size_t>(fam_id)].arm_values.push_back(value);
        build_block(arm.body, child_id);
      }
      for (size_t v = 0; v < handled.size(); ++v)
        if (!handled[v])
          g_.families[static_cast<size_t>(fam_id)].unhandled_values.push_back(static_cast<int>(v));
      g_.families[static_cast<size_t>(fam_id)].full_coverage =
          g_.families[static_cast<size_t>(fam_id)].unhandled_values.empty();
      return;
    }
    throw TptError("internal", "unexpected statement in unrolled program", s->loc);
  }

  // A variable is active in a gate iff the gate lies on the path between the
  // declaration (the global scope) and one of the variable's uses.
  void compute_active_sets() {
    g_.active_sets.assign(g_.gates.size(), {});
    auto mark = [&](VarId v, int gate) {
      for (int gi = gate; gi != -1; gi = g_.gates[static_cast<size_t>(gi)].parent)
        g_.active_sets[static_cast<size_t>(gi)].insert(v);
    };
    for (const Factor& f : g_.factors) {
      mark(f.output, f.gate);
      for (VarId v : f.inputs) mark(v, f.gate);
    }
    for (const GateFamily& fam : g_.families) mark(fam.subject, fam.parent_gate);
    for (const auto& [v, val] : g_.inputs) {
      (void)val;
      mark(v, 0);
    }
    for (const auto& [v, val] : g_.observations) {
      (void)val;
      mark(v, 0);
    }
  }

  // Ghost sites: (variable, family) pairs where the variable is active in at
  // least one but not all sibling branches (an unhandled condition value
  // counts as a branch without the variable).
  void compute_ghosts_and_exports() {
    for (GateFamily& fam : g_.families) {
      std::set<VarId> in_any;
      for (int arm : fam.arm_gates)
        for (VarId v : g_.active_sets[static_cast<size_t>(arm)]) in_any.insert(v);
      for (VarId v : in_any) {
        int arms_active = 0;
        for (int arm : fam.arm_gates)
          if (g_.active_sets[static_cast<size_t>(arm)].count(v)) ++arms_active;
        if (arms_active < static_cast<int>(fam.arm_gates.size()) || !fam.full_coverage)
          g_.ghost_sites.push_back(GhostSite{v, fam.id});
      }

      // Exports: cells assigned in every arm of a full-coverage family.
      if (!fam.full_coverage) continue;
      std::map<VarId, int> assigned_counts;
      std::function<void(int, std::set<VarId>&)> defined_in = [&](int gate, std::set<VarId>& out) {
        const Gate& gt = g_.gates[static_cast<size_t>(gate)];
        for (const auto& item : gt.body) {
          if (item.kind == Gate::Item::FactorItem) {
            out.insert(g_.factors[static_cast<size_t>(item.index)].output);
          } else {
            const GateFamily& inner = g_.families[static_cast<size_t>(item.index)];
            if (!inner.full_coverage) continue;
            std::set<VarId> common;
            bool first = true;
            for (int arm : inner.arm_gates) {
              std::set<VarId> arm_defined;
              defined_in(arm, arm_defined);
              if (first) {
                common = std::move(arm_defined);
                first = false;
              } else {
                std::set<VarId> merged;
                std::set_intersection(common.begin(), common.end(), arm_defined.begin(),
                                      arm_defined.end(), std::inserter(merged, merged.begin()));
                common = std::move(merged);
              }
            }
            for (VarId v : common) out.insert(v);
          }
        }
      };
      for (int arm : fam.arm_gates) {
        std::set<VarId> arm_defined;
        defined_in(arm, arm_defined);
        for (VarId v : arm_defined) assigned_counts[v]++;
      }
      for (const auto& [v, n] : assigned_counts)
        if (n == static_cast<int>(fam.arm_gates.size())) fam.exports.push_back(v);
      std::sort(fam.exports.begin(), fam.exports.end());
    }
  }

  void check_leak_placement() const {
    for (const Factor& f : g_.factors) {
      if (g_.tables[static_cast<size_t>(f.table)].leak && f.gate == 0)
        throw TptError("leak-global",
                       "factor '" + g_.tables[static_cast<size_t>(f.table)].label +
                           "' can produce values outside the output domain and must appear inside "
                           "a gate",
                       f.loc);
    }
  }
};

}  // namespace

GatedFactorGraph build_graph(const CheckedModel& model, const Ast& unrolled) {
  return GraphBuilder(model, unrolled).run();
}

GatedFactorGraph compile_to_graph(const CheckedModel& model) {
  if (!model.ok()) throw TptError("compile", "model has semantic errors");
  Ast unrolled = unroll(model);
  // Re-run the cell-level validation in throwing mode; build_graph assumes a
  // legal program.
  CheckedModel copy = model;
  validate_by_unrolling(copy);
  if (!copy.ok()) throw TptError(copy.diags.front().code, copy.diags.front().message, copy.diags.front().loc);
  return build_graph(model, unrolled);
}

std::string GatedFactorGraph::dump() const {
  std::ostringstream os;
  os << "variables " << n_vars() << "\n";
  for (int v = 0; v < n_vars(); ++v) {
    os << "  v" << v << " " << var_name[static_cast<size_t>(v)] << " domain "
       << var_domain[static_cast<size_t>(v)] << (var_is_param[static_cast<size_t>(v)] ? " param" : "")
       << "\n";
  }
  os << "inputs";
  for (const auto& [v, val] : inputs) os << " (" << var_name[static_cast<size_t>(v)] << "=" << val << ")";
  os << "\nobservations";
  for (const auto& [v, val] : observations)
    os << " (" << var_name[static_cast<size_t>(v)] << "=" << val << ")";
  os << "\nfactors " << factors.size() << "\n";
  for (size_t i = 0; i < factors.size(); ++i) {
    const Factor& f = factors[i];
    os << "  f" << i << " gate " << f.gate << " " << var_name[static_cast<size_t>(f.output)] << " <- "
       << tables[static_cast<size_t>(f.table)].label << "(";
    for (size_t j = 0; j < f.inputs.size(); ++j) {
      if (j) os << ", ";
      os << var_name[static_cast<size_t>(f.inputs[j])];
    }
    os << ")";
    if (tables[static_cast<size_t>(f.table)].leak) os << " leak";
    os << "\n";
  }
  os << "gates " << gates.size() << "\n";
  for (const Gate& gt : gates) {
    os << "  g" << gt.id;
    if (gt.id == 0) {
      os << " root";
    } else {
      os << " parent g" << gt.parent << " path";
      for (const auto& [v, val] : gt.path_condition)
        os << " (" << var_name[static_cast<size_t>(v)] << "==" << val << ")";
    }
    os << " active {";
    bool first = true;
    for (VarId v : active_sets[static_cast<size_t>(gt.id)]) {
      if (!first) os << ", ";
      os << var_name[static_cast<size_t>(v)];
      first = false;
    }
    os << "}\n";
  }
  os << "families " << families.size() << "\n";
  for (const GateFamily& fam : families) {
    os << "  F" << fam.id << " in g" << fam.parent_gate << " on "
       << var_name[static_cast<size_t>(fam.subject)] << " arms";
    for (size_t a = 0; a < fam.arm_gates.size(); ++a)
      os << " " << fam.arm_values[a] << ":g" << fam.arm_gates[a];
    if (!fam.unhandled_values.empty()) {
      os << " unhandled";
      for (int v : fam.unhandled_values) os << " " << v;
    }
    os << " exports {";
    for (size_t j = 0; j < fam.exports.size(); ++j) {
      if (j) os << ", ";
      os << var_name[static_cast<size_t>(fam.exports[j])];
    }
    os << "}\n";
  }
  os << "ghosts";
  for (const GhostSite& gs : ghost_sites)
    os << " (" << var_name[static_cast<size_t>(gs.var)] << ", F" << gs.family << ")";
  os << "\n";
  return os.str();
}

}  // namespace tpt
