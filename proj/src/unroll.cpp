#include "tpt/unroll.hpp"

#include <functional>
#include <sstream>

namespace tpt {

std::string cell_name(const ArrayInfo& arr, long long flat) {
  if (arr.dims.empty()) return arr.name;
  std::vector<long long> idx(arr.dims.size());
  for (size_t d = arr.dims.size(); d-- > 0;) {
    idx[d] = flat % arr.dims[d];
    flat /= arr.dims[d];
  }
  std::ostringstream os;
  os << arr.name << "[";
  for (size_t d = 0; d < idx.size(); ++d) {
    if (d) os << ",";
    os << idx[d];
  }
  os << "]";
  return os.str();
}

namespace {

class Unroller {
 public:
  explicit Unroller(const CheckedModel& model) : model_(model) {}

  Ast run() {
    Ast out;
    std::map<std::string, long long> env;
    unroll_block(model_.ast.stmts, env, out.stmts);
    return out;
  }

 private:
  const CheckedModel& model_;

  long long fold(const ExprPtr& e, const std::map<std::string, long long>& env) {
    return eval_const(model_, e, env);
  }

  // Folds the indices of a data reference and bounds-checks them.
  std::vector<ExprPtr> fold_ref_indices(const std::string& name, const std::vector<ExprPtr>& indices,
                                        SourceLoc loc, const std::map<std::string, long long>& env) {
    const ArrayInfo* arr = model_.find_array(name);
    std::vector<ExprPtr> out;
    std::ostringstream cell;
    cell << name;
    if (!indices.empty()) cell << "[";
    for (size_t d = 0; d < indices.size(); ++d) {
      long long v = fold(indices[d], env);
      if (d) cell << ",";
      cell << v;
      if (arr && (v < 0 || v >= arr->dims[d])) {
        cell << (d + 1 < indices.size() ? ",..." : "]");
        throw TptError("index-bounds",
                       "index " + std::to_string(v) + " of cell " + cell.str() +
                           " is outside dimension {0.." + std::to_string(arr->dims[d] - 1) + "}",
                       loc);
      }
      out.push_back(make_int(v, indices[d]->loc));
    }
    return out;
  }

  LValue fold_lvalue(const LValue& lv, const std::map<std::string, long long>& env) {
    LValue out;
    out.name = lv.name;
    out.loc = lv.loc;
    out.indices = fold_ref_indices(lv.name, lv.indices, lv.loc, env);
    return out;
  }

  // Substitutes loop bindings and folds all array-access indices inside an
  // expression so that the result references concrete cells only.
  ExprPtr fold_expr(const ExprPtr& e, const std::map<std::string, long long>& env) {
    if (const auto* n = e->as<Expr::Name>()) {
      auto it = env.find(n->name);
      if (it != env.end()) return make_int(it->second, e->loc);
      return e;
    }
    if (e->as<Expr::IntLit>()) return e;
    if (const auto* ix = e->as<Expr::Index>()) {
      return make_index(ix->name, fold_ref_indices(ix->name, ix->indices, e->loc, env), e->loc);
    }
    if (const auto* c = e->as<Expr::Call>()) {
      std::vector<ExprPtr> args;
      for (const auto& a : c->args) args.push_back(fold_expr(a, env));
      return make_call(c->name, std::move(args), e->loc);
    }
    if (const auto* b = e->as<Expr::Bin>()) {
      return make_bin(b->op, fold_expr(b->lhs, env), fold_expr(b->rhs, env), e->loc);
    }
    if (const auto* nt = e->as<Expr::Not>()) {
      return make_not(fold_expr(nt->arg, env), e->loc);
    }
    return e;
  }

  void unroll_block(const Block& in, std::map<std::string, long long>& env, Block& out) {
    for (const auto& s : in) unroll_stmt(s, env, out);
  }

  // One if/elif chain becomes a chain whose conditions are `cell == value`
  // with a single shared subject; a trailing `else` expands over the
  // subject's unhandled domain values.
  void unroll_if(const Stmt::If& iff, SourceLoc loc, std::map<std::string, long long>& env,
                 Block& out) {
    Stmt::If folded;
    ExprPtr subject;
    std::string subject_key;
    std::vector<bool> handled;
    const ArrayInfo* arr = nullptr;
    for (const auto& arm : iff.arms) {
      const auto* cond = arm.cond->as<Expr::Bin>();
      ExprPtr lhs = fold_expr(cond->lhs, env);
      long long value = fold(cond->rhs, env);
      std::string key = pretty_print(lhs);
      if (!subject) {
        subject = lhs;
        subject_key = key;
        const std::string& name =
            lhs->as<Expr::Name>() ? lhs->as<Expr::Name>()->name : lhs->as<Expr::Index>()->name;
        arr = model_.find_array(name);
        handled.assign(static_cast<size_t>(arr->domain), false);
      } else if (key != subject_key) {
        throw TptError("gate-subject",
                       "conditions of one if/elif chain must test the same variable ('" +
                           subject_key + "' vs '" + key + "')",
                       cond->lhs->loc);
      }
      if (value < 0 || value >= arr->domain)
        throw TptError("gate-value",
                       "condition value " + std::to_string(value) + " outside domain {0.." +
                           std::to_string(arr->domain - 1) + "} of '" + subject_key + "'",
                       cond->rhs->loc);
      if (handled[static_cast<size_t>(value)])
        throw TptError("gate-duplicate",
                       "duplicate condition value " + std::to_string(value) + " for '" +
                           subject_key + "'",
                       cond->rhs->loc);
      handled[static_cast<size_t>(value)] = true;
      Stmt::If::Arm new_arm;
      new_arm.cond = make_bin(BinOp::Eq, lhs, make_int(value, cond->rhs->loc), arm.cond->loc);
      unroll_block(arm.body, env, new_arm.body);
      folded.arms.push_back(std::move(new_arm));
    }
    if (iff.else_body) {
      Block body;
      unroll_block(*iff.else_body, env, body);
      for (long long v = 0; v < arr->domain; ++v) {
        if (handled[static_cast<size_t>(v)]) continue;
        Stmt::If::Arm new_arm;
        new_arm.cond = make_bin(BinOp::Eq, subject, make_int(v, loc), loc);
        new_arm.body = body;
        folded.arms.push_back(std::move(new_arm));
      }
    }
    out.push_back(make_stmt(std::move(folded), loc));
  }

  void unroll_stmt(const StmtPtr& s, std::map<std::string, long long>& env, Block& out) {
    if (s->as<Stmt::Assign>() || s->as<Stmt::Decl>() || s->as<Stmt::FuncDef>()) {
      out.push_back(s);
      return;
    }
    if (const auto* st = s->as<Stmt::SetTo>()) {
      out.push_back(
          make_stmt(Stmt::SetTo{fold_lvalue(st->target, env), fold_expr(st->value, env)}, s->loc));
      return;
    }
    if (const auto* sc = s->as<Stmt::SetToConst>()) {
      long long v = fold(sc->value, env);
      out.push_back(make_stmt(
          Stmt::SetToConst{fold_lvalue(sc->target, env), make_int(v, sc->value->loc)}, s->loc));
      return;
    }
    if (const auto* ob = s->as<Stmt::Observe>()) {
      long long v = fold(ob->value, env);
      out.push_back(make_stmt(
          Stmt::Observe{fold_lvalue(ob->target, env), make_int(v, ob->value->loc)}, s->loc));
      return;
    }
    if (const auto* iff = s->as<Stmt::If>()) {
      unroll_if(*iff, s->loc, env, out);
      return;
    }
    if (const auto* f = s->as<Stmt::For>()) {
      long long lo = f->lo ? fold(f->lo, env) : 0;
      long long hi = fold(f->hi, env);
      for (long long v = lo; v < hi; ++v) {
        env[f->var] = v;
        unroll_block(f->body, env, out);
      }
      env.erase(f->var);
      return;
    }
    if (const auto* w = s->as<Stmt::With>()) {
      LValue subject = fold_lvalue(w->subject, env);
      const ArrayInfo* arr = model_.find_array(subject.name);
      Stmt::If chain;
      ExprPtr subj_expr = subject.indices.empty()
                              ? make_name(subject.name, subject.loc)
                              : make_index(subject.name, subject.indices, subject.loc);
      for (long long v = 0; v < arr->domain; ++v) {
        env[w->var] = v;
        Stmt::If::Arm arm;
        arm.cond = make_bin(BinOp::Eq, subj_expr, make_int(v, s->loc), s->loc);
        unroll_block(w->body, env, arm.body);
        chain.arms.push_back(std::move(arm));
      }
      env.erase(w->var);
      out.push_back(make_stmt(std::move(chain), s->loc));
      return;
    }
    throw TptError("unroll", "unexpected statement", s->loc);
  }
};

// ---------------------------------------------------------------------------
// Cell-level validation of an unrolled program.

class CellChecker {
 public:
  CellChecker(const CheckedModel& model, std::vector<Diagnostic>* sink)
      : model_(model), sink_(sink) {
    bases_.resize(model.arrays.size());
    long long next = 0;
    for (size_t i = 0; i < model.arrays.size(); ++i) {
      bases_[i] = next;
      next += model.arrays[i].cells;
    }
    n_cells_ = next;
  }

  void run(const Block& stmts) {
    Scope root;
    for (size_t i = 0; i < model_.arrays.size(); ++i) {
      if (!model_.arrays[i].is_param) continue;
      for (long long c = 0; c < model_.arrays[i].cells; ++c) root.defined.insert(bases_[i] + c);
    }
    scopes_.push_back(std::move(root));
    walk_block(stmts);
  }

 private:
  struct Scope {
    std::set<long long> defined;
    std::map<long long, SourceLoc> assigned;
  };

  const CheckedModel& model_;
  std::vector<Diagnostic>* sink_;
  std::vector<long long> bases_;
  long long n_cells_ = 0;
  std::vector<Scope> scopes_;
  // Cells assigned on only some branches of an already-closed gate family,
  // recorded so reads can cite the gate.
  std::map<long long, SourceLoc> partial_;

  void error(SourceLoc loc, std::string code, std::string msg) {
    if (sink_)
      sink_->push_back(Diagnostic{Severity::Error, std::move(code), std::move(msg), loc});
    else
      throw TptError(code, msg, loc);
  }

  long long resolve(const std::string& name, const std::vector<ExprPtr>& indices) const {
    int ai = model_.array_index.at(name);
    const ArrayInfo& arr = model_.arrays[static_cast<size_t>(ai)];
    long long flat = 0;
    for (size_t d = 0; d < indices.size(); ++d)
      flat = flat * arr.dims[d] + indices[d]->as<Expr::IntLit>()->value;
    return bases_[static_cast<size_t>(ai)] + flat;
  }

  std::string name_of(long long cell) const {
    for (size_t i = 0; i < model_.arrays.size(); ++i) {
      if (cell < bases_[i] + model_.arrays[i].cells)
        return cell_name(model_.arrays[i], cell - bases_[i]);
    }
    return "?";
  }

  const ArrayInfo& array_of(long long cell) const {
    for (size_t i = 0; i < model_.arrays.size(); ++i)
      if (cell < bases_[i] + model_.arrays[i].cells) return model_.arrays[i];
    throw TptError("internal", "cell out of range");
  }

  bool is_defined(long long cell) const {
    for (const Scope& s : scopes_)
      if (s.defined.count(cell)) return true;
    return false;
  }

  void check_read(long long cell, SourceLoc loc) {
    if (is_defined(cell)) return;
    auto it = partial_.find(cell);
    if (it != partial_.end())
      error(loc, "read-after-gate",
            "'" + name_of(cell) + "' is read here but the gate chain at " + it->second.str() +
                " does not assign it on every branch");
    else
      error(loc, "read-undefined", "'" + name_of(cell) + "' is read before any assignment");
  }

  void check_assign(long long cell, SourceLoc loc) {
    for (const Scope& s : scopes_) {
      auto it = s.assigned.find(cell);
      if (it != s.assigned.end()) {
        error(loc, "ssa-conflict",
              "'" + name_of(cell) + "' is assigned more than once on an execution path (previous "
                                    "assignment at " +
                  it->second.str() + ")");
        return;
      }
    }
    scopes_.back().assigned[cell] = loc;
    scopes_.back().defined.insert(cell);
  }

  void read_expr(const ExprPtr& e) {
    if (const auto* n = e->as<Expr::Name>()) {
      if (model_.array_index.count(n->name)) check_read(resolve(n->name, {}), e->loc);
      return;
    }
    if (const auto* ix = e->as<Expr::Index>()) {
      check_read(resolve(ix->name, ix->indices), e->loc);
      return;
    }
    if (const auto* c = e->as<Expr::Call>()) {
      for (const auto& a : c->args) read_expr(a);
      return;
    }
    if (const auto* b = e->as<Expr::Bin>()) {
      read_expr(b->lhs);
      read_expr(b->rhs);
      return;
    }
    if (const auto* nt = e->as<Expr::Not>()) read_expr(nt->arg);
  }

  void walk_block(const Block& stmts) {
    for (const auto& s : stmts) walk_stmt(s);
  }

  void walk_stmt(const StmtPtr& s) {
    if (s->as<Stmt::Assign>() || s->as<Stmt::Decl>() || s->as<Stmt::FuncDef>()) return;
    if (const auto* st = s->as<Stmt::SetTo>()) {
      read_expr(st->value);
      check_assign(resolve(st->target.name, st->target.indices), s->loc);
      return;
    }
    if (const auto* sc = s->as<Stmt::SetToConst>()) {
      long long cell = resolve(sc->target.name, sc->target.indices);
      long long v = sc->value->as<Expr::IntLit>()->value;
      const ArrayInfo& arr = array_of(cell);
      if (v < 0 || v >= arr.domain)
        error(sc->value->loc, "domain",
              "value " + std::to_string(v) + " outside domain {0.." + std::to_string(arr.domain - 1) +
                  "} of '" + name_of(cell) + "'");
      if (scopes_.size() > 1)
        error(s->loc, "input-scope", "set_to_constant must appear outside of any gate");
      check_assign(cell, s->loc);
      return;
    }
    if (const auto* ob = s->as<Stmt::Observe>()) {
      long long cell = resolve(ob->target.name, ob->target.indices);
      long long v = ob->value->as<Expr::IntLit>()->value;
      const ArrayInfo& arr = array_of(cell);
      if (v < 0 || v >= arr.domain)
        error(ob->value->loc, "domain",
              "value " + std::to_string(v) + " outside domain {0.." + std::to_string(arr.domain - 1) +
                  "} of '" + name_of(cell) + "'");
      if (scopes_.size() > 1)
        error(s->loc, "observe-scope", "observe_value must appear outside of any gate");
      check_read(cell, s->loc);
      return;
    }
    if (const auto* iff = s->as<Stmt::If>()) {
      const auto* cond0 = iff->arms[0].cond->as<Expr::Bin>();
      read_expr(cond0->lhs);
      long long subject =
          cond0->lhs->as<Expr::Name>()
              ? resolve(cond0->lhs->as<Expr::Name>()->name, {})
              : resolve(cond0->lhs->as<Expr::Index>()->name, cond0->lhs->as<Expr::Index>()->indices);
      long long domain = array_of(subject).domain;

      std::vector<Scope> arm_results;
      for (const auto& arm : iff->arms) {
        scopes_.push_back(Scope{});
        walk_block(arm.body);
        arm_results.push_back(std::move(scopes_.back()));
        scopes_.pop_back();
      }
      bool full = static_cast<long long>(iff->arms.size()) == domain;

      // Merge: a cell defined in every branch of a full-coverage family
      // becomes defined in the parent; anything else assigned under the
      // family is recorded so later reads can cite the gate.
      std::map<long long, int> defined_counts;
      std::map<long long, SourceLoc> family_assigned;
      for (const Scope& a : arm_results) {
        for (long long cell : a.defined) defined_counts[cell]++;
        for (const auto& [cell, loc] : a.assigned) family_assigned.emplace(cell, loc);
      }
      for (const auto& [cell, loc] : family_assigned) {
        if (!scopes_.back().assigned.count(cell)) scopes_.back().assigned[cell] = loc;
        auto it = defined_counts.find(cell);
        bool fully = full && it != defined_counts.end() &&
                     it->second == static_cast<int>(iff->arms.size());
        if (fully)
          scopes_.back().defined.insert(cell);
        else if (!partial_.count(cell))
          partial_[cell] = s->loc;
      }
      return;
    }
    throw TptError("internal", "unexpected statement in unrolled program", s->loc);
  }
};

}  // namespace

Ast unroll(const CheckedModel& model) {
  if (!model.ok()) throw TptError("unroll", "cannot unroll a model with semantic errors");
  return Unroller(model).run();
}

void validate_by_unrolling(CheckedModel& model) {
  Ast unrolled;
  try {
    unrolled = Unroller(model).run();
  } catch (const TptError& e) {
    model.diags.push_back(Diagnostic{Severity::Error, e.code(), e.what(), e.loc()});
    return;
  }
  CellChecker checker(model, &model.diags);
  try {
    checker.run(unrolled.stmts);
  } catch (const TptError& e) {
    model.diags.push_back(Diagnostic{Severity::Error, e.code(), e.what(), e.loc()});
  }
}

}  // namespace tpt
