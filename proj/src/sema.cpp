#include "tpt/sema.hpp"

#include <functional>
#include <optional>

#include "tpt/unroll.hpp"

namespace tpt {

namespace {

long long checked_add(long long a, long long b, SourceLoc loc) {
  long long r;
  if (__builtin_add_overflow(a, b, &r)) throw TptError("const-overflow", "integer overflow", loc);
  return r;
}
long long checked_sub(long long a, long long b, SourceLoc loc) {
  long long r;
  if (__builtin_sub_overflow(a, b, &r)) throw TptError("const-overflow", "integer overflow", loc);
  return r;
}
long long checked_mul(long long a, long long b, SourceLoc loc) {
  long long r;
  if (__builtin_mul_overflow(a, b, &r)) throw TptError("const-overflow", "integer overflow", loc);
  return r;
}

long long floor_div(long long a, long long b, SourceLoc loc) {
  if (b <= 0) throw TptError("arith-div", "division by nonpositive divisor", loc);
  long long q = a / b;
  if ((a % b != 0) && (a < 0)) --q;
  return q;
}
long long floor_mod(long long a, long long b, SourceLoc loc) {
  if (b <= 0) throw TptError("arith-div", "modulo by nonpositive divisor", loc);
  long long r = a % b;
  if (r < 0) r += b;
  return r;
}

enum class EvalMode { Const, Runtime };

long long eval_arith_op(BinOp op, long long a, long long b, SourceLoc loc, EvalMode mode) {
  long long r;
  switch (op) {
    case BinOp::Add: r = checked_add(a, b, loc); break;
    case BinOp::Sub: r = checked_sub(a, b, loc); break;
    case BinOp::Mul: r = checked_mul(a, b, loc); break;
    case BinOp::Div: r = floor_div(a, b, loc); break;
    case BinOp::Mod: r = floor_mod(a, b, loc); break;
    default: throw TptError("eval", "non-arithmetic operator in arithmetic context", loc);
  }
  if (mode == EvalMode::Const && r < 0)
    throw TptError("const-negative", "negative intermediate value in constant expression", loc);
  return r;
}

struct Evaluator {
  const CheckedModel& model;
  EvalMode mode;

  long long eval(const ExprPtr& e, const std::map<std::string, long long>& env) const {
    if (const auto* i = e->as<Expr::IntLit>()) return i->value;
    if (const auto* n = e->as<Expr::Name>()) {
      auto it = env.find(n->name);
      if (it != env.end()) return it->second;
      auto c = model.consts.find(n->name);
      if (c != model.consts.end()) return c->second;
      throw TptError("eval-name", "'" + n->name + "' is not a compile-time constant", e->loc);
    }
    if (const auto* b = e->as<Expr::Bin>()) {
      if (binop_is_arith(b->op))
        return eval_arith_op(b->op, eval(b->lhs, env), eval(b->rhs, env), e->loc, mode);
      throw TptError("eval", "boolean operator in arithmetic context", e->loc);
    }
    if (const auto* c = e->as<Expr::Call>()) {
      auto fit = model.functions.find(c->name);
      if (fit == model.functions.end())
        throw TptError("eval-call", "unknown function '" + c->name + "'", e->loc);
      std::vector<long long> args;
      for (const auto& a : c->args) args.push_back(eval(a, env));
      return call(fit->second, args, e->loc);
    }
    throw TptError("eval", "expression is not evaluable in this context", e->loc);
  }

  bool eval_bool(const ExprPtr& e, const std::map<std::string, long long>& env) const {
    if (const auto* b = e->as<Expr::Bin>()) {
      switch (b->op) {
        case BinOp::Eq: return eval(b->lhs, env) == eval(b->rhs, env);
        case BinOp::Lt: return eval(b->lhs, env) < eval(b->rhs, env);
        case BinOp::Gt: return eval(b->lhs, env) > eval(b->rhs, env);
        case BinOp::Le: return eval(b->lhs, env) <= eval(b->rhs, env);
        case BinOp::Ge: return eval(b->lhs, env) >= eval(b->rhs, env);
        case BinOp::And: return eval_bool(b->lhs, env) && eval_bool(b->rhs, env);
        case BinOp::Or: return eval_bool(b->lhs, env) || eval_bool(b->rhs, env);
        default: break;
      }
    }
    if (const auto* n = e->as<Expr::Not>()) return !eval_bool(n->arg, env);
    throw TptError("eval", "condition is not a boolean expression", e->loc);
  }

  // Runs a function body; nullopt means the block fell through.
  std::optional<long long> exec_block(const Block& block, std::map<std::string, long long>& env,
                                      SourceLoc call_loc) const {
    for (const auto& s : block) {
      if (const auto* a = s->as<Stmt::Assign>()) {
        env[a->name] = eval(a->value, env);
      } else if (const auto* r = s->as<Stmt::Return>()) {
        return eval(r->value, env);
      } else if (const auto* iff = s->as<Stmt::If>()) {
        bool taken = false;
        for (const auto& arm : iff->arms) {
          if (eval_bool(arm.cond, env)) {
            taken = true;
            if (auto v = exec_block(arm.body, env, call_loc)) return v;
            break;
          }
        }
        if (!taken && iff->else_body) {
          if (auto v = exec_block(*iff->else_body, env, call_loc)) return v;
        }
      } else {
        throw TptError("eval-stmt", "unsupported statement in function body", s->loc);
      }
    }
    return std::nullopt;
  }

  long long call(const FuncInfo& fn, const std::vector<long long>& args, SourceLoc loc) const {
    if (args.size() != fn.args.size())
      throw TptError("eval-arity", "function '" + fn.name + "' expects " +
                                       std::to_string(fn.args.size()) + " arguments, got " +
                                       std::to_string(args.size()),
                     loc);
    std::map<std::string, long long> env;
    for (size_t i = 0; i < args.size(); ++i) env[fn.args[i]] = args[i];
    auto v = exec_block(fn.body, env, loc);
    if (!v)
      throw TptError("eval-no-return", "function '" + fn.name + "' did not return a value", loc);
    return *v;
  }
};

// ---------------------------------------------------------------------------

class Checker {
 public:
  explicit Checker(const Ast& ast) { model_.ast = ast; }

  CheckedModel run() {
    for (const auto& s : model_.ast.stmts) check_top_stmt(s, {});
    if (model_.ok()) {
      // Cell-level checks (single assignment per path, bounds, reads of
      // undefined values) require the unrolled program.
      validate_by_unrolling(model_);
    }
    sort_by_location(model_.diags);
    return std::move(model_);
  }

 private:
  CheckedModel model_;

  void error(SourceLoc loc, std::string code, std::string msg) {
    model_.diags.push_back(Diagnostic{Severity::Error, std::move(code), std::move(msg), loc});
  }

  bool name_free(const std::string& name, SourceLoc loc) {
    if (model_.consts.count(name) || model_.functions.count(name) || model_.array_index.count(name)) {
      error(loc, "redeclaration", "'" + name + "' is already declared");
      return false;
    }
    return true;
  }

  std::optional<long long> try_fold(const ExprPtr& e, const std::map<std::string, long long>& env) {
    try {
      return eval_const(model_, e, env);
    } catch (const TptError& err) {
      error(err.loc().valid() ? err.loc() : e->loc, err.code(), err.what());
      return std::nullopt;
    }
  }

  // True if the expression only references compile-time constants and the
  // given loop/with variables (so it folds after substitution).
  bool is_const_shape(const ExprPtr& e, const std::set<std::string>& loop_vars) {
    if (e->as<Expr::IntLit>()) return true;
    if (const auto* n = e->as<Expr::Name>())
      return model_.consts.count(n->name) || loop_vars.count(n->name);
    if (const auto* b = e->as<Expr::Bin>())
      return binop_is_arith(b->op) && is_const_shape(b->lhs, loop_vars) &&
             is_const_shape(b->rhs, loop_vars);
    if (const auto* c = e->as<Expr::Call>()) {
      if (!model_.functions.count(c->name)) return false;
      for (const auto& a : c->args)
        if (!is_const_shape(a, loop_vars)) return false;
      return true;
    }
    return false;
  }

  void check_const_shape(const ExprPtr& e, const std::set<std::string>& loop_vars,
                         const char* what) {
    if (!is_const_shape(e, loop_vars))
      error(e->loc, "not-const", std::string(what) + " must be a compile-time constant expression");
  }

  // Arithmetic expression appearing in model code (set_to values, indices).
  void check_arith(const ExprPtr& e, const std::set<std::string>& loop_vars) {
    if (e->as<Expr::IntLit>()) return;
    if (const auto* n = e->as<Expr::Name>()) {
      if (model_.consts.count(n->name) || loop_vars.count(n->name)) return;
      const ArrayInfo* arr = model_.find_array(n->name);
      if (arr) {
        if (!arr->dims.empty())
          error(e->loc, "bad-ref", "array '" + n->name + "' must be indexed");
        return;
      }
      error(e->loc, "undeclared", "'" + n->name + "' is not declared");
      return;
    }
    if (const auto* ix = e->as<Expr::Index>()) {
      const ArrayInfo* arr = model_.find_array(ix->name);
      if (!arr) {
        error(e->loc, "undeclared", "'" + ix->name + "' is not a declared array");
        return;
      }
      if (ix->indices.size() != arr->dims.size())
        error(e->loc, "bad-index",
              "'" + ix->name + "' has " + std::to_string(arr->dims.size()) + " dimensions, " +
                  std::to_string(ix->indices.size()) + " indices given");
      for (const auto& i : ix->indices) {
        check_const_shape(i, loop_vars, "array index");
      }
      return;
    }
    if (const auto* c = e->as<Expr::Call>()) {
      auto fit = model_.functions.find(c->name);
      if (fit == model_.functions.end()) {
        error(e->loc, "undeclared", "'" + c->name + "' is not a declared function");
        return;
      }
      if (c->args.size() != fit->second.args.size())
        error(e->loc, "arity", "function '" + c->name + "' expects " +
                                   std::to_string(fit->second.args.size()) + " arguments");
      for (const auto& a : c->args) check_arith(a, loop_vars);
      return;
    }
    if (const auto* b = e->as<Expr::Bin>()) {
      if (!binop_is_arith(b->op)) {
        error(e->loc, "type", "boolean expression used in arithmetic context");
        return;
      }
      check_arith(b->lhs, loop_vars);
      check_arith(b->rhs, loop_vars);
      return;
    }
    error(e->loc, "type", "boolean expression used in arithmetic context");
  }

  // Data reference used as assignment/observation target or with-subject.
  const ArrayInfo* check_target(const LValue& lv, const std::set<std::string>& loop_vars) {
    const ArrayInfo* arr = model_.find_array(lv.name);
    if (!arr) {
      error(lv.loc, "undeclared", "'" + lv.name + "' is not a declared Param or Var");
      return nullptr;
    }
    if (lv.indices.size() != arr->dims.size()) {
      error(lv.loc, "bad-index",
            "'" + lv.name + "' has " + std::to_string(arr->dims.size()) + " dimensions, " +
                std::to_string(lv.indices.size()) + " indices given");
      return nullptr;
    }
    for (const auto& i : lv.indices) check_const_shape(i, loop_vars, "array index");
    return arr;
  }

  void check_funcdef(const Stmt::FuncDef& fd, SourceLoc loc) {
    if (!name_free(fd.name, loc)) return;
    FuncInfo info;
    info.name = fd.name;
    info.args = fd.args;
    info.body = fd.body;
    info.loc = loc;
    if (fd.in_domains.size() != fd.args.size())
      error(loc, "arity", "@CompileMe declares " + std::to_string(fd.in_domains.size()) +
                              " input domains for " + std::to_string(fd.args.size()) + " arguments");
    bool ok = true;
    for (const auto& d : fd.in_domains) {
      auto v = try_fold(d, {});
      if (v && *v >= 1)
        info.in_domains.push_back(*v);
      else {
        if (v) error(d->loc, "bad-domain", "input domain must be a positive constant");
        ok = false;
      }
    }
    if (auto v = try_fold(fd.out_domain, {}); v && *v >= 1)
      info.out_domain = *v;
    else {
      if (v) error(fd.out_domain->loc, "bad-domain", "output domain must be a positive constant");
      ok = false;
    }
    std::set<std::string> locals(fd.args.begin(), fd.args.end());
    check_func_block(fd.body, locals);
    if (ok) model_.functions.emplace(fd.name, std::move(info));
  }

  // Expression inside a function body: args/locals/consts and calls only.
  void check_func_arith(const ExprPtr& e, const std::set<std::string>& locals) {
    if (e->as<Expr::IntLit>()) return;
    if (const auto* n = e->as<Expr::Name>()) {
      if (!locals.count(n->name) && !model_.consts.count(n->name))
        error(e->loc, "undeclared", "'" + n->name + "' is not defined in this function");
      return;
    }
    if (const auto* c = e->as<Expr::Call>()) {
      auto fit = model_.functions.find(c->name);
      if (fit == model_.functions.end())
        error(e->loc, "undeclared", "'" + c->name + "' is not a declared function");
      else if (c->args.size() != fit->second.args.size())
        error(e->loc, "arity", "function '" + c->name + "' expects " +
                                   std::to_string(fit->second.args.size()) + " arguments");
      for (const auto& a : c->args) check_func_arith(a, locals);
      return;
    }
    if (const auto* b = e->as<Expr::Bin>()) {
      if (!binop_is_arith(b->op)) {
        error(e->loc, "type", "boolean expression used in arithmetic context");
        return;
      }
      check_func_arith(b->lhs, locals);
      check_func_arith(b->rhs, locals);
      return;
    }
    error(e->loc, "type", "unsupported expression in function body");
  }

  void check_func_bool(const ExprPtr& e, const std::set<std::string>& locals) {
    if (const auto* b = e->as<Expr::Bin>()) {
      if (binop_is_cmp(b->op)) {
        check_func_arith(b->lhs, locals);
        check_func_arith(b->rhs, locals);
        return;
      }
      if (b->op == BinOp::And || b->op == BinOp::Or) {
        check_func_bool(b->lhs, locals);
        check_func_bool(b->rhs, locals);
        return;
      }
    }
    if (const auto* n = e->as<Expr::Not>()) {
      check_func_bool(n->arg, locals);
      return;
    }
    error(e->loc, "type", "condition must be a boolean expression");
  }

  void check_func_block(const Block& block, std::set<std::string>& locals) {
    for (size_t i = 0; i < block.size(); ++i) {
      const StmtPtr& s = block[i];
      if (const auto* a = s->as<Stmt::Assign>()) {
        check_func_arith(a->value, locals);
        locals.insert(a->name);
      } else if (const auto* r = s->as<Stmt::Return>()) {
        check_func_arith(r->value, locals);
        if (i + 1 != block.size())
          error(block[i + 1]->loc, "dead-code", "statement after 'return'");
      } else if (const auto* iff = s->as<Stmt::If>()) {
        for (const auto& arm : iff->arms) {
          check_func_bool(arm.cond, locals);
          std::set<std::string> inner = locals;
          check_func_block(arm.body, inner);
        }
        if (iff->else_body) {
          std::set<std::string> inner = locals;
          check_func_block(*iff->else_body, inner);
        }
      } else {
        error(s->loc, "bad-stmt",
              "only local bindings, if/elif/else and return are allowed in a function body");
      }
    }
  }

  void check_top_stmt(const StmtPtr& s, std::set<std::string> loop_vars) {
    if (const auto* a = s->as<Stmt::Assign>()) {
      if (!loop_vars.empty()) {
        error(s->loc, "bad-stmt", "constant bindings must appear at the top level");
        return;
      }
      if (!name_free(a->name, s->loc)) return;
      if (auto v = try_fold(a->value, {})) model_.consts[a->name] = *v;
      return;
    }
    if (const auto* d = s->as<Stmt::Decl>()) {
      if (!loop_vars.empty()) {
        error(s->loc, "bad-stmt", "declarations must appear at the top level");
        return;
      }
      if (!name_free(d->name, s->loc)) return;
      ArrayInfo info;
      info.name = d->name;
      info.is_param = d->is_param;
      info.loc = s->loc;
      auto dom = try_fold(d->domain, {});
      if (!dom) return;
      if (*dom < 1) {
        error(d->domain->loc, "bad-domain", "domain size must be positive");
        return;
      }
      info.domain = *dom;
      for (const auto& dim : d->dims) {
        auto v = try_fold(dim, {});
        if (!v) return;
        if (*v < 1) {
          error(dim->loc, "bad-domain", "array dimension must be positive");
          return;
        }
        info.dims.push_back(*v);
        info.cells *= *v;
      }
      model_.array_index[info.name] = static_cast<int>(model_.arrays.size());
      model_.arrays.push_back(std::move(info));
      return;
    }
    if (const auto* fd = s->as<Stmt::FuncDef>()) {
      if (!loop_vars.empty())
        error(s->loc, "bad-stmt", "function definitions must appear at the top level");
      else
        check_funcdef(*fd, s->loc);
      return;
    }
    if (const auto* st = s->as<Stmt::SetTo>()) {
      check_target(st->target, loop_vars);
      check_arith(st->value, loop_vars);
      return;
    }
    if (const auto* sc = s->as<Stmt::SetToConst>()) {
      const ArrayInfo* arr = check_target(sc->target, loop_vars);
      check_const_shape(sc->value, loop_vars, "set_to_constant value");
      if (arr && is_const_shape(sc->value, {})) {
        if (auto v = try_fold(sc->value, {}); v && (*v < 0 || *v >= arr->domain))
          error(sc->value->loc, "domain",
                "value " + std::to_string(*v) + " outside domain {0.." +
                    std::to_string(arr->domain - 1) + "} of '" + arr->name + "'");
      }
      return;
    }
    if (const auto* ob = s->as<Stmt::Observe>()) {
      const ArrayInfo* arr = check_target(ob->target, loop_vars);
      check_const_shape(ob->value, loop_vars, "observed value");
      if (arr && is_const_shape(ob->value, {})) {
        if (auto v = try_fold(ob->value, {}); v && (*v < 0 || *v >= arr->domain))
          error(ob->value->loc, "domain",
                "value " + std::to_string(*v) + " outside domain {0.." +
                    std::to_string(arr->domain - 1) + "} of '" + arr->name + "'");
      }
      return;
    }
    if (const auto* iff = s->as<Stmt::If>()) {
      for (const auto& arm : iff->arms) {
        // Gate conditions must have the shape <data ref> == <const expr>.
        const auto* b = arm.cond->as<Expr::Bin>();
        if (!b || b->op != BinOp::Eq) {
          error(arm.cond->loc, "gate-cond", "gate condition must have the form 'variable == constant'");
        } else {
          bool lhs_ref = b->lhs->as<Expr::Name>() || b->lhs->as<Expr::Index>();
          const std::string lhs_name = lhs_ref
                                           ? (b->lhs->as<Expr::Name>() ? b->lhs->as<Expr::Name>()->name
                                                                       : b->lhs->as<Expr::Index>()->name)
                                           : "";
          if (!lhs_ref || !model_.array_index.count(lhs_name))
            error(b->lhs->loc, "gate-cond", "gate condition subject must be a Param or Var reference");
          else
            check_arith(b->lhs, loop_vars);
          check_const_shape(b->rhs, loop_vars, "gate condition value");
        }
        for (const auto& inner : arm.body) check_top_stmt(inner, loop_vars);
      }
      if (iff->else_body)
        for (const auto& inner : *iff->else_body) check_top_stmt(inner, loop_vars);
      return;
    }
    if (const auto* f = s->as<Stmt::For>()) {
      if (f->lo) check_const_shape(f->lo, loop_vars, "loop bound");
      check_const_shape(f->hi, loop_vars, "loop bound");
      if (loop_vars.count(f->var) || model_.consts.count(f->var))
        error(s->loc, "shadow", "loop variable '" + f->var + "' shadows an existing binding");
      loop_vars.insert(f->var);
      for (const auto& inner : f->body) check_top_stmt(inner, loop_vars);
      return;
    }
    if (const auto* w = s->as<Stmt::With>()) {
      check_target(w->subject, loop_vars);
      if (loop_vars.count(w->var) || model_.consts.count(w->var))
        error(s->loc, "shadow", "with variable '" + w->var + "' shadows an existing binding");
      loop_vars.insert(w->var);
      for (const auto& inner : w->body) check_top_stmt(inner, loop_vars);
      return;
    }
    if (s->as<Stmt::Return>()) {
      error(s->loc, "bad-stmt", "'return' is only legal inside a function body");
      return;
    }
  }
};

}  // namespace

long long eval_const(const CheckedModel& model, const ExprPtr& e,
                     const std::map<std::string, long long>& env) {
  return Evaluator{model, EvalMode::Const}.eval(e, env);
}

long long eval_runtime(const CheckedModel& model, const ExprPtr& e,
                       const std::map<std::string, long long>& env) {
  return Evaluator{model, EvalMode::Runtime}.eval(e, env);
}

long long call_function(const CheckedModel& model, const FuncInfo& fn,
                        const std::vector<long long>& args) {
  return Evaluator{model, EvalMode::Runtime}.call(fn, args, fn.loc);
}

CheckedModel check_semantics(const Ast& ast) { return Checker(ast).run(); }

}  // namespace tpt
