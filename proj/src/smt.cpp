#include "tpt/smt.hpp"

#include <unistd.h>

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace tpt {

std::string smt_cell_name(const std::string& array, const std::vector<long long>& indices) {
  std::string s = array;
  for (long long i : indices) s += "_" + std::to_string(i);
  return s;
}

namespace {

using Subst = std::map<std::string, ExprPtr>;

ExprPtr subst_expr(const ExprPtr& e, const Subst& env) {
  if (const auto* n = e->as<Expr::Name>()) {
    auto it = env.find(n->name);
    return it != env.end() ? it->second : e;
  }
  if (const auto* ix = e->as<Expr::Index>()) {
    std::vector<ExprPtr> idx;
    for (const auto& i : ix->indices) idx.push_back(subst_expr(i, env));
    return make_index(ix->name, std::move(idx), e->loc);
  }
  if (const auto* c = e->as<Expr::Call>()) {
    std::vector<ExprPtr> args;
    for (const auto& a : c->args) args.push_back(subst_expr(a, env));
    return make_call(c->name, std::move(args), e->loc);
  }
  if (const auto* b = e->as<Expr::Bin>())
    return make_bin(b->op, subst_expr(b->lhs, env), subst_expr(b->rhs, env), e->loc);
  if (const auto* nt = e->as<Expr::Not>()) return make_not(subst_expr(nt->arg, env), e->loc);
  return e;
}

class Translator {
 public:
  explicit Translator(const CheckedModel& model) : model_(model) {}

  std::string expr(const ExprPtr& e) {
    if (const auto* i = e->as<Expr::IntLit>()) {
      if (i->value < 0) return "(- " + std::to_string(-i->value) + ")";
      return std::to_string(i->value);
    }
    if (const auto* n = e->as<Expr::Name>()) return n->name;
    if (const auto* ix = e->as<Expr::Index>()) {
      std::vector<long long> idx;
      for (const auto& i : ix->indices) {
        const auto* lit = i->as<Expr::IntLit>();
        if (!lit)
          throw TptError("smt-index", "array index is not a constant after unrolling", e->loc);
        idx.push_back(lit->value);
      }
      return smt_cell_name(ix->name, idx);
    }
    if (const auto* c = e->as<Expr::Call>()) return inline_call(*c, e->loc);
    if (const auto* b = e->as<Expr::Bin>()) {
      const char* op = nullptr;
      switch (b->op) {
        case BinOp::Add: op = "+"; break;
        case BinOp::Sub: op = "-"; break;
        case BinOp::Mul: op = "*"; break;
        case BinOp::Div: op = "div"; break;
        case BinOp::Mod: op = "mod"; break;
        case BinOp::Eq: op = "="; break;
        case BinOp::Lt: op = "<"; break;
        case BinOp::Gt: op = ">"; break;
        case BinOp::Le: op = "<="; break;
        case BinOp::Ge: op = ">="; break;
        case BinOp::And: op = "and"; break;
        case BinOp::Or: op = "or"; break;
      }
      return std::string("(") + op + " " + expr(b->lhs) + " " + expr(b->rhs) + ")";
    }
    if (const auto* nt = e->as<Expr::Not>()) return "(not " + expr(nt->arg) + ")";
    throw TptError("smt-expr", "untranslatable expression", e->loc);
  }

 private:
  const CheckedModel& model_;

  // Reduces a function body to a single term: local bindings substitute,
  // if/elif/else becomes ite, return yields the term. Bodies that assign
  // locals under conditions (no direct return per branch) are unsupported.
  ExprPtr body_term(const Block& block, Subst env, SourceLoc loc) {
    for (size_t i = 0; i < block.size(); ++i) {
      const StmtPtr& s = block[i];
      if (const auto* a = s->as<Stmt::Assign>()) {
        env[a->name] = subst_expr(a->value, env);
        continue;
      }
      if (const auto* r = s->as<Stmt::Return>()) return subst_expr(r->value, env);
      if (const auto* iff = s->as<Stmt::If>()) {
        if (i + 1 != block.size())
          throw TptError("smt-inline",
                         "function body branches must return directly to be inlined", s->loc);
        return ite_chain(*iff, env, s->loc);
      }
      throw TptError("smt-inline", "unsupported construct in function body", s->loc);
    }
    throw TptError("smt-inline", "function body does not return", loc);
  }

  ExprPtr ite_chain(const Stmt::If& iff, const Subst& env, SourceLoc loc) {
    // Without an explicit else the final arm acts as the default; tabulation
    // has already verified the chain is exhaustive.
    ExprPtr tail;
    size_t last = iff.arms.size();
    if (iff.else_body) {
      tail = body_term(*iff.else_body, env, loc);
    } else {
      --last;
      tail = body_term(iff.arms[last].body, env, loc);
    }
    for (size_t i = last; i-- > 0;) {
      ExprPtr cond = subst_expr(iff.arms[i].cond, env);
      ExprPtr then_term = body_term(iff.arms[i].body, env, loc);
      tail = make_call("ite", {cond, then_term, tail}, loc);
    }
    return tail;
  }

  std::string inline_call(const Expr::Call& call, SourceLoc loc) {
    if (call.name == "ite")
      return "(ite " + expr(call.args[0]) + " " + expr(call.args[1]) + " " + expr(call.args[2]) + ")";
    auto it = model_.functions.find(call.name);
    if (it == model_.functions.end())
      throw TptError("smt-call", "unknown function '" + call.name + "'", loc);
    const FuncInfo& fn = it->second;
    Subst env;
    for (size_t i = 0; i < fn.args.size(); ++i) env[fn.args[i]] = call.args[i];
    return expr(body_term(fn.body, std::move(env), loc));
  }
};

std::string lvalue_term(const LValue& lv) {
  std::vector<long long> idx;
  for (const auto& i : lv.indices) idx.push_back(i->as<Expr::IntLit>()->value);
  return smt_cell_name(lv.name, idx);
}

void stmt_constraints(const CheckedModel& model, const StmtPtr& s, std::vector<std::string>& out) {
  Translator tr(model);
  if (const auto* st = s->as<Stmt::SetTo>()) {
    out.push_back("(= " + lvalue_term(st->target) + " " + tr.expr(st->value) + ")");
    return;
  }
  if (const auto* sc = s->as<Stmt::SetToConst>()) {
    out.push_back("(= " + lvalue_term(sc->target) + " " + tr.expr(sc->value) + ")");
    return;
  }
  if (const auto* ob = s->as<Stmt::Observe>()) {
    out.push_back("(= " + lvalue_term(ob->target) + " " + tr.expr(ob->value) + ")");
    return;
  }
  if (const auto* iff = s->as<Stmt::If>()) {
    for (const auto& arm : iff->arms) {
      std::vector<std::string> body;
      for (const auto& inner : arm.body) stmt_constraints(model, inner, body);
      std::string conj;
      if (body.empty()) {
        conj = "true";
      } else if (body.size() == 1) {
        conj = body[0];
      } else {
        conj = "(and";
        for (const std::string& c : body) conj += " " + c;
        conj += ")";
      }
      out.push_back("(=> " + tr.expr(arm.cond) + " " + conj + ")");
    }
    return;
  }
  // Declarations and function definitions contribute no statement
  // constraints here (bounds are emitted with the declarations).
}

}  // namespace

std::string translate_expr(const CheckedModel& model, const ExprPtr& expr) {
  return Translator(model).expr(expr);
}

std::vector<std::string> translate_stmt(const CheckedModel& model, const StmtPtr& stmt) {
  std::vector<std::string> out;
  if (const auto* d = stmt->as<Stmt::Decl>()) {
    Translator tr(model);
    // (>= v 0), (< v c) per declared cell.
    const ArrayInfo* arr = model.find_array(d->name);
    std::string bound = tr.expr(d->domain);
    std::vector<long long> idx(arr->dims.size(), 0);
    for (long long c = 0; c < arr->cells; ++c) {
      long long rem = c;
      for (size_t k = arr->dims.size(); k-- > 0;) {
        idx[k] = rem % arr->dims[k];
        rem /= arr->dims[k];
      }
      std::string cell = smt_cell_name(d->name, idx);
      out.push_back("(>= " + cell + " 0)");
      out.push_back("(< " + cell + " " + bound + ")");
    }
    return out;
  }
  if (const auto* a = stmt->as<Stmt::Assign>()) {
    out.push_back("(= " + a->name + " " + translate_expr(model, a->value) + ")");
    return out;
  }
  stmt_constraints(model, stmt, out);
  return out;
}

std::string emit_smtlib(const CheckedModel& model, const Ast& unrolled) {
  std::ostringstream os;
  os << "(set-logic QF_LIA)\n";

  // Declarations in cell order, each with its bound assertions.
  for (const auto& s : unrolled.stmts) {
    if (const auto* a = s->as<Stmt::Assign>()) {
      os << "(declare-const " << a->name << " Int)\n";
      os << "(assert (= " << a->name << " " << translate_expr(model, a->value) << "))\n";
    } else if (const auto* d = s->as<Stmt::Decl>()) {
      const ArrayInfo* arr = model.find_array(d->name);
      std::string bound = translate_expr(model, d->domain);
      std::vector<long long> idx(arr->dims.size(), 0);
      for (long long c = 0; c < arr->cells; ++c) {
        long long rem = c;
        for (size_t k = arr->dims.size(); k-- > 0;) {
          idx[k] = rem % arr->dims[k];
          rem /= arr->dims[k];
        }
        std::string cell = smt_cell_name(d->name, idx);
        os << "(declare-const " << cell << " Int)\n";
        os << "(assert (>= " << cell << " 0))\n";
        os << "(assert (< " << cell << " " << bound << "))\n";
      }
    }
  }

  // Assertions in statement order.
  for (const auto& s : unrolled.stmts) {
    if (s->as<Stmt::Assign>() || s->as<Stmt::Decl>() || s->as<Stmt::FuncDef>()) continue;
    std::vector<std::string> constraints;
    stmt_constraints(model, s, constraints);
    for (const std::string& c : constraints) os << "(assert " << c << ")\n";
  }

  os << "(check-sat)\n(get-model)\n";
  return os.str();
}

int run_command(const std::string& command, std::string* output) {
  output->clear();
  FILE* pipe = popen((command + " 2>&1").c_str(), "r");
  if (!pipe) return -1;
  char buf[4096];
  size_t n;
  while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) output->append(buf, n);
  return pclose(pipe);
}

SmtResult solve_smt(const GatedFactorGraph& graph, const std::string& script,
                    const std::string& solver_command, const std::string& workdir) {
  std::string dir = workdir.empty() ? "." : workdir;
  std::string path = dir + "/model_" + std::to_string(::getpid()) + "_" +
                     std::to_string(reinterpret_cast<uintptr_t>(&script) & 0xffff) + ".smt2";
  {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw TptError("smt-io", "cannot write script file " + path);
    f << script;
  }
  std::string out;
  int rc = run_command(solver_command + " " + path, &out);
  std::remove(path.c_str());
  if (rc == -1) throw TptError("smt-process", "failed to launch solver: " + solver_command);

  SmtResult result;
  result.solver_output = out;
  std::istringstream is(out);
  std::string first;
  while (std::getline(is, first)) {
    // Trim whitespace.
    size_t b = first.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    first = first.substr(b, first.find_last_not_of(" \t\r") - b + 1);
    break;
  }
  if (first == "sat")
    result.status = SmtStatus::Sat;
  else if (first == "unsat")
    result.status = SmtStatus::Unsat;
  else if (first == "unknown")
    result.status = SmtStatus::Unknown;
  else
    throw TptError("smt-output", "unparseable solver output (first line '" + first + "')");

  if (result.status != SmtStatus::Sat) return result;

  // Parse (define-fun <name> () Int <n>) entries; values may be (- n).
  std::map<std::string, int> values;
  size_t pos = 0;
  const std::string needle = "define-fun ";
  while ((pos = out.find(needle, pos)) != std::string::npos) {
    pos += needle.size();
    size_t name_end = out.find_first_of(" \t\n(", pos);
    std::string name = out.substr(pos, name_end - pos);
    size_t int_pos = out.find("Int", name_end);
    if (int_pos == std::string::npos) continue;
    size_t vstart = out.find_first_not_of(" \t\n", int_pos + 3);
    if (vstart == std::string::npos) continue;
    bool neg = false;
    if (out[vstart] == '(') {
      vstart = out.find_first_not_of(" \t\n", vstart + 1);
      if (vstart != std::string::npos && out[vstart] == '-') {
        neg = true;
        vstart = out.find_first_not_of(" \t\n", vstart + 1);
      }
    }
    size_t vend = vstart;
    while (vend < out.size() && std::isdigit(static_cast<unsigned char>(out[vend]))) ++vend;
    if (vend == vstart) continue;
    int v = std::stoi(out.substr(vstart, vend - vstart));
    values[name] = neg ? -v : v;
  }

  // Decode parameter cells; a missing cell defaults to 0 (within bounds the
  // solver was free to choose anything).
  std::map<std::string, int> names;
  for (size_t i = 0; i < graph.params.size(); ++i) {
    std::string smt_name = graph.var_name[static_cast<size_t>(graph.params[i])];
    for (char& c : smt_name) {
      if (c == '[' || c == ',') c = '_';
    }
    smt_name.erase(std::remove(smt_name.begin(), smt_name.end(), ']'), smt_name.end());
    auto it = values.find(smt_name);
    int v = it != values.end() ? it->second : 0;
    names[graph.var_name[static_cast<size_t>(graph.params[i])]] = v;
  }
  ParamAssignment a;
  try {
    a = assignment_from_names(graph, names);
  } catch (const TptError& e) {
    throw TptError("smt-model", std::string("malformed model: ") + e.message());
  }
  result.params = a;
  result.verified = check_consistency(graph, a);
  if (!result.verified)
    throw TptError("smt-verify", "sat model fails interpreter verification (translation bug)");
  return result;
}

}  // namespace tpt
