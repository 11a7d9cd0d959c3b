#include "tpt/ast.hpp"

#include <sstream>

namespace tpt {

const char* binop_text(BinOp op) {
  switch (op) {
    case BinOp::Add: return "+";
    case BinOp::Sub: return "-";
    case BinOp::Mul: return "*";
    case BinOp::Div: return "/";
    case BinOp::Mod: return "%";
    case BinOp::Eq: return "==";
    case BinOp::Lt: return "<";
    case BinOp::Gt: return ">";
    case BinOp::Le: return "<=";
    case BinOp::Ge: return ">=";
    case BinOp::And: return "and";
    case BinOp::Or: return "or";
  }
  return "?";
}

bool binop_is_arith(BinOp op) {
  switch (op) {
    case BinOp::Add:
    case BinOp::Sub:
    case BinOp::Mul:
    case BinOp::Div:
    case BinOp::Mod:
      return true;
    default:
      return false;
  }
}

bool binop_is_cmp(BinOp op) {
  switch (op) {
    case BinOp::Eq:
    case BinOp::Lt:
    case BinOp::Gt:
    case BinOp::Le:
    case BinOp::Ge:
      return true;
    default:
      return false;
  }
}

ExprPtr make_int(long long v, SourceLoc loc) {
  auto e = std::make_shared<Expr>();
  e->node = Expr::IntLit{v};
  e->loc = loc;
  return e;
}

ExprPtr make_name(std::string n, SourceLoc loc) {
  auto e = std::make_shared<Expr>();
  e->node = Expr::Name{std::move(n)};
  e->loc = loc;
  return e;
}

ExprPtr make_index(std::string n, std::vector<ExprPtr> idx, SourceLoc loc) {
  auto e = std::make_shared<Expr>();
  e->node = Expr::Index{std::move(n), std::move(idx)};
  e->loc = loc;
  return e;
}

ExprPtr make_call(std::string n, std::vector<ExprPtr> args, SourceLoc loc) {
  auto e = std::make_shared<Expr>();
  e->node = Expr::Call{std::move(n), std::move(args)};
  e->loc = loc;
  return e;
}

ExprPtr make_bin(BinOp op, ExprPtr l, ExprPtr r, SourceLoc loc) {
  auto e = std::make_shared<Expr>();
  e->node = Expr::Bin{op, std::move(l), std::move(r)};
  e->loc = loc;
  return e;
}

ExprPtr make_not(ExprPtr arg, SourceLoc loc) {
  auto e = std::make_shared<Expr>();
  e->node = Expr::Not{std::move(arg)};
  e->loc = loc;
  return e;
}

ExprPtr substitute(const ExprPtr& e, const std::map<std::string, long long>& env) {
  if (env.empty()) return e;
  if (const auto* n = e->as<Expr::Name>()) {
    auto it = env.find(n->name);
    if (it != env.end()) return make_int(it->second, e->loc);
    return e;
  }
  if (const auto* ix = e->as<Expr::Index>()) {
    std::vector<ExprPtr> idx;
    bool changed = false;
    for (const auto& i : ix->indices) {
      idx.push_back(substitute(i, env));
      changed |= idx.back() != i;
    }
    if (!changed) return e;
    return make_index(ix->name, std::move(idx), e->loc);
  }
  if (const auto* c = e->as<Expr::Call>()) {
    std::vector<ExprPtr> args;
    bool changed = false;
    for (const auto& a : c->args) {
      args.push_back(substitute(a, env));
      changed |= args.back() != a;
    }
    if (!changed) return e;
    return make_call(c->name, std::move(args), e->loc);
  }
  if (const auto* b = e->as<Expr::Bin>()) {
    ExprPtr l = substitute(b->lhs, env), r = substitute(b->rhs, env);
    if (l == b->lhs && r == b->rhs) return e;
    return make_bin(b->op, std::move(l), std::move(r), e->loc);
  }
  if (const auto* nt = e->as<Expr::Not>()) {
    ExprPtr a = substitute(nt->arg, env);
    if (a == nt->arg) return e;
    return make_not(std::move(a), e->loc);
  }
  return e;
}

namespace {

int precedence(BinOp op) {
  switch (op) {
    case BinOp::Mul:
    case BinOp::Div:
    case BinOp::Mod:
      return 5;
    case BinOp::Add:
    case BinOp::Sub:
      return 4;
    case BinOp::Eq:
    case BinOp::Lt:
    case BinOp::Gt:
    case BinOp::Le:
    case BinOp::Ge:
      return 3;
    case BinOp::And:
      return 2;
    case BinOp::Or:
      return 1;
  }
  return 0;
}

void print_expr(std::ostream& os, const ExprPtr& e, int parent_prec) {
  if (const auto* i = e->as<Expr::IntLit>()) {
    os << i->value;
  } else if (const auto* n = e->as<Expr::Name>()) {
    os << n->name;
  } else if (const auto* ix = e->as<Expr::Index>()) {
    os << ix->name << "[";
    for (size_t k = 0; k < ix->indices.size(); ++k) {
      if (k) os << ", ";
      print_expr(os, ix->indices[k], 0);
    }
    os << "]";
  } else if (const auto* c = e->as<Expr::Call>()) {
    os << c->name << "(";
    for (size_t k = 0; k < c->args.size(); ++k) {
      if (k) os << ", ";
      print_expr(os, c->args[k], 0);
    }
    os << ")";
  } else if (const auto* b = e->as<Expr::Bin>()) {
    int prec = precedence(b->op);
    bool paren = prec < parent_prec;
    if (paren) os << "(";
    print_expr(os, b->lhs, prec);
    os << " " << binop_text(b->op) << " ";
    print_expr(os, b->rhs, prec + 1);
    if (paren) os << ")";
  } else if (const auto* nt = e->as<Expr::Not>()) {
    bool paren = 6 < parent_prec;
    if (paren) os << "(";
    os << "not ";
    print_expr(os, nt->arg, 6);
    if (paren) os << ")";
  }
}

void print_lvalue(std::ostream& os, const LValue& lv) {
  os << lv.name;
  if (!lv.indices.empty()) {
    os << "[";
    for (size_t k = 0; k < lv.indices.size(); ++k) {
      if (k) os << ", ";
      print_expr(os, lv.indices[k], 0);
    }
    os << "]";
  }
}

void print_block(std::ostream& os, const Block& block, int level);

void print_stmt(std::ostream& os, const StmtPtr& s, int level) {
  std::string ind(static_cast<size_t>(level) * 4, ' ');
  if (const auto* a = s->as<Stmt::Assign>()) {
    os << ind << a->name << " = ";
    print_expr(os, a->value, 0);
    os << "\n";
  } else if (const auto* d = s->as<Stmt::Decl>()) {
    os << ind << d->name << " = " << (d->is_param ? "Param(" : "Var(");
    print_expr(os, d->domain, 0);
    os << ")";
    if (!d->dims.empty()) {
      os << "[";
      for (size_t k = 0; k < d->dims.size(); ++k) {
        if (k) os << ", ";
        print_expr(os, d->dims[k], 0);
      }
      os << "]";
    }
    os << "\n";
  } else if (const auto* st = s->as<Stmt::SetTo>()) {
    os << ind;
    print_lvalue(os, st->target);
    os << ".set_to(";
    print_expr(os, st->value, 0);
    os << ")\n";
  } else if (const auto* sc = s->as<Stmt::SetToConst>()) {
    os << ind;
    print_lvalue(os, sc->target);
    os << ".set_to_constant(";
    print_expr(os, sc->value, 0);
    os << ")\n";
  } else if (const auto* ob = s->as<Stmt::Observe>()) {
    os << ind;
    print_lvalue(os, ob->target);
    os << ".observe_value(";
    print_expr(os, ob->value, 0);
    os << ")\n";
  } else if (const auto* iff = s->as<Stmt::If>()) {
    for (size_t k = 0; k < iff->arms.size(); ++k) {
      os << ind << (k == 0 ? "if " : "elif ");
      print_expr(os, iff->arms[k].cond, 0);
      os << ":\n";
      print_block(os, iff->arms[k].body, level + 1);
    }
    if (iff->else_body) {
      os << ind << "else:\n";
      print_block(os, *iff->else_body, level + 1);
    }
  } else if (const auto* f = s->as<Stmt::For>()) {
    os << ind << "for " << f->var << " in range(";
    if (f->lo) {
      print_expr(os, f->lo, 0);
      os << ", ";
    }
    print_expr(os, f->hi, 0);
    os << "):\n";
    print_block(os, f->body, level + 1);
  } else if (const auto* w = s->as<Stmt::With>()) {
    os << ind << "with ";
    print_lvalue(os, w->subject);
    os << " as " << w->var << ":\n";
    print_block(os, w->body, level + 1);
  } else if (const auto* fd = s->as<Stmt::FuncDef>()) {
    os << ind << "@CompileMe([";
    for (size_t k = 0; k < fd->in_domains.size(); ++k) {
      if (k) os << ", ";
      print_expr(os, fd->in_domains[k], 0);
    }
    os << "], ";
    print_expr(os, fd->out_domain, 0);
    os << ")\n" << ind << "def " << fd->name << "(";
    for (size_t k = 0; k < fd->args.size(); ++k) {
      if (k) os << ", ";
      os << fd->args[k];
    }
    os << "):\n";
    print_block(os, fd->body, level + 1);
  } else if (const auto* r = s->as<Stmt::Return>()) {
    os << ind << "return ";
    print_expr(os, r->value, 0);
    os << "\n";
  }
}

void print_block(std::ostream& os, const Block& block, int level) {
  for (const auto& s : block) print_stmt(os, s, level);
}

}  // namespace

std::string pretty_print(const Ast& ast) {
  std::ostringstream os;
  print_block(os, ast.stmts, 0);
  return os.str();
}

std::string pretty_print(const ExprPtr& expr) {
  std::ostringstream os;
  print_expr(os, expr, 0);
  return os.str();
}

namespace {

bool expr_eq(const ExprPtr& a, const ExprPtr& b);

bool expr_list_eq(const std::vector<ExprPtr>& a, const std::vector<ExprPtr>& b) {
  if (a.size() != b.size()) return false;
  for (size_t i = 0; i < a.size(); ++i)
    if (!expr_eq(a[i], b[i])) return false;
  return true;
}

bool expr_eq(const ExprPtr& a, const ExprPtr& b) {
  if (a == b) return true;
  if (!a || !b) return false;
  if (a->node.index() != b->node.index()) return false;
  if (const auto* i = a->as<Expr::IntLit>()) return i->value == b->as<Expr::IntLit>()->value;
  if (const auto* n = a->as<Expr::Name>()) return n->name == b->as<Expr::Name>()->name;
  if (const auto* ix = a->as<Expr::Index>()) {
    const auto* o = b->as<Expr::Index>();
    return ix->name == o->name && expr_list_eq(ix->indices, o->indices);
  }
  if (const auto* c = a->as<Expr::Call>()) {
    const auto* o = b->as<Expr::Call>();
    return c->name == o->name && expr_list_eq(c->args, o->args);
  }
  if (const auto* bi = a->as<Expr::Bin>()) {
    const auto* o = b->as<Expr::Bin>();
    return bi->op == o->op && expr_eq(bi->lhs, o->lhs) && expr_eq(bi->rhs, o->rhs);
  }
  if (const auto* nt = a->as<Expr::Not>()) return expr_eq(nt->arg, b->as<Expr::Not>()->arg);
  return false;
}

bool lvalue_eq(const LValue& a, const LValue& b) {
  return a.name == b.name && expr_list_eq(a.indices, b.indices);
}

bool block_eq(const Block& a, const Block& b);

bool stmt_eq(const StmtPtr& a, const StmtPtr& b) {
  if (a->node.index() != b->node.index()) return false;
  if (const auto* x = a->as<Stmt::Assign>()) {
    const auto* y = b->as<Stmt::Assign>();
    return x->name == y->name && expr_eq(x->value, y->value);
  }
  if (const auto* x = a->as<Stmt::Decl>()) {
    const auto* y = b->as<Stmt::Decl>();
    return x->is_param == y->is_param && x->name == y->name && expr_eq(x->domain, y->domain) &&
           expr_list_eq(x->dims, y->dims);
  }
  if (const auto* x = a->as<Stmt::SetTo>()) {
    const auto* y = b->as<Stmt::SetTo>();
    return lvalue_eq(x->target, y->target) && expr_eq(x->value, y->value);
  }
  if (const auto* x = a->as<Stmt::SetToConst>()) {
    const auto* y = b->as<Stmt::SetToConst>();
    return lvalue_eq(x->target, y->target) && expr_eq(x->value, y->value);
  }
  if (const auto* x = a->as<Stmt::Observe>()) {
    const auto* y = b->as<Stmt::Observe>();
    return lvalue_eq(x->target, y->target) && expr_eq(x->value, y->value);
  }
  if (const auto* x = a->as<Stmt::If>()) {
    const auto* y = b->as<Stmt::If>();
    if (x->arms.size() != y->arms.size()) return false;
    for (size_t i = 0; i < x->arms.size(); ++i) {
      if (!expr_eq(x->arms[i].cond, y->arms[i].cond)) return false;
      if (!block_eq(x->arms[i].body, y->arms[i].body)) return false;
    }
    if (x->else_body.has_value() != y->else_body.has_value()) return false;
    if (x->else_body && !block_eq(*x->else_body, *y->else_body)) return false;
    return true;
  }
  if (const auto* x = a->as<Stmt::For>()) {
    const auto* y = b->as<Stmt::For>();
    if (x->var != y->var) return false;
    if ((x->lo == nullptr) != (y->lo == nullptr)) return false;
    if (x->lo && !expr_eq(x->lo, y->lo)) return false;
    return expr_eq(x->hi, y->hi) && block_eq(x->body, y->body);
  }
  if (const auto* x = a->as<Stmt::With>()) {
    const auto* y = b->as<Stmt::With>();
    return lvalue_eq(x->subject, y->subject) && x->var == y->var && block_eq(x->body, y->body);
  }
  if (const auto* x = a->as<Stmt::FuncDef>()) {
    const auto* y = b->as<Stmt::FuncDef>();
    return x->name == y->name && expr_list_eq(x->in_domains, y->in_domains) &&
           expr_eq(x->out_domain, y->out_domain) && x->args == y->args && block_eq(x->body, y->body);
  }
  if (const auto* x = a->as<Stmt::Return>()) {
    return expr_eq(x->value, b->as<Stmt::Return>()->value);
  }
  return false;
}

bool block_eq(const Block& a, const Block& b) {
  if (a.size() != b.size()) return false;
  for (size_t i = 0; i < a.size(); ++i)
    if (!stmt_eq(a[i], b[i])) return false;
  return true;
}

}  // namespace

bool structurally_equal(const Ast& a, const Ast& b) { return block_eq(a.stmts, b.stmts); }

}  // namespace tpt
