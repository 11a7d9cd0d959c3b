#include "tpt/sketch.hpp"

#include <sstream>

namespace tpt {

namespace {

int sk_precedence(BinOp op) {
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

class SketchEmitter {
 public:
  explicit SketchEmitter(const CheckedModel& model) : model_(model) {}

  SketchUnit run() {
    // Constants and functions are global; everything else lives in the
    // harness.
    for (const auto& s : model_.ast.stmts) {
      if (const auto* a = s->as<Stmt::Assign>()) {
        os_ << "int " << a->name << " = " << expr(a->value, 0) << ";\n";
      } else if (const auto* fd = s->as<Stmt::FuncDef>()) {
        emit_function(*fd);
      }
    }
    os_ << "\nharness void main() {\n";
    indent_ = 1;
    for (const auto& s : model_.ast.stmts) {
      if (s->as<Stmt::Assign>() || s->as<Stmt::FuncDef>()) continue;
      emit_stmt(s);
    }
    os_ << "}\n";
    SketchUnit unit;
    unit.text = os_.str();
    for (const ArrayInfo& arr : model_.arrays)
      if (arr.is_param) unit.hole_count += arr.cells;
    return unit;
  }

 private:
  const CheckedModel& model_;
  std::ostringstream os_;
  int indent_ = 0;

  std::string ind() const { return std::string(static_cast<size_t>(indent_) * 2, ' '); }

  std::string expr(const ExprPtr& e, int parent_prec) {
    if (const auto* i = e->as<Expr::IntLit>()) return std::to_string(i->value);
    if (const auto* n = e->as<Expr::Name>()) return n->name;
    if (const auto* ix = e->as<Expr::Index>()) {
      std::string s = ix->name;
      for (const auto& i : ix->indices) s += "[" + expr(i, 0) + "]";
      return s;
    }
    if (const auto* c = e->as<Expr::Call>()) {
      std::string s = c->name + "(";
      for (size_t i = 0; i < c->args.size(); ++i) {
        if (i) s += ", ";
        s += expr(c->args[i], 0);
      }
      return s + ")";
    }
    if (const auto* b = e->as<Expr::Bin>()) {
      const char* op = nullptr;
      switch (b->op) {
        case BinOp::Add: op = "+"; break;
        case BinOp::Sub: op = "-"; break;
        case BinOp::Mul: op = "*"; break;
        case BinOp::Div: op = "/"; break;
        case BinOp::Mod: op = "%"; break;
        case BinOp::Eq: op = "=="; break;
        case BinOp::Lt: op = "<"; break;
        case BinOp::Gt: op = ">"; break;
        case BinOp::Le: op = "<="; break;
        case BinOp::Ge: op = ">="; break;
        case BinOp::And: op = "&&"; break;
        case BinOp::Or: op = "||"; break;
      }
      int prec = sk_precedence(b->op);
      std::string s = expr(b->lhs, prec) + " " + op + " " + expr(b->rhs, prec + 1);
      if (prec < parent_prec || b->op == BinOp::Or) return "(" + s + ")";
      return s;
    }
    if (const auto* nt = e->as<Expr::Not>()) return "!(" + expr(nt->arg, 0) + ")";
    return "?";
  }

  std::string lvalue(const LValue& lv) {
    std::string s = lv.name;
    for (const auto& i : lv.indices) s += "[" + expr(i, 0) + "]";
    return s;
  }

  std::string dims_suffix(const std::vector<ExprPtr>& dims) {
    std::string s;
    for (const auto& d : dims) s += "[" + expr(d, 0) + "]";
    return s;
  }

  void emit_function(const Stmt::FuncDef& fd) {
    os_ << "int " << fd.name << "(";
    for (size_t i = 0; i < fd.args.size(); ++i) {
      if (i) os_ << ", ";
      os_ << "int " << fd.args[i];
    }
    os_ << ") {\n";
    indent_ = 1;
    for (const auto& s : fd.body) emit_stmt(s);
    indent_ = 0;
    os_ << "}\n";
  }

  void emit_block(const Block& block) {
    ++indent_;
    for (const auto& s : block) emit_stmt(s);
    --indent_;
  }

  void emit_stmt(const StmtPtr& s) {
    if (const auto* a = s->as<Stmt::Assign>()) {
      os_ << ind() << "int " << a->name << " = " << expr(a->value, 0) << ";\n";
      return;
    }
    if (const auto* d = s->as<Stmt::Decl>()) {
      std::string bound = expr(d->domain, 0);
      if (d->dims.empty()) {
        if (d->is_param) {
          os_ << ind() << "int " << d->name << " = ??;\n";
          os_ << ind() << "assert " << d->name << " < " << bound << ";\n";
        } else {
          os_ << ind() << "int " << d->name << ";\n";
        }
        return;
      }
      std::string dims = "int" + dims_suffix(d->dims);
      if (d->is_param) {
        os_ << ind() << dims << " " << d->name << " = (" << dims << ") ??;\n";
        // Bound-assert loops over every cell.
        std::string access = d->name;
        int opened = 0;
        for (size_t k = 0; k < d->dims.size(); ++k) {
          std::string iv = "_i" + std::to_string(k);
          os_ << ind() << "for (int " << iv << " = 0; " << iv << " < " << expr(d->dims[k], 0)
              << "; " << iv << "++) {\n";
          ++indent_;
          ++opened;
          access += "[" + iv + "]";
        }
        os_ << ind() << "assert " << access << " < " << bound << ";\n";
        for (int k = 0; k < opened; ++k) {
          --indent_;
          os_ << ind() << "}\n";
        }
      } else {
        os_ << ind() << dims << " " << d->name << ";\n";
      }
      return;
    }
    if (const auto* st = s->as<Stmt::SetTo>()) {
      os_ << ind() << lvalue(st->target) << " = " << expr(st->value, 0) << ";\n";
      return;
    }
    if (const auto* sc = s->as<Stmt::SetToConst>()) {
      os_ << ind() << lvalue(sc->target) << " = " << expr(sc->value, 0) << ";\n";
      return;
    }
    if (const auto* ob = s->as<Stmt::Observe>()) {
      os_ << ind() << "assert " << lvalue(ob->target) << " == " << expr(ob->value, 0) << ";\n";
      return;
    }
    if (const auto* iff = s->as<Stmt::If>()) {
      for (size_t i = 0; i < iff->arms.size(); ++i) {
        os_ << (i == 0 ? ind() + "if (" : " else if (") << expr(iff->arms[i].cond, 0) << ") {\n";
        emit_block(iff->arms[i].body);
        os_ << ind() << "}";
      }
      if (iff->else_body) {
        os_ << " else {\n";
        emit_block(*iff->else_body);
        os_ << ind() << "}";
      }
      os_ << "\n";
      return;
    }
    if (const auto* f = s->as<Stmt::For>()) {
      std::string lo = f->lo ? expr(f->lo, 0) : "0";
      os_ << ind() << "for (int " << f->var << " = " << lo << "; " << f->var << " < "
          << expr(f->hi, 0) << "; " << f->var << "++) {\n";
      emit_block(f->body);
      os_ << ind() << "}\n";
      return;
    }
    if (const auto* w = s->as<Stmt::With>()) {
      os_ << ind() << "{\n";
      ++indent_;
      os_ << ind() << "int " << w->var << " = " << lvalue(w->subject) << ";\n";
      for (const auto& inner : w->body) emit_stmt(inner);
      --indent_;
      os_ << ind() << "}\n";
      return;
    }
    if (const auto* r = s->as<Stmt::Return>()) {
      os_ << ind() << "return " << expr(r->value, 0) << ";\n";
      return;
    }
  }
};

}  // namespace

SketchUnit emit_sketch(const CheckedModel& model) { return SketchEmitter(model).run(); }

}  // namespace tpt
