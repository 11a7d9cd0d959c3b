#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "tpt/diag.hpp"

namespace tpt {

// Expressions are immutable once built; substitution during unrolling and
// inlining produces fresh nodes and shares untouched subtrees.
struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

enum class BinOp { Add, Sub, Mul, Div, Mod, Eq, Lt, Gt, Le, Ge, And, Or };

const char* binop_text(BinOp op);
bool binop_is_arith(BinOp op);
bool binop_is_cmp(BinOp op);

struct Expr {
  struct IntLit {
    long long value;
  };
  struct Name {
    std::string name;
  };
  struct Index {
    std::string name;
    std::vector<ExprPtr> indices;
  };
  struct Call {
    std::string name;
    std::vector<ExprPtr> args;
  };
  struct Bin {
    BinOp op;
    ExprPtr lhs, rhs;
  };
  struct Not {
    ExprPtr arg;
  };

  std::variant<IntLit, Name, Index, Call, Bin, Not> node;
  SourceLoc loc;

  template <class T>
  const T* as() const {
    return std::get_if<T>(&node);
  }
};

ExprPtr make_int(long long v, SourceLoc loc = {});
ExprPtr make_name(std::string n, SourceLoc loc = {});
ExprPtr make_index(std::string n, std::vector<ExprPtr> idx, SourceLoc loc = {});
ExprPtr make_call(std::string n, std::vector<ExprPtr> args, SourceLoc loc = {});
ExprPtr make_bin(BinOp op, ExprPtr l, ExprPtr r, SourceLoc loc = {});
ExprPtr make_not(ExprPtr e, SourceLoc loc = {});

// Replaces free occurrences of names per `env` (name -> integer literal).
// Used for loop unrolling and `with` substitution.
ExprPtr substitute(const ExprPtr& e, const std::map<std::string, long long>& env);

struct Stmt;
using StmtPtr = std::shared_ptr<const Stmt>;
using Block = std::vector<StmtPtr>;

// An assignment target: a scalar name or an indexed array cell.
struct LValue {
  std::string name;
  std::vector<ExprPtr> indices;  // empty for scalars
  SourceLoc loc;
};

struct Stmt {
  // v = const-expr (top level) or local binding inside a function body.
  struct Assign {
    std::string name;
    ExprPtr value;
  };
  // v = Param(N)[d...] / v = Var(N)[d...]
  struct Decl {
    bool is_param;
    std::string name;
    ExprPtr domain;
    std::vector<ExprPtr> dims;
  };
  struct SetTo {
    LValue target;
    ExprPtr value;
  };
  struct SetToConst {
    LValue target;
    ExprPtr value;
  };
  struct Observe {
    LValue target;
    ExprPtr value;
  };
  // if/elif chain with optional trailing else.
  struct If {
    struct Arm {
      ExprPtr cond;
      Block body;
    };
    std::vector<Arm> arms;
    std::optional<Block> else_body;
  };
  struct For {
    std::string var;
    ExprPtr lo;  // null for range(n) form
    ExprPtr hi;
    Block body;
  };
  struct With {
    LValue subject;
    std::string var;
    Block body;
  };
  struct FuncDef {
    std::string name;
    std::vector<ExprPtr> in_domains;
    ExprPtr out_domain;
    std::vector<std::string> args;
    Block body;
  };
  struct Return {
    ExprPtr value;
  };

  std::variant<Assign, Decl, SetTo, SetToConst, Observe, If, For, With, FuncDef, Return> node;
  SourceLoc loc;

  template <class T>
  const T* as() const {
    return std::get_if<T>(&node);
  }
};

template <class T>
StmtPtr make_stmt(T node, SourceLoc loc) {
  auto s = std::make_shared<Stmt>();
  s->node = std::move(node);
  s->loc = loc;
  return s;
}

struct Ast {
  Block stmts;
};

// Canonical source rendering; parse(pretty_print(ast)) is structurally
// identical to ast.
std::string pretty_print(const Ast& ast);
std::string pretty_print(const ExprPtr& expr);

// Structural comparison ignoring source locations.
bool structurally_equal(const Ast& a, const Ast& b);

}  // namespace tpt
