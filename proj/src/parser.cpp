#include "tpt/parser.hpp"

namespace tpt {

namespace {

class Parser {
 public:
  explicit Parser(const std::vector<Token>& toks) : toks_(toks) {}

  Ast parse_program() {
    Ast ast;
    while (!at(TokKind::End)) {
      parse_stmt_into(ast.stmts, /*in_function=*/false);
    }
    return ast;
  }

 private:
  const std::vector<Token>& toks_;
  size_t pos_ = 0;

  const Token& cur() const { return toks_[pos_]; }
  const Token& peek(size_t n = 1) const {
    size_t i = pos_ + n;
    return i < toks_.size() ? toks_[i] : toks_.back();
  }
  bool at(TokKind k) const { return cur().is(k); }
  bool at(TokKind k, const char* t) const { return cur().is(k, t); }
  Token advance() { return toks_[pos_++]; }

  [[noreturn]] void fail(const std::string& expected) const {
    const Token& t = cur();
    std::string got = t.kind == TokKind::End ? "end of input"
                      : t.text.empty()       ? tok_kind_name(t.kind)
                                             : "'" + t.text + "'";
    throw TptError("parse", "expected " + expected + ", found " + got, t.loc);
  }

  Token expect(TokKind k, const char* t) {
    if (!at(k, t)) fail(std::string("'") + t + "'");
    return advance();
  }
  Token expect(TokKind k) {
    if (!at(k)) fail(tok_kind_name(k));
    return advance();
  }

  bool accept(TokKind k, const char* t) {
    if (at(k, t)) {
      ++pos_;
      return true;
    }
    return false;
  }

  // --- expressions -------------------------------------------------------

  ExprPtr parse_expr() { return parse_or(); }

  ExprPtr parse_or() {
    ExprPtr lhs = parse_and();
    while (at(TokKind::Keyword, "or")) {
      SourceLoc loc = advance().loc;
      lhs = make_bin(BinOp::Or, lhs, parse_and(), loc);
    }
    return lhs;
  }

  ExprPtr parse_and() {
    ExprPtr lhs = parse_not();
    while (at(TokKind::Keyword, "and")) {
      SourceLoc loc = advance().loc;
      lhs = make_bin(BinOp::And, lhs, parse_not(), loc);
    }
    return lhs;
  }

  ExprPtr parse_not() {
    if (at(TokKind::Keyword, "not")) {
      SourceLoc loc = advance().loc;
      return make_not(parse_not(), loc);
    }
    return parse_comparison();
  }

  ExprPtr parse_comparison() {
    ExprPtr lhs = parse_arith();
    static const char* cmps[] = {"==", "<", ">", "<=", ">="};
    static const BinOp ops[] = {BinOp::Eq, BinOp::Lt, BinOp::Gt, BinOp::Le, BinOp::Ge};
    for (size_t i = 0; i < 5; ++i) {
      if (at(TokKind::Op, cmps[i])) {
        SourceLoc loc = advance().loc;
        return make_bin(ops[i], lhs, parse_arith(), loc);
      }
    }
    return lhs;
  }

  ExprPtr parse_arith() {
    ExprPtr lhs = parse_term();
    while (at(TokKind::Op, "+") || at(TokKind::Op, "-")) {
      Token t = advance();
      lhs = make_bin(t.text == "+" ? BinOp::Add : BinOp::Sub, lhs, parse_term(), t.loc);
    }
    return lhs;
  }

  ExprPtr parse_term() {
    ExprPtr lhs = parse_atom();
    while (at(TokKind::Op, "*") || at(TokKind::Op, "/") || at(TokKind::Op, "%")) {
      Token t = advance();
      BinOp op = t.text == "*" ? BinOp::Mul : t.text == "/" ? BinOp::Div : BinOp::Mod;
      lhs = make_bin(op, lhs, parse_atom(), t.loc);
    }
    return lhs;
  }

  std::vector<ExprPtr> parse_expr_list(const char* close) {
    std::vector<ExprPtr> out;
    if (!at(TokKind::Punct, close)) {
      out.push_back(parse_expr());
      while (accept(TokKind::Punct, ",")) out.push_back(parse_expr());
    }
    expect(TokKind::Punct, close);
    return out;
  }

  ExprPtr parse_atom() {
    if (at(TokKind::Int)) {
      Token t = advance();
      return make_int(std::stoll(t.text), t.loc);
    }
    if (at(TokKind::Punct, "(")) {
      advance();
      ExprPtr e = parse_expr();
      expect(TokKind::Punct, ")");
      return e;
    }
    if (at(TokKind::Ident)) {
      Token t = advance();
      if (accept(TokKind::Punct, "(")) return make_call(t.text, parse_expr_list(")"), t.loc);
      if (accept(TokKind::Punct, "[")) return make_index(t.text, parse_expr_list("]"), t.loc);
      return make_name(t.text, t.loc);
    }
    fail("an expression");
  }

  // --- statements --------------------------------------------------------

  LValue parse_lvalue() {
    Token name = expect(TokKind::Ident);
    LValue lv;
    lv.name = name.text;
    lv.loc = name.loc;
    if (accept(TokKind::Punct, "[")) lv.indices = parse_expr_list("]");
    return lv;
  }

  // Either an indented block or an inline `;`-separated statement list.
  Block parse_block(bool in_function) {
    Block body;
    if (at(TokKind::Newline)) {
      advance();
      expect(TokKind::Indent);
      while (!at(TokKind::Dedent)) parse_stmt_into(body, in_function);
      advance();  // Dedent
      return body;
    }
    parse_simple_list(body, in_function);
    expect(TokKind::Newline);
    return body;
  }

  void parse_simple_list(Block& out, bool in_function) {
    out.push_back(parse_simple_stmt(in_function));
    while (accept(TokKind::Punct, ";")) out.push_back(parse_simple_stmt(in_function));
  }

  StmtPtr parse_simple_stmt(bool in_function) {
    SourceLoc loc = cur().loc;
    if (at(TokKind::Keyword, "return")) {
      if (!in_function) throw TptError("parse", "'return' outside of a function body", loc);
      advance();
      return make_stmt(Stmt::Return{parse_expr()}, loc);
    }
    if (!at(TokKind::Ident)) fail("a statement");

    // name = ...  (declaration or constant/local binding)
    if (peek().is(TokKind::Op, "=")) {
      Token name = advance();
      advance();  // '='
      if (at(TokKind::Keyword, "Param") || at(TokKind::Keyword, "Var")) {
        bool is_param = cur().text == "Param";
        advance();
        expect(TokKind::Punct, "(");
        ExprPtr domain = parse_expr();
        expect(TokKind::Punct, ")");
        std::vector<ExprPtr> dims;
        if (accept(TokKind::Punct, "[")) dims = parse_expr_list("]");
        return make_stmt(Stmt::Decl{is_param, name.text, domain, std::move(dims)}, loc);
      }
      return make_stmt(Stmt::Assign{name.text, parse_expr()}, loc);
    }

    // lvalue.method(expr)
    LValue target = parse_lvalue();
    expect(TokKind::Punct, ".");
    Token method = expect(TokKind::Ident);
    expect(TokKind::Punct, "(");
    ExprPtr value = parse_expr();
    expect(TokKind::Punct, ")");
    if (method.text == "set_to") return make_stmt(Stmt::SetTo{target, value}, loc);
    if (method.text == "set_to_constant") return make_stmt(Stmt::SetToConst{target, value}, loc);
    if (method.text == "observe_value") return make_stmt(Stmt::Observe{target, value}, loc);
    throw TptError("parse",
                   "unknown statement method '" + method.text +
                       "' (expected set_to, set_to_constant or observe_value)",
                   method.loc);
  }

  void parse_stmt_into(Block& out, bool in_function) {
    SourceLoc loc = cur().loc;

    if (at(TokKind::Keyword, "if")) {
      out.push_back(parse_if(in_function));
      return;
    }
    if (at(TokKind::Keyword, "for")) {
      advance();
      Token var = expect(TokKind::Ident);
      expect(TokKind::Keyword, "in");
      expect(TokKind::Keyword, "range");
      expect(TokKind::Punct, "(");
      ExprPtr first = parse_expr();
      ExprPtr lo, hi;
      if (accept(TokKind::Punct, ",")) {
        lo = first;
        hi = parse_expr();
      } else {
        hi = first;
      }
      expect(TokKind::Punct, ")");
      expect(TokKind::Punct, ":");
      Block body = parse_block(in_function);
      out.push_back(make_stmt(Stmt::For{var.text, lo, hi, std::move(body)}, loc));
      return;
    }
    if (at(TokKind::Keyword, "with")) {
      advance();
      LValue subject = parse_lvalue();
      expect(TokKind::Keyword, "as");
      Token var = expect(TokKind::Ident);
      expect(TokKind::Punct, ":");
      Block body = parse_block(in_function);
      out.push_back(make_stmt(Stmt::With{subject, var.text, std::move(body)}, loc));
      return;
    }
    if (at(TokKind::Punct, "@")) {
      out.push_back(parse_funcdef());
      return;
    }

    parse_simple_list(out, in_function);
    expect(TokKind::Newline);
  }

  StmtPtr parse_if(bool in_function) {
    SourceLoc loc = cur().loc;
    Stmt::If node;
    expect(TokKind::Keyword, "if");
    for (;;) {
      ExprPtr cond = parse_expr();
      expect(TokKind::Punct, ":");
      Block body = parse_block(in_function);
      node.arms.push_back(Stmt::If::Arm{cond, std::move(body)});
      if (at(TokKind::Keyword, "elif")) {
        advance();
        continue;
      }
      if (at(TokKind::Keyword, "else")) {
        advance();
        expect(TokKind::Punct, ":");
        node.else_body = parse_block(in_function);
      }
      break;
    }
    return make_stmt(std::move(node), loc);
  }

  StmtPtr parse_funcdef() {
    SourceLoc loc = cur().loc;
    expect(TokKind::Punct, "@");
    expect(TokKind::Keyword, "CompileMe");
    expect(TokKind::Punct, "(");
    expect(TokKind::Punct, "[");
    std::vector<ExprPtr> in_domains = parse_expr_list("]");
    expect(TokKind::Punct, ",");
    ExprPtr out_domain = parse_expr();
    expect(TokKind::Punct, ")");
    expect(TokKind::Newline);
    expect(TokKind::Keyword, "def");
    Token name = expect(TokKind::Ident);
    expect(TokKind::Punct, "(");
    std::vector<std::string> args;
    if (!at(TokKind::Punct, ")")) {
      args.push_back(expect(TokKind::Ident).text);
      while (accept(TokKind::Punct, ",")) args.push_back(expect(TokKind::Ident).text);
    }
    expect(TokKind::Punct, ")");
    expect(TokKind::Punct, ":");
    Block body = parse_block(/*in_function=*/true);
    return make_stmt(Stmt::FuncDef{name.text, std::move(in_domains), out_domain, std::move(args),
                                   std::move(body)},
                     loc);
  }
};

}  // namespace

Ast parse(const std::vector<Token>& tokens) { return Parser(tokens).parse_program(); }

Ast parse_source(const std::string& source) { return parse(tokenize(source)); }

}  // namespace tpt
