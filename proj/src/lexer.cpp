#include "tpt/token.hpp"

#include <array>
#include <cctype>

namespace tpt {

namespace {

const std::array<const char*, 16> kKeywords = {
    "and", "as", "def", "elif", "else", "for", "if", "in",
    "not", "or", "range", "return", "with", "Param", "Var", "CompileMe",
};

bool is_keyword(const std::string& s) {
  for (const char* k : kKeywords)
    if (s == k) return true;
  return false;
}

bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool ident_cont(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

}  // namespace

const char* tok_kind_name(TokKind k) {
  switch (k) {
    case TokKind::Keyword: return "keyword";
    case TokKind::Ident: return "identifier";
    case TokKind::Int: return "integer";
    case TokKind::Op: return "operator";
    case TokKind::Punct: return "punctuation";
    case TokKind::Newline: return "newline";
    case TokKind::Indent: return "indent";
    case TokKind::Dedent: return "dedent";
    case TokKind::End: return "end of input";
  }
  return "?";
}

std::vector<Token> tokenize(const std::string& source) {
  std::vector<Token> out;
  std::vector<int> levels{0};
  size_t pos = 0;
  int line_no = 0;

  auto emit = [&](TokKind k, std::string text, int line, int col) {
    out.push_back(Token{k, std::move(text), SourceLoc{line, col}});
  };

  while (pos <= source.size()) {
    if (pos == source.size()) break;
    // Start of a physical line: measure indentation.
    ++line_no;
    size_t line_start = pos;
    int indent = 0;
    while (pos < source.size() && (source[pos] == ' ' || source[pos] == '\t')) {
      if (source[pos] == '\t')
        throw TptError("lex-tab", "tab character in indentation",
                       SourceLoc{line_no, static_cast<int>(pos - line_start) + 1});
      ++indent;
      ++pos;
    }
    // Blank or comment-only lines do not affect indentation.
    if (pos == source.size() || source[pos] == '\n' || source[pos] == '\r' || source[pos] == '#') {
      if (pos < source.size() && source[pos] == '#') {
        size_t c = pos;
        if (source.compare(c, 3, "#__") == 0)
          throw TptError("lex-directive", "unprocessed preprocessor directive",
                         SourceLoc{line_no, static_cast<int>(c - line_start) + 1});
        while (pos < source.size() && source[pos] != '\n') ++pos;
      }
      if (pos < source.size() && source[pos] == '\r') ++pos;
      if (pos < source.size() && source[pos] == '\n') ++pos;
      continue;
    }

    // Indentation bookkeeping.
    SourceLoc ind_loc{line_no, 1};
    if (indent % 4 != 0)
      throw TptError("lex-indent", "indentation is not a multiple of four spaces", ind_loc);
    int level = indent / 4;
    if (level > static_cast<int>(levels.size()) - 1 + 1)
      throw TptError("lex-indent", "indentation increases by more than one level", ind_loc);
    if (level == static_cast<int>(levels.size())) {
      levels.push_back(level);
      emit(TokKind::Indent, "", line_no, 1);
    } else {
      while (level < static_cast<int>(levels.size()) - 1) {
        levels.pop_back();
        emit(TokKind::Dedent, "", line_no, 1);
      }
      if (levels.back() != level)
        throw TptError("lex-indent", "inconsistent dedent level", ind_loc);
    }

    // Tokens on the line.
    bool saw_token = false;
    while (pos < source.size() && source[pos] != '\n') {
      char c = source[pos];
      int col = static_cast<int>(pos - line_start) + 1;
      if (c == ' ') {
        ++pos;
        continue;
      }
      if (c == '\r') {
        ++pos;
        continue;
      }
      if (c == '\t')
        throw TptError("lex-tab", "tab character in source line", SourceLoc{line_no, col});
      if (c == '#') {
        if (source.compare(pos, 3, "#__") == 0)
          throw TptError("lex-directive", "unprocessed preprocessor directive",
                         SourceLoc{line_no, col});
        while (pos < source.size() && source[pos] != '\n') ++pos;
        break;
      }
      saw_token = true;
      if (std::isdigit(static_cast<unsigned char>(c))) {
        size_t s = pos;
        while (pos < source.size() && std::isdigit(static_cast<unsigned char>(source[pos]))) ++pos;
        if (pos < source.size() && ident_start(source[pos]))
          throw TptError("lex-number", "malformed integer literal", SourceLoc{line_no, col});
        emit(TokKind::Int, source.substr(s, pos - s), line_no, col);
        continue;
      }
      if (ident_start(c)) {
        size_t s = pos;
        while (pos < source.size() && ident_cont(source[pos])) ++pos;
        std::string word = source.substr(s, pos - s);
        emit(is_keyword(word) ? TokKind::Keyword : TokKind::Ident, std::move(word), line_no, col);
        continue;
      }
      // Two-character operators first.
      if (pos + 1 < source.size()) {
        std::string two = source.substr(pos, 2);
        if (two == "==" || two == "<=" || two == ">=") {
          emit(TokKind::Op, two, line_no, col);
          pos += 2;
          continue;
        }
      }
      switch (c) {
        case '=':
        case '<':
        case '>':
        case '+':
        case '-':
        case '*':
        case '/':
        case '%':
          emit(TokKind::Op, std::string(1, c), line_no, col);
          ++pos;
          continue;
        case '(':
        case ')':
        case '[':
        case ']':
        case ',':
        case ':':
        case '.':
        case ';':
        case '@':
          emit(TokKind::Punct, std::string(1, c), line_no, col);
          ++pos;
          continue;
        default:
          throw TptError("lex-char", std::string("unexpected character '") + c + "'",
                         SourceLoc{line_no, col});
      }
    }
    if (pos < source.size() && source[pos] == '\n') ++pos;
    if (saw_token) emit(TokKind::Newline, "", line_no, static_cast<int>(pos - line_start) + 1);
  }

  while (levels.size() > 1) {
    levels.pop_back();
    out.push_back(Token{TokKind::Dedent, "", SourceLoc{line_no + 1, 1}});
  }
  out.push_back(Token{TokKind::End, "", SourceLoc{line_no + 1, 1}});
  return out;
}

}  // namespace tpt
