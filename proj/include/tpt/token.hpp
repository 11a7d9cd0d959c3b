#pragma once

#include <string>
#include <vector>

#include "tpt/diag.hpp"

namespace tpt {

enum class TokKind {
  Keyword,
  Ident,
  Int,
  Op,
  Punct,
  Newline,
  Indent,
  Dedent,
  End,
};

struct Token {
  TokKind kind;
  std::string text;
  SourceLoc loc;

  bool is(TokKind k) const { return kind == k; }
  bool is(TokKind k, const char* t) const { return kind == k && text == t; }
};

const char* tok_kind_name(TokKind k);

// Lexes preprocessed source into a token stream. Indentation is significant:
// four spaces per level, tabs are rejected. The stream always ends with the
// dedents closing all open blocks followed by an End token.
std::vector<Token> tokenize(const std::string& source);

}  // namespace tpt
