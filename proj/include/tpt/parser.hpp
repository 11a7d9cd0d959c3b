#pragma once

#include "tpt/ast.hpp"
#include "tpt/token.hpp"

namespace tpt {

// Recursive-descent parser over the token stream. Throws TptError with a
// location and the expected-token set on any production violation.
Ast parse(const std::vector<Token>& tokens);

// Convenience: preprocessed source -> AST.
Ast parse_source(const std::string& source);

}  // namespace tpt
