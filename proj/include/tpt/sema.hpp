#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "tpt/ast.hpp"

namespace tpt {

struct FuncInfo {
  std::string name;
  std::vector<long long> in_domains;
  long long out_domain = 0;
  std::vector<std::string> args;
  Block body;
  SourceLoc loc;
};

struct ArrayInfo {
  std::string name;
  bool is_param = false;
  long long domain = 0;
  std::vector<long long> dims;  // empty for scalars
  long long cells = 1;
  SourceLoc loc;
};

// Result of semantic checking: symbol tables plus the diagnostic list.
// Error diagnostics prevent downstream compilation.
struct CheckedModel {
  Ast ast;
  std::map<std::string, long long> consts;
  std::map<std::string, FuncInfo> functions;
  std::vector<ArrayInfo> arrays;
  std::map<std::string, int> array_index;
  std::vector<Diagnostic> diags;

  bool ok() const {
    for (const auto& d : diags)
      if (d.severity == Severity::Error) return false;
    return true;
  }
  const ArrayInfo* find_array(const std::string& name) const {
    auto it = array_index.find(name);
    return it == array_index.end() ? nullptr : &arrays[it->second];
  }
};

// Verifies declaration-before-use, const-foldability of domains, dims and
// loop bounds, gate condition shape, set_to_constant/observe domains, arity
// of @CompileMe calls, return placement, and (via a full unroll) cell-level
// single assignment and read-after-gate legality. Diagnostics are ordered
// by source location.
CheckedModel check_semantics(const Ast& ast);

// Folds a constant expression. `env` supplies loop/with bindings. Negative
// intermediate values, division by nonpositive divisors and overflow are
// errors; `/` is floor division and `%` the nonnegative remainder.
long long eval_const(const CheckedModel& model, const ExprPtr& e,
                     const std::map<std::string, long long>& env);

// Runtime expression semantics used for tabulation: negative intermediates
// are permitted (only final outputs are range-checked by the caller), while
// a nonpositive divisor is still a fault.
long long eval_runtime(const CheckedModel& model, const ExprPtr& e,
                       const std::map<std::string, long long>& env);

// Executes a @CompileMe body on concrete arguments and returns the result.
// Throws TptError for arithmetic faults or a body that does not return.
long long call_function(const CheckedModel& model, const FuncInfo& fn,
                        const std::vector<long long>& args);

}  // namespace tpt
