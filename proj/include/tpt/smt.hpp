#pragma once

#include <optional>

#include "tpt/interp.hpp"

namespace tpt {

// SMT symbol for an array cell: indices joined with underscores.
std::string smt_cell_name(const std::string& array, const std::vector<long long>& indices);

// Syntax-directed translation of an unrolled expression to an SMT-LIB 2
// term. Function calls are inlined (formal parameters replaced by actual
// arguments, local bindings substituted, if/elif/else lowered to ite).
std::string translate_expr(const CheckedModel& model, const ExprPtr& expr);

// One statement to its list of constraints (terms to be asserted).
std::vector<std::string> translate_stmt(const CheckedModel& model, const StmtPtr& stmt);

// Full script: (set-logic QF_LIA), constant and cell declarations with
// domain bounds in declaration order, one assertion per translated
// constraint in statement order, (check-sat) and (get-model). Byte-identical
// across runs for identical input.
std::string emit_smtlib(const CheckedModel& model, const Ast& unrolled);

enum class SmtStatus { Sat, Unsat, Unknown };

struct SmtResult {
  SmtStatus status = SmtStatus::Unknown;
  std::optional<ParamAssignment> params;
  bool verified = false;
  std::string solver_output;
};

// Runs `solver_command <script-file>` and parses `sat|unsat|unknown` plus an
// SMT-LIB model block. On sat the parameter cells are decoded and verified
// against the interpreter; a model that fails verification is a translation
// bug and throws with code "smt-verify".
SmtResult solve_smt(const GatedFactorGraph& graph, const std::string& script,
                    const std::string& solver_command, const std::string& workdir = "");

// Shared subprocess helper: runs a command via the shell, captures stdout.
int run_command(const std::string& command, std::string* output);

}  // namespace tpt
