#pragma once

#include "tpt/sema.hpp"

namespace tpt {

// Expands `for` and `with` statements and folds every array index and gate
// condition value to an integer literal. Declarations, constant bindings and
// function definitions pass through unchanged; empty ranges unroll to
// nothing. Throws TptError when a substituted index falls outside the
// declared bounds (naming the cell) or a chain mixes condition subjects.
Ast unroll(const CheckedModel& model);

// Runs the cell-level checks that need an unrolled program: single
// assignment per execution path (citing both sites), reads of never-assigned
// cells, the read-after-gate rule, observation/input domains and duplicate
// or out-of-domain gate arm values. Appends to model.diags.
void validate_by_unrolling(CheckedModel& model);

// Flat cell addressing shared by the IR, back-ends and reports.
// Cells of an array are numbered row-major; ids are dense across the model
// in declaration order.
struct CellAddr {
  int array = -1;
  long long flat = 0;
};

std::string cell_name(const ArrayInfo& arr, long long flat);

}  // namespace tpt
