#pragma once

#include "tpt/sema.hpp"

namespace tpt {

struct SketchUnit {
  std::string text;
  long long hole_count = 0;  // equals the number of scalar Param cells
};

// Emits Sketch source for a checked (not unrolled) model: Params become ??
// holes with bound asserts, observe_value becomes assert, `with` becomes a
// scoped assignment, `for` a C-style loop, @CompileMe functions plain int
// functions, and the model body is wrapped in one harness.
SketchUnit emit_sketch(const CheckedModel& model);

}  // namespace tpt
