#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace tpt {

struct SourceLoc {
  int line = 0;  // 1-based
  int col = 0;   // 1-based
  bool valid() const { return line > 0; }
  std::string str() const { return std::to_string(line) + ":" + std::to_string(col); }
};

enum class Severity { Error, Warning };

struct Diagnostic {
  Severity severity = Severity::Error;
  std::string code;     // short machine-readable tag, e.g. "ssa-conflict"
  std::string message;  // human-readable description
  SourceLoc loc;

  std::string str() const {
    std::string s = loc.valid() ? loc.str() + ": " : "";
    s += (severity == Severity::Error ? "error" : "warning");
    s += " [" + code + "]: " + message;
    return s;
  }
};

// Thrown for failures that abort a pipeline stage (lexing, parsing,
// preprocessing, graph construction). Semantic checking instead collects
// Diagnostics so that multiple violations can be reported at once.
class TptError : public std::runtime_error {
 public:
  TptError(std::string code, std::string message, SourceLoc loc = {})
      : std::runtime_error(loc.valid() ? loc.str() + ": " + message : message),
        code_(std::move(code)),
        message_(std::move(message)),
        loc_(loc) {}
  const std::string& code() const { return code_; }
  const std::string& message() const { return message_; }
  SourceLoc loc() const { return loc_; }
  Diagnostic to_diagnostic() const { return Diagnostic{Severity::Error, code_, message_, loc_}; }

 private:
  std::string code_;
  std::string message_;
  SourceLoc loc_;
};

inline void sort_by_location(std::vector<Diagnostic>& diags) {
  std::stable_sort(diags.begin(), diags.end(), [](const Diagnostic& a, const Diagnostic& b) {
    if (a.loc.line != b.loc.line) return a.loc.line < b.loc.line;
    return a.loc.col < b.loc.col;
  });
}

}  // namespace tpt
