#include "tpt/preprocess.hpp"

#include <sstream>
#include <vector>

#include "tpt/diag.hpp"

namespace tpt {

namespace {

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::string cur;
  for (char c : text) {
    if (c == '\n') {
      if (!cur.empty() && cur.back() == '\r') cur.pop_back();
      lines.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) lines.push_back(cur);
  return lines;
}

bool is_ident_char(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_';
}

// Matches "#__HYPERPARAM_<name>__" covering text[from..end) up to trailing
// spaces; returns the name on success.
std::optional<std::string> match_hyperparam(const std::string& text, size_t from) {
  static const std::string prefix = "#__HYPERPARAM_";
  if (text.compare(from, prefix.size(), prefix) != 0) return std::nullopt;
  size_t p = from + prefix.size();
  size_t name_start = p;
  while (p < text.size() && is_ident_char(text[p])) ++p;
  if (p < name_start + 2) return std::nullopt;
  // The name itself ends with "__".
  if (text.compare(p - 2, 2, "__") != 0) return std::nullopt;
  std::string name = text.substr(name_start, p - 2 - name_start);
  if (name.empty()) return std::nullopt;
  while (p < text.size() && text[p] == ' ') ++p;
  if (p != text.size()) return std::nullopt;
  return name;
}

std::string reindent(const std::string& snippet, const std::string& indent) {
  std::string out;
  for (const std::string& line : split_lines(snippet)) {
    if (line.empty()) {
      out += "\n";
    } else {
      out += indent + line + "\n";
    }
  }
  return out;
}

}  // namespace

std::string preprocess(const std::string& source, const std::map<std::string, long long>& hyperparams,
                       const std::optional<std::string>& input_snippet,
                       const std::optional<std::string>& output_snippet) {
  std::string out;
  std::vector<std::string> lines = split_lines(source);
  for (size_t i = 0; i < lines.size(); ++i) {
    const std::string& line = lines[i];
    int line_no = static_cast<int>(i) + 1;
    size_t indent_end = line.find_first_not_of(' ');
    std::string indent = indent_end == std::string::npos ? line : line.substr(0, indent_end);
    std::string body = indent_end == std::string::npos ? "" : line.substr(indent_end);

    if (body == "#__IMPORT_OBSERVED_INPUTS__" || body == "#__IMPORT_OBSERVED_OUTPUTS__") {
      bool inputs = body[17] == 'I';
      const auto& snippet = inputs ? input_snippet : output_snippet;
      if (!snippet)
        throw TptError("pp-missing-snippet",
                       std::string("no ") + (inputs ? "input" : "output") +
                           " snippet provided for directive " + body,
                       SourceLoc{line_no, static_cast<int>(indent.size()) + 1});
      out += reindent(*snippet, indent);
      continue;
    }

    size_t hash = line.find('#');
    if (hash != std::string::npos) {
      if (auto name = match_hyperparam(line, hash)) {
        auto it = hyperparams.find(*name);
        if (it == hyperparams.end())
          throw TptError("pp-unbound-hyperparam",
                         "no binding for directive #__HYPERPARAM_" + *name + "__",
                         SourceLoc{line_no, static_cast<int>(hash) + 1});
        out += line.substr(0, hash) + std::to_string(it->second) + "\n";
        continue;
      }
    }
    out += line + "\n";
  }
  return out;
}

}  // namespace tpt
