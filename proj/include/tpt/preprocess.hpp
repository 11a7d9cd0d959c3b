#pragma once

#include <map>
#include <optional>
#include <string>

namespace tpt {

// Expands preprocessor directives in a model source:
//   - a trailing comment of the exact form  #__HYPERPARAM_<name>__  is
//     replaced by the bound integer literal;
//   - a line consisting solely of  #__IMPORT_OBSERVED_INPUTS__  (resp.
//     _OUTPUTS__) is replaced by the corresponding snippet, re-indented to
//     the directive's indentation.
// Directives are recognized only when the directive is the entire comment
// body on its line. Unbound hyperparameters and missing snippets are errors.
std::string preprocess(const std::string& source, const std::map<std::string, long long>& hyperparams,
                       const std::optional<std::string>& input_snippet,
                       const std::optional<std::string>& output_snippet);

}  // namespace tpt
