#pragma once

#include <string>
#include <vector>

namespace tsvd {

/// Runs one CLI invocation.  Returns 0 on success, 1 on assertion or bound
/// violation (and other domain errors), 2 on usage errors.
int cli_dispatch(int argc, const char* const* argv);

/// Test-friendly variant; `args` excludes the program name.
int cli_dispatch(const std::vector<std::string>& args);

}  // namespace tsvd
