#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace mmtlab::cli {

enum ExitCode : int { kOk = 0, kUsage = 2, kData = 3, kInternal = 4 };

/// Runs one command line. `args` excludes the program name. Failures print a
/// single line "error<TAB>code<TAB>message" to `err`.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mmtlab::cli
