#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace batchline {

// Runs one `batchline` invocation. args excludes the program name.
// Exit codes: 0 success, 1 failure with diagnostics on err, 2 usage error.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace batchline
