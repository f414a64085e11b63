#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace gridsafe {

/// Runs the command-line front end. Exit codes partition the outcomes:
/// 0 success (all requested intervals nonempty / no violations),
/// 1 operational error (usage, I/O, parse, optimizer budget),
/// 2 at least one empty certificate,
/// 3 at least one true simulated violation.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace gridsafe
