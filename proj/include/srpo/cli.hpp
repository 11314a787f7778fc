#pragma once

#include <iosfwd>

namespace srpo {

// Entry point for the srpo tool: sft | train | eval | sweep.
// Returns 0 on success, 1 on user error (bad config, missing or corrupt
// files, unknown algorithm), 2 on internal failure.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace srpo
