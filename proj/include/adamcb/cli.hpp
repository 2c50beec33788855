#pragma once

#include <string>
#include <vector>

namespace adamcb {

// Entry point behind the adamcb binary, kept separate so tests can drive
// subcommands in-process. `args` excludes the program name. Returns the
// process exit code: 0 on success, 1 for usage or configuration problems,
// 2 for runtime failures (including failed selftest checks).
int cli_main(const std::vector<std::string>& args);

}  // namespace adamcb
