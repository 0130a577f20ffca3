#pragma once

#include <string>
#include <vector>

namespace ntx {

// The command-line driver behind the neurotext binary. `args` excludes the
// program name. Returns the process exit code: 0 on success, 1 on a runtime
// failure, 2 on a usage or configuration error (bad flags, malformed config,
// missing files, vocabulary/checkpoint mismatches) detected before work
// starts. Each subcommand writes `resolved.cfg` — a config file pinning
// every option of the run — next to its outputs; replaying it reproduces
// the run exactly.
int run_cli(const std::vector<std::string>& args);

}  // namespace ntx
