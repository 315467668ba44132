#pragma once

namespace bfl1 {

// Full command-line entry point, factored out of main() so tests can drive
// it. Returns the process exit code: 0 on success, 1 on usage/configuration/
// data errors, 2 when every initialization of every strategy diverged.
int run_cli(int argc, const char* const* argv);

} // namespace bfl1
