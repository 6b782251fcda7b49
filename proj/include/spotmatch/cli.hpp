#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace spotmatch::cli {

/// Exit codes of the experiment front end.
enum ExitCode : int {
    kOk = 0,
    kInvalidConfig = 2,
    kNumericalFailure = 3,
    kIoFailure = 4,
};

/// Runs one subcommand. `args` excludes the program name. Errors go to `err`
/// as "ERROR:<code>:<message>".
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Directory holding the bundled reproduction configs.
std::string default_config_dir();

}  // namespace spotmatch::cli
