#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace psyduck::cli {

// Process exit codes. Stable; scripts depend on them.
enum ExitCode : int {
  kOk = 0,
  kFailure = 1,  // usage error, failed verification, backend failure
  kCapacity = 2,
  kConfig = 3,
  kIo = 4,
  kFraming = 5,
};

/// Runs one command. `args` excludes the program name. Payloads and CSV go to
/// `out`; diagnostics go to `err` only.
int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out,
        std::ostream& err, char** envp = nullptr);

}  // namespace psyduck::cli
