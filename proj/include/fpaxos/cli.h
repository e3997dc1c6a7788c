#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace fpaxos::cli {

enum ExitCode : int {
  kOk = 0,
  kViolation = 1,
  kUsage = 2,
  // The checker and core disagreed on a replayed counterexample.
  kInternal = 3,
};

// args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace fpaxos::cli
