#pragma once

#include <string>
#include <vector>

namespace vtd {

struct ProcessResult {
  int exit_code = -1;
  std::string out;
  std::string err;

  bool ok() const { return exit_code == 0; }
};

// Runs argv[0] with the given arguments, capturing stdout and stderr.
// Throws Error("ExecFailed") only when the process cannot be spawned at all;
// nonzero exits are reported through exit_code.
ProcessResult run_process(const std::vector<std::string>& argv);

}  // namespace vtd
