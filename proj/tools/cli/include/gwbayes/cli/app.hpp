#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace gwbayes::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitError = 1,         // any other library error
  kExitUsage = 2,         // bad command line
  kExitIo = 3,            // unreadable input or unwritable output
  kExitParse = 4,         // malformed input document
  kExitValidation = 5,    // input violates a model invariant
  kExitSingular = 6,      // flow system without a head anchor
  kExitNotConverged = 7,  // solver stopped before convergence
  kExitHessian = 8,       // singular or indefinite posterior Hessian
  kExitSampling = 9,      // posterior sampling acceptance too low
  kExitInternal = 70,
};

/// Runs the command line `args` (args[0] is the program name). Every
/// subcommand writes manifest.json into its --out-dir, also on failure once
/// the directory is known.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace gwbayes::cli
