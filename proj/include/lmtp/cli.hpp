#pragma once

#include <iosfwd>

#include "lmtp/config.hpp"

namespace lmtp {

// Entry point of the lmtp-roc tool. Returns the process exit code: 0 on
// success, 1 for estimation or numerical failures, 2 for bad input or usage.
// Failures print a JSON error object to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

int cmd_estimate(const RunConfig& config, std::ostream& out);
int cmd_simulate(const RunConfig& config, std::ostream& out);
int cmd_truth(const RunConfig& config, std::ostream& out);
int cmd_contrast(const RunConfig& config, int tau, std::ostream& out);

}  // namespace lmtp
