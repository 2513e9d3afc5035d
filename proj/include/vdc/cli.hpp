#pragma once

#include "vdc/stability.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace vdc {

/// Process exit codes of the command-line front end.
enum ExitCode : int {
    kExitOk = 0,
    kExitUsage = 1,      // usage or configuration error
    kExitNumerical = 2,  // integration blew up
    kExitFailed = 3,     // certificate, audit or tolerance failure
};

/// Runs one command. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Human-readable certificate: one line per margin, the radius and the
/// overall verdict.
std::string format_certificate(const GainCertificate& cert);

const char* version();

}  // namespace vdc
