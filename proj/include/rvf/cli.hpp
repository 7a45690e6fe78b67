#pragma once

// Command-line front end. cli_run takes argv-style arguments (without the
// program name) and writes to the given streams, so the whole surface is
// testable in-process; cli_main is the thin adapter used by the binary.
//
// Exit codes:
//   0  success (including --help)
//   1  usage error (unknown flag, missing argument, bad enum value)
//   2  invalid configuration or input data
//   3  a run diverged or a certification failed; partial results were kept

#include <iosfwd>
#include <string>
#include <vector>

namespace rvf {

int cli_run(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err);

int cli_main(int argc, char** argv);

}  // namespace rvf
