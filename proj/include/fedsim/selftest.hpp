#pragma once

#include <ostream>

namespace fedsim {

// Runs the frozen oracle checks behind the `selftest` CLI subcommand and
// prints one ok/FAIL line per check. Returns the number of failures.
int run_selftest(std::ostream& out);

}  // namespace fedsim
