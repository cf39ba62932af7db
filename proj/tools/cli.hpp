#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace qspec::cli {

//! Runs one command line (args exclude the program name). Reports go to
//! `out`, structured errors and usage text to `err`. Returns the exit code:
//! 0 ok, 1 usage, 2 data, 3 numeric.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace qspec::cli
