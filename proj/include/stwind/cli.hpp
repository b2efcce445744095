#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace stwind::cli {

/// Exit codes: 0 success, 1 usage or data error, 2 fit did not converge.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

}  // namespace stwind::cli
