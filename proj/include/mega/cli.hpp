#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace mega::cli {

// Exit codes: 0 success, 2 usage/config error, 3 data error, 4 numeric
// failure (1 for anything unclassified).

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

}  // namespace mega::cli
