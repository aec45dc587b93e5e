#pragma once

#include <iostream>
#include <string>
#include <vector>

namespace csdp {

// Command-line surface: solve, mab, verify, simulate, roots.
// Exit codes: 0 success; 1 a verify suite failed; 2 malformed input,
// combinatorial blowup, or non-convergence; 64 usage errors.
int run_cli(const std::vector<std::string>& args, std::ostream& out = std::cout,
            std::ostream& err = std::cerr);

}  // namespace csdp
