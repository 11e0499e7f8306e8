#pragma once

#include <ostream>

namespace relsynth {

/// Entry point of the `relsynth` command line tool. Exit codes: 0 success,
/// 2 usage or configuration error, 3 endpoint error, 4 data error.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace relsynth
