#pragma once

#include <iosfwd>

namespace mast::cli {

inline constexpr const char* tool_version = "0.1.0";

// Stable process exit codes.
enum ExitCode : int {
    exit_ok = 0,           // ran; detect: no alarm
    exit_input_error = 1,  // usage, input or estimation error
    exit_alarm = 2,        // detect: alarm raised
};

// Entry point shared by the executable and the tests. argv[0] is the program name.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace mast::cli
