#pragma once

namespace gap::cli {

// Entry point of the `gap` tool. Returns 0 on success, 1 on a runtime
// failure and 2 on an invalid command line or configuration.
int run(int argc, const char* const* argv);

}  // namespace gap::cli
