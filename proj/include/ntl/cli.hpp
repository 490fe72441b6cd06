#pragma once

namespace ntl::cli {

// Full command-line surface. Returns the process exit code: 0 success,
// 1 usage error, 2 data error, 3 internal error.
int run(int argc, const char* const* argv);

}  // namespace ntl::cli
