#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace bbf::cli {

inline constexpr const char* kVersion = "1.0.0";

enum ExitCode { kOk = 0, kUsage = 1, kDataError = 2 };

/// Runs one subcommand. args[0] is the program name.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Worker threads for batch subcommands: BBF_THREADS when set, else 1.
int thread_count();

/// Calls fn(i) for i in [0, n) on up to `threads` threads. The first
/// exception, by index, is rethrown after all workers finish.
void parallel_for(int n, int threads, const std::function<void(int)>& fn);

}  // namespace bbf::cli
