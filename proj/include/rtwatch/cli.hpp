#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "rtwatch/snapshot.hpp"

namespace rtwatch {

// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitSource = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitUsage = 64;

// Environment variable that overrides the configured cache directory.
inline constexpr const char* kCacheDirEnv = "RTWATCH_CACHE_DIR";

// Runs `rtwatch <args...>` (args exclude the program name). `download`
// replaces the network for fetches.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
            const Downloader& download = default_downloader());

}  // namespace rtwatch
