#pragma once

#include <iosfwd>

namespace augsplice {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitParseAbort = 2;
inline constexpr int kExitConfig = 3;

/// Entry point of the `augsplice` tool: run | oracle | generate | evaluate | scale.
/// Step lines go to --output or `out`; diagnostics and summaries to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace augsplice
