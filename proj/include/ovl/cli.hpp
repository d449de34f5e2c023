// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>

namespace ovl {

/// Exit codes of overlay-sim.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;  // verification, kernel or trace failure
inline constexpr int kExitUsage = 2;

/// Entry point of overlay-sim with its streams made explicit so tests can
/// drive it in-process.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ovl
