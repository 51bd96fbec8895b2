//
// linkdiff - Copyright 2026 The linkdiff Authors.
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace linkdiff {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

// Runs the command-line interface. args[0] is the program name.
int cli_main(const std::vector<std::string> &args, std::ostream &out,
             std::ostream &err);

int cli_main(int argc, const char *const *argv);

}  // namespace linkdiff
