//
// linkdiff - Copyright 2026 The linkdiff Authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "linkdiff/cli.hpp"

int main(int argc, char **argv) {
  return linkdiff::cli_main(argc, argv);
}
