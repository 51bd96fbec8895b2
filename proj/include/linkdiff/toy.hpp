//
// linkdiff - Copyright 2026 The linkdiff Authors.
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "linkdiff/io.hpp"

namespace linkdiff {

// Synthetic fragment-linker complexes. Rigid ring templates (benzene,
// pyridine, fluorobenzene, a furan-like five-ring) face each other across a
// gap; the linker is a jittered chain along the gap axis. With more than two
// fragments, chains meet at a central hub atom.
struct ToyConfig {
  int min_fragments = 2;
  int max_fragments = 2;
  double gap_min = 2.0;  // Angstrom, before snapping to the chain length
  double gap_max = 6.0;
  double spacing = 1.5;
  double jitter = 0.1;   // radius of the uniform ball added to chain atoms
  bool pocket = false;   // add a shell of pocket atoms around the complex
  double test_fraction = 0.1;
  std::vector<std::string> linker_elements{ "C", "N", "O" };
  std::vector<double> linker_weights{ 0.7, 0.15, 0.15 };
};

struct ToyDataset {
  std::vector<XyzRecord> train, test;
  DatasetManifest manifest;
};

// Deterministic for a given (n, seed, cfg). Every record passes
// check_validity against its own fragments.
ToyDataset generate_toy_dataset(int n, std::uint64_t seed,
                                const ToyConfig &cfg = {});

// Writes train.xyz, test.xyz and manifest.json into dir (created if needed).
void write_toy_dataset(const std::string &dir, const ToyDataset &data);

}  // namespace linkdiff
