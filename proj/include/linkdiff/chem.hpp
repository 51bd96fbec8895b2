//
// linkdiff - Copyright 2026 The linkdiff Authors.
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "linkdiff/geometry.hpp"
#include "linkdiff/point_cloud.hpp"

namespace linkdiff {

struct ElementInfo {
  std::string symbol;
  double covalent_radius = 0;  // Angstrom
  double vdw_radius = 0;       // Angstrom
  int max_valence = 0;
};

class ElementTable {
public:
  // Tab-separated rows: symbol, covalent radius, vdW radius, max valence.
  // Lines starting with '#' are comments.
  static ElementTable parse(std::string_view text);

  // The table shipped in data/elements.tsv.
  static const ElementTable &builtin();

  bool contains(const std::string &sym) const;
  const ElementInfo &at(const std::string &sym) const;  // UnknownAtomType
  bool covers(const std::vector<std::string> &vocab) const;

private:
  std::unordered_map<std::string, ElementInfo> rows_;
};

// Undirected single-bond graph over atoms; bonds are stored with i < j,
// sorted and unique.
struct MoleculeGraph {
  std::vector<std::string> elements;
  Coords3d coords;
  std::vector<std::pair<int, int>> bonds;

  int size() const { return static_cast<int>(elements.size()); }
  std::vector<std::vector<int>> adjacency() const;
  std::vector<int> degrees() const;

  // Induced subgraph on `atoms`, renumbered in the given order.
  MoleculeGraph induced(const std::vector<int> &atoms) const;
};

// Builds a graph from atom lists and bond pairs, normalizing the bond list.
// Throws ShapeMismatch on self-bonds or out-of-range indices.
MoleculeGraph make_graph(std::vector<std::string> elements, Coords3d coords,
                         std::vector<std::pair<int, int>> bonds);

inline constexpr double kDefaultBondTolerance = 0.4;
inline constexpr double kPositionMatchTolerance = 1e-6;

// bond(i, j) iff |r_i - r_j| < r_cov(i) + r_cov(j) + tol.
MoleculeGraph perceive_bonds(const PointCloud &cloud, const ElementTable &table,
                             double tol = kDefaultBondTolerance);

// Atom index lists of the connected components, ordered by lowest member.
std::vector<std::vector<int>> connected_components(const MoleculeGraph &g);

// Largest component; ties go to the component holding the lowest index.
MoleculeGraph largest_connected_component(const MoleculeGraph &g);

// For each fragment atom, the index of the graph atom at the same position
// (within kPositionMatchTolerance), or -1.
std::vector<int> match_fragment_atoms(const MoleculeGraph &g,
                                      const PointCloud &fragments);

bool check_validity(const MoleculeGraph &g, const PointCloud &fragments,
                    const ElementTable &table);

// Removes atoms matching fragment atoms. Throws FragmentMatchFailure when a
// fragment atom has no counterpart.
MoleculeGraph extract_linker(const MoleculeGraph &molecule,
                             const PointCloud &fragments);

// Cycle rank |E| - |V| + #components.
int count_rings(const MoleculeGraph &g);

// Number of (molecule, pocket) atom pairs closer than the sum of their
// van der Waals radii.
int count_clashes(const PointCloud &mol, const PointCloud &pocket,
                  const ElementTable &table);

struct CanonicalForm {
  std::string key;
  // order[k] is the atom placed at canonical position k.
  std::vector<int> order;
};

// Equal keys iff the element-labeled graphs are isomorphic.
CanonicalForm canonical_form(const MoleculeGraph &g);
std::string canonical_key(const MoleculeGraph &g);

struct EvalInput {
  std::string id;
  PointCloud fragments;
  PointCloud reference;  // fragments followed by the true linker
  std::optional<PointCloud> pocket;
};

struct EvalSample {
  std::string input_id;
  PointCloud molecule;
};

struct InputMetrics {
  std::string id;
  int n_samples = 0;
  int n_valid = 0;
  int n_unique = 0;      // distinct molecule keys among valid samples
  int n_novel = 0;       // valid samples whose linker key is unseen
  int n_recovered = 0;   // valid samples matching the reference key
  double mean_rmsd = 0;  // over recovered samples
  double mean_rings = 0;    // linker rings over valid samples
  double mean_clashes = 0;  // over all samples; 0 without a pocket
  bool has_pocket = false;
};

struct MetricsSummary {
  int n_inputs = 0;
  int n_samples = 0;
  int n_valid = 0;
  double validity = 0;    // valid / samples
  double uniqueness = 0;  // sum of per-input unique / valid
  double novelty = 0;     // novel / valid
  double recovery = 0;    // inputs with a recovered sample / inputs
  double rmsd = 0;        // mean over recovered samples
  int n_recovered_pairs = 0;
  double mean_rings = 0;
  double mean_clashes = 0;  // over samples of inputs with a pocket
  int n_pocket_samples = 0;
};

struct MetricsReport {
  std::vector<InputMetrics> inputs;
  MetricsSummary summary;
};

// Linker key of a full molecule record, with linker atoms identified by
// position against its fragment atoms.
std::string linker_key(const PointCloud &molecule, const ElementTable &table);

MetricsReport evaluate_samples(const std::vector<EvalSample> &samples,
                               const std::vector<EvalInput> &inputs,
                               const std::set<std::string> &train_linker_keys,
                               const ElementTable &table);

std::string format_report(const MetricsReport &report);

}  // namespace linkdiff
