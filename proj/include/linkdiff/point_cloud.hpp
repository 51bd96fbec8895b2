//
// linkdiff - Copyright 2026 The linkdiff Authors.
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "linkdiff/geometry.hpp"

namespace linkdiff {

struct AtomFlags {
  bool fragment = false;
  bool anchor = false;
  bool pocket = false;
  bool linker = false;

  bool operator==(const AtomFlags &) const = default;

  static AtomFlags fragment_atom(bool anchor = false) {
    return { true, anchor, false, false };
  }
  static AtomFlags pocket_atom() { return { false, false, true, false }; }
  static AtomFlags linker_atom() { return { false, false, false, true }; }
};

// Atoms as rows: coordinates (Angstrom), optional per-atom feature rows,
// element symbols and role flags.
struct PointCloud {
  Coords3d coords;
  Eigen::MatrixXd features;
  std::vector<std::string> elements;
  std::vector<AtomFlags> flags;

  int size() const { return static_cast<int>(coords.rows()); }
  bool empty() const { return coords.rows() == 0; }

  void validate() const;

  // Rows for which pred(flags) holds, in order.
  template <class Pred>
  std::vector<int> select(Pred &&pred) const {
    std::vector<int> idxs;
    for (int i = 0; i < size(); ++i)
      if (pred(flags[i]))
        idxs.push_back(i);
    return idxs;
  }

  PointCloud subset(const std::vector<int> &rows) const;

  // Fragment and pocket atoms; the conditioning context of a record.
  PointCloud context() const;
  PointCloud fragments() const;
  PointCloud pocket() const;
  PointCloud linker() const;
};

// Coordinates mapped by g; features, elements and flags are copied.
PointCloud apply_isometry(const Isometry3d &g, const PointCloud &cloud);

// Appends the atoms of `b` after those of `a`. Feature widths must agree.
PointCloud concat(const PointCloud &a, const PointCloud &b);

}  // namespace linkdiff
