//
// linkdiff - Copyright 2026 The linkdiff Authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "linkdiff/point_cloud.hpp"

#include <string>
#include <vector>

namespace linkdiff {

void PointCloud::validate() const {
  const auto n = static_cast<std::size_t>(coords.rows());
  if (flags.size() != n)
    throw Error(ErrorCode::kShapeMismatch, "flag count differs from atoms");
  if (!elements.empty() && elements.size() != n)
    throw Error(ErrorCode::kShapeMismatch, "element count differs from atoms");
  if (features.size() != 0 && features.rows() != coords.rows())
    throw Error(ErrorCode::kShapeMismatch, "feature rows differ from atoms");
  if (!coords.allFinite())
    throw Error(ErrorCode::kShapeMismatch, "non-finite coordinates");
  for (std::size_t i = 0; i < n; ++i) {
    const AtomFlags &f = flags[i];
    const int roles = int(f.fragment) + int(f.pocket) + int(f.linker);
    if (roles != 1)
      throw Error(ErrorCode::kShapeMismatch,
                  "atom " + std::to_string(i) + " must have exactly one role");
    if (f.anchor && !f.fragment)
      throw Error(ErrorCode::kShapeMismatch,
                  "atom " + std::to_string(i) + " is an anchor but no fragment");
  }
}

PointCloud PointCloud::subset(const std::vector<int> &rows) const {
  PointCloud out;
  const auto n = static_cast<Eigen::Index>(rows.size());
  out.coords.resize(n, 3);
  if (features.size() != 0)
    out.features.resize(n, features.cols());
  for (Eigen::Index k = 0; k < n; ++k) {
    const int i = rows[k];
    out.coords.row(k) = coords.row(i);
    if (features.size() != 0)
      out.features.row(k) = features.row(i);
    if (!elements.empty())
      out.elements.push_back(elements[i]);
    out.flags.push_back(flags[i]);
  }
  return out;
}

PointCloud PointCloud::context() const {
  return subset(select([](const AtomFlags &f) { return !f.linker; }));
}

PointCloud PointCloud::fragments() const {
  return subset(select([](const AtomFlags &f) { return f.fragment; }));
}

PointCloud PointCloud::pocket() const {
  return subset(select([](const AtomFlags &f) { return f.pocket; }));
}

PointCloud PointCloud::linker() const {
  return subset(select([](const AtomFlags &f) { return f.linker; }));
}

PointCloud apply_isometry(const Isometry3d &g, const PointCloud &cloud) {
  PointCloud out = cloud;
  out.coords = g.apply(cloud.coords);
  return out;
}

PointCloud concat(const PointCloud &a, const PointCloud &b) {
  if (a.empty())
    return b;
  if (b.empty())
    return a;
  if (a.features.cols() != b.features.cols())
    throw Error(ErrorCode::kShapeMismatch, "feature widths differ");
  if (a.elements.empty() != b.elements.empty())
    throw Error(ErrorCode::kShapeMismatch, "element labels on one side only");

  PointCloud out;
  out.coords.resize(a.size() + b.size(), 3);
  out.coords << a.coords, b.coords;
  if (a.features.cols() > 0) {
    out.features.resize(a.size() + b.size(), a.features.cols());
    out.features << a.features, b.features;
  }
  out.elements = a.elements;
  out.elements.insert(out.elements.end(), b.elements.begin(), b.elements.end());
  out.flags = a.flags;
  out.flags.insert(out.flags.end(), b.flags.begin(), b.flags.end());
  return out;
}

}  // namespace linkdiff
