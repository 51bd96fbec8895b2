//
// linkdiff - Copyright 2026 The linkdiff Authors.
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "linkdiff/autodiff.hpp"
#include "linkdiff/geometry.hpp"
#include "linkdiff/point_cloud.hpp"
#include "linkdiff/random.hpp"

namespace linkdiff::testing {

inline Mat3d random_orthogonal(CounterRng &rng, bool allow_reflection = true) {
  Mat3d a;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      a(i, j) = rng.normal();
  Eigen::HouseholderQR<Mat3d> qr(a);
  Mat3d q = qr.householderQ();
  // The sign of det(q) is fixed by the factorization, so choose it here.
  const bool reflect = allow_reflection && rng.uniform() < 0.5;
  if ((q.determinant() < 0) != reflect)
    q.col(0) *= -1;
  return q;
}

inline Mat3d reflection_z() {
  Mat3d r = Mat3d::Identity();
  r(2, 2) = -1;
  return r;
}

inline Coords3d random_coords(CounterRng &rng, int n, double scale = 1.0) {
  Coords3d c(n, 3);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < 3; ++k)
      c(i, k) = scale * rng.normal();
  return c;
}

inline Vec3d random_vec(CounterRng &rng, double scale = 1.0) {
  return Vec3d(rng.normal(), rng.normal(), rng.normal()) * scale;
}

// Cloud with element symbols drawn from vocab and every atom flagged `role`.
inline PointCloud random_cloud(CounterRng &rng, int n,
                               const std::vector<std::string> &vocab,
                               AtomFlags role, double scale = 1.5) {
  PointCloud c;
  c.coords = random_coords(rng, n, scale);
  for (int i = 0; i < n; ++i) {
    c.elements.push_back(
        vocab[rng.uniform_int(0, static_cast<int>(vocab.size()) - 1)]);
    c.flags.push_back(role);
  }
  return c;
}

// Two fragments with an anchor each plus a linker, all with elements.
inline PointCloud random_molecule(CounterRng &rng, int n_frag, int n_linker,
                                  const std::vector<std::string> &vocab) {
  PointCloud frag = random_cloud(rng, n_frag, vocab,
                                 AtomFlags::fragment_atom(), 1.5);
  frag.flags[0].anchor = true;
  frag.flags[n_frag - 1].anchor = true;
  PointCloud lin = random_cloud(rng, n_linker, vocab, AtomFlags::linker_atom(),
                                1.0);
  return concat(frag, lin);
}

// Overwrites every trainable tensor with N(0, scale^2) entries, so that
// zero-initialized layers contribute to gradient checks.
inline void randomize_params(ParamStore &store, CounterRng &rng,
                             double scale = 0.3) {
  for (int i = 0; i < store.size(); ++i) {
    if (!store.trainable(i))
      continue;
    DenseMatrix &v = store.value(i);
    for (Eigen::Index k = 0; k < v.size(); ++k)
      v.data()[k] = scale * rng.normal();
  }
}

struct GradcheckResult {
  double max_rel_error = 0;
  std::string worst;
  int checked = 0;
};

// Central differences of loss() against analytic gradients for every entry
// of every trainable tensor. The relative error uses max(|a|, |n|, floor)
// as denominator; the floor keeps gradients that vanish analytically (a
// bias feeding batch norm) from dividing rounding noise by zero. Only
// tensors whose names pass `include` are checked, when it is given.
inline GradcheckResult gradcheck(ParamStore &store, const Gradients &analytic,
                                 const std::function<double()> &loss,
                                 double h = 1e-5, double floor = 1e-5,
                                 const std::function<bool(const std::string &)>
                                     &include = nullptr) {
  GradcheckResult res;
  for (int i = 0; i < store.size(); ++i) {
    if (!store.trainable(i) || (include && !include(store.name(i))))
      continue;
    DenseMatrix &v = store.value(i);
    for (Eigen::Index k = 0; k < v.size(); ++k) {
      const double orig = v.data()[k];
      v.data()[k] = orig + h;
      const double up = loss();
      v.data()[k] = orig - h;
      const double down = loss();
      v.data()[k] = orig;
      const double numeric = (up - down) / (2 * h);
      const double a = analytic[i].data()[k];
      const double rel = std::abs(a - numeric)
                         / std::max({ std::abs(a), std::abs(numeric), floor });
      ++res.checked;
      if (rel > res.max_rel_error) {
        res.max_rel_error = rel;
        res.worst = store.name(i) + "[" + std::to_string(k) + "]";
      }
    }
  }
  return res;
}

}  // namespace linkdiff::testing
