//
// linkdiff - Copyright 2026 The linkdiff Authors.
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "linkdiff/error.hpp"

namespace linkdiff {

template <class Scalar>
using Vec3 = Eigen::Matrix<Scalar, 3, 1>;

template <class Scalar>
using Mat3 = Eigen::Matrix<Scalar, 3, 3>;

// One row per point.
template <class Scalar>
using Coords = Eigen::Matrix<Scalar, Eigen::Dynamic, 3>;

using Vec3d = Vec3<double>;
using Mat3d = Mat3<double>;
using Coords3d = Coords<double>;

// Unweighted mean of the rows of a (M x 3) point set.
template <class Derived>
Vec3<typename Derived::Scalar>
centroid(const Eigen::MatrixBase<Derived> &points) {
  static_assert(Derived::ColsAtCompileTime == 3
                    || Derived::ColsAtCompileTime == Eigen::Dynamic,
                "points must be stored one per row");
  if (points.rows() == 0)
    throw Error(ErrorCode::kEmptySelection, "centroid of an empty point set");
  if (points.cols() != 3)
    throw Error(ErrorCode::kShapeMismatch, "points must have 3 columns");
  return points.colwise().mean().transpose();
}

template <class Scalar>
class Isometry {
public:
  Isometry(): rot_(Mat3<Scalar>::Identity()), trans_(Vec3<Scalar>::Zero()) { }

  // Throws InvalidIsometry unless rot is orthogonal (R^T R = I within tol).
  Isometry(const Mat3<Scalar> &rot, const Vec3<Scalar> &trans,
           Scalar tol = Scalar(1e-10))
      : rot_(rot), trans_(trans) {
    if (!is_orthogonal(rot, tol))
      throw Error(ErrorCode::kInvalidIsometry, "rotation part not orthogonal");
  }

  static Isometry identity() { return Isometry(); }

  static Isometry translation(const Vec3<Scalar> &t) {
    return Isometry(Mat3<Scalar>::Identity(), t);
  }

  static bool is_orthogonal(const Mat3<Scalar> &rot, Scalar tol) {
    if (!rot.allFinite())
      return false;
    return ((rot.transpose() * rot - Mat3<Scalar>::Identity())
                .cwiseAbs()
                .maxCoeff())
           <= tol;
  }

  const Mat3<Scalar> &rotation() const { return rot_; }
  const Vec3<Scalar> &translation() const { return trans_; }

  Vec3<Scalar> operator()(const Vec3<Scalar> &p) const {
    return rot_ * p + trans_;
  }

  // Rows of `points` mapped to R * r + t.
  template <class Derived>
  Coords<Scalar> apply(const Eigen::MatrixBase<Derived> &points) const {
    Coords<Scalar> out = points * rot_.transpose();
    out.rowwise() += trans_.transpose();
    return out;
  }

  Isometry inverse() const {
    Mat3<Scalar> rt = rot_.transpose();
    return Isometry(rt, -(rt * trans_), Scalar(1e-8));
  }

private:
  Mat3<Scalar> rot_;
  Vec3<Scalar> trans_;
};

using Isometry3d = Isometry<double>;

// Entry (i, j) is |a_i - b_j|^2.
template <class DerivedA, class DerivedB>
Eigen::Matrix<typename DerivedA::Scalar, Eigen::Dynamic, Eigen::Dynamic>
pairwise_sq_dists(const Eigen::MatrixBase<DerivedA> &a,
                  const Eigen::MatrixBase<DerivedB> &b) {
  using Scalar = typename DerivedA::Scalar;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> out(a.rows(),
                                                            b.rows());
  for (Eigen::Index j = 0; j < b.rows(); ++j)
    for (Eigen::Index i = 0; i < a.rows(); ++i)
      out(i, j) = (a.row(i) - b.row(j)).squaredNorm();
  return out;
}

template <class Scalar>
struct KabschResult {
  Isometry<Scalar> transform;  // maps the second point set onto the first
  Scalar rmsd;
};

// Optimal proper superposition of `mobile` onto `target` (index-matched).
template <class DerivedA, class DerivedB>
KabschResult<typename DerivedA::Scalar>
kabsch_align(const Eigen::MatrixBase<DerivedA> &target,
             const Eigen::MatrixBase<DerivedB> &mobile) {
  using Scalar = typename DerivedA::Scalar;
  if (target.rows() != mobile.rows() || target.cols() != 3
      || mobile.cols() != 3)
    throw Error(ErrorCode::kShapeMismatch, "kabsch inputs differ in shape");
  if (target.rows() == 0)
    throw Error(ErrorCode::kEmptySelection, "kabsch of empty point sets");

  const Vec3<Scalar> ca = centroid(target), cb = centroid(mobile);
  Coords<Scalar> a = target.rowwise() - ca.transpose();
  Coords<Scalar> b = mobile.rowwise() - cb.transpose();

  Mat3<Scalar> cov = b.transpose() * a;
  Eigen::JacobiSVD<Mat3<Scalar>> svd(cov,
                                     Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Mat3<Scalar> &u = svd.matrixU(), &v = svd.matrixV();
  Vec3<Scalar> diag = Vec3<Scalar>::Ones();
  if ((v * u.transpose()).determinant() < 0)
    diag(2) = -1;
  Mat3<Scalar> rot = v * diag.asDiagonal() * u.transpose();

  Vec3<Scalar> trans = ca - rot * cb;
  Isometry<Scalar> g(rot, trans, Scalar(1e-8));
  const Scalar msd = (target - g.apply(mobile)).rowwise().squaredNorm().mean();
  return { g, std::sqrt(msd) };
}

template <class DerivedA, class DerivedB>
typename DerivedA::Scalar kabsch_rmsd(const Eigen::MatrixBase<DerivedA> &a,
                                      const Eigen::MatrixBase<DerivedB> &b) {
  return kabsch_align(a, b).rmsd;
}

}  // namespace linkdiff
