//
// linkdiff - Copyright 2026 The linkdiff Authors.
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Dense>

#include "linkdiff/error.hpp"

namespace linkdiff {

/// Variance-preserving noise schedule, precomputed for t = 0..T.
///
/// `alpha[t]`, `sigma[t]` are the marginal signal/noise scales of
/// q(z_t | x). `alpha_step[t]`, `sigma_step[t]` are the one-step transition
/// scales of q(z_t | z_{t-1}) and `varsigma[t]` the standard deviation of the
/// posterior q(z_{t-1} | x, z_t). The step arrays are indexed from 1; entry 0
/// holds the identity transition (1, 0, 0).
template <class Scalar>
struct NoiseSchedule {
  using Array = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

  int T = 0;
  Scalar s = 0;
  Array alpha, sigma;
  Array alpha_step, sigma_step, varsigma;

  int steps() const { return T; }

  void check_timestep(int t, int lo = 0) const {
    if (t < lo || t > T)
      throw Error(ErrorCode::kInvalidSchedule,
                  "timestep " + std::to_string(t) + " outside ["
                      + std::to_string(lo) + ", " + std::to_string(T) + "]");
  }
};

using Schedule = NoiseSchedule<double>;

/// alpha_t = (1 - 2s) * (1 - (t/T)^2), sigma_t = sqrt(1 - alpha_t^2).
template <class Scalar = double>
NoiseSchedule<Scalar> build_polynomial_schedule(int T, Scalar s) {
  if (T < 1)
    throw Error(ErrorCode::kInvalidSchedule, "T must be >= 1");
  if (!(s > Scalar(0) && s < Scalar(0.5)))
    throw Error(ErrorCode::kInvalidSchedule, "s must lie in (0, 0.5)");

  NoiseSchedule<Scalar> sched;
  sched.T = T;
  sched.s = s;
  sched.alpha.resize(T + 1);
  sched.sigma.resize(T + 1);
  sched.alpha_step.resize(T + 1);
  sched.sigma_step.resize(T + 1);
  sched.varsigma.resize(T + 1);

  const Scalar scale = Scalar(1) - 2 * s;
  for (int t = 0; t <= T; ++t) {
    const Scalar frac = Scalar(t) / Scalar(T);
    sched.alpha[t] = scale * (Scalar(1) - frac * frac);
    sched.sigma[t] = std::sqrt(Scalar(1) - sched.alpha[t] * sched.alpha[t]);
  }

  sched.alpha_step[0] = 1;
  sched.sigma_step[0] = 0;
  sched.varsigma[0] = 0;
  for (int t = 1; t <= T; ++t) {
    const Scalar a = sched.alpha[t] / sched.alpha[t - 1];
    const Scalar s2 = sched.sigma[t] * sched.sigma[t]
                      - a * a * sched.sigma[t - 1] * sched.sigma[t - 1];
    sched.alpha_step[t] = a;
    sched.sigma_step[t] = std::sqrt(std::max(s2, Scalar(0)));
    sched.varsigma[t] =
        sched.sigma_step[t] * sched.sigma[t - 1] / sched.sigma[t];
  }
  return sched;
}

/// z_t = alpha_t x + sigma_t eps.
template <class Scalar, class DerivedX, class DerivedE>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>
diffuse(const Eigen::MatrixBase<DerivedX> &x, int t,
        const Eigen::MatrixBase<DerivedE> &eps,
        const NoiseSchedule<Scalar> &sched) {
  if (x.rows() != eps.rows() || x.cols() != eps.cols())
    throw Error(ErrorCode::kShapeMismatch, "noise shape differs from data");
  sched.check_timestep(t);
  return sched.alpha[t] * x + sched.sigma[t] * eps;
}

template <class Scalar>
struct Posterior {
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> mu;
  Scalar varsigma;
};

/// Mean and standard deviation of q(z_{t-1} | x, z_t).
template <class Scalar, class DerivedX, class DerivedZ>
Posterior<Scalar> posterior_params(const Eigen::MatrixBase<DerivedX> &x,
                                   const Eigen::MatrixBase<DerivedZ> &z_t,
                                   int t, const NoiseSchedule<Scalar> &sched) {
  if (t == 0)
    throw Error(ErrorCode::kNoPosteriorAtZero, "posterior needs t >= 1");
  sched.check_timestep(t, 1);
  if (x.rows() != z_t.rows() || x.cols() != z_t.cols())
    throw Error(ErrorCode::kShapeMismatch, "x and z_t differ in shape");

  const Scalar s2 = sched.sigma[t] * sched.sigma[t];
  const Scalar sp2 = sched.sigma[t - 1] * sched.sigma[t - 1];
  const Scalar ss2 = sched.sigma_step[t] * sched.sigma_step[t];
  const Scalar cz = sched.alpha_step[t] * sp2 / s2;
  const Scalar cx = sched.alpha[t - 1] * ss2 / s2;
  return { cz * z_t + cx * x, sched.varsigma[t] };
}

template <class Scalar>
struct StepCoefficients {
  Scalar c_z;      // multiplies z_t
  Scalar c_eps;    // multiplies the predicted noise (subtracted)
  Scalar c_noise;  // multiplies fresh Gaussian noise
};

/// Coefficients of z_{t-1} = c_z z_t - c_eps eps_hat + c_noise eps.
///
/// At t = T the polynomial schedule has alpha_T = 0, so c_z and c_eps are
/// infinite; the sampler handles that step separately.
template <class Scalar>
StepCoefficients<Scalar>
denoising_step_coefficients(int t, const NoiseSchedule<Scalar> &sched) {
  sched.check_timestep(t, 1);
  const Scalar a = sched.alpha_step[t];
  const Scalar ss2 = sched.sigma_step[t] * sched.sigma_step[t];
  if (a == Scalar(0)) {
    constexpr Scalar inf = std::numeric_limits<Scalar>::infinity();
    return { inf, inf, sched.varsigma[t] };
  }
  return { Scalar(1) / a, ss2 / (a * sched.sigma[t]), sched.varsigma[t] };
}

}  // namespace linkdiff
