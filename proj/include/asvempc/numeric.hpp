#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <numbers>

namespace asvempc {

template <typename Scalar> using Vec2 = Eigen::Matrix<Scalar, 2, 1>;
template <typename Scalar> using Vec3 = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar> using Vec6 = Eigen::Matrix<Scalar, 6, 1>;
template <typename Scalar> using Mat3 = Eigen::Matrix<Scalar, 3, 3>;

inline constexpr double kPi = std::numbers::pi;

/// Wrap an angle to (-pi, pi].
template <typename Scalar>
inline Scalar wrap_angle(Scalar a) {
  Scalar w = std::remainder(a, Scalar{2} * Scalar{kPi});
  if (w <= Scalar{-kPi}) w += Scalar{2} * Scalar{kPi};
  return w;
}

}  // namespace asvempc
