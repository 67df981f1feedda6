// Copyright Contributors to the splatmap project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace splatmap {

template <typename T> using Vector2 = Eigen::Matrix<T, 2, 1>;
template <typename T> using Vector3 = Eigen::Matrix<T, 3, 1>;
template <typename T> using Vector4 = Eigen::Matrix<T, 4, 1>;
template <typename T> using Matrix2 = Eigen::Matrix<T, 2, 2>;
template <typename T> using Matrix3 = Eigen::Matrix<T, 3, 3>;
template <typename T> using Matrix23 = Eigen::Matrix<T, 2, 3>;
template <typename T> using Matrix34 = Eigen::Matrix<T, 3, 4>;

using Vec2d = Vector2<double>;
using Vec3d = Vector3<double>;
using Mat3d = Matrix3<double>;

/// Number of spherical-harmonic coefficients per Gaussian (16 basis functions x RGB).
inline constexpr int kShCoeffs = 48;
inline constexpr int kShBases = 16;

/// Visibility cutoff for a single Gaussian's contribution to a pixel.
inline constexpr double kAlphaCutoff = 1.0 / 255.0;
/// Upper clamp on a single Gaussian's alpha.
inline constexpr double kAlphaClamp = 0.99;
/// Screen-space dilation added to both diagonal entries of the projected covariance (px^2).
inline constexpr double kDilation = 0.3;
/// Compositing stops once transmittance falls below this.
inline constexpr double kTransmittanceFloor = 1e-4;
inline constexpr double kDefaultNear = 0.01;
inline constexpr int kDefaultTileSize = 16;

/// Raised when a dataset, checkpoint or config file cannot be parsed.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised when the Gaussian map would exceed its hard capacity.
class CapacityError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

template <typename T> inline T sigmoid(T x) { return T(1) / (T(1) + std::exp(-x)); }
template <typename T> inline T logit(T p) { return std::log(p / (T(1) - p)); }

} // namespace splatmap
