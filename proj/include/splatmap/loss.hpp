// Copyright Contributors to the splatmap project
// SPDX-License-Identifier: Apache-2.0
//
// Photometric objective (L1 + D-SSIM after a per-keyframe exposure affine
// transform) and image quality metrics.
//
#pragma once

#include "splatmap/image.hpp"

namespace splatmap {

/// 3x4 color transform: out = M * rgb + b, with [M | b] = matrix.
template <typename T> struct ExposureAffine {
    Matrix34<T> matrix = identity();

    static Matrix34<T> identity() {
        Matrix34<T> m = Matrix34<T>::Zero();
        m.template leftCols<3>().setIdentity();
        return m;
    }
    Matrix3<T> scale() const { return matrix.template leftCols<3>(); }
    Vector3<T> offset() const { return matrix.col(3); }
};

/// Applies E per pixel. No clamping.
template <typename T> RgbImage<T> apply_exposure(const ExposureAffine<T> &e, const RgbImage<T> &image);

/// Inverse transform: M^-1 (rgb - b).
template <typename T> RgbImage<T> invert_exposure(const ExposureAffine<T> &e, const RgbImage<T> &image);

/// Normalized 11x11 Gaussian window (sigma 1.5) as a separable 1D kernel.
std::array<double, 11> ssim_kernel();

/// Separable window filter with reflective borders, and its adjoint.
template <typename T> Plane<T> ssim_filter(const Plane<T> &in);
template <typename T> Plane<T> ssim_filter_adjoint(const Plane<T> &in);

/// Mean SSIM over all pixels and channels (data range 1, C1 = 0.01^2, C2 = 0.03^2).
template <typename T> T ssim(const RgbImage<T> &x, const RgbImage<T> &y);

/// Mean SSIM and its gradient with respect to x.
template <typename T> T ssim_with_gradient(const RgbImage<T> &x, const RgbImage<T> &y, RgbImage<T> &d_x);

template <typename T> struct LossResult {
    T loss = T(0);
    T l1 = T(0);
    T dssim = T(0);
    RgbImage<T> d_rendered;
    Matrix34<T> d_exposure = Matrix34<T>::Zero();
};

/// (1 - lambda) * mean|E[C] - gt| + lambda * (1 - SSIM(E[C], gt)) / 2, with exact gradients.
/// Throws std::invalid_argument on shape mismatch or lambda outside [0, 1].
template <typename T>
LossResult<T> photometric_loss(const RgbImage<T> &rendered, const RgbImage<T> &ground_truth,
                               const ExposureAffine<T> &exposure, T lambda);

/// PSNR of 8-bit quantized images (peak 255). Identical images report 99 dB.
inline constexpr double kPsnrIdentical = 99.0;
template <typename T> double psnr_8bit(const RgbImage<T> &a, const RgbImage<T> &b);

} // namespace splatmap
