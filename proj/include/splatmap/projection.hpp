// Copyright Contributors to the splatmap project
// SPDX-License-Identifier: Apache-2.0
//
// Per-Gaussian geometry: 3D covariance, pinhole splatting, alpha weight and
// spherical-harmonic color. Everything here is a pure function of its inputs.
//
#pragma once

#include "splatmap/scene.hpp"

#include <algorithm>
#include <array>
#include <limits>
#include <optional>
#include <vector>

namespace splatmap {

namespace sh_const {
inline constexpr double C0 = 0.28209479177387814;
inline constexpr double C1 = 0.4886025119029199;
inline constexpr double C2[5] = {1.0925484305920792, -1.0925484305920792, 0.31539156525252005, -1.0925484305920792,
                                 0.5462742152960396};
inline constexpr double C3[7] = {-0.5900435899266435, 2.890611442640554, -0.4570457994644658, 0.3731763325901154,
                                 -0.4570457994644658, 1.445305721320277, -0.5900435899266435};
} // namespace sh_const

/// Rotation matrix of the quaternion (w, x, y, z) after normalization.
template <typename T> Matrix3<T> quaternion_to_rotation(const Vector4<T> &q_raw) {
    const Vector4<T> q = q_raw.normalized();
    const T w = q[0], x = q[1], y = q[2], z = q[3];
    Matrix3<T> r;
    r << T(1) - T(2) * (y * y + z * z), T(2) * (x * y - w * z), T(2) * (x * z + w * y), //
        T(2) * (x * y + w * z), T(1) - T(2) * (x * x + z * z), T(2) * (y * z - w * x),  //
        T(2) * (x * z - w * y), T(2) * (y * z + w * x), T(1) - T(2) * (x * x + y * y);
    return r;
}

/// Sigma = R S S^T R^T with S = diag(exp(log_scale)).
template <typename T> Matrix3<T> covariance_3d(const Vector3<T> &log_scale, const Vector4<T> &rotation) {
    const Matrix3<T> m = quaternion_to_rotation(rotation) * log_scale.array().exp().matrix().asDiagonal();
    Matrix3<T> cov = m * m.transpose();
    // exact symmetry
    cov = T(0.5) * (cov + cov.transpose()).eval();
    return cov;
}

template <typename T> struct ProjectedMean {
    Vector2<T> mean2d;
    T depth;
};

/// Pinhole projection of a world point; nullopt when depth <= near.
template <typename T>
std::optional<ProjectedMean<T>> project_mean(const CameraPose &pose, const CameraIntrinsics &intr,
                                             const Vector3<T> &position_w, double near = kDefaultNear) {
    const Vector3<T> t = pose.rotation_wc.cast<T>() * position_w + pose.translation_wc.cast<T>();
    if (!(t.z() > T(near))) return std::nullopt;
    return ProjectedMean<T>{{T(intr.fx) * t.x() / t.z() + T(intr.cx), T(intr.fy) * t.y() / t.z() + T(intr.cy)},
                            t.z()};
}

/// Off-axis limit on x/z and y/z used inside the covariance Jacobian, as a multiple of the half field of view.
inline constexpr double kJacobianGuard = 1.3;

/// Camera-space point with x and y pulled in so that |x/z|, |y/z| stay within the guard band.
template <typename T> struct GuardedPoint {
    Vector3<T> t;
    bool clamped_x = false, clamped_y = false;
};

template <typename T> GuardedPoint<T> guard_band(const CameraIntrinsics &intr, const Vector3<T> &t) {
    const T lim_x = T(kJacobianGuard * 0.5 * intr.width / intr.fx);
    const T lim_y = T(kJacobianGuard * 0.5 * intr.height / intr.fy);
    GuardedPoint<T> g{t};
    const T rx = t.x() / t.z(), ry = t.y() / t.z();
    if (rx > lim_x || rx < -lim_x) g.t.x() = std::clamp(rx, -lim_x, lim_x) * t.z(), g.clamped_x = true;
    if (ry > lim_y || ry < -lim_y) g.t.y() = std::clamp(ry, -lim_y, lim_y) * t.z(), g.clamped_y = true;
    return g;
}

/// Affine Jacobian d(u,v)/d(x,y,z) of the pinhole projection at camera-space point t.
template <typename T> Matrix23<T> projection_jacobian(const CameraIntrinsics &intr, const Vector3<T> &t) {
    const T fx = T(intr.fx), fy = T(intr.fy), iz = T(1) / t.z(), iz2 = iz * iz;
    Matrix23<T> j;
    j << fx * iz, T(0), -fx * t.x() * iz2, //
        T(0), fy * iz, -fy * t.y() * iz2;
    return j;
}

/// Screen-space covariance J W Sigma W^T J^T plus `dilation` on the diagonal.
template <typename T>
Matrix2<T> project_covariance(const CameraPose &pose, const CameraIntrinsics &intr, const Vector3<T> &position_w,
                              const Matrix3<T> &cov3d, double dilation = kDilation) {
    const Matrix3<T> w = pose.rotation_wc.cast<T>();
    const Vector3<T> t = w * position_w + pose.translation_wc.cast<T>();
    const Matrix23<T> jw = projection_jacobian(intr, guard_band(intr, t).t) * w;
    Matrix2<T> cov = jw * cov3d * jw.transpose();
    cov(1, 0) = cov(0, 1);
    cov.diagonal().array() += T(dilation);
    return cov;
}

/// 2D Gaussian of one map entry as seen by one camera.
template <typename T> struct ProjectedGaussian {
    Vector2<T> mean2d = Vector2<T>::Zero();
    Matrix2<T> cov2d = Matrix2<T>::Identity();
    Matrix2<T> inv_cov2d = Matrix2<T>::Identity();
    T depth = T(0);
    Vector3<T> color = Vector3<T>::Zero();
    T opacity = T(0);
    /// Exponents below this are certainly under the alpha cutoff (a cheap pre-test before exp).
    T power_floor = -std::numeric_limits<T>::infinity();
    std::uint32_t source_index = 0;
    /// Channels whose SH color was clamped at zero (no gradient flows through them).
    std::array<bool, 3> color_clamped{};
};

/// Exponent -q/2 of the 2D Gaussian at (px, py), q the Mahalanobis form.
template <typename T> T gaussian_power(const ProjectedGaussian<T> &pg, T px, T py) {
    const T dx = pg.mean2d.x() - px, dy = pg.mean2d.y() - py;
    return -T(0.5) * (pg.inv_cov2d(0, 0) * dx * dx + pg.inv_cov2d(1, 1) * dy * dy) -
           pg.inv_cov2d(0, 1) * dx * dy;
}

/// Alpha of `pg` at `pixel`, clamped to 0.99; zero when below the 1/255 cutoff.
template <typename T> T alpha_weight(const ProjectedGaussian<T> &pg, const Vector2<T> &pixel) {
    const T power = gaussian_power(pg, pixel.x(), pixel.y());
    if (power > T(0)) return T(0);
    const T alpha = std::min(T(kAlphaClamp), pg.opacity * std::exp(power));
    return alpha < T(kAlphaCutoff) ? T(0) : alpha;
}

/// Real SH basis, degrees 0..3, evaluated at unit direction d.
template <typename T> std::array<T, kShBases> sh_basis(const Vector3<T> &d) {
    using namespace sh_const;
    const T x = d.x(), y = d.y(), z = d.z();
    const T xx = x * x, yy = y * y, zz = z * z;
    return {T(C0),
            T(-C1) * y,
            T(C1) * z,
            T(-C1) * x,
            T(C2[0]) * x * y,
            T(C2[1]) * y * z,
            T(C2[2]) * (T(2) * zz - xx - yy),
            T(C2[3]) * x * z,
            T(C2[4]) * (xx - yy),
            T(C3[0]) * y * (T(3) * xx - yy),
            T(C3[1]) * x * y * z,
            T(C3[2]) * y * (T(4) * zz - xx - yy),
            T(C3[3]) * z * (T(2) * zz - T(3) * xx - T(3) * yy),
            T(C3[4]) * x * (T(4) * zz - xx - yy),
            T(C3[5]) * z * (xx - yy),
            T(C3[6]) * x * (xx - T(3) * yy)};
}

/// Gradient of each basis function with respect to the (unnormalized-in-form) direction components.
template <typename T> std::array<Vector3<T>, kShBases> sh_basis_gradient(const Vector3<T> &d) {
    using namespace sh_const;
    const T x = d.x(), y = d.y(), z = d.z();
    const T xx = x * x, yy = y * y, zz = z * z;
    const T c1 = T(C1);
    return {Vector3<T>::Zero(),
            Vector3<T>(0, -c1, 0),
            Vector3<T>(0, 0, c1),
            Vector3<T>(-c1, 0, 0),
            T(C2[0]) * Vector3<T>(y, x, 0),
            T(C2[1]) * Vector3<T>(0, z, y),
            T(C2[2]) * Vector3<T>(-2 * x, -2 * y, 4 * z),
            T(C2[3]) * Vector3<T>(z, 0, x),
            T(C2[4]) * Vector3<T>(2 * x, -2 * y, 0),
            T(C3[0]) * Vector3<T>(6 * x * y, 3 * xx - 3 * yy, 0),
            T(C3[1]) * Vector3<T>(y * z, x * z, x * y),
            T(C3[2]) * Vector3<T>(-2 * x * y, 4 * zz - xx - 3 * yy, 8 * y * z),
            T(C3[3]) * Vector3<T>(-6 * x * z, -6 * y * z, 6 * zz - 3 * xx - 3 * yy),
            T(C3[4]) * Vector3<T>(4 * zz - 3 * xx - yy, -2 * x * y, 8 * x * z),
            T(C3[5]) * Vector3<T>(2 * x * z, -2 * y * z, xx - yy),
            T(C3[6]) * Vector3<T>(3 * xx - 3 * yy, -6 * x * y, 0)};
}

/// Unclamped SH color: 0.5 + sum_k basis_k(d) * coeff[k][c].
template <typename T, typename Derived>
Vector3<T> evaluate_sh_unclamped(const Eigen::MatrixBase<Derived> &sh_coeffs, const Vector3<T> &view_dir) {
    const auto basis = sh_basis(view_dir);
    Vector3<T> color = Vector3<T>::Constant(T(0.5));
    for (int k = 0; k < kShBases; ++k)
        for (int c = 0; c < 3; ++c) color[c] += basis[k] * sh_coeffs[3 * k + c];
    return color;
}

/// SH color for a unit view direction, clamped to >= 0.
template <typename T, typename Derived>
Vector3<T> evaluate_sh(const Eigen::MatrixBase<Derived> &sh_coeffs, const Vector3<T> &view_dir) {
    return evaluate_sh_unclamped<T>(sh_coeffs, view_dir).cwiseMax(T(0));
}

/// Degree-0 coefficient whose evaluated color is `value`.
template <typename T> T sh_dc_from_color(T value) { return (value - T(0.5)) / T(sh_const::C0); }

/// Projects Gaussian i of `map`; nullopt when behind the near plane or degenerate.
template <typename T>
std::optional<ProjectedGaussian<T>> project_gaussian(const GaussianMap<T> &map, std::size_t i, const Camera &cam,
                                                     double near = kDefaultNear) {
    const Vector3<T> pos = map.position(i);
    const auto pm = project_mean<T>(cam.pose, cam.intr, pos, near);
    if (!pm) return std::nullopt;
    const Matrix3<T> cov3d = covariance_3d<T>(map.log_scale(i), map.rotation(i));
    const Matrix2<T> cov2d = project_covariance<T>(cam.pose, cam.intr, pos, cov3d);
    const T det = cov2d.determinant();
    if (!(det > T(0)) || !std::isfinite(det)) return std::nullopt;

    ProjectedGaussian<T> pg;
    pg.mean2d = pm->mean2d;
    pg.depth = pm->depth;
    pg.cov2d = cov2d;
    pg.inv_cov2d << cov2d(1, 1) / det, -cov2d(0, 1) / det, -cov2d(0, 1) / det, cov2d(0, 0) / det;
    pg.opacity = sigmoid(map.opacity_logits[i]);
    pg.power_floor = std::log(T(kAlphaCutoff) / pg.opacity) - T(1e-3);
    pg.source_index = static_cast<std::uint32_t>(i);
    const Vector3<T> dir = (pos - cam.pose.center().cast<T>()).normalized();
    const Vector3<T> raw = evaluate_sh_unclamped<T>(map.sh_coeffs(i), dir);
    for (int c = 0; c < 3; ++c) {
        pg.color_clamped[c] = raw[c] < T(0);
        pg.color[c] = pg.color_clamped[c] ? T(0) : raw[c];
    }
    return pg;
}

/// Projects every map entry in front of the near plane, preserving map order.
template <typename T>
std::vector<ProjectedGaussian<T>> project_map(const GaussianMap<T> &map, const Camera &cam,
                                              double near = kDefaultNear);

} // namespace splatmap
