// Copyright Contributors to the splatmap project
// SPDX-License-Identifier: Apache-2.0
//
// Reverse-mode gradients of a color-image loss through the tiled rasterizer.
//
// Both variants first produce screen-space gradients per (tile, list entry)
// slot, merge the slots in tile order, and then share one chain rule from
// screen space back to the Gaussian parameters:
//
//   per_pixel    - each pixel walks its contributors back to front, recovering
//                  transmittance by division (the classic formulation).
//   per_gaussian - a tile's transmittance and trailing-color tables are built
//                  once; each (tile, Gaussian) worker then sweeps the tile's
//                  pixels for its own Gaussian and writes one private slot.
//
#pragma once

#include "splatmap/rasterizer.hpp"

#include <functional>
#include <string>
#include <vector>

namespace splatmap {

template <typename T> struct GradientBuffer {
    std::vector<T> d_position;      // 3 per Gaussian
    std::vector<T> d_log_scale;     // 3
    std::vector<T> d_rotation;      // 4, tangent to the unit sphere at the normalized quaternion
    std::vector<T> d_opacity_logit; // 1
    std::vector<T> d_sh;            // 48
    Matrix34<T> d_exposure = Matrix34<T>::Zero();

    GradientBuffer() = default;
    explicit GradientBuffer(std::size_t n) { resize(n); }

    std::size_t size() const { return d_opacity_logit.size(); }
    void resize(std::size_t n) {
        d_position.assign(3 * n, T(0));
        d_log_scale.assign(3 * n, T(0));
        d_rotation.assign(4 * n, T(0));
        d_opacity_logit.assign(n, T(0));
        d_sh.assign(kShCoeffs * n, T(0));
        d_exposure.setZero();
    }
};

/// Loss gradient with respect to one projected Gaussian's screen-space quantities.
template <typename T> struct ScreenGradient {
    Vector2<T> mean2d = Vector2<T>::Zero();
    /// d/d(a, b, c) of the conic [[a, b], [b, c]] (b counted once).
    Vector3<T> conic = Vector3<T>::Zero();
    T opacity = T(0);
    Vector3<T> color = Vector3<T>::Zero();

    ScreenGradient &operator+=(const ScreenGradient &o) {
        mean2d += o.mean2d;
        conic += o.conic;
        opacity += o.opacity;
        color += o.color;
        return *this;
    }
};

enum class BackwardVariant { per_pixel, per_gaussian };

/// Screen-space gradients, one per projected Gaussian. Throws std::invalid_argument when
/// `targets` lacks forward state or shapes disagree.
template <typename T>
std::vector<ScreenGradient<T>> backward_screen(const RenderTargets<T> &targets, const RgbImage<T> &d_color_image,
                                               std::span<const ProjectedGaussian<T>> projected, const TileGrid &grid,
                                               BackwardVariant variant);

/// Chains screen-space gradients through projection, covariance and SH evaluation.
template <typename T>
GradientBuffer<T> backward_to_parameters(const GaussianMap<T> &map, const Camera &cam,
                                         std::span<const ProjectedGaussian<T>> projected,
                                         std::span<const ScreenGradient<T>> screen);

template <typename T>
GradientBuffer<T> backward_per_pixel(const GaussianMap<T> &map, const Camera &cam, const RenderTargets<T> &targets,
                                     const RgbImage<T> &d_color_image,
                                     std::span<const ProjectedGaussian<T>> projected, const TileGrid &grid) {
    const auto screen = backward_screen(targets, d_color_image, projected, grid, BackwardVariant::per_pixel);
    return backward_to_parameters<T>(map, cam, projected, screen);
}

template <typename T>
GradientBuffer<T> backward_per_gaussian(const GaussianMap<T> &map, const Camera &cam,
                                        const RenderTargets<T> &targets, const RgbImage<T> &d_color_image,
                                        std::span<const ProjectedGaussian<T>> projected, const TileGrid &grid) {
    const auto screen = backward_screen(targets, d_color_image, projected, grid, BackwardVariant::per_gaussian);
    return backward_to_parameters<T>(map, cam, projected, screen);
}

// ---------------------------------------------------------------------------
// Finite-difference verification.

/// One scalar parameter under test: where it lives and its analytic derivative.
struct FdParameter {
    std::string name;
    double *value = nullptr;
    double analytic = 0.0;
};

struct FdReport {
    double max_error = 0.0; ///< worst |a - fd| / max(|a|, |fd|, abs_floor / rel_tol)
    std::string worst_parameter;
    double worst_analytic = 0.0, worst_numeric = 0.0;
    std::size_t checked = 0;
    /// Parameters whose central stencil straddled a change of the region signature and were
    /// re-evaluated with a smaller step.
    std::size_t refined = 0;
    bool passed(double tol) const { return max_error <= tol; }
};

struct FdOptions {
    double epsilon = 1e-5;
    double rel_tol = 1e-4;
    double abs_floor = 1e-7;
    /// Optional piecewise-smoothness signature (e.g. a hash of rasterizer contributor sets). When
    /// the signature differs across the stencil the step is shrunk by 10x, up to three times.
    std::function<std::uint64_t()> region;
};

/// Central differences (f(x+e) - f(x-e)) / 2e for every parameter, restoring each value afterwards.
FdReport finite_difference_check(std::span<FdParameter> params, const std::function<double()> &loss,
                                 const FdOptions &options = {});

} // namespace splatmap
