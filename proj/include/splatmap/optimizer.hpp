// Copyright Contributors to the splatmap project
// SPDX-License-Identifier: Apache-2.0
//
// Adam over the Gaussian parameter arrays, dense or restricted to an active
// subset (the Gaussians inside the current camera frustum).
//
#pragma once

#include "splatmap/backward.hpp"
#include "splatmap/loss.hpp"

#include <optional>
#include <span>

namespace splatmap {

/// Constant per-attribute learning rates (no schedule).
struct LearningRates {
    double position = 1.6e-4; ///< multiplied by scene_extent
    double scene_extent = 1.0;
    double sh_dc = 2.5e-3;
    double sh_rest = 2.5e-3 / 20.0;
    double opacity = 5e-2;
    double scale = 5e-3;
    double rotation = 1e-3;
    double exposure = 1e-3;
};

struct AdamHyper {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-15;
};

/// First/second moments parallel to the map arrays, with a step counter per Gaussian.
template <typename T> struct AdamState {
    std::vector<T> m_position, v_position;
    std::vector<T> m_log_scale, v_log_scale;
    std::vector<T> m_rotation, v_rotation;
    std::vector<T> m_opacity, v_opacity;
    std::vector<T> m_sh, v_sh;
    std::vector<std::uint32_t> steps;

    std::size_t size() const { return steps.size(); }
    /// Grows to n Gaussians; new entries start from zero moments and zero steps.
    void resize(std::size_t n);
    bool operator==(const AdamState &) const = default;
};

/// One Adam update. With `active`, only the listed Gaussians are touched (parameters, moments
/// and step counters); bias correction uses each Gaussian's own step count. Updated rotations
/// are renormalized.
template <typename T>
void adam_step(GaussianMap<T> &map, const GradientBuffer<T> &grads, AdamState<T> &state, const LearningRates &lr,
               std::optional<std::span<const std::uint32_t>> active = std::nullopt, const AdamHyper &hyper = {});

/// Adam over a single exposure matrix.
template <typename T> struct ExposureAdam {
    Matrix34<T> m = Matrix34<T>::Zero();
    Matrix34<T> v = Matrix34<T>::Zero();
    std::uint32_t steps = 0;

    void step(ExposureAffine<T> &e, const Matrix34<T> &grad, double lr, const AdamHyper &hyper = {});
    bool operator==(const ExposureAdam &) const = default;
};

/// Indices of Gaussians whose centers pass the frustum test of `cam`.
template <typename T>
std::vector<std::uint32_t> frustum_active_set(const GaussianMap<T> &map, const Camera &cam,
                                              double near = kDefaultNear, double margin = kFrustumMargin);

} // namespace splatmap
