// Copyright Contributors to the splatmap project
// SPDX-License-Identifier: Apache-2.0
//
#include "splatmap/optimizer.hpp"

#include <cmath>

namespace splatmap {

template <typename T> void AdamState<T>::resize(std::size_t n) {
    m_position.resize(3 * n, T(0));
    v_position.resize(3 * n, T(0));
    m_log_scale.resize(3 * n, T(0));
    v_log_scale.resize(3 * n, T(0));
    m_rotation.resize(4 * n, T(0));
    v_rotation.resize(4 * n, T(0));
    m_opacity.resize(n, T(0));
    v_opacity.resize(n, T(0));
    m_sh.resize(kShCoeffs * n, T(0));
    v_sh.resize(kShCoeffs * n, T(0));
    steps.resize(n, 0);
}

namespace {

struct StepScalars {
    double bias1, bias2;
};

template <typename T>
inline void adam_update(T *param, const T *grad, T *m, T *v, int width, double lr, const StepScalars &s,
                        const AdamHyper &h) {
    const T b1 = T(h.beta1), b2 = T(h.beta2), eps = T(h.eps);
    const T c1 = T(1.0 / s.bias1), c2 = T(1.0 / s.bias2), step = T(lr);
    for (int k = 0; k < width; ++k) {
        m[k] = b1 * m[k] + (T(1) - b1) * grad[k];
        v[k] = b2 * v[k] + (T(1) - b2) * grad[k] * grad[k];
        const T m_hat = m[k] * c1, v_hat = v[k] * c2;
        param[k] -= step * m_hat / (std::sqrt(v_hat) + eps);
    }
}

template <typename T>
void update_gaussian(std::size_t i, GaussianMap<T> &map, const GradientBuffer<T> &g, AdamState<T> &st,
                     const LearningRates &lr, const AdamHyper &h) {
    const std::uint32_t t = ++st.steps[i];
    const StepScalars s{1.0 - std::pow(h.beta1, t), 1.0 - std::pow(h.beta2, t)};
    adam_update(&map.positions[3 * i], &g.d_position[3 * i], &st.m_position[3 * i], &st.v_position[3 * i], 3,
                lr.position * lr.scene_extent, s, h);
    adam_update(&map.log_scales[3 * i], &g.d_log_scale[3 * i], &st.m_log_scale[3 * i], &st.v_log_scale[3 * i], 3,
                lr.scale, s, h);
    adam_update(&map.rotations[4 * i], &g.d_rotation[4 * i], &st.m_rotation[4 * i], &st.v_rotation[4 * i], 4,
                lr.rotation, s, h);
    adam_update(&map.opacity_logits[i], &g.d_opacity_logit[i], &st.m_opacity[i], &st.v_opacity[i], 1, lr.opacity, s,
                h);
    const std::size_t o = kShCoeffs * i;
    adam_update(&map.sh[o], &g.d_sh[o], &st.m_sh[o], &st.v_sh[o], 3, lr.sh_dc, s, h);
    adam_update(&map.sh[o + 3], &g.d_sh[o + 3], &st.m_sh[o + 3], &st.v_sh[o + 3], kShCoeffs - 3, lr.sh_rest, s, h);

    Eigen::Map<Vector4<T>> q(&map.rotations[4 * i]);
    const T n = q.norm();
    if (n > T(0)) q /= n;
}

// Pulls the state of an upcoming scattered Gaussian into cache.
template <typename T>
inline void prefetch_gaussian(std::size_t i, const GaussianMap<T> &map, const GradientBuffer<T> &g,
                              const AdamState<T> &st) {
    auto lines = [](const T *p, std::size_t count) {
        for (std::size_t b = 0; b < count * sizeof(T); b += 64) __builtin_prefetch(reinterpret_cast<const char *>(p) + b);
    };
    const std::size_t o = kShCoeffs * i;
    for (const std::vector<T> *v : {&map.sh, &g.d_sh, &st.m_sh, &st.v_sh}) lines(v->data() + o, kShCoeffs);
    for (const std::vector<T> *v : {&map.positions, &g.d_position, &st.m_position, &st.v_position,
                                    &map.log_scales, &g.d_log_scale, &st.m_log_scale, &st.v_log_scale})
        lines(v->data() + 3 * i, 3);
    for (const std::vector<T> *v : {&map.rotations, &g.d_rotation, &st.m_rotation, &st.v_rotation})
        lines(v->data() + 4 * i, 4);
}

} // namespace

template <typename T>
void adam_step(GaussianMap<T> &map, const GradientBuffer<T> &grads, AdamState<T> &state, const LearningRates &lr,
               std::optional<std::span<const std::uint32_t>> active, const AdamHyper &hyper) {
    if (grads.size() != map.size() || state.size() != map.size())
        throw std::invalid_argument("adam_step: gradient/state size does not match the map");
    if (active) {
        const auto idx = *active;
        const std::int64_t n = static_cast<std::int64_t>(idx.size());
        constexpr std::int64_t ahead = 4;
#pragma omp parallel for schedule(static)
        for (std::int64_t k = 0; k < n; ++k) {
            if (k + ahead < n) prefetch_gaussian(idx[k + ahead], map, grads, state);
            update_gaussian(idx[k], map, grads, state, lr, hyper);
        }
    } else {
        const std::int64_t n = static_cast<std::int64_t>(map.size());
#pragma omp parallel for schedule(static)
        for (std::int64_t i = 0; i < n; ++i) update_gaussian(static_cast<std::size_t>(i), map, grads, state, lr, hyper);
    }
}

template <typename T>
void ExposureAdam<T>::step(ExposureAffine<T> &e, const Matrix34<T> &grad, double lr, const AdamHyper &h) {
    ++steps;
    const StepScalars s{1.0 - std::pow(h.beta1, steps), 1.0 - std::pow(h.beta2, steps)};
    adam_update(e.matrix.data(), grad.data(), m.data(), v.data(), 12, lr, s, h);
}

template <typename T>
std::vector<std::uint32_t> frustum_active_set(const GaussianMap<T> &map, const Camera &cam, double near,
                                              double margin) {
    std::vector<std::uint32_t> out;
    for (std::size_t i = 0; i < map.size(); ++i)
        if (frustum_contains(cam.pose, cam.intr, map.position(i).template cast<double>(), near, margin))
            out.push_back(static_cast<std::uint32_t>(i));
    return out;
}

#define SPLATMAP_INSTANTIATE(T)                                                                                        \
    template struct AdamState<T>;                                                                                      \
    template struct ExposureAdam<T>;                                                                                   \
    template void adam_step<T>(GaussianMap<T> &, const GradientBuffer<T> &, AdamState<T> &, const LearningRates &,    \
                               std::optional<std::span<const std::uint32_t>>, const AdamHyper &);                      \
    template std::vector<std::uint32_t> frustum_active_set<T>(const GaussianMap<T> &, const Camera &, double, double);

SPLATMAP_INSTANTIATE(float)
SPLATMAP_INSTANTIATE(double)
#undef SPLATMAP_INSTANTIATE

} // namespace splatmap
