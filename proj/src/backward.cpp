// Copyright Contributors to the splatmap project
// SPDX-License-Identifier: Apache-2.0
//
#include "splatmap/backward.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace splatmap {

namespace {

// Adds one pixel's contribution to a slot. `trans` is the transmittance in front of the
// Gaussian, `behind` the normalized color composited behind it.
template <typename T>
inline void accumulate_pixel(ScreenGradient<T> &slot, const ProjectedGaussian<T> &pg, T g, T power, T trans,
                             const Vector3<T> &behind, const Vector3<T> &d_pixel, T dx, T dy) {
    const T alpha = std::min(T(kAlphaClamp), g);
    const T d_alpha = trans * ((pg.color - behind).dot(d_pixel));
    slot.color += (trans * alpha) * d_pixel;
    if (g > T(kAlphaClamp)) return; // clamped: alpha is constant in everything upstream
    const T a = pg.inv_cov2d(0, 0), b = pg.inv_cov2d(0, 1), c = pg.inv_cov2d(1, 1);
    const T d_power = d_alpha * g;
    slot.mean2d.x() -= d_power * (a * dx + b * dy);
    slot.mean2d.y() -= d_power * (b * dx + c * dy);
    slot.conic.x() -= d_power * T(0.5) * dx * dx;
    slot.conic.y() -= d_power * dx * dy;
    slot.conic.z() -= d_power * T(0.5) * dy * dy;
    slot.opacity += d_alpha * std::exp(power);
}

template <typename T>
void tile_backward_per_pixel(int t, const TileGrid &grid, const RenderTargets<T> &targets,
                             const RgbImage<T> &d_color, std::span<const ProjectedGaussian<T>> projected,
                             std::span<ScreenGradient<T>> slots) {
    const auto list = grid.tile(t);
    const TileRect r = grid.pixel_rect(t);
    for (int y = r.y0; y <= r.y1; ++y) {
        for (int x = r.x0; x <= r.x1; ++x) {
            const int n = targets.n_contrib(y, x);
            const Vector3<T> d_pixel = d_color.pixel(y, x);
            const T px = T(x), py = T(y);
            T trans = targets.final_transmittance(y, x);
            Vector3<T> behind = Vector3<T>::Zero(), last_color = Vector3<T>::Zero();
            T last_alpha = T(0);
            for (int k = n - 1; k >= 0; --k) {
                const auto &pg = projected[list[k]];
                const T power = gaussian_power(pg, px, py);
                if (power > T(0) || power < pg.power_floor) continue;
                const T g = pg.opacity * std::exp(power);
                const T alpha = std::min(T(kAlphaClamp), g);
                if (alpha < T(kAlphaCutoff)) continue;
                trans = trans / (T(1) - alpha);
                behind = last_alpha * last_color + (T(1) - last_alpha) * behind;
                accumulate_pixel(slots[k], pg, g, power, trans, behind, d_pixel, pg.mean2d.x() - px,
                                 pg.mean2d.y() - py);
                last_alpha = alpha;
                last_color = pg.color;
            }
        }
    }
}

// Contributing (entry, pixel) cells of one tile, entry-major with pixels ascending.
template <typename T> struct TileHit {
    int pixel;
    T g, power, trans; // unclamped o*exp(power); transmittance in front of the entry
    Vector3<T> behind; // normalized color composited behind the entry
};

template <typename T> struct TileTables {
    std::vector<TileHit<T>> hits;
    std::vector<std::size_t> row; // hits of entry k: [row[k], row[k + 1])
};

template <typename T>
void tile_backward_per_gaussian(int t, const TileGrid &grid, const RenderTargets<T> &targets,
                                const RgbImage<T> &d_color, std::span<const ProjectedGaussian<T>> projected,
                                std::span<ScreenGradient<T>> slots, TileTables<T> &tab) {
    const auto list = grid.tile(t);
    const TileRect r = grid.pixel_rect(t);
    const int tw = r.x1 - r.x0 + 1, th = r.y1 - r.y0 + 1, np = tw * th;

    std::vector<int> n_contrib(np);
    int depth = 0;
    for (int p = 0; p < np; ++p) {
        n_contrib[p] = targets.n_contrib(r.y0 + p / tw, r.x0 + p % tw);
        depth = std::max(depth, n_contrib[p]);
    }
    if (depth == 0) return;
    tab.hits.clear();
    tab.row.assign(static_cast<std::size_t>(depth) + 1, 0);

    // Forward replay, entry-major: transmittance in front of every entry.
    std::vector<T> trans(np, T(1));
    for (int k = 0; k < depth; ++k) {
        const auto &pg = projected[list[k]];
        tab.row[k] = tab.hits.size();
        for (int p = 0; p < np; ++p) {
            if (k >= n_contrib[p]) continue;
            const T power = gaussian_power(pg, T(r.x0 + p % tw), T(r.y0 + p / tw));
            if (power > T(0) || power < pg.power_floor) continue;
            const T g = pg.opacity * std::exp(power);
            const T alpha = std::min(T(kAlphaClamp), g);
            if (alpha < T(kAlphaCutoff)) continue;
            tab.hits.push_back({p, g, power, trans[p], Vector3<T>::Zero()});
            trans[p] *= T(1) - alpha;
        }
    }
    tab.row[depth] = tab.hits.size();

    // Backward sweep: normalized color behind every hit.
    std::vector<T> behind(3 * np, T(0)), last_color(3 * np, T(0)), last_alpha(np, T(0));
    for (int k = depth - 1; k >= 0; --k) {
        const auto &pg = projected[list[k]];
        for (std::size_t h = tab.row[k]; h < tab.row[k + 1]; ++h) {
            auto &hit = tab.hits[h];
            const int p = hit.pixel;
            for (int c = 0; c < 3; ++c) {
                behind[3 * p + c] = last_alpha[p] * last_color[3 * p + c] + (T(1) - last_alpha[p]) * behind[3 * p + c];
                hit.behind[c] = behind[3 * p + c];
                last_color[3 * p + c] = pg.color[c];
            }
            last_alpha[p] = std::min(T(kAlphaClamp), hit.g);
        }
    }

    // One worker per (tile, Gaussian): sweep the tile's pixels, accumulate privately.
    for (int k = 0; k < depth; ++k) {
        const auto &pg = projected[list[k]];
        ScreenGradient<T> acc;
        for (std::size_t h = tab.row[k]; h < tab.row[k + 1]; ++h) {
            const auto &hit = tab.hits[h];
            const int x = r.x0 + hit.pixel % tw, y = r.y0 + hit.pixel / tw;
            accumulate_pixel(acc, pg, hit.g, hit.power, hit.trans, hit.behind, d_color.pixel(y, x),
                             pg.mean2d.x() - T(x), pg.mean2d.y() - T(y));
        }
        slots[k] = acc;
    }
}

} // namespace

template <typename T>
std::vector<ScreenGradient<T>> backward_screen(const RenderTargets<T> &targets, const RgbImage<T> &d_color_image,
                                               std::span<const ProjectedGaussian<T>> projected, const TileGrid &grid,
                                               BackwardVariant variant) {
    if (!targets.has_backward_state())
        throw std::invalid_argument("backward pass requires forward render state (transmittance, contributor counts)");
    if (d_color_image.width() != targets.width() || d_color_image.height() != targets.height() ||
        grid.width != targets.width() || grid.height != targets.height())
        throw std::invalid_argument("backward pass: image, grid and render target shapes disagree");

    std::vector<ScreenGradient<T>> slots(grid.pair_count());
    const int tiles = grid.tile_count();
    if (variant == BackwardVariant::per_pixel) {
#pragma omp parallel for schedule(dynamic, 1)
        for (int t = 0; t < tiles; ++t) {
            std::span<ScreenGradient<T>> tile_slots(slots.data() + grid.offsets[t], grid.tile(t).size());
            tile_backward_per_pixel(t, grid, targets, d_color_image, projected, tile_slots);
        }
    } else {
#pragma omp parallel
        {
            TileTables<T> tables;
#pragma omp for schedule(dynamic, 1)
            for (int t = 0; t < tiles; ++t) {
                std::span<ScreenGradient<T>> tile_slots(slots.data() + grid.offsets[t], grid.tile(t).size());
                tile_backward_per_gaussian(t, grid, targets, d_color_image, projected, tile_slots, tables);
            }
        }
    }

    // Deterministic merge in tile order.
    std::vector<ScreenGradient<T>> out(projected.size());
    for (std::size_t e = 0; e < grid.entries.size(); ++e) out[grid.entries[e]] += slots[e];
    return out;
}

template <typename T>
GradientBuffer<T> backward_to_parameters(const GaussianMap<T> &map, const Camera &cam,
                                         std::span<const ProjectedGaussian<T>> projected,
                                         std::span<const ScreenGradient<T>> screen) {
    GradientBuffer<T> grads(map.size());
    const Matrix3<T> w = cam.pose.rotation_wc.cast<T>();
    const Vector3<T> tw = cam.pose.translation_wc.cast<T>();
    const Vector3<T> center = cam.pose.center().cast<T>();
    const T fx = T(cam.intr.fx), fy = T(cam.intr.fy);
    const std::int64_t n = static_cast<std::int64_t>(projected.size());

#pragma omp parallel for schedule(static)
    for (std::int64_t j = 0; j < n; ++j) {
        const auto &pg = projected[j];
        const auto &sg = screen[j];
        // Untouched by any pixel: every parameter gradient is exactly zero.
        if (sg.mean2d.isZero(0) && sg.conic.isZero(0) && sg.opacity == T(0) && sg.color.isZero(0)) continue;
        const std::size_t i = pg.source_index;
        const Vector3<T> pos = map.position(i);
        const Vector4<T> q_raw = map.rotation(i);
        const Vector3<T> scale = map.log_scale(i).array().exp().matrix();

        // Covariance chain: conic -> screen covariance -> 3D covariance.
        const Vector3<T> t = w * pos + tw;
        const GuardedPoint<T> gt = guard_band(cam.intr, t);
        const Matrix23<T> jac = projection_jacobian(cam.intr, gt.t);
        const Matrix23<T> jw = jac * w;
        const Matrix3<T> rot = quaternion_to_rotation(q_raw);
        const Matrix3<T> m = rot * scale.asDiagonal();
        const Matrix3<T> cov3d = m * m.transpose();
        const Matrix2<T> &conic = pg.inv_cov2d;
        Matrix2<T> d_conic;
        d_conic << sg.conic.x(), T(0.5) * sg.conic.y(), T(0.5) * sg.conic.y(), sg.conic.z();
        const Matrix2<T> d_cov2d = -conic * d_conic * conic;
        const Matrix3<T> d_cov3d = jw.transpose() * d_cov2d * jw;
        const Matrix23<T> d_jw = T(2) * d_cov2d * jw * cov3d;
        const Matrix23<T> d_jac = d_jw * w.transpose();

        // Camera-space mean: through the projected mean and through the Jacobian entries.
        const T iz = T(1) / t.z(), iz2 = iz * iz, iz3 = iz2 * iz;
        Vector3<T> d_t = projection_jacobian(cam.intr, t).transpose() * sg.mean2d;
        // A clamped coordinate is x = c z with c fixed, so J depends on z alone there.
        if (!gt.clamped_x) d_t.x() += d_jac(0, 2) * (-fx * iz2);
        if (!gt.clamped_y) d_t.y() += d_jac(1, 2) * (-fy * iz2);
        d_t.z() += d_jac(0, 0) * (-fx * iz2) + d_jac(1, 1) * (-fy * iz2) +
                   d_jac(0, 2) * ((gt.clamped_x ? T(1) : T(2)) * fx * gt.t.x() * iz3) +
                   d_jac(1, 2) * ((gt.clamped_y ? T(1) : T(2)) * fy * gt.t.y() * iz3);
        Vector3<T> d_pos = w.transpose() * d_t;

        // Spherical harmonics: coefficients and view direction.
        const Vector3<T> v = pos - center;
        const T v_norm = v.norm();
        const Vector3<T> dir = v / v_norm;
        Vector3<T> d_rgb = sg.color;
        for (int c = 0; c < 3; ++c)
            if (pg.color_clamped[c]) d_rgb[c] = T(0);
        const auto basis = sh_basis(dir);
        const auto basis_grad = sh_basis_gradient(dir);
        const auto coeffs = map.sh_coeffs(i);
        Vector3<T> d_dir = Vector3<T>::Zero();
        T *d_sh = &grads.d_sh[kShCoeffs * i];
        for (int k = 0; k < kShBases; ++k) {
            T weighted = T(0);
            for (int c = 0; c < 3; ++c) {
                d_sh[3 * k + c] = basis[k] * d_rgb[c];
                weighted += coeffs[3 * k + c] * d_rgb[c];
            }
            d_dir += weighted * basis_grad[k];
        }
        d_pos += (d_dir - dir * dir.dot(d_dir)) / v_norm;
        std::copy_n(d_pos.data(), 3, &grads.d_position[3 * i]);

        // Sigma = M M^T, M = R diag(s).
        const Matrix3<T> d_m = T(2) * d_cov3d * m;
        for (int k = 0; k < 3; ++k) grads.d_log_scale[3 * i + k] = d_m.col(k).dot(rot.col(k)) * scale[k];
        const Matrix3<T> g = d_m * scale.asDiagonal(); // dL/dR
        const T q_norm = q_raw.norm();
        const Vector4<T> q = q_raw / q_norm;
        const T qw = q[0], qx = q[1], qy = q[2], qz = q[3];
        Vector4<T> d_q;
        d_q[0] = T(2) * (-qz * g(0, 1) + qy * g(0, 2) + qz * g(1, 0) - qx * g(1, 2) - qy * g(2, 0) + qx * g(2, 1));
        d_q[1] = T(2) * (qy * g(0, 1) + qz * g(0, 2) + qy * g(1, 0) - T(2) * qx * g(1, 1) - qw * g(1, 2) +
                         qz * g(2, 0) + qw * g(2, 1) - T(2) * qx * g(2, 2));
        d_q[2] = T(2) * (-T(2) * qy * g(0, 0) + qx * g(0, 1) + qw * g(0, 2) + qx * g(1, 0) + qz * g(1, 2) -
                         qw * g(2, 0) + qz * g(2, 1) - T(2) * qy * g(2, 2));
        d_q[3] = T(2) * (-T(2) * qz * g(0, 0) - qw * g(0, 1) + qx * g(0, 2) + qw * g(1, 0) - T(2) * qz * g(1, 1) +
                         qy * g(1, 2) + qx * g(2, 0) + qy * g(2, 1));
        // Through normalization; the result is tangent to the sphere at q.
        const Vector4<T> d_q_raw = (d_q - q * q.dot(d_q)) / q_norm;
        std::copy_n(d_q_raw.data(), 4, &grads.d_rotation[4 * i]);

        grads.d_opacity_logit[i] = sg.opacity * pg.opacity * (T(1) - pg.opacity);
    }
    return grads;
}

FdReport finite_difference_check(std::span<FdParameter> params, const std::function<double()> &loss,
                                 const FdOptions &options) {
    FdReport report;
    const double denom_floor = options.abs_floor / options.rel_tol;
    const std::uint64_t base_region = options.region ? options.region() : 0;
    for (auto &p : params) {
        const double x0 = *p.value;
        double eps = options.epsilon;
        double numeric = 0.0;
        for (int attempt = 0; attempt < 4; ++attempt, eps *= 0.1) {
            *p.value = x0 + eps;
            const double fp = loss();
            const bool same_plus = !options.region || options.region() == base_region;
            *p.value = x0 - eps;
            const double fm = loss();
            const bool same_minus = !options.region || options.region() == base_region;
            *p.value = x0;
            numeric = (fp - fm) / (2 * eps);
            if (same_plus && same_minus) break;
            ++report.refined;
        }
        const double err = std::abs(p.analytic - numeric) / std::max({std::abs(p.analytic), std::abs(numeric), denom_floor});
        ++report.checked;
        if (report.worst_parameter.empty() || err > report.max_error) {
            report.max_error = err;
            report.worst_parameter = p.name;
            report.worst_analytic = p.analytic;
            report.worst_numeric = numeric;
        }
    }
    return report;
}

#define SPLATMAP_INSTANTIATE(T)                                                                                        \
    template std::vector<ScreenGradient<T>> backward_screen<T>(const RenderTargets<T> &, const RgbImage<T> &,         \
                                                               std::span<const ProjectedGaussian<T>>,                  \
                                                               const TileGrid &, BackwardVariant);                     \
    template GradientBuffer<T> backward_to_parameters<T>(const GaussianMap<T> &, const Camera &,                      \
                                                         std::span<const ProjectedGaussian<T>>,                        \
                                                         std::span<const ScreenGradient<T>>);

SPLATMAP_INSTANTIATE(float)
SPLATMAP_INSTANTIATE(double)
#undef SPLATMAP_INSTANTIATE

} // namespace splatmap
