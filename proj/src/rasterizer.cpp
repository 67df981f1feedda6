// Copyright Contributors to the splatmap project
// SPDX-License-Identifier: Apache-2.0
//
#include "splatmap/rasterizer.hpp"

#include <algorithm>
#include <numeric>
#include <ranges>

namespace splatmap {

template <typename T>
std::vector<ProjectedGaussian<T>> project_map(const GaussianMap<T> &map, const Camera &cam, double near) {
    const std::int64_t n = static_cast<std::int64_t>(map.size());
    std::vector<std::optional<ProjectedGaussian<T>>> slots(map.size());
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) slots[i] = project_gaussian(map, static_cast<std::size_t>(i), cam, near);
    std::vector<ProjectedGaussian<T>> out;
    out.reserve(map.size());
    for (auto &s : slots)
        if (s) out.push_back(*s);
    return out;
}

template <typename T>
std::optional<TileRect> candidate_tiles(const ProjectedGaussian<T> &pg, int width, int height, int tile_size) {
    const T q_cut = cutoff_extent(pg.opacity);
    if (q_cut < T(0)) return std::nullopt;
    const T a = pg.cov2d(0, 0), b = pg.cov2d(0, 1), c = pg.cov2d(1, 1);
    const T mid = T(0.5) * (a + c);
    const T lambda_max = mid + std::sqrt(std::max(T(0), mid * mid - (a * c - b * b)));
    const T r = std::sqrt(q_cut * lambda_max);
    const T px0 = std::ceil(pg.mean2d.x() - r), px1 = std::floor(pg.mean2d.x() + r);
    const T py0 = std::ceil(pg.mean2d.y() - r), py1 = std::floor(pg.mean2d.y() + r);
    if (px1 < T(0) || py1 < T(0) || px0 > T(width - 1) || py0 > T(height - 1) || px0 > px1 || py0 > py1)
        return std::nullopt;
    const int x0 = static_cast<int>(std::max(px0, T(0))), x1 = static_cast<int>(std::min(px1, T(width - 1)));
    const int y0 = static_cast<int>(std::max(py0, T(0))), y1 = static_cast<int>(std::min(py1, T(height - 1)));
    return TileRect{x0 / tile_size, y0 / tile_size, x1 / tile_size, y1 / tile_size};
}

template <typename T> T min_mahalanobis_over_rect(const ProjectedGaussian<T> &pg, T x0, T y0, T x1, T y1) {
    const T mx = pg.mean2d.x(), my = pg.mean2d.y();
    if (mx >= x0 && mx <= x1 && my >= y0 && my <= y1) return T(0);
    const T a = pg.inv_cov2d(0, 0), b = pg.inv_cov2d(0, 1), c = pg.inv_cov2d(1, 1);
    auto form = [&](T dx, T dy) { return a * dx * dx + T(2) * b * dx * dy + c * dy * dy; };
    // The form is convex, so with the mean outside the rectangle the minimum is on an edge.
    // On a vertical edge dx is fixed and the 1D optimum is dy = -b dx / c, clamped to the edge.
    auto vertical_edge = [&](T x) {
        const T dx = mx - x;
        const T dy = std::clamp(-b * dx / c, my - y1, my - y0);
        return form(dx, dy);
    };
    auto horizontal_edge = [&](T y) {
        const T dy = my - y;
        const T dx = std::clamp(-b * dy / a, mx - x1, mx - x0);
        return form(dx, dy);
    };
    return std::min({vertical_edge(x0), vertical_edge(x1), horizontal_edge(y0), horizontal_edge(y1)});
}

namespace {

template <typename T> bool tile_survives(const ProjectedGaussian<T> &pg, const TileRect &px) {
    return max_alpha_over_rect(pg, T(px.x0), T(px.y0), T(px.x1), T(px.y1)) >= T(kAlphaCutoff);
}

TileGrid empty_grid(const CameraIntrinsics &intr, int tile_size) {
    TileGrid grid;
    grid.tile_size = tile_size;
    grid.width = intr.width;
    grid.height = intr.height;
    grid.tiles_x = (intr.width + tile_size - 1) / tile_size;
    grid.tiles_y = (intr.height + tile_size - 1) / tile_size;
    return grid;
}

} // namespace

template <typename T>
std::vector<int> cull_tiles(const ProjectedGaussian<T> &pg, std::span<const int> candidate_tile_ids,
                            const TileGrid &grid) {
    std::vector<int> out;
    if (cutoff_extent(pg.opacity) < T(0)) return out;
    for (const int t : candidate_tile_ids)
        if (tile_survives(pg, grid.pixel_rect(t))) out.push_back(t);
    return out;
}

template <typename T>
TileGrid bin_and_sort(std::span<const ProjectedGaussian<T>> projected, const CameraIntrinsics &intr,
                      const BinOptions &options) {
    TileGrid grid = empty_grid(intr, options.tile_size);
    const std::int64_t n = static_cast<std::int64_t>(projected.size());

    // Pass 1: per-Gaussian tile lists (parallel, private), then a sequential prefix sum.
    std::vector<std::vector<std::uint32_t>> tiles_of(projected.size());
#pragma omp parallel for schedule(dynamic, 256)
    for (std::int64_t i = 0; i < n; ++i) {
        const auto &pg = projected[i];
        const auto rect = candidate_tiles(pg, grid.width, grid.height, grid.tile_size);
        if (!rect) continue;
        auto &list = tiles_of[i];
        list.reserve(rect->count());
        for (int ty = rect->y0; ty <= rect->y1; ++ty)
            for (int tx = rect->x0; tx <= rect->x1; ++tx) {
                const int t = ty * grid.tiles_x + tx;
                if (!options.cull || tile_survives(pg, grid.pixel_rect(t))) list.push_back(static_cast<std::uint32_t>(t));
            }
    }

    // Pass 2: counting sort by tile, then depth sort within each tile.
    std::vector<std::uint32_t> counts(grid.tile_count() + 1, 0);
    for (const auto &list : tiles_of)
        for (const auto t : list) ++counts[t + 1];
    std::partial_sum(counts.begin(), counts.end(), counts.begin());
    grid.offsets = counts;
    grid.entries.resize(grid.offsets.back());
    std::vector<std::uint32_t> cursor(grid.offsets.begin(), grid.offsets.end() - 1);
    for (std::size_t i = 0; i < tiles_of.size(); ++i)
        for (const auto t : tiles_of[i]) grid.entries[cursor[t]++] = static_cast<std::uint32_t>(i);

    const int tiles = grid.tile_count();
#pragma omp parallel for schedule(dynamic, 4)
    for (int t = 0; t < tiles; ++t) {
        auto first = grid.entries.begin() + grid.offsets[t], last = grid.entries.begin() + grid.offsets[t + 1];
        std::sort(first, last, [&](std::uint32_t a, std::uint32_t b) {
            const auto &ga = projected[a], &gb = projected[b];
            if (ga.depth != gb.depth) return ga.depth < gb.depth;
            return ga.source_index < gb.source_index;
        });
    }
    return grid;
}

namespace {

inline std::uint64_t mix_hash(std::uint64_t h, std::uint64_t v) {
    h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    return h;
}

template <typename T> RenderTargets<T> allocate_targets(int width, int height, bool signature) {
    RenderTargets<T> out;
    out.color = RgbImage<T>(height, width);
    out.depth = Plane<T>::Zero(height, width);
    out.opacity = Plane<T>::Zero(height, width);
    out.final_transmittance = Plane<T>::Ones(height, width);
    out.n_contrib = Plane<std::int32_t>::Zero(height, width);
    if (signature) out.signature = Plane<std::uint64_t>::Zero(height, width);
    return out;
}

// Front-to-back compositing of one pixel over an ordered contributor list.
template <typename T, typename IndexRange>
void composite_pixel(const IndexRange &order, std::span<const ProjectedGaussian<T>> projected, int x, int y,
                     bool early_termination, bool record_signature, RenderTargets<T> &out) {
    const T px = T(x), py = T(y);
    T trans = T(1);
    Vector3<T> color = Vector3<T>::Zero();
    T depth = T(0), opacity = T(0);
    std::uint64_t sig = 0;
    std::int32_t visited = 0;
    for (const auto idx : order) {
        const auto &pg = projected[idx];
        const T power = gaussian_power(pg, px, py);
        ++visited;
        if (power > T(0) || power < pg.power_floor) continue;
        const T g = pg.opacity * std::exp(power);
        const T alpha = std::min(T(kAlphaClamp), g);
        if (alpha < T(kAlphaCutoff)) continue;
        const T w = alpha * trans;
        color += w * pg.color;
        depth += w * pg.depth;
        opacity += w;
        trans = trans * (T(1) - alpha);
        if (record_signature) sig = mix_hash(sig, (std::uint64_t(pg.source_index) << 1) | (g > T(kAlphaClamp) ? 1 : 0));
        // Stop once the pixel is saturated; the Gaussian that crossed the floor is kept.
        if (early_termination && trans < T(kTransmittanceFloor)) break;
    }
    out.color.set_pixel(y, x, color);
    out.depth(y, x) = depth;
    out.opacity(y, x) = opacity;
    out.final_transmittance(y, x) = trans;
    out.n_contrib(y, x) = visited;
    if (record_signature) out.signature(y, x) = mix_hash(sig, static_cast<std::uint64_t>(visited));
}

} // namespace

template <typename T>
RenderTargets<T> render(const TileGrid &grid, std::span<const ProjectedGaussian<T>> projected,
                        const CameraIntrinsics &intr, const RenderOptions &options) {
    auto out = allocate_targets<T>(intr.width, intr.height, options.record_signature);
    const int tiles = grid.tile_count();
#pragma omp parallel
    {
        std::vector<ProjectedGaussian<T>> local; // the tile's contributors, contiguous
#pragma omp for schedule(dynamic, 1)
        for (int t = 0; t < tiles; ++t) {
            const auto list = grid.tile(t);
            local.clear();
            for (const auto idx : list) local.push_back(projected[idx]);
            const auto order = std::views::iota(std::size_t{0}, local.size());
            const TileRect r = grid.pixel_rect(t);
            for (int y = r.y0; y <= r.y1; ++y)
                for (int x = r.x0; x <= r.x1; ++x)
                    composite_pixel<T>(order, std::span<const ProjectedGaussian<T>>(local), x, y,
                                       options.early_termination, options.record_signature, out);
        }
    }
    return out;
}

template <typename T>
RenderTargets<T> reference_render(std::span<const ProjectedGaussian<T>> projected, const CameraIntrinsics &intr) {
    auto out = allocate_targets<T>(intr.width, intr.height, false);
    std::vector<std::uint32_t> order(projected.size());
    std::iota(order.begin(), order.end(), 0u);
    std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
        if (projected[a].depth != projected[b].depth) return projected[a].depth < projected[b].depth;
        return projected[a].source_index < projected[b].source_index;
    });
    const int h = intr.height, w = intr.width;
#pragma omp parallel for schedule(dynamic, 1)
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) composite_pixel<T>(order, projected, x, y, false, false, out);
    return out;
}

template <typename T>
RenderPass<T> render_map(const GaussianMap<T> &map, const Camera &cam, const BinOptions &bin,
                         const RenderOptions &options, double near) {
    RenderPass<T> pass;
    pass.projected = project_map(map, cam, near);
    pass.grid = bin_and_sort<T>(pass.projected, cam.intr, bin);
    pass.targets = render<T>(pass.grid, pass.projected, cam.intr, options);
    return pass;
}

#define SPLATMAP_INSTANTIATE(T)                                                                                        \
    template std::vector<ProjectedGaussian<T>> project_map<T>(const GaussianMap<T> &, const Camera &, double);        \
    template std::optional<TileRect> candidate_tiles<T>(const ProjectedGaussian<T> &, int, int, int);                 \
    template T min_mahalanobis_over_rect<T>(const ProjectedGaussian<T> &, T, T, T, T);                                 \
    template std::vector<int> cull_tiles<T>(const ProjectedGaussian<T> &, std::span<const int>, const TileGrid &);    \
    template TileGrid bin_and_sort<T>(std::span<const ProjectedGaussian<T>>, const CameraIntrinsics &,               \
                                      const BinOptions &);                                                             \
    template RenderTargets<T> render<T>(const TileGrid &, std::span<const ProjectedGaussian<T>>,                      \
                                        const CameraIntrinsics &, const RenderOptions &);                              \
    template RenderTargets<T> reference_render<T>(std::span<const ProjectedGaussian<T>>, const CameraIntrinsics &);   \
    template RenderPass<T> render_map<T>(const GaussianMap<T> &, const Camera &, const BinOptions &,                  \
                                         const RenderOptions &, double);

SPLATMAP_INSTANTIATE(float)
SPLATMAP_INSTANTIATE(double)
#undef SPLATMAP_INSTANTIATE

} // namespace splatmap
