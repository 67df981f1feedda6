// Copyright Contributors to the splatmap project
// SPDX-License-Identifier: Apache-2.0
//
// Tiled forward rasterization of projected Gaussians into color, depth and
// opacity images, plus an untiled brute-force reference renderer.
//
#pragma once

#include "splatmap/image.hpp"
#include "splatmap/projection.hpp"

#include <optional>
#include <span>
#include <vector>

namespace splatmap {

/// Inclusive range of tiles a Gaussian may touch.
struct TileRect {
    int x0, y0, x1, y1;
    int count() const { return (x1 - x0 + 1) * (y1 - y0 + 1); }
};

/// Per-tile depth-sorted lists of projected-Gaussian indices (CSR layout).
struct TileGrid {
    int tile_size = kDefaultTileSize;
    int tiles_x = 0, tiles_y = 0;
    int width = 0, height = 0;
    std::vector<std::uint32_t> offsets; // tiles_x * tiles_y + 1
    std::vector<std::uint32_t> entries; // indices into the projected list

    int tile_count() const { return tiles_x * tiles_y; }
    std::size_t pair_count() const { return entries.size(); }
    std::span<const std::uint32_t> tile(int t) const {
        return {entries.data() + offsets[t], entries.data() + offsets[t + 1]};
    }
    /// Pixel extent of tile t, inclusive, clipped to the image.
    TileRect pixel_rect(int t) const {
        const int tx = t % tiles_x, ty = t / tiles_x;
        return {tx * tile_size, ty * tile_size, std::min((tx + 1) * tile_size, width) - 1,
                std::min((ty + 1) * tile_size, height) - 1};
    }
};

struct BinOptions {
    int tile_size = kDefaultTileSize;
    /// Drop candidate tiles whose maximum alpha falls below the visibility cutoff.
    bool cull = true;
};

/// Largest Mahalanobis-form argument q at which the clamped alpha still reaches the cutoff;
/// negative when the Gaussian is invisible everywhere.
template <typename T> T cutoff_extent(T opacity) {
    return opacity * T(255) < T(1) ? T(-1) : T(2) * std::log(T(255) * opacity);
}

/// Tiles overlapping the axis-aligned square around the circle that bounds every pixel with
/// alpha >= 1/255; nullopt when that square misses the image.
template <typename T>
std::optional<TileRect> candidate_tiles(const ProjectedGaussian<T> &pg, int width, int height, int tile_size);

/// Minimum of the Mahalanobis form over the continuous rectangle [x0,x1] x [y0,y1].
template <typename T> T min_mahalanobis_over_rect(const ProjectedGaussian<T> &pg, T x0, T y0, T x1, T y1);

/// Exact maximum clamped alpha of pg over the rectangle.
template <typename T> T max_alpha_over_rect(const ProjectedGaussian<T> &pg, T x0, T y0, T x1, T y1) {
    const T q = min_mahalanobis_over_rect(pg, x0, y0, x1, y1);
    return std::min(T(kAlphaClamp), pg.opacity * std::exp(T(-0.5) * q));
}

/// Tiles (given as ids into `grid`) on which pg reaches alpha >= 1/255.
template <typename T>
std::vector<int> cull_tiles(const ProjectedGaussian<T> &pg, std::span<const int> candidate_tile_ids,
                            const TileGrid &grid);

template <typename T>
TileGrid bin_and_sort(std::span<const ProjectedGaussian<T>> projected, const CameraIntrinsics &intr,
                      const BinOptions &options = {});

struct RenderOptions {
    bool early_termination = true;
    /// Record a per-pixel hash of the contributor set and clamp states.
    bool record_signature = false;
};

template <typename T> struct RenderTargets {
    RgbImage<T> color;
    Plane<T> depth;
    Plane<T> opacity;
    // Backward-pass state.
    Plane<T> final_transmittance;
    Plane<std::int32_t> n_contrib; // tile-list entries visited per pixel
    Plane<std::uint64_t> signature;

    int width() const { return color.width(); }
    int height() const { return color.height(); }
    bool has_backward_state() const { return final_transmittance.size() > 0 && n_contrib.size() > 0; }
};

template <typename T>
RenderTargets<T> render(const TileGrid &grid, std::span<const ProjectedGaussian<T>> projected,
                        const CameraIntrinsics &intr, const RenderOptions &options = {});

/// Per pixel: global depth sort, no tiling, no culling, no early termination.
template <typename T>
RenderTargets<T> reference_render(std::span<const ProjectedGaussian<T>> projected, const CameraIntrinsics &intr);

/// Projects, bins and renders `map` from `cam` in one call.
template <typename T> struct RenderPass {
    std::vector<ProjectedGaussian<T>> projected;
    TileGrid grid;
    RenderTargets<T> targets;
};

template <typename T>
RenderPass<T> render_map(const GaussianMap<T> &map, const Camera &cam, const BinOptions &bin = {},
                         const RenderOptions &options = {}, double near = kDefaultNear);

} // namespace splatmap
