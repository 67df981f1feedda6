// Copyright Contributors to the splatmap project
// SPDX-License-Identifier: Apache-2.0
//
#include "doctest.h"
#include "test_util.hpp"

#include "splatmap/random_scene.hpp"
#include "splatmap/rasterizer.hpp"

#include <omp.h>

#include <algorithm>
#include <random>

using namespace splatmap;

namespace {

ProjectedGaussian<double> make_pg(Vec2d mean, Matrix2<double> cov, double opacity, Vec3d color = Vec3d(1, 1, 1),
                                  double depth = 1.0, std::uint32_t index = 0) {
    ProjectedGaussian<double> pg;
    pg.mean2d = mean;
    pg.cov2d = cov;
    pg.inv_cov2d = cov.inverse();
    pg.opacity = opacity;
    pg.color = color;
    pg.depth = depth;
    pg.source_index = index;
    return pg;
}

std::vector<int> tiles_containing(const TileGrid &grid, std::uint32_t entry) {
    std::vector<int> out;
    for (int t = 0; t < grid.tile_count(); ++t) {
        const auto list = grid.tile(t);
        if (std::find(list.begin(), list.end(), entry) != list.end()) out.push_back(t);
    }
    return out;
}

double max_pixel_alpha(const ProjectedGaussian<double> &pg, const TileRect &r) {
    double best = 0;
    for (int y = r.y0; y <= r.y1; ++y)
        for (int x = r.x0; x <= r.x1; ++x) best = std::max(best, alpha_weight(pg, Vec2d(x, y)));
    return best;
}

struct Scene {
    GaussianMap<double> map;
    Camera cam;
    std::vector<ProjectedGaussian<double>> projected;
};

Scene random_scene(std::mt19937_64 &rng, int max_gaussians, int w, int h, double anisotropy = 1.0) {
    Scene s;
    s.cam = random_camera(w, h, 0.9 * w, rng);
    RandomSceneOptions opt;
    opt.gaussians = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(max_gaussians));
    opt.anisotropy = anisotropy;
    if (anisotropy > 1) opt.min_pixels = 4, opt.max_pixels = 20;
    s.map = random_map<double>(opt, s.cam, rng);
    s.projected = project_map(s.map, s.cam, kDefaultNear);
    return s;
}

double max_abs_diff(const Plane<double> &a, const Plane<double> &b) { return (a - b).abs().maxCoeff(); }

double max_color_diff(const RgbImage<double> &a, const RgbImage<double> &b) {
    double m = 0;
    for (int c = 0; c < 3; ++c) m = std::max(m, max_abs_diff(a.ch[c], b.ch[c]));
    return m;
}

} // namespace

TEST_CASE("bin_and_sort examples") {
    const auto in = test::intrinsics(50, 31.5, 31.5, 64, 64);
    // sigma = 0.3 px after dilation-like covariance: 3-sigma radius about 1 px, well inside tile 0.
    std::vector<ProjectedGaussian<double>> one{make_pg(Vec2d(8, 8), 0.1 * Matrix2<double>::Identity(), 0.9)};
    const auto g1 = bin_and_sort<double>(one, in);
    CHECK(g1.pair_count() == 1);
    CHECK(tiles_containing(g1, 0) == std::vector<int>{0});

    // Centered on the corner shared by tiles 0, 1, 4, 5.
    std::vector<ProjectedGaussian<double>> corner{make_pg(Vec2d(15.5, 15.5), 4.0 * Matrix2<double>::Identity(), 0.9)};
    const auto g4 = bin_and_sort<double>(corner, in);
    CHECK(tiles_containing(g4, 0) == std::vector<int>{0, 1, 4, 5});
}

TEST_CASE("binning never drops a tile with visible contribution and culling keeps only visible tiles") {
    std::mt19937_64 rng(21);
    for (int scene = 0; scene < 5; ++scene) {
        auto s = random_scene(rng, 200, 64, 64, scene % 2 ? 8.0 : 1.0);
        for (const bool cull : {false, true}) {
            const auto grid = bin_and_sort<double>(s.projected, s.cam.intr, BinOptions{16, cull});
            for (std::uint32_t i = 0; i < s.projected.size(); ++i) {
                const auto listed = tiles_containing(grid, i);
                for (int t = 0; t < grid.tile_count(); ++t) {
                    const bool in_list = std::binary_search(listed.begin(), listed.end(), t);
                    const auto r = grid.pixel_rect(t);
                    if (max_pixel_alpha(s.projected[i], r) >= kAlphaCutoff) CHECK(in_list);
                    if (cull && in_list)
                        CHECK(max_alpha_over_rect(s.projected[i], double(r.x0), double(r.y0), double(r.x1),
                                                  double(r.y1)) >= kAlphaCutoff);
                }
            }
            // Depth-sorted lists with index tie-break.
            for (int t = 0; t < grid.tile_count(); ++t) {
                const auto list = grid.tile(t);
                for (std::size_t k = 1; k < list.size(); ++k) {
                    const auto &a = s.projected[list[k - 1]], &b = s.projected[list[k]];
                    CHECK((a.depth < b.depth || (a.depth == b.depth && a.source_index < b.source_index)));
                }
            }
        }
    }
}

TEST_CASE("min_mahalanobis_over_rect agrees with dense sampling") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> n01;
    for (int trial = 0; trial < 200; ++trial) {
        Eigen::Matrix2d a;
        a << n01(rng), n01(rng), n01(rng), n01(rng);
        const auto pg = make_pg(Vec2d(20 * n01(rng), 20 * n01(rng)), a * a.transpose() * 9 + 0.3 * Eigen::Matrix2d::Identity(), 0.8);
        const double x0 = -8, y0 = -5, x1 = 7, y1 = 9;
        const double exact = min_mahalanobis_over_rect(pg, x0, y0, x1, y1);
        double sampled = std::numeric_limits<double>::infinity();
        for (double y = y0; y <= y1 + 1e-9; y += 0.05)
            for (double x = x0; x <= x1 + 1e-9; x += 0.05) {
                const Vec2d d = pg.mean2d - Vec2d(x, y);
                sampled = std::min(sampled, d.dot(pg.inv_cov2d * d));
            }
        CHECK(exact <= sampled + 1e-9);
        CHECK(sampled - exact <= 0.05 * (1 + std::sqrt(sampled)) * std::sqrt(pg.inv_cov2d.norm()) * 2);
    }
}

TEST_CASE("cull_tiles on a slim Gaussian drops only invisible tiles") {
    const auto in = test::intrinsics(50, 63.5, 63.5, 128, 128);
    TileGrid grid;
    grid.tile_size = 16;
    grid.width = grid.height = 128;
    grid.tiles_x = grid.tiles_y = 8;
    // Eigenvalues 100 and 0.09 px^2, major axis horizontal.
    Matrix2<double> cov;
    cov << 100, 0, 0, 0.09;
    const auto pg = make_pg(Vec2d(64, 64), cov, 0.9);
    const auto rect = candidate_tiles(pg, 128, 128, 16);
    REQUIRE(rect);
    std::vector<int> candidates;
    for (int ty = rect->y0; ty <= rect->y1; ++ty)
        for (int tx = rect->x0; tx <= rect->x1; ++tx) candidates.push_back(ty * grid.tiles_x + tx);
    const auto kept = cull_tiles(pg, std::span<const int>(candidates), grid);
    CHECK(kept.size() < candidates.size());
    for (const int t : candidates) {
        const bool survives = std::find(kept.begin(), kept.end(), t) != kept.end();
        if (!survives) CHECK(max_pixel_alpha(pg, grid.pixel_rect(t)) < kAlphaCutoff);
        if (max_pixel_alpha(pg, grid.pixel_rect(t)) >= kAlphaCutoff) CHECK(survives);
    }
    (void)in;

    // Isotropic, every candidate within one sigma.
    const auto iso = make_pg(Vec2d(64, 64), 1e4 * Matrix2<double>::Identity(), 0.1);
    std::vector<int> near_tiles{27, 28, 35, 36};
    CHECK(cull_tiles(iso, std::span<const int>(near_tiles), grid).size() == 4);

    // Opacity below the cutoff.
    const auto faint = make_pg(Vec2d(64, 64), 4 * Matrix2<double>::Identity(), 0.5 / 255);
    CHECK(cull_tiles(faint, std::span<const int>(near_tiles), grid).empty());
    CHECK_FALSE(candidate_tiles(faint, 128, 128, 16));
}

TEST_CASE("render closed forms") {
    const auto in = test::intrinsics(50, 15.5, 15.5, 32, 32);
    std::vector<ProjectedGaussian<double>> one{
        make_pg(Vec2d(10, 12), Matrix2<double>::Identity(), 0.3, Vec3d(1, 0, 0), 2.0, 0)};
    const auto grid = bin_and_sort<double>(one, in);
    const auto out = render<double>(grid, one, in);
    CHECK((out.color.pixel(12, 10) - Vec3d(0.3, 0, 0)).norm() < 1e-12);
    CHECK(out.depth(12, 10) == doctest::Approx(0.6));
    CHECK(out.opacity(12, 10) == doctest::Approx(0.3));

    std::vector<ProjectedGaussian<double>> two{
        make_pg(Vec2d(10, 12), Matrix2<double>::Identity(), 0.5, Vec3d(1, 0, 0), 1.0, 0),
        make_pg(Vec2d(10, 12), Matrix2<double>::Identity(), 1.0, Vec3d(0, 0, 1), 2.0, 1)};
    const auto g2 = bin_and_sort<double>(two, in);
    const auto o2 = render<double>(g2, two, in);
    CHECK((o2.color.pixel(12, 10) - Vec3d(0.5, 0, 0.5 * 0.99)).norm() < 1e-12);
    CHECK(o2.opacity(12, 10) == doctest::Approx(0.5 + 0.5 * 0.99));
}

TEST_CASE("reference_render degenerate scenes") {
    const auto in = test::intrinsics(20, 9.5, 9.5, 20, 20);
    const auto empty = reference_render<double>({}, in);
    CHECK(empty.opacity.abs().maxCoeff() == 0.0);
    CHECK(empty.depth.abs().maxCoeff() == 0.0);
    CHECK(empty.color.ch[0].abs().maxCoeff() == 0.0);

    std::vector<ProjectedGaussian<double>> big{
        make_pg(Vec2d(9.5, 9.5), 1e8 * Matrix2<double>::Identity(), 0.7, Vec3d(1, 1, 1), 3.0)};
    const auto full = reference_render<double>(big, in);
    CHECK((full.opacity - 0.7).abs().maxCoeff() < 1e-6);
    CHECK((full.depth - 2.1).abs().maxCoeff() < 1e-5);
}

TEST_CASE("tiled render matches the reference renderer") {
    std::mt19937_64 rng(77);
    for (int scene = 0; scene < 25; ++scene) {
        const auto s = random_scene(rng, 500, 64, 64);
        const auto ref = reference_render<double>(s.projected, s.cam.intr);
        for (const bool cull : {true, false}) {
            const auto grid = bin_and_sort<double>(s.projected, s.cam.intr, BinOptions{16, cull});
            const auto exact = render<double>(grid, s.projected, s.cam.intr, RenderOptions{false, false});
            CHECK(max_color_diff(exact.color, ref.color) <= 1e-5);
            CHECK(max_abs_diff(exact.opacity, ref.opacity) <= 1e-5);
            const auto fast = render<double>(grid, s.projected, s.cam.intr, RenderOptions{true, false});
            CHECK(max_color_diff(fast.color, ref.color) <= 2e-4);
        }
    }
}

TEST_CASE("render invariants") {
    std::mt19937_64 rng(13);
    for (int scene = 0; scene < 10; ++scene) {
        auto s = random_scene(rng, 300, 48, 40);
        const auto grid = bin_and_sort<double>(s.projected, s.cam.intr);
        const auto out = render<double>(grid, s.projected, s.cam.intr);
        CHECK(out.opacity.minCoeff() >= 0.0);
        CHECK(out.opacity.maxCoeff() <= 1.0);
        CHECK((out.final_transmittance - (1.0 - out.opacity)).abs().maxCoeff() <= 1e-6);

        // Raising one Gaussian's opacity never lowers O anywhere.
        const std::size_t pick = rng() % s.projected.size();
        auto brighter = s.projected;
        brighter[pick].opacity = std::min(1.0, brighter[pick].opacity * 1.5);
        const auto o1 = reference_render<double>(s.projected, s.cam.intr).opacity;
        const auto o2 = reference_render<double>(brighter, s.cam.intr).opacity;
        CHECK((o2 - o1).minCoeff() >= -1e-12);
    }
}

TEST_CASE("a Gaussian behind the termination depth leaves the pixel unchanged") {
    const auto in = test::intrinsics(20, 7.5, 7.5, 16, 16);
    std::vector<ProjectedGaussian<double>> wall;
    for (int k = 0; k < 6; ++k)
        wall.push_back(make_pg(Vec2d(7.5, 7.5), 1e6 * Matrix2<double>::Identity(), 0.99, Vec3d(0.2, 0.4, 0.6),
                               1.0 + 0.1 * k, static_cast<std::uint32_t>(k)));
    const auto g0 = bin_and_sort<double>(wall, in);
    const auto before = render<double>(g0, wall, in);
    auto more = wall;
    more.push_back(make_pg(Vec2d(3, 3), 4 * Matrix2<double>::Identity(), 0.9, Vec3d(1, 0, 0), 50.0, 99));
    const auto g1 = bin_and_sort<double>(more, in);
    const auto after = render<double>(g1, more, in);
    CHECK(max_color_diff(before.color, after.color) == 0.0);
    CHECK(max_abs_diff(before.depth, after.depth) == 0.0);
}

TEST_CASE("depth of one opaque Gaussian approaches its z as alpha grows") {
    const auto in = test::intrinsics(20, 7.5, 7.5, 16, 16);
    double prev_gap = 10;
    for (const double o : {0.5, 0.9, 0.99}) {
        std::vector<ProjectedGaussian<double>> one{make_pg(Vec2d(5, 5), Matrix2<double>::Identity(), o, Vec3d(1, 1, 1), 4.0)};
        const auto out = reference_render<double>(one, in);
        const double gap = std::abs(out.depth(5, 5) - 4.0);
        CHECK(gap < prev_gap);
        prev_gap = gap;
    }
    CHECK(prev_gap == doctest::Approx(0.04));
}

TEST_CASE("render is bit-identical across thread counts") {
    std::mt19937_64 rng(99);
    const auto s = random_scene(rng, 400, 64, 48);
    omp_set_num_threads(1);
    const auto a = render_map<double>(s.map, s.cam);
    omp_set_num_threads(4);
    const auto b = render_map<double>(s.map, s.cam);
    CHECK(max_color_diff(a.targets.color, b.targets.color) == 0.0);
    CHECK(a.grid.entries == b.grid.entries);
}

TEST_CASE("render of a map agrees in float and double") {
    std::mt19937_64 rng(3);
    const auto s = random_scene(rng, 200, 64, 64);
    const auto d = render_map<double>(s.map, s.cam);
    const auto f = render_map<float>(s.map.cast<float>(), s.cam);
    for (int c = 0; c < 3; ++c) CHECK((d.targets.color.ch[c] - f.targets.color.ch[c].cast<double>()).abs().maxCoeff() < 1e-3);
}
