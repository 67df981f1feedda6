// Copyright Contributors to the splatmap project
// SPDX-License-Identifier: Apache-2.0
//
#include "doctest.h"
#include "test_util.hpp"

#include "splatmap/frontend.hpp"
#include "splatmap/mapper.hpp"
#include "splatmap/random_scene.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <set>
#include <thread>

using namespace splatmap;

namespace {

MapperConfig small_config() {
    MapperConfig cfg;
    cfg.n_sky = 2000;
    cfg.iterations_per_keyframe = 2;
    return cfg;
}

ColoredPoint colored(const Vec3d &p, float r = 0.5f, float g = 0.5f, float b = 0.5f) {
    return ColoredPoint{p, Eigen::Vector3f(r, g, b), PointSource::lidar};
}

// Points spread over the view of `cam` at depths in [2, 5].
std::vector<ColoredPoint> points_in_view(const Camera &cam, int n, std::mt19937_64 &rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0), depth(2.0, 5.0), col(0.0, 1.0);
    const Mat3d r_cw = cam.pose.rotation_wc.transpose();
    std::vector<ColoredPoint> out;
    for (int i = 0; i < n; ++i) {
        const double x = u(rng) * (cam.intr.width - 1), y = u(rng) * (cam.intr.height - 1), z = depth(rng);
        const Vec3d pc((x - cam.intr.cx) / cam.intr.fx * z, (y - cam.intr.cy) / cam.intr.fy * z, z);
        out.push_back(colored(r_cw * pc + cam.pose.center(), static_cast<float>(col(rng)),
                              static_cast<float>(col(rng)), static_cast<float>(col(rng))));
    }
    return out;
}

CameraFrame synthetic_frame(int index, const Camera &cam, std::vector<ColoredPoint> points) {
    CameraFrame f;
    f.frame_index = index;
    f.is_keyframe = is_keyframe_index(index);
    f.pose = cam.pose;
    f.intr = cam.intr;
    f.image = RgbImage<float>(cam.intr.height, cam.intr.width, 0.4f);
    f.points = std::move(points);
    return f;
}

// Small ray-cast dataset of the room, generated once per process.
const std::filesystem::path &room_dataset() {
    static test::TempDir dir("mapper_room");
    static const bool made = [] {
        DatasetConfig cfg;
        cfg.frames = 15;
        cfg.intr = CameraIntrinsics{40, 40, 31.5, 23.5, 64, 48};
        cfg.lidar.rays = 8000;
        cfg.keep_one_in = 4;
        generate_dataset(cfg, dir.path());
        return true;
    }();
    (void)made;
    return dir.path();
}

template <typename T> bool same_map(const GaussianMap<T> &a, const GaussianMap<T> &b) {
    return a.positions == b.positions && a.log_scales == b.log_scales && a.rotations == b.rotations &&
           a.opacity_logits == b.opacity_logits && a.sh == b.sh && a.sky == b.sky;
}

} // namespace

TEST_CASE("seed_gaussian_from_point examples") {
    MapperConfig cfg;
    const Camera cam{CameraPose{}, test::intrinsics(100, 50, 50, 100, 100)};
    const auto g = seed_gaussian_from_point<double>(colored(Vec3d(0.3, -0.2, 2.0)), cam, cfg);
    REQUIRE(g.has_value());
    for (int k = 0; k < 3; ++k) CHECK(std::exp(g->log_scale[k]) == doctest::Approx(0.02).epsilon(1e-12));
    CHECK(g->sh.cwiseAbs().maxCoeff() < 1e-15);
    CHECK(sigmoid(g->opacity_logit) == doctest::Approx(0.1).epsilon(1e-9));
    CHECK(g->rotation == Vector4<double>(1, 0, 0, 0));
    CHECK(g->position == Vec3d(0.3, -0.2, 2.0));
    CHECK_FALSE(g->is_sky);

    const auto red = seed_gaussian_from_point<double>(colored(Vec3d(0, 0, 3), 1, 0, 0.5f), cam, cfg);
    REQUIRE(red.has_value());
    CHECK(red->sh[0] == doctest::Approx(0.5 / 0.28209479177387814));
    CHECK(red->sh[1] == doctest::Approx(-0.5 / 0.28209479177387814));
    CHECK(red->sh[2] == doctest::Approx(0.0));
    CHECK(red->sh.tail(kShCoeffs - 3).cwiseAbs().maxCoeff() == 0.0);

    CHECK_FALSE(seed_gaussian_from_point<double>(colored(Vec3d(0, 0, -1)), cam, cfg).has_value());
    CHECK_FALSE(seed_gaussian_from_point<double>(colored(Vec3d(0, 0, 0.001)), cam, cfg).has_value());
}

TEST_CASE("nearest_neighbor_distances is exact") {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> n01;
    for (const int n : {2, 3, 50, 700}) {
        std::vector<Vec3d> pts;
        for (int i = 0; i < n; ++i) pts.emplace_back(n01(rng), 0.1 * n01(rng), 3 * n01(rng));
        const auto nn = nearest_neighbor_distances(pts);
        for (int i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (int j = 0; j < n; ++j)
                if (j != i) best = std::min(best, (pts[i] - pts[j]).norm());
            CHECK(nn[static_cast<std::size_t>(i)] == best);
        }
    }
    const std::vector<Vec3d> one{Vec3d::Zero()};
    CHECK(std::isinf(nearest_neighbor_distances(one)[0]));
}

TEST_CASE("sky shell lies on the upper hemisphere, white and semi-opaque") {
    MapperConfig cfg;
    cfg.n_sky = 3000;
    const auto sky = init_sky<double>(cfg, 5);
    REQUIRE(sky.size() == 3000);
    for (const auto &g : sky) {
        CHECK(g.position.norm() == doctest::Approx(cfg.sky_radius).epsilon(1e-12));
        CHECK(g.position.z() >= 0);
        CHECK(g.is_sky);
        CHECK(sigmoid(g.opacity_logit) == doctest::Approx(0.7).epsilon(1e-12));
        for (int c = 0; c < 3; ++c) CHECK(g.sh[c] == doctest::Approx(0.5 / 0.28209479177387814));
        CHECK(g.log_scale[0] == g.log_scale[1]);
    }
    cfg.n_sky = 1;
    const auto lone = init_sky<double>(cfg, 5);
    REQUIRE(lone.size() == 1);
    CHECK(std::exp(lone[0].log_scale[0]) == doctest::Approx(1e4 * std::sqrt(4 * std::numbers::pi)).epsilon(1e-12));
}

TEST_CASE("sky nearest-neighbor spacing matches uniform hemisphere sampling") {
    MapperConfig cfg;
    cfg.n_sky = 10000;
    // Mean nearest-neighbor distance of a uniform planar process: 0.5 / sqrt(density).
    const double expected = 0.5 * std::sqrt(2 * std::numbers::pi * cfg.sky_radius * cfg.sky_radius / cfg.n_sky);
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto sky = init_sky<float>(cfg, seed);
        double mean = 0;
        for (const auto &g : sky) mean += std::exp(static_cast<double>(g.log_scale[0]));
        mean /= cfg.n_sky;
        CHECK(std::abs(mean - expected) < 0.2 * expected);
    }
}

TEST_CASE("bootstrap seeds every first-frame point plus the sky") {
    std::mt19937_64 rng(2);
    const Camera cam{CameraPose::look_at(Vec3d(0, -4, 1), Vec3d(0, 0, 1)), test::intrinsics(50, 31.5, 23.5, 64, 48)};
    const auto cfg = small_config();
    GaussianMap<double> map;
    CHECK(bootstrap(map, synthetic_frame(0, cam, points_in_view(cam, 1000, rng)), cfg, 0) == 1000);
    CHECK(map.size() == 1000 + 2000);
    CHECK(map.sky_count() == 2000);
    CHECK_THROWS_AS(bootstrap(map, synthetic_frame(0, cam, {}), cfg, 0), std::logic_error);

    GaussianMap<double> empty_fg;
    CHECK(bootstrap(empty_fg, synthetic_frame(0, cam, {}), cfg, 0) == 0);
    CHECK(empty_fg.size() == empty_fg.sky_count());

    auto no_sky = cfg;
    no_sky.sky = false;
    GaussianMap<double> fg_only;
    bootstrap(fg_only, synthetic_frame(0, cam, points_in_view(cam, 10, rng)), no_sky, 0);
    CHECK(fg_only.sky_count() == 0);
}

TEST_CASE("a sky-only map renders white where it is opaque") {
    MapperConfig cfg;
    GaussianMap<float> map;
    const Camera up{CameraPose::look_at(Vec3d(0, 0, 1.5), Vec3d(1, 0, 6)), test::intrinsics(40, 31.5, 23.5, 64, 48)};
    bootstrap(map, synthetic_frame(0, up, {}), cfg, 0);
    const auto pass = render_map(map, up);
    for (int c = 0; c < 3; ++c) CHECK((pass.targets.color.ch[c] - pass.targets.opacity).abs().maxCoeff() < 1e-5f);
    CHECK(pass.targets.opacity.mean() > 0.9f);
}

TEST_CASE("expansion mask examples") {
    std::mt19937_64 rng(3);
    const Camera cam{CameraPose{}, test::intrinsics(40, 15.5, 11.5, 32, 24)};
    GaussianMap<double> behind;
    behind.append(test::simple_gaussian<double>(Vec3d(0, 0, -2), -1.0, 3.0));
    CHECK(expansion_mask(behind, cam, 0.99).all());

    GaussianMap<double> wall;
    for (int i = 0; i < 3; ++i) wall.append(test::simple_gaussian<double>(Vec3d(0, 0, 2 + 0.1 * i), 1.0, 12.0));
    const auto covered = expansion_mask(wall, cam, 0.99);
    CHECK_FALSE(covered(12, 16));
    CHECK(covered.count() == 0);
}

TEST_CASE("expansion mask thresholds the reference opacity") {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 10; ++trial) {
        const Camera cam = random_camera(48, 40, 45, rng);
        RandomSceneOptions opt;
        opt.gaussians = 300;
        opt.max_pixels = 8;
        const auto map = random_map<double>(opt, cam, rng);
        const auto mask = expansion_mask(map, cam, 0.9);
        const auto projected = project_map(map, cam);
        const auto ref = reference_render<double>(projected, cam.intr);
        int compared = 0;
        for (int y = 0; y < 40; ++y)
            for (int x = 0; x < 48; ++x) {
                if (std::abs(ref.opacity(y, x) - 0.9) < 2e-4) continue;
                CHECK(mask(y, x) == (ref.opacity(y, x) < 0.9));
                ++compared;
            }
        CHECK(compared > 1800);
    }
}

TEST_CASE("expand_with_mask follows the mask exactly") {
    std::mt19937_64 rng(5);
    const Camera cam{CameraPose::look_at(Vec3d(1, -3, 0.5), Vec3d(0, 0, 0.8)), test::intrinsics(40, 23.5, 17.5, 48, 36)};
    const auto pts = points_in_view(cam, 500, rng);
    const MapperConfig cfg;

    GaussianMap<double> map;
    CHECK(expand_with_mask(map, cam, Plane<bool>::Constant(36, 48, false), pts, cfg) == 0);
    CHECK(expand_with_mask(map, cam, Plane<bool>::Constant(36, 48, true), pts, cfg) == 500);

    Plane<bool> half = Plane<bool>::Constant(36, 48, false);
    half.leftCols(24).setConstant(true);
    std::size_t expect = 0;
    std::vector<ColoredPoint> with_outside = pts;
    with_outside.push_back(colored(cam.pose.center() - cam.pose.rotation_wc.row(2).transpose()));
    for (const auto &p : with_outside) {
        const Vec3d pc = cam.pose.to_camera(p.position_w);
        if (pc.z() <= cfg.near) continue;
        const double u = cam.intr.fx * pc.x() / pc.z() + cam.intr.cx;
        expect += std::lround(u) < 24;
    }
    GaussianMap<double> halfmap;
    CHECK(expand_with_mask(halfmap, cam, half, with_outside, cfg) == expect);
    for (std::size_t i = 0; i < halfmap.size(); ++i) {
        const auto px = landing_pixel(halfmap.position(i), cam, cfg.near);
        REQUIRE(px.has_value());
        CHECK(half((*px)[1], (*px)[0]));
    }
}

TEST_CASE("re-feeding points of a saturated view adds nothing") {
    std::mt19937_64 rng(6);
    const Camera cam{CameraPose{}, test::intrinsics(40, 15.5, 11.5, 32, 24)};
    GaussianMap<double> map;
    for (int i = 0; i < 3; ++i) map.append(test::simple_gaussian<double>(Vec3d(0, 0, 2 + 0.1 * i), 1.0, 12.0));
    CHECK(expand(map, cam, points_in_view(cam, 200, rng), MapperConfig{}) == 0);
    GaussianMap<double> fresh;
    fresh.append(test::simple_gaussian<double>(Vec3d(0, 0, -2), -1.0, 3.0));
    CHECK(expand(fresh, cam, points_in_view(cam, 200, rng), MapperConfig{}) == 200);
}

TEST_CASE("sample_keyframes draws distinct indices and clamps to the store size") {
    std::mt19937_64 rng(7);
    CHECK(sample_keyframes(1, 100, rng) == std::vector<std::size_t>{0});
    CHECK(sample_keyframes(0, 100, rng).empty());
    std::vector<int> hits(20, 0);
    for (int t = 0; t < 2000; ++t) {
        const auto s = sample_keyframes(20, 5, rng);
        CHECK(s.size() == 5);
        CHECK(std::set<std::size_t>(s.begin(), s.end()).size() == 5);
        for (auto k : s) ++hits[k];
    }
    // Each index is drawn with probability 1/4: 500 expected, sd about 19.
    for (int h : hits) CHECK(std::abs(h - 500) < 100);
    const auto all = sample_keyframes(30, 30, rng);
    std::vector<std::size_t> sorted = all;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < 30; ++i) CHECK(sorted[i] == i);
    CHECK(all != sorted);
}

TEST_CASE("one keyframe with K = 100 trains once per round") {
    const auto info = load_dataset_info(room_dataset());
    auto cfg = small_config();
    cfg.sky = false;
    cfg.iterations_per_keyframe = 3;
    Mapper<float> mapper(cfg);
    mapper.process_frame(load_frame(info, 0));
    CHECK(mapper.log().size() == 3);
    CHECK(mapper.store().size() == 1);
}

TEST_CASE("process_frame cadence, counting and ordering") {
    const auto info = load_dataset_info(room_dataset());
    auto cfg = small_config();
    cfg.sky = false;
    Mapper<float> mapper(cfg);
    std::size_t prev = 0;
    std::vector<std::size_t> log_sizes;
    for (int i = 0; i < 10; ++i) {
        const auto frame = load_frame(info, i);
        mapper.process_frame(frame);
        CHECK(mapper.map().size() >= prev);
        prev = mapper.map().size();
        if (i > 0 && i < 5) CHECK(mapper.buffered_points() > 0);
        log_sizes.push_back(mapper.log().size());
    }
    // Keyframes 0 and 5: two optimize_map calls of 2 rounds over 1 and 2 keyframes.
    CHECK(mapper.store().size() == 2);
    CHECK(log_sizes[4] == 2);
    CHECK(log_sizes[9] == 2 + 4);
    CHECK(mapper.store().keyframes[1].frame_index == 5);
    CHECK(mapper.buffered_points() > 0);
    CHECK_THROWS_AS(mapper.process_frame(load_frame(info, 9)), std::logic_error);
    CHECK_THROWS_AS(mapper.process_frame(load_frame(info, 3)), std::logic_error);
}

TEST_CASE("sky Gaussians are created only at bootstrap") {
    const auto info = load_dataset_info(room_dataset());
    auto cfg = small_config();
    cfg.optimize = false;
    Mapper<float> mapper(cfg);
    mapper.process_frame(load_frame(info, 0));
    const auto after_bootstrap = mapper.map().sky;
    for (int i = 1; i < 15; ++i) {
        mapper.process_frame(load_frame(info, i));
        CHECK(mapper.map().sky_count() == 2000);
        const auto &sky = mapper.map().sky;
        CHECK(std::equal(after_bootstrap.begin(), after_bootstrap.end(), sky.begin()));
        CHECK(std::none_of(sky.begin() + static_cast<std::ptrdiff_t>(after_bootstrap.size()), sky.end(),
                           [](auto v) { return v != 0; }));
    }
    CHECK(mapper.map().size() > after_bootstrap.size());
}

TEST_CASE("replay loss decreases on a static scene") {
    const auto info = load_dataset_info(room_dataset());
    auto cfg = small_config();
    cfg.sky = false;
    cfg.optimize = false;
    Mapper<double> mapper(cfg);
    for (int i = 0; i < 15; ++i) mapper.process_frame(load_frame(info, i));
    REQUIRE(mapper.store().size() == 3);
    cfg.iterations_per_keyframe = 1;
    std::vector<double> round_loss;
    for (int round = 0; round < 40; ++round) {
        const auto log = optimize_map(mapper.map(), mapper.store(), mapper.training(), cfg);
        double sum = 0;
        for (const auto &e : log) sum += e.loss;
        round_loss.push_back(sum / static_cast<double>(log.size()));
    }
    std::vector<double> avg;
    for (std::size_t r = 4; r < round_loss.size(); ++r)
        avg.push_back((round_loss[r] + round_loss[r - 1] + round_loss[r - 2] + round_loss[r - 3] + round_loss[r - 4]) / 5);
    for (std::size_t r = 1; r < avg.size(); ++r) CHECK(avg[r] <= avg[r - 1]);
    CHECK(round_loss.back() < 0.7 * round_loss.front());
}

TEST_CASE("mapping is bitwise reproducible") {
    const auto info = load_dataset_info(room_dataset());
    auto cfg = small_config();
    cfg.seed = 42;
    auto run = [&] {
        Mapper<float> m(cfg);
        for (int i = 0; i < 11; ++i) m.process_frame(load_frame(info, i));
        return m;
    };
    const auto a = run(), b = run();
    CHECK(same_map(a.map(), b.map()));
    REQUIRE(a.log().size() == b.log().size());
    for (std::size_t i = 0; i < a.log().size(); ++i) CHECK(a.log()[i].loss == b.log()[i].loss);
}

TEST_CASE("checkpoint resume continues bit-identically") {
    const auto info = load_dataset_info(room_dataset());
    auto cfg = small_config();
    test::TempDir dir("checkpoint");
    Mapper<double> straight(cfg);
    for (int i = 0; i < 15; ++i) {
        straight.process_frame(load_frame(info, i));
        if (i == 7) straight.save_checkpoint(dir.path());
    }
    auto resumed = Mapper<double>::load_checkpoint(dir.path(), cfg);
    CHECK(resumed.last_frame_index() == 7);
    CHECK(resumed.buffered_points() > 0);
    for (int i = 8; i < 15; ++i) resumed.process_frame(load_frame(info, i));
    CHECK(same_map(straight.map(), resumed.map()));
    CHECK(straight.training().adam == resumed.training().adam);
    CHECK(straight.store().keyframes[2].exposure.matrix == resumed.store().keyframes[2].exposure.matrix);
    CHECK(std::filesystem::exists(dir.path() / "map.bin"));
    CHECK_THROWS(Mapper<double>::load_checkpoint(dir.path() / "missing", cfg));
}

TEST_CASE("global exposure is shared by every keyframe") {
    const auto info = load_dataset_info(room_dataset());
    auto cfg = small_config();
    cfg.global_exposure = true;
    Mapper<float> m(cfg);
    for (int i = 0; i < 11; ++i) m.process_frame(load_frame(info, i));
    const auto &kfs = m.store().keyframes;
    REQUIRE(kfs.size() >= 2);
    CHECK(kfs.front().exposure.matrix != ExposureAffine<float>{}.matrix);
    for (const auto &kf : kfs) {
        CHECK(kf.exposure.matrix == kfs.front().exposure.matrix);
        CHECK(kf.exposure_adam.steps == kfs.front().exposure_adam.steps);
    }
}

TEST_CASE("pipeline through the bounded queue matches sequential processing") {
    const auto info = load_dataset_info(room_dataset());
    auto cfg = small_config();
    Mapper<float> seq(cfg), piped(cfg);
    for (int i = 0; i < 11; ++i) seq.process_frame(load_frame(info, i));
    run_pipeline(
        piped,
        [&](FrameQueue &q) {
            for (int i = 0; i < 11; ++i) q.push(load_frame(info, i));
        },
        2);
    CHECK(same_map(seq.map(), piped.map()));

    Mapper<float> failing(cfg);
    CHECK_THROWS_AS(run_pipeline(
                        failing,
                        [&](FrameQueue &q) {
                            q.push(load_frame(info, 1));
                            q.push(load_frame(info, 0));
                        },
                        1),
                    std::logic_error);
}

TEST_CASE("bounded queue blocks the producer when full") {
    BoundedQueue<int> q(2);
    CHECK(q.push(1));
    CHECK(q.push(2));
    std::atomic<bool> pushed{false};
    std::thread producer([&] {
        q.push(3);
        pushed = true;
    });
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
    CHECK_FALSE(pushed.load());
    CHECK(q.pop() == 1);
    producer.join();
    CHECK(pushed.load());
    q.close();
    CHECK(q.pop() == 2);
    CHECK(q.pop() == 3);
    CHECK_FALSE(q.pop().has_value());
    CHECK_FALSE(q.push(4));
}

TEST_CASE("sky depth adds behind the foreground") {
    // With every sky Gaussian behind the foreground, D_with = D_fg + T_fg * D_sky_alone.
    const Camera cam{CameraPose::look_at(Vec3d(0, 0, 1.5), Vec3d(1, 0, 3)), test::intrinsics(40, 23.5, 17.5, 48, 36)};
    std::mt19937_64 rng(8);
    MapperConfig cfg;
    cfg.n_sky = 5000;
    GaussianMap<double> fg, both, sky_only;
    const auto frame = synthetic_frame(0, cam, points_in_view(cam, 400, rng));
    auto no_sky = cfg;
    no_sky.sky = false;
    bootstrap(fg, frame, no_sky, 0);
    bootstrap(both, frame, cfg, 0);
    bootstrap(sky_only, synthetic_frame(0, cam, {}), cfg, 0);
    RenderOptions opt;
    opt.early_termination = false;
    const auto a = render_map(fg, cam, {}, opt).targets, b = render_map(both, cam, {}, opt).targets,
               s = render_map(sky_only, cam, {}, opt).targets;
    for (int y = 0; y < 36; ++y)
        for (int x = 0; x < 48; ++x) {
            const double t = 1 - a.opacity(y, x);
            CHECK(b.depth(y, x) == doctest::Approx(a.depth(y, x) + t * s.depth(y, x)).epsilon(1e-9));
            CHECK(b.opacity(y, x) == doctest::Approx(a.opacity(y, x) + t * s.opacity(y, x)).epsilon(1e-12));
        }
}

TEST_CASE("mapper config validation") {
    MapperConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.tau = 0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = MapperConfig{};
    cfg.n_sky = 0;
    CHECK_THROWS_AS(Mapper<float>{cfg}, std::invalid_argument);
}
