// Copyright Contributors to the splatmap project
// SPDX-License-Identifier: Apache-2.0
//
// Acceptance suite: one PASS/FAIL line per criterion, exit status 0 only if
// every selected criterion passes.
//
#include "splatmap/cli.hpp"
#include "splatmap/image.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

using namespace splatmap;
namespace fs = std::filesystem;

namespace {

// Tolerances and thresholds.
constexpr double kC1NoTermination = 1e-5, kC1Termination = 2e-4, kC1Seconds = 120;
constexpr double kC2Tolerance = 1e-4, kC2Seconds = 300;
constexpr double kC3Double = 1e-12, kC3Float = 1e-3;
constexpr double kC4MaxDiff = 2e-4, kC4MinReduction = 0.30, kC4Anisotropy = 30;
constexpr double kC5MinGain = 10.0, kC5Seconds = 15 * 60;
// Calibrated with the reference run recorded in the README (room, 50 frames, 160x120).
constexpr double kC5MinTrainPsnr = 27.5;
constexpr double kC7Opacity = 0.5, kC7Foreground = 0.99, kC7DepthDiff = 1e-3;
constexpr double kC8Within = 1.0, kC8Degrade = 2.0, kC8GainMin = 0.7, kC8GainMax = 1.3;
constexpr double kC9Exact = 1e-6, kC9Median = 0.05;
constexpr double kC10Forward = 10.0, kC10Adam = 3.0;

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string num(double v, const char *f = "%.4g") {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

struct Outcome {
    bool pass = false;
    std::string detail;
};

double max_color_diff(const RgbImage<double> &a, const RgbImage<double> &b) {
    double m = 0;
    for (int c = 0; c < 3; ++c) m = std::max(m, (a.ch[c] - b.ch[c]).abs().maxCoeff());
    return m;
}

template <typename T> double inf_norm(const std::vector<T> &v) {
    double m = 0;
    for (const auto x : v) m = std::max(m, std::abs(static_cast<double>(x)));
    return m;
}

template <typename T> double relative_gap(const GradientBuffer<T> &a, const GradientBuffer<T> &b) {
    double worst = 0;
    auto one = [&](const std::vector<T> &x, const std::vector<T> &y) {
        double diff = 0;
        for (std::size_t i = 0; i < x.size(); ++i)
            diff = std::max(diff, std::abs(static_cast<double>(x[i]) - static_cast<double>(y[i])));
        const double scale = std::max(inf_norm(x), inf_norm(y));
        if (scale > 0) worst = std::max(worst, diff / scale);
    };
    one(a.d_position, b.d_position);
    one(a.d_log_scale, b.d_log_scale);
    one(a.d_rotation, b.d_rotation);
    one(a.d_opacity_logit, b.d_opacity_logit);
    one(a.d_sh, b.d_sh);
    return worst;
}

struct Suite {
    fs::path work;
    bool verbose = false;
    std::map<std::string, MapSummary> runs;

    std::ostream &log() { return verbose ? std::cout : null_; }

    fs::path dataset(const std::string &name, const std::function<void(RunConfig &)> &tweak = {}) {
        const fs::path dir = work / "data" / name;
        if (!fs::exists(dir / "manifest.txt")) {
            RunConfig cfg;
            if (tweak) tweak(cfg);
            cfg.output_path = dir;
            cfg.quiet = true;
            if (cmd_generate(cfg, log()) != kExitOk) throw std::runtime_error("dataset generation failed: " + name);
        }
        return dir;
    }

    // A cmd_map run, memoized by name.
    const MapSummary &map_run(const std::string &name, const fs::path &data,
                              const std::function<void(RunConfig &)> &tweak = {}) {
        if (auto it = runs.find(name); it != runs.end()) return it->second;
        RunConfig cfg;
        cfg.dataset_path = data;
        cfg.output_path = work / "runs" / name;
        cfg.quiet = !verbose;
        if (tweak) tweak(cfg);
        fs::remove_all(cfg.output_path);
        std::cout << "  running map '" << name << "'..." << std::endl;
        return runs[name] = run_map(cfg, log());
    }

    fs::path room() { return dataset("room"); }

private:
    std::ostringstream null_;
};

Outcome criterion1(Suite &) {
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(1001);
    double worst_exact = 0, worst_fast = 0;
    for (int scene = 0; scene < 100; ++scene) {
        const Camera cam = random_camera(64, 64, 0.9 * 64, rng);
        RandomSceneOptions opt;
        opt.gaussians = 1 + static_cast<int>(rng() % 500);
        const auto map = random_map<double>(opt, cam, rng);
        const auto projected = project_map(map, cam, kDefaultNear);
        const auto ref = reference_render<double>(projected, cam.intr);
        const auto grid = bin_and_sort<double>(projected, cam.intr);
        const auto exact = render<double>(grid, projected, cam.intr, RenderOptions{false, false});
        const auto fast = render<double>(grid, projected, cam.intr, RenderOptions{true, false});
        worst_exact = std::max({worst_exact, max_color_diff(exact.color, ref.color),
                                (exact.opacity - ref.opacity).abs().maxCoeff()});
        worst_fast = std::max({worst_fast, max_color_diff(fast.color, ref.color),
                               (fast.opacity - ref.opacity).abs().maxCoeff()});
    }
    const double secs = seconds_since(t0);
    return {worst_exact <= kC1NoTermination && worst_fast <= kC1Termination && secs < kC1Seconds,
            "100 scenes: max diff " + num(worst_exact) + " without termination (<= 1e-5), " + num(worst_fast) +
                " with (<= 2e-4); " + num(secs, "%.1f") + " s (< 120 s)"};
}

Outcome criterion2(Suite &) {
    const auto t0 = std::chrono::steady_clock::now();
    GradcheckConfig cfg;
    cfg.scenes = 20;
    cfg.max_gaussians = 30;
    cfg.width = cfg.height = 24;
    cfg.rel_tol = kC2Tolerance;
    cfg.abs_floor = 1e-7;
    const auto s = run_gradcheck(cfg);
    const double secs = seconds_since(t0);
    return {s.passed && s.worst <= kC2Tolerance && secs < kC2Seconds,
            "20 scenes, " + std::to_string(s.checked) + " parameters: worst relative error " + num(s.worst) +
                " (<= 1e-4); " + num(secs, "%.1f") + " s (< 300 s)"};
}

Outcome criterion3(Suite &) {
    std::mt19937_64 rng(1003);
    double worst_d = 0, worst_f = 0;
    for (int scene = 0; scene < 50; ++scene) {
        const Camera cam = random_camera(48, 40, 1.1 * 48, rng);
        RandomSceneOptions opt;
        opt.gaussians = 1 + static_cast<int>(rng() % 150);
        opt.anisotropy = 2.0;
        opt.opacity_logit_max = 5.0;
        const auto map = random_map<double>(opt, cam, rng);
        const auto target = random_image<double>(40, 48, rng);
        auto both = [&]<typename T>(const GaussianMap<T> &m, const RgbImage<T> &tgt) {
            const auto pass = render_map<T>(m, cam);
            const auto loss = photometric_loss<T>(pass.targets.color, tgt, ExposureAffine<T>{}, T(0.2));
            const auto a = backward_per_pixel<T>(m, cam, pass.targets, loss.d_rendered, pass.projected, pass.grid);
            const auto b = backward_per_gaussian<T>(m, cam, pass.targets, loss.d_rendered, pass.projected, pass.grid);
            return relative_gap(a, b);
        };
        worst_d = std::max(worst_d, both(map, target));
        worst_f = std::max(worst_f, both(map.cast<float>(), target.cast<float>()));
    }
    return {worst_d <= kC3Double && worst_f <= kC3Float,
            "50 scenes: relative gap " + num(worst_d) + " in 64-bit (<= 1e-12), " + num(worst_f) +
                " in 32-bit (<= 1e-3)"};
}

Outcome criterion4(Suite &) {
    std::mt19937_64 rng(1004);
    double worst = 0;
    std::size_t pairs_on = 0, pairs_off = 0;
    for (int scene = 0; scene < 30; ++scene) {
        const Camera cam = random_camera(128, 96, 0.9 * 128, rng);
        RandomSceneOptions opt;
        opt.gaussians = 100 + static_cast<int>(rng() % 400);
        opt.anisotropy = kC4Anisotropy;
        opt.min_pixels = 4;
        opt.max_pixels = 20;
        const auto map = random_map<double>(opt, cam, rng);
        const auto on = render_map(map, cam, BinOptions{kDefaultTileSize, true});
        const auto off = render_map(map, cam, BinOptions{kDefaultTileSize, false});
        worst = std::max(worst, max_color_diff(on.targets.color, off.targets.color));
        pairs_on += on.grid.pair_count();
        pairs_off += off.grid.pair_count();
    }
    const double reduction = 1.0 - static_cast<double>(pairs_on) / static_cast<double>(pairs_off);
    return {worst <= kC4MaxDiff && reduction >= kC4MinReduction,
            "30 slim scenes (anisotropy 30): max diff " + num(worst) + " (<= 2e-4), pairs " +
                std::to_string(pairs_off) + " -> " + std::to_string(pairs_on) + " (" + num(100 * reduction, "%.1f") +
                "% fewer, >= 30%)"};
}

Outcome criterion5(Suite &s) {
    const auto data = s.room();
    const auto &init = s.map_run("room_init", data, [](RunConfig &c) { c.mapper.optimize = false; });
    const auto &full = s.map_run("room", data);
    const double gain = full.train_psnr - init.train_psnr;
    return {gain >= kC5MinGain && full.train_psnr >= kC5MinTrainPsnr && full.seconds < kC5Seconds,
            "train PSNR " + num(init.train_psnr, "%.2f") + " -> " + num(full.train_psnr, "%.2f") + " dB (+" +
                num(gain, "%.2f") + ", >= +10; absolute >= " + num(kC5MinTrainPsnr, "%.1f") + "), novel " +
                num(full.novel_psnr, "%.2f") + " dB; " + num(full.seconds, "%.0f") + " s (< 900 s)"};
}

std::vector<ColoredPoint> merged_points(const DatasetInfo &info, int keyframe) {
    std::vector<ColoredPoint> pts;
    for (int i = std::max(0, keyframe - 4); i <= keyframe; ++i) {
        if (is_holdout_frame(i, 10)) continue;
        const auto f = load_frame(info, i);
        pts.insert(pts.end(), f.points.begin(), f.points.end());
    }
    return pts;
}

Outcome criterion6(Suite &s) {
    const auto data = s.room();
    s.map_run("room", data);
    const auto info = load_dataset_info(data);
    const MapperConfig cfg;
    auto mapper = Mapper<float>::load_checkpoint(s.work / "runs" / "room" / "checkpoint", cfg);

    // Keep optimizing one keyframe until its view is saturated.
    constexpr int kKeyframe = 25, kMaxSteps = 300;
    auto &store = mapper.store().keyframes;
    const auto it = std::find_if(store.begin(), store.end(), [](const auto &k) { return k.frame_index == kKeyframe; });
    if (it == store.end()) return {false, "keyframe 25 missing from the mapped store"};
    const auto before = expansion_mask(mapper.map(), it->camera, cfg.tau, cfg).count();
    int steps = 0;
    auto open = before;
    while (open > 0 && steps < kMaxSteps) {
        train_step(mapper.map(), *it, mapper.training(), cfg);
        ++steps;
        open = expansion_mask(mapper.map(), it->camera, cfg.tau, cfg).count();
    }
    const auto pts = merged_points(info, kKeyframe);
    // Points landing on pixels that already reached tau; none of them may be seeded.
    const auto mask = expansion_mask(mapper.map(), it->camera, cfg.tau, cfg);
    std::size_t on_open = 0, on_saturated = 0;
    for (const auto &p : pts)
        if (const auto px = landing_pixel(p.position_w, it->camera, cfg.near))
            ++(mask((*px).y(), (*px).x()) ? on_open : on_saturated);
    const std::size_t size_before = mapper.map().size();
    const std::size_t added_saturated = expand(mapper.map(), it->camera, pts, cfg);
    const bool saturated = open == 0;

    GaussianMap<float> fresh;
    const auto first = load_frame(info, 0);
    bootstrap(fresh, first, cfg, 0);
    const auto unseen = load_frame(info, 45);
    const auto unseen_pts = merged_points(info, 45);
    const std::size_t added_fresh = expand(fresh, unseen.camera(), unseen_pts, cfg);

    return {saturated && added_saturated == 0 && mapper.map().size() == size_before && added_fresh > 0,
            "keyframe 25: " + std::to_string(before) + " pixels below tau -> " + std::to_string(open) + " after " +
                std::to_string(steps) + " extra steps; re-feeding " + std::to_string(pts.size()) + " points added " +
                std::to_string(added_saturated) + " (== 0; " + std::to_string(on_open) + " landed on open pixels, " +
                std::to_string(on_saturated) + " on saturated ones); fresh map viewing frame 45 added " +
                std::to_string(added_fresh) + " (> 0)"};
}

GaussianMap<float> without_sky(const GaussianMap<float> &map) {
    GaussianMap<float> out;
    std::vector<Gaussian<float>> fg;
    for (std::size_t i = 0; i < map.size(); ++i)
        if (!map.sky[i]) fg.push_back(map.get(i));
    out.append(fg);
    return out;
}

Outcome criterion7(Suite &s) {
    const auto data = s.dataset("courtyard", [](RunConfig &c) { c.dataset.scene = "courtyard"; });
    const auto info = load_dataset_info(data);
    const MapperConfig cfg;

    // (a) sky pixels right after bootstrap: the ray escapes the scene above the horizon.
    const auto scene = make_scene("courtyard");
    const auto frame = load_frame(info, 0);
    GaussianMap<float> boot;
    bootstrap(boot, frame, cfg, cfg.seed);
    const auto pass = render_map(boot, frame.camera());
    const Mat3d r_cw = frame.pose.rotation_wc.transpose();
    double min_o = 1, sum_o = 0;
    int sky_pixels = 0, below = 0;
    for (int y = 0; y < info.intr.height; ++y)
        for (int x = 0; x < info.intr.width; ++x) {
            const Vec3d d = (r_cw * Vec3d((x - info.intr.cx) / info.intr.fx, (y - info.intr.cy) / info.intr.fy, 1))
                                .normalized();
            if (d.z() <= 0 || scene.intersect(frame.pose.center(), d)) continue;
            const double o = pass.targets.opacity(y, x);
            below += o < kC7Opacity;
            min_o = std::min(min_o, o);
            sum_o += o;
            ++sky_pixels;
        }
    const bool pass_a = sky_pixels > 0 && min_o >= kC7Opacity;

    // (b) depth at opaque foreground pixels of the mapped courtyard, with and without the sky.
    s.map_run("courtyard", data);
    auto mapper = Mapper<float>::load_checkpoint(s.work / "runs" / "courtyard" / "checkpoint", cfg);
    const auto fg = without_sky(mapper.map());
    double worst = 0;
    std::size_t opaque = 0, leaking = 0;
    for (const auto &kf : mapper.store().keyframes) {
        const auto with = render_map(mapper.map(), kf.camera).targets;
        const auto bare = render_map(fg, kf.camera).targets;
        for (int y = 0; y < with.height(); ++y)
            for (int x = 0; x < with.width(); ++x) {
                if (bare.opacity(y, x) < kC7Foreground) continue;
                ++opaque;
                const double d = std::abs(static_cast<double>(with.depth(y, x)) - bare.depth(y, x));
                worst = std::max(worst, d);
                leaking += d >= kC7DepthDiff;
            }
    }
    const bool pass_b = opaque > 0 && worst < kC7DepthDiff;
    return {pass_a && pass_b,
            std::string("(a) ") + (pass_a ? "pass" : "FAIL") + ": " + std::to_string(sky_pixels) +
                " sky pixels, opacity min " + num(min_o, "%.3f") + " mean " +
                num(sky_pixels ? sum_o / sky_pixels : 0, "%.3f") + ", " + std::to_string(below) + " below 0.5; (b) " + (pass_b ? "pass" : "FAIL") +
                ": " + std::to_string(opaque) + " foreground pixels with O >= 0.99, max depth change " +
                num(worst) + " m (< 1e-3), " + std::to_string(leaking) + " at or above the limit"};
}

// Mean PSNR over keyframes of render vs E^-1(ground truth).
double inverted_train_psnr(const fs::path &checkpoint) {
    auto mapper = Mapper<float>::load_checkpoint(checkpoint, MapperConfig{});
    double sum = 0;
    for (const auto &kf : mapper.store().keyframes) {
        const auto color = render_map(mapper.map(), kf.camera).targets.color.cast<double>();
        ExposureAffine<double> e;
        e.matrix = kf.exposure.matrix.cast<double>();
        sum += psnr_8bit(color, invert_exposure(e, kf.image.cast<double>()));
    }
    return sum / static_cast<double>(mapper.store().size());
}

Outcome criterion8(Suite &s) {
    const auto room = s.room();
    const auto scaled = s.dataset("room_gain", [](RunConfig &c) {
        c.dataset.gain_min = kC8GainMin;
        c.dataset.gain_max = kC8GainMax;
    });
    const auto &base = s.map_run("room", room);
    s.map_run("room_gain_exposure", scaled);
    const auto &off = s.map_run("room_gain_fixed", scaled, [](RunConfig &c) { c.mapper.optimize_exposure = false; });
    const double with = inverted_train_psnr(s.work / "runs" / "room_gain_exposure" / "checkpoint");
    const double gap = base.train_psnr - with, drop = base.train_psnr - off.train_psnr;
    return {std::abs(gap) <= kC8Within && drop > kC8Degrade,
            "unscaled " + num(base.train_psnr, "%.2f") + " dB; gains in [0.7, 1.3] with exposure " +
                num(with, "%.2f") + " dB (|diff| " + num(std::abs(gap), "%.2f") + " <= 1), without " +
                num(off.train_psnr, "%.2f") + " dB (drop " + num(drop, "%.2f") + " > 2)"};
}

Outcome criterion9(Suite &) {
    std::mt19937_64 rng(1009);
    const CameraIntrinsics in{525, 525, 319.5, 239.5, 640, 480};
    std::uniform_real_distribution<double> u(-1, 1), depth(2, 10), jitter(-0.05, 0.05);
    std::normal_distribution<double> noise(0, 0.5);
    double worst_exact = 0;
    int rejected_exact = 0;
    std::vector<double> errs;
    int rejected_noisy = 0;
    constexpr int kTrials = 1000;
    for (int trial = 0; trial < 2 * kTrials; ++trial) {
        const bool noisy = trial >= kTrials;
        const Vec3d p(u(rng), u(rng), depth(rng));
        std::vector<CameraPose> poses;
        for (int k = 0; k < 9; ++k) {
            const Vec3d eye(k / 8.0 - 0.5, jitter(rng), jitter(rng));
            poses.push_back(CameraPose::look_at(eye, Vec3d(jitter(rng), jitter(rng), 6), Vec3d::UnitY()));
        }
        FeatureTrack t;
        for (int k = 0; k < 9; ++k) {
            const Vec3d pc = poses[static_cast<std::size_t>(k)].to_camera(p);
            Vec2d px(in.fx * pc.x() / pc.z() + in.cx, in.fy * pc.y() / pc.z() + in.cy);
            if (noisy) px += Vec2d(noise(rng), noise(rng));
            t.observations.emplace_back(k, px);
        }
        const auto got = triangulate_track(t, poses, in);
        if (!noisy) {
            if (got) worst_exact = std::max(worst_exact, (*got - p).norm());
            else ++rejected_exact;
        } else if (got) {
            errs.push_back((*got - p).norm());
        } else {
            ++rejected_noisy;
        }
    }
    double median = std::numeric_limits<double>::infinity();
    if (!errs.empty()) {
        std::nth_element(errs.begin(), errs.begin() + static_cast<std::ptrdiff_t>(errs.size() / 2), errs.end());
        median = errs[errs.size() / 2];
    }
    return {rejected_exact == 0 && worst_exact < kC9Exact && median < kC9Median,
            "noise-free: max error " + num(worst_exact) + " m (< 1e-6), " + std::to_string(rejected_exact) +
                " rejected; 0.5 px noise, 9 views, 1 m baseline, depth 2-10 m: median " + num(100 * median, "%.2f") +
                " cm (< 5), " + std::to_string(rejected_noisy) + " of 1000 rejected"};
}

Outcome criterion10(Suite &s) {
    BenchConfig fwd;
    fwd.width = 640;
    fwd.height = 480;
    fwd.gaussians = 100000;
    fwd.reps = 10;
    fwd.workloads = "forward_tiled,adam_sparse,adam_dense";
    fwd.adam_gaussians = 1000000;
    fwd.adam_occupancy = 0.1;
    const auto rows = run_bench(fwd, 7, s.log());
    // The reference renderer takes minutes per frame at this size; one repetition.
    BenchConfig ref = fwd;
    ref.reps = 1;
    ref.workloads = "forward_reference";
    const auto ref_rows = run_bench(ref, 7, s.log());
    auto median = [&](const std::string &w) {
        for (const auto *set : {&rows, &ref_rows})
            for (const auto &r : *set)
                if (r.workload == w) return r.median_ms;
        return 0.0;
    };
    const double fwd_ratio = median("forward_reference") / median("forward_tiled");
    const double adam_ratio = median("adam_dense") / median("adam_sparse");
    return {fwd_ratio >= kC10Forward && adam_ratio >= kC10Adam,
            "640x480, 1e5 Gaussians: tiled " + num(median("forward_tiled"), "%.0f") + " ms vs reference " +
                num(median("forward_reference"), "%.0f") + " ms (" + num(fwd_ratio, "%.1f") +
                "x, >= 10x); Adam at 1e6, 10% active: sparse " + num(median("adam_sparse"), "%.1f") +
                " ms vs dense " + num(median("adam_dense"), "%.1f") + " ms (" + num(adam_ratio, "%.1f") +
                "x, >= 3x)"};
}

std::string read_bytes(const fs::path &p) {
    std::ifstream is(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(is), {}};
}

Outcome criterion11(Suite &s) {
    const auto data = s.room();
    auto cfg = [](int threads) {
        return [threads](RunConfig &c) {
            c.seed = c.mapper.seed = 11;
            c.deterministic = true;
            c.threads = threads;
            c.max_frames = 25;
            c.mapper.iterations_per_keyframe = 2;
        };
    };
    s.map_run("det_t1_a", data, cfg(1));
    s.map_run("det_t1_b", data, cfg(1));
    s.map_run("det_t8", data, cfg(8));
    const auto a = read_bytes(s.work / "runs" / "det_t1_a" / "metrics.csv");
    const bool same_runs = !a.empty() && a == read_bytes(s.work / "runs" / "det_t1_b" / "metrics.csv");
    const bool same_threads = a == read_bytes(s.work / "runs" / "det_t8" / "metrics.csv");
    return {same_runs && same_threads, std::string("metrics.csv ") + (same_runs ? "identical" : "DIFFERS") +
                                           " across two runs, " + (same_threads ? "identical" : "DIFFERS") +
                                           " between 1 and 8 threads (" + std::to_string(a.size()) + " bytes)"};
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"splatmap acceptance suite"};
    std::string work = "acceptance_work";
    std::vector<int> only;
    bool verbose = false, keep = true;
    app.add_option("--work-dir", work, "scratch directory for datasets and runs");
    app.add_option("--only", only, "run only these criteria (1-11)")->delimiter(',');
    app.add_flag("-v,--verbose", verbose, "show mapping progress");
    app.add_flag("!--clean", keep, "delete the scratch directory first");
    CLI11_PARSE(app, argc, argv);

    Suite suite;
    suite.work = work;
    suite.verbose = verbose;
    if (!keep) fs::remove_all(suite.work);
    fs::create_directories(suite.work);

    const std::vector<std::pair<std::string, std::function<Outcome(Suite &)>>> criteria{
        {"rasterizer oracle equivalence", criterion1},
        {"gradient correctness", criterion2},
        {"backward-variant equivalence", criterion3},
        {"culling safety", criterion4},
        {"end-to-end mapping convergence", criterion5},
        {"expansion correctness", criterion6},
        {"sky behavior", criterion7},
        {"exposure recovery", criterion8},
        {"triangulation oracle", criterion9},
        {"performance sanity", criterion10},
        {"determinism", criterion11},
    };
    const std::set<int> selected(only.begin(), only.end());
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        if (!selected.empty() && !selected.count(id)) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second(suite);
        } catch (const std::exception &e) {
            o = {false, std::string("error: ") + e.what()};
        }
        failed += !o.pass;
        std::cout << (o.pass ? "PASS" : "FAIL") << "  C" << id << " " << criteria[i].first << ": " << o.detail
                  << "  [" << num(seconds_since(t0), "%.1f") << " s]" << std::endl;
    }
    std::cout << (failed ? std::to_string(failed) + " criteria failed" : std::string("all criteria passed"))
              << std::endl;
    return failed ? 1 : 0;
}
