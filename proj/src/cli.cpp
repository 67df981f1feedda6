// Copyright Contributors to the splatmap project
// SPDX-License-Identifier: Apache-2.0
//
#include "splatmap/cli.hpp"

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

namespace splatmap {

namespace fs = std::filesystem;

namespace {

std::string trim(const std::string &s) {
    const auto b = s.find_first_not_of(" \t\r\n"), e = s.find_last_not_of(" \t\r\n");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

double to_double(const std::string &key, const std::string &v) {
    try {
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        if (used == v.size()) return d;
    } catch (const std::exception &) {
    }
    throw UsageError("setting '" + key + "' expects a number, got '" + v + "'");
}

long long to_int(const std::string &key, const std::string &v) {
    try {
        std::size_t used = 0;
        const long long i = std::stoll(v, &used);
        if (used == v.size()) return i;
    } catch (const std::exception &) {
    }
    throw UsageError("setting '" + key + "' expects an integer, got '" + v + "'");
}

bool to_bool(const std::string &key, const std::string &v) {
    if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
    if (v == "0" || v == "false" || v == "no" || v == "off") return false;
    throw UsageError("setting '" + key + "' expects a boolean, got '" + v + "'");
}

struct Setting {
    std::function<void(RunConfig &, const std::string &, const std::string &)> set;
    std::function<std::string(const RunConfig &)> get;
};

template <typename F> Setting real(F field) {
    return {[field](RunConfig &c, const std::string &k, const std::string &v) { field(c) = to_double(k, v); },
            [field](const RunConfig &c) { return fmt(field(c)); }};
}
template <typename F> Setting integer(F field) {
    return {[field](RunConfig &c, const std::string &k, const std::string &v) {
                field(c) = static_cast<std::remove_cvref_t<decltype(field(c))>>(to_int(k, v));
            },
            [field](const RunConfig &c) { return std::to_string(field(c)); }};
}
template <typename F> Setting boolean(F field) {
    return {[field](RunConfig &c, const std::string &k, const std::string &v) { field(c) = to_bool(k, v); },
            [field](const RunConfig &c) { return std::string(field(c) ? "true" : "false"); }};
}
template <typename F> Setting text(F field) {
    return {[field](RunConfig &c, const std::string &, const std::string &v) { field(c) = v; },
            [field](const RunConfig &c) { return std::string(field(c)); }};
}
template <typename F> Setting path(F field) {
    return {[field](RunConfig &c, const std::string &, const std::string &v) { field(c) = fs::path(v); },
            [field](const RunConfig &c) { return field(c).string(); }};
}

#define FIELD(expr) [](auto &c) -> auto & { return c.expr; }

const std::vector<std::pair<std::string, Setting>> &settings() {
    static const std::vector<std::pair<std::string, Setting>> table = [] {
        std::vector<std::pair<std::string, Setting>> t;
        // mapper
        t.emplace_back("o_a", real(FIELD(mapper.o_a)));
        t.emplace_back("o_b", real(FIELD(mapper.o_b)));
        t.emplace_back("n_sky", integer(FIELD(mapper.n_sky)));
        t.emplace_back("sky_radius", real(FIELD(mapper.sky_radius)));
        t.emplace_back("tau", real(FIELD(mapper.tau)));
        t.emplace_back("K", integer(FIELD(mapper.replay_keyframes)));
        t.emplace_back("lambda", real(FIELD(mapper.lambda)));
        t.emplace_back("iterations_per_keyframe", integer(FIELD(mapper.iterations_per_keyframe)));
        t.emplace_back("sky", boolean(FIELD(mapper.sky)));
        t.emplace_back("optimize", boolean(FIELD(mapper.optimize)));
        t.emplace_back("exposure", boolean(FIELD(mapper.optimize_exposure)));
        t.emplace_back("global_exposure", boolean(FIELD(mapper.global_exposure)));
        t.emplace_back("cull", boolean(FIELD(mapper.cull)));
        t.emplace_back("tile_size", integer(FIELD(mapper.tile_size)));
        t.emplace_back("near", real(FIELD(mapper.near)));
        t.emplace_back("lr_position", real(FIELD(mapper.lr.position)));
        t.emplace_back("lr_scene_extent", real(FIELD(mapper.lr.scene_extent)));
        t.emplace_back("lr_sh_dc", real(FIELD(mapper.lr.sh_dc)));
        t.emplace_back("lr_sh_rest", real(FIELD(mapper.lr.sh_rest)));
        t.emplace_back("lr_opacity", real(FIELD(mapper.lr.opacity)));
        t.emplace_back("lr_scale", real(FIELD(mapper.lr.scale)));
        t.emplace_back("lr_rotation", real(FIELD(mapper.lr.rotation)));
        t.emplace_back("lr_exposure", real(FIELD(mapper.lr.exposure)));
        // run
        t.emplace_back("seed", Setting{[](RunConfig &c, const std::string &k, const std::string &v) {
                                           const auto s = static_cast<std::uint64_t>(to_int(k, v));
                                           c.seed = c.mapper.seed = c.dataset.seed = c.gradcheck.seed = s;
                                       },
                                       [](const RunConfig &c) { return std::to_string(c.seed); }});
        t.emplace_back("precision", integer(FIELD(precision)));
        t.emplace_back("deterministic", boolean(FIELD(deterministic)));
        t.emplace_back("threads", integer(FIELD(threads)));
        t.emplace_back("holdout_stride", integer(FIELD(holdout_stride)));
        t.emplace_back("max_frames", integer(FIELD(max_frames)));
        t.emplace_back("dataset", path(FIELD(dataset_path)));
        t.emplace_back("output", path(FIELD(output_path)));
        t.emplace_back("map", path(FIELD(map_path)));
        t.emplace_back("renders", path(FIELD(renders_path)));
        t.emplace_back("quiet", boolean(FIELD(quiet)));
        // dataset generation
        t.emplace_back("scene", text(FIELD(dataset.scene)));
        t.emplace_back("frames", integer(FIELD(dataset.frames)));
        t.emplace_back("width", Setting{[](RunConfig &c, const std::string &k, const std::string &v) {
                                            c.dataset.intr.width = static_cast<int>(to_int(k, v));
                                            c.dataset.intr.cx = 0.5 * (c.dataset.intr.width - 1);
                                        },
                                        [](const RunConfig &c) { return std::to_string(c.dataset.intr.width); }});
        t.emplace_back("height", Setting{[](RunConfig &c, const std::string &k, const std::string &v) {
                                             c.dataset.intr.height = static_cast<int>(to_int(k, v));
                                             c.dataset.intr.cy = 0.5 * (c.dataset.intr.height - 1);
                                         },
                                         [](const RunConfig &c) { return std::to_string(c.dataset.intr.height); }});
        t.emplace_back("fx", real(FIELD(dataset.intr.fx)));
        t.emplace_back("fy", real(FIELD(dataset.intr.fy)));
        t.emplace_back("cx", real(FIELD(dataset.intr.cx)));
        t.emplace_back("cy", real(FIELD(dataset.intr.cy)));
        t.emplace_back("lidar_pattern",
                       Setting{[](RunConfig &c, const std::string &k, const std::string &v) {
                                   if (v == "spinning") c.dataset.lidar.pattern = LidarPattern::spinning;
                                   else if (v == "solid_state") c.dataset.lidar.pattern = LidarPattern::solid_state;
                                   else throw UsageError("setting '" + k + "' expects spinning or solid_state");
                               },
                               [](const RunConfig &c) {
                                   return std::string(c.dataset.lidar.pattern == LidarPattern::spinning ? "spinning"
                                                                                                        : "solid_state");
                               }});
        t.emplace_back("lidar_rays", integer(FIELD(dataset.lidar.rays)));
        t.emplace_back("lidar_range_noise", real(FIELD(dataset.lidar.range_noise)));
        t.emplace_back("keep_one_in", integer(FIELD(dataset.keep_one_in)));
        t.emplace_back("window", integer(FIELD(dataset.window)));
        t.emplace_back("track_length", integer(FIELD(dataset.track_length)));
        t.emplace_back("sfm_anchors", integer(FIELD(dataset.sfm_anchors)));
        t.emplace_back("sfm_pixel_noise", real(FIELD(dataset.sfm_pixel_noise)));
        t.emplace_back("image_noise", real(FIELD(dataset.image_noise)));
        t.emplace_back("gain_min", real(FIELD(dataset.gain_min)));
        t.emplace_back("gain_max", real(FIELD(dataset.gain_max)));
        // gradcheck
        t.emplace_back("gradcheck_scenes", integer(FIELD(gradcheck.scenes)));
        t.emplace_back("gradcheck_max_gaussians", integer(FIELD(gradcheck.max_gaussians)));
        t.emplace_back("gradcheck_width", integer(FIELD(gradcheck.width)));
        t.emplace_back("gradcheck_height", integer(FIELD(gradcheck.height)));
        t.emplace_back("gradcheck_epsilon", real(FIELD(gradcheck.epsilon)));
        t.emplace_back("gradcheck_tolerance", real(FIELD(gradcheck.rel_tol)));
        t.emplace_back("gradcheck_abs_floor", real(FIELD(gradcheck.abs_floor)));
        t.emplace_back("gradcheck_early_termination", boolean(FIELD(gradcheck.early_termination)));
        t.emplace_back("gradcheck_inject", text(FIELD(gradcheck.inject)));
        t.emplace_back("gradcheck_variant",
                       Setting{[](RunConfig &c, const std::string &k, const std::string &v) {
                                   if (v == "per_gaussian") c.gradcheck.variant = BackwardVariant::per_gaussian;
                                   else if (v == "per_pixel") c.gradcheck.variant = BackwardVariant::per_pixel;
                                   else throw UsageError("setting '" + k + "' expects per_gaussian or per_pixel");
                               },
                               [](const RunConfig &c) {
                                   return std::string(c.gradcheck.variant == BackwardVariant::per_pixel ? "per_pixel"
                                                                                                        : "per_gaussian");
                               }});
        t.emplace_back("gradcheck_epsilons",
                       Setting{[](RunConfig &c, const std::string &k, const std::string &v) {
                                   c.gradcheck_epsilons.clear();
                                   std::stringstream ss(v);
                                   std::string item;
                                   while (std::getline(ss, item, ','))
                                       if (!trim(item).empty()) c.gradcheck_epsilons.push_back(to_double(k, trim(item)));
                               },
                               [](const RunConfig &c) {
                                   std::string s;
                                   for (double e : c.gradcheck_epsilons) s += (s.empty() ? "" : ",") + fmt(e);
                                   return s;
                               }});
        // bench
        t.emplace_back("bench_width", integer(FIELD(bench.width)));
        t.emplace_back("bench_height", integer(FIELD(bench.height)));
        t.emplace_back("bench_fx", real(FIELD(bench.fx)));
        t.emplace_back("bench_gaussians", integer(FIELD(bench.gaussians)));
        t.emplace_back("bench_reps", integer(FIELD(bench.reps)));
        t.emplace_back("bench_adam_gaussians", integer(FIELD(bench.adam_gaussians)));
        t.emplace_back("bench_adam_occupancy", real(FIELD(bench.adam_occupancy)));
        t.emplace_back("bench_anisotropy", real(FIELD(bench.anisotropy)));
        t.emplace_back("bench_workloads", text(FIELD(bench.workloads)));
        return t;
    }();
    return table;
}

#undef FIELD

const Setting *find_setting(const std::string &key) {
    for (const auto &[name, s] : settings())
        if (name == key) return &s;
    return nullptr;
}

void apply_threads(const RunConfig &cfg) {
    if (cfg.threads > 0) omp_set_num_threads(cfg.threads);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string frame_name(int index) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%05d", index);
    return buf;
}

template <typename T> ViewMetrics score_view(const RgbImage<T> &rendered, const RgbImage<float> &gt, int frame, bool novel) {
    const RgbImage<double> r = rendered.template cast<double>(), g = gt.cast<double>();
    return {frame, novel, psnr_8bit(r, g), ssim(r, g)};
}

void summarize(MapSummary &s) {
    double tp = 0, ts = 0, np = 0, ns = 0;
    int tn = 0, nn = 0;
    for (const auto &v : s.views) {
        if (v.novel) np += v.psnr, ns += v.ssim, ++nn;
        else tp += v.psnr, ts += v.ssim, ++tn;
    }
    s.train_psnr = tn ? tp / tn : 0;
    s.train_ssim = tn ? ts / tn : 0;
    s.novel_psnr = nn ? np / nn : 0;
    s.novel_ssim = nn ? ns / nn : 0;
}

template <typename T> MapSummary run_map_impl(const RunConfig &cfg, std::ostream &log) {
    const auto t0 = std::chrono::steady_clock::now();
    const DatasetInfo info = load_dataset_info(cfg.dataset_path);
    const int frames = cfg.max_frames > 0 ? std::min(cfg.max_frames, info.frames) : info.frames;
    if (frames < 1) throw DataError("dataset has no frames");

    Mapper<T> mapper(cfg.mapper);
    mapper.on_frame = [&](const CameraFrame &f, const Mapper<T> &m) {
        if (cfg.quiet || !is_keyframe_index(f.frame_index)) return;
        log << "frame " << f.frame_index << ": gaussians " << m.map().size() << " (+" << m.last_expansion()
            << "), keyframes " << m.store().size();
        if (!m.log().empty()) log << ", last psnr " << m.log().back().psnr;
        log << "\n";
    };
    run_pipeline<T>(mapper, [&](FrameQueue &q) {
        for (int i = 0; i < frames; ++i) {
            if (is_holdout_frame(i, cfg.holdout_stride)) continue;
            if (!q.push(load_frame(info, i))) return;
        }
    });

    MapSummary summary;
    summary.gaussians = mapper.map().size();
    summary.keyframes = mapper.store().size();
    const BinOptions bin{cfg.mapper.tile_size, cfg.mapper.cull};
    const bool write = !cfg.output_path.empty();
    if (write) fs::create_directories(cfg.output_path / "renders");

    for (const auto &kf : mapper.store().keyframes) {
        const auto pass = render_map(mapper.map(), kf.camera, bin, RenderOptions{}, cfg.mapper.near);
        const RgbImage<T> out = apply_exposure(kf.exposure, pass.targets.color);
        const RgbImage<float> gt = load_frame(info, kf.frame_index).image;
        summary.views.push_back(score_view(out, gt, kf.frame_index, false));
        if (write) write_ppm(cfg.output_path / "renders" / (frame_name(kf.frame_index) + ".ppm"), out.template cast<float>());
    }
    for (int i = 0; i < frames; ++i) {
        if (!is_holdout_frame(i, cfg.holdout_stride)) continue;
        const CameraFrame f = load_frame(info, i);
        const auto pass = render_map(mapper.map(), f.camera(), bin, RenderOptions{}, cfg.mapper.near);
        summary.views.push_back(score_view(pass.targets.color, f.image, i, true));
        if (write) write_ppm(cfg.output_path / "renders" / (frame_name(i) + ".ppm"), pass.targets.color.template cast<float>());
    }
    std::sort(summary.views.begin(), summary.views.end(),
              [](const ViewMetrics &a, const ViewMetrics &b) { return a.frame < b.frame; });
    summarize(summary);

    if (write) {
        mapper.save_checkpoint(cfg.output_path / "checkpoint");
        write_training_log(cfg.output_path / "train_log.csv", mapper.log());
        write_metrics(cfg.output_path / "metrics.csv", summary);
        std::ofstream(cfg.output_path / "config.txt") << describe_config(cfg);
    }
    summary.seconds = seconds_since(t0);
    return summary;
}

} // namespace

std::pair<std::string, std::string> split_assignment(const std::string &text) {
    const auto eq = text.find('=');
    if (eq == std::string::npos) throw UsageError("expected key=value, got '" + text + "'");
    return {trim(text.substr(0, eq)), trim(text.substr(eq + 1))};
}

void set_config_value(RunConfig &cfg, const std::string &key, const std::string &value) {
    const Setting *s = find_setting(key);
    if (!s) throw UsageError("unknown setting '" + key + "'");
    s->set(cfg, key, value);
}

void load_config_file(RunConfig &cfg, const fs::path &p) {
    std::ifstream is(p);
    if (!is) throw DataError("cannot read config file " + p.string());
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        if (trim(line).empty()) continue;
        try {
            const auto [k, v] = split_assignment(line);
            set_config_value(cfg, k, v);
        } catch (const UsageError &e) {
            throw UsageError(p.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
}

std::string describe_config(const RunConfig &cfg) {
    std::string out;
    for (const auto &[name, s] : settings()) out += name + " = " + s.get(cfg) + "\n";
    return out;
}

bool is_holdout_frame(int frame_index, int stride) { return stride > 0 && frame_index % stride == stride - 1; }

void write_metrics(const fs::path &path, const MapSummary &s) {
    std::ofstream os(path);
    if (!os) throw DataError("cannot open " + path.string() + " for writing");
    char buf[128];
    os << "view,kind,psnr,ssim\n";
    for (const auto &v : s.views) {
        std::snprintf(buf, sizeof buf, "%s,%s,%.6f,%.6f\n", frame_name(v.frame).c_str(), v.novel ? "novel" : "train",
                      v.psnr, v.ssim);
        os << buf;
    }
    std::snprintf(buf, sizeof buf, "mean,train,%.6f,%.6f\nmean,novel,%.6f,%.6f\n", s.train_psnr, s.train_ssim,
                  s.novel_psnr, s.novel_ssim);
    os << buf;
    if (!os) throw DataError("write failed: " + path.string());
}

MapSummary run_map(const RunConfig &cfg, std::ostream &log) {
    apply_threads(cfg);
    if (cfg.precision == 32) return run_map_impl<float>(cfg, log);
    if (cfg.precision == 64) return run_map_impl<double>(cfg, log);
    throw UsageError("precision must be 32 or 64");
}

int cmd_generate(const RunConfig &cfg, std::ostream &log) {
    apply_threads(cfg);
    if (cfg.output_path.empty()) throw UsageError("generate needs an output directory");
    const auto t0 = std::chrono::steady_clock::now();
    generate_dataset(cfg.dataset, cfg.output_path);
    if (!cfg.quiet)
        log << "wrote " << cfg.dataset.frames << " frames of scene '" << cfg.dataset.scene << "' to "
            << cfg.output_path.string() << " in " << seconds_since(t0) << " s\n";
    return kExitOk;
}

int cmd_map(const RunConfig &cfg, std::ostream &log) {
    if (cfg.dataset_path.empty()) throw UsageError("map needs a dataset directory");
    if (cfg.output_path.empty()) throw UsageError("map needs an output directory");
    const MapSummary s = run_map(cfg, log);
    if (!cfg.quiet)
        log << "gaussians " << s.gaussians << ", keyframes " << s.keyframes << ", train psnr " << s.train_psnr
            << ", novel psnr " << s.novel_psnr << ", " << s.seconds << " s\n";
    return kExitOk;
}

int cmd_render(const RunConfig &cfg, std::ostream &log) {
    apply_threads(cfg);
    if (cfg.map_path.empty() || cfg.dataset_path.empty() || cfg.output_path.empty())
        throw UsageError("render needs a map file, a dataset and an output directory");
    const auto map = read_map<float>(cfg.map_path);
    const DatasetInfo info = load_dataset_info(cfg.dataset_path);
    fs::create_directories(cfg.output_path);
    const int frames = cfg.max_frames > 0 ? std::min(cfg.max_frames, info.frames) : info.frames;
    for (int i = 0; i < frames; ++i) {
        const Camera cam{read_pose(frame_dir(info.root, i) / "pose.txt"), info.intr};
        const auto pass = render_map(map, cam, BinOptions{cfg.mapper.tile_size, cfg.mapper.cull}, RenderOptions{},
                                     cfg.mapper.near);
        const std::string name = frame_name(i);
        write_ppm(cfg.output_path / (name + ".ppm"), pass.targets.color);
        write_plane(cfg.output_path / (name + "_depth.pln"), pass.targets.depth);
        write_plane(cfg.output_path / (name + "_opacity.pln"), pass.targets.opacity);
    }
    if (!cfg.quiet) log << "rendered " << frames << " views of " << map.size() << " Gaussians\n";
    return kExitOk;
}

int cmd_eval(const RunConfig &cfg, std::ostream &log) {
    if (cfg.renders_path.empty() || cfg.dataset_path.empty()) throw UsageError("eval needs renders and a dataset");
    const DatasetInfo info = load_dataset_info(cfg.dataset_path);
    MapSummary s;
    for (int i = 0; i < info.frames; ++i) {
        const fs::path p = cfg.renders_path / (frame_name(i) + ".ppm");
        if (!fs::exists(p)) continue;
        s.views.push_back(score_view(read_ppm(p), load_frame(info, i).image, i, is_holdout_frame(i, cfg.holdout_stride)));
    }
    if (s.views.empty()) throw DataError("no renders found in " + cfg.renders_path.string());
    summarize(s);
    const fs::path out = cfg.output_path.empty() ? cfg.renders_path / "metrics.csv" : cfg.output_path;
    if (!out.parent_path().empty()) fs::create_directories(out.parent_path());
    write_metrics(out, s);
    if (!cfg.quiet) log << "train psnr " << s.train_psnr << ", novel psnr " << s.novel_psnr << "\n";
    return kExitOk;
}

int cmd_gradcheck(const RunConfig &cfg, std::ostream &log) {
    apply_threads(cfg);
    std::vector<double> eps = cfg.gradcheck_epsilons;
    if (eps.empty()) eps.push_back(cfg.gradcheck.epsilon);
    bool ok = true;
    log << "epsilon,scenes,parameters,worst_error,worst_parameter,result\n";
    for (double e : eps) {
        GradcheckConfig g = cfg.gradcheck;
        g.epsilon = e;
        const auto s = run_gradcheck(g);
        std::string worst;
        for (const auto &r : s.reports)
            if (r.max_error == s.worst) worst = r.worst_parameter;
        char buf[256];
        std::snprintf(buf, sizeof buf, "%.3g,%d,%zu,%.3e,%s,%s\n", e, g.scenes, s.checked, s.worst, worst.c_str(),
                      s.passed ? "pass" : "FAIL");
        log << buf;
        ok = ok && s.passed;
    }
    return ok ? kExitOk : kExitCheck;
}

int cmd_bench(const RunConfig &cfg, std::ostream &log) {
    apply_threads(cfg);
    const auto rows = run_bench(cfg.bench, cfg.seed, cfg.quiet ? std::cerr : log);
    std::ostringstream csv;
    csv << "workload,reps,median_ms,p95_ms,pairs,max_abs_diff\n";
    char buf[256];
    for (const auto &r : rows) {
        std::snprintf(buf, sizeof buf, "%s,%d,%.3f,%.3f,%zu,%.3e\n", r.workload.c_str(), r.reps, r.median_ms, r.p95_ms,
                      r.pairs, r.max_abs_diff);
        csv << buf;
    }
    if (!cfg.output_path.empty()) {
        if (!cfg.output_path.parent_path().empty()) fs::create_directories(cfg.output_path.parent_path());
        std::ofstream os(cfg.output_path);
        if (!os) throw DataError("cannot write " + cfg.output_path.string());
        os << csv.str();
    }
    log << csv.str();
    return kExitOk;
}

std::pair<double, double> median_p95(std::vector<double> samples) {
    if (samples.empty()) return {0, 0};
    std::sort(samples.begin(), samples.end());
    const std::size_t n = samples.size();
    const double median = n % 2 ? samples[n / 2] : 0.5 * (samples[n / 2 - 1] + samples[n / 2]);
    const std::size_t rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(n)));
    return {median, samples[std::min(n, std::max<std::size_t>(rank, 1)) - 1]};
}

std::vector<BenchRow> run_bench(const BenchConfig &cfg, std::uint64_t seed, std::ostream &log) {
    if (cfg.reps < 1) throw UsageError("bench_reps must be positive");
    std::vector<std::string> names;
    {
        std::stringstream ss(cfg.workloads);
        std::string item;
        while (std::getline(ss, item, ','))
            if (!trim(item).empty()) names.push_back(trim(item));
    }
    std::mt19937_64 rng(seed);
    const Camera cam = random_camera(cfg.width, cfg.height, cfg.fx, rng);
    RandomSceneOptions opt;
    opt.gaussians = cfg.gaussians;
    opt.anisotropy = cfg.anisotropy;
    const GaussianMap<float> map = random_map<float>(opt, cam, rng);
    const auto projected = project_map(map, cam, kDefaultNear);
    const RgbImage<float> d_color = random_image<float>(cfg.height, cfg.width, rng, -1e-3, 1e-3);

    auto time_ms = [](const std::function<void()> &fn) {
        const auto t0 = std::chrono::steady_clock::now();
        fn();
        return 1e3 * seconds_since(t0);
    };

    std::vector<BenchRow> rows;
    for (const auto &name : names) {
        BenchRow row;
        row.workload = name;
        row.reps = cfg.reps;
        std::vector<double> samples;
        if (name == "forward_tiled" || name == "forward_cull_on" || name == "forward_cull_off") {
            BinOptions bin;
            bin.cull = name != "forward_cull_off";
            RenderPass<float> last;
            for (int r = 0; r < cfg.reps; ++r) samples.push_back(time_ms([&] { last = render_map(map, cam, bin); }));
            row.pairs = last.grid.pair_count();
            BinOptions other = bin;
            other.cull = !bin.cull;
            const auto alt = render_map(map, cam, other);
            for (int c = 0; c < 3; ++c)
                row.max_abs_diff = std::max(
                    row.max_abs_diff, static_cast<double>((last.targets.color.ch[c] - alt.targets.color.ch[c]).abs().maxCoeff()));
        } else if (name == "forward_reference") {
            for (int r = 0; r < cfg.reps; ++r)
                samples.push_back(time_ms([&] { (void)reference_render<float>(project_map(map, cam, kDefaultNear), cam.intr); }));
        } else if (name == "backward_per_gaussian" || name == "backward_per_pixel") {
            const auto pass = render_map(map, cam);
            const bool per_g = name == "backward_per_gaussian";
            for (int r = 0; r < cfg.reps; ++r)
                samples.push_back(time_ms([&] {
                    if (per_g)
                        (void)backward_per_gaussian<float>(map, cam, pass.targets, d_color, pass.projected, pass.grid);
                    else
                        (void)backward_per_pixel<float>(map, cam, pass.targets, d_color, pass.projected, pass.grid);
                }));
            row.pairs = pass.grid.pair_count();
        } else if (name == "adam_sparse" || name == "adam_dense") {
            RandomSceneOptions aopt;
            aopt.gaussians = cfg.adam_gaussians;
            GaussianMap<float> amap = random_map<float>(aopt, cam, rng);
            GradientBuffer<float> grads(amap.size());
            std::normal_distribution<float> n01;
            for (auto *v : {&grads.d_position, &grads.d_log_scale, &grads.d_rotation, &grads.d_opacity_logit, &grads.d_sh})
                for (auto &x : *v) x = 1e-3f * n01(rng);
            AdamState<float> state;
            state.resize(amap.size());
            std::vector<std::uint32_t> active;
            const std::size_t stride = static_cast<std::size_t>(std::max(1.0, std::round(1.0 / cfg.adam_occupancy)));
            for (std::size_t i = 0; i < amap.size(); i += stride) active.push_back(static_cast<std::uint32_t>(i));
            const bool sparse = name == "adam_sparse";
            for (int r = 0; r < cfg.reps; ++r)
                samples.push_back(time_ms([&] {
                    if (sparse) adam_step(amap, grads, state, LearningRates{}, std::span<const std::uint32_t>(active));
                    else adam_step(amap, grads, state, LearningRates{});
                }));
            row.pairs = sparse ? active.size() : amap.size();
        } else {
            throw UsageError("unknown bench workload '" + name + "'");
        }
        std::tie(row.median_ms, row.p95_ms) = median_p95(samples);
        log << "# " << name << ": median " << row.median_ms << " ms\n";
        rows.push_back(row);
    }
    return rows;
}

int exit_code_for_current_exception(std::ostream &err) {
    try {
        throw;
    } catch (const UsageError &e) {
        err << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::invalid_argument &e) {
        err << "invalid argument: " << e.what() << "\n";
        return kExitUsage;
    } catch (const DataError &e) {
        err << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const fs::filesystem_error &e) {
        err << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception &e) {
        err << "error: " << e.what() << "\n";
        return kExitData;
    }
}

} // namespace splatmap
