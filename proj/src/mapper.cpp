// Copyright Contributors to the splatmap project
// SPDX-License-Identifier: Apache-2.0
//
#include "splatmap/mapper.hpp"

#include "binary_io.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <numbers>
#include <sstream>
#include <thread>
#include <unordered_map>

namespace splatmap {

namespace fs = std::filesystem;

void MapperConfig::validate() const {
    auto require = [](bool ok, const char *what) {
        if (!ok) throw std::invalid_argument(std::string("mapper config: ") + what);
    };
    require(o_a > 0 && o_a < 1, "o_a must lie in (0, 1)");
    require(o_b > 0 && o_b < 1, "o_b must lie in (0, 1)");
    require(n_sky > 0, "n_sky must be positive");
    require(sky_radius > 0, "sky_radius must be positive");
    require(tau > 0 && tau <= 1, "tau must lie in (0, 1]");
    require(replay_keyframes > 0, "K must be positive");
    require(lambda >= 0 && lambda <= 1, "lambda must lie in [0, 1]");
    require(iterations_per_keyframe > 0, "iterations_per_keyframe must be positive");
    require(tile_size > 0, "tile_size must be positive");
    require(near > 0, "near must be positive");
}

template <typename T> Keyframe<T> &KeyframeStore<T>::add(const CameraFrame &frame) {
    if (!keyframes.empty() && frame.frame_index <= keyframes.back().frame_index)
        throw std::logic_error("keyframe indices must be strictly increasing");
    Keyframe<T> kf;
    kf.frame_index = frame.frame_index;
    kf.camera = frame.camera();
    kf.image = frame.image.template cast<T>();
    keyframes.push_back(std::move(kf));
    return keyframes.back();
}

void write_training_log(const fs::path &path, std::span<const TrainLogEntry> log) {
    std::ofstream os(path);
    if (!os) throw DataError("cannot open " + path.string() + " for writing");
    os << "iteration,keyframe,l1,dssim,loss,psnr\n";
    char buf[160];
    for (const auto &e : log) {
        std::snprintf(buf, sizeof buf, "%lld,%d,%.9g,%.9g,%.9g,%.6f\n", static_cast<long long>(e.iteration),
                      e.keyframe, e.l1, e.dssim, e.loss, e.psnr);
        os << buf;
    }
    if (!os) throw DataError("write failed: " + path.string());
}

template <typename T>
std::optional<Gaussian<T>> seed_gaussian_from_point(const ColoredPoint &point, const Camera &cam,
                                                    const MapperConfig &cfg) {
    const Vec3d pc = cam.pose.to_camera(point.position_w);
    if (!(pc.z() > cfg.near)) return std::nullopt;
    Gaussian<T> g;
    g.position = point.position_w.cast<T>();
    g.log_scale.setConstant(T(std::log(pc.z() / cam.intr.fx)));
    for (int c = 0; c < 3; ++c) g.sh[c] = sh_dc_from_color<T>(T(point.rgb[c]));
    g.opacity_logit = logit(T(cfg.o_a));
    return g;
}

std::vector<double> nearest_neighbor_distances(std::span<const Vec3d> points) {
    const std::size_t n = points.size();
    std::vector<double> out(n, std::numeric_limits<double>::infinity());
    if (n < 2) return out;

    Vec3d lo = points[0], hi = points[0];
    for (const auto &p : points) lo = lo.cwiseMin(p), hi = hi.cwiseMax(p);
    const double extent = std::max((hi - lo).maxCoeff(), 1e-12);
    const double cell = extent / std::max(1.0, std::sqrt(static_cast<double>(n)));
    const auto dims = ((hi - lo) / cell).array().floor().cast<std::int64_t>() + 1;
    const std::int64_t max_ring = dims.maxCoeff();

    auto cell_of = [&](const Vec3d &p) -> Eigen::Array<std::int64_t, 3, 1> {
        return ((p - lo) / cell).array().floor().cast<std::int64_t>();
    };
    auto key = [](std::int64_t x, std::int64_t y, std::int64_t z) {
        return (static_cast<std::uint64_t>(x) << 42) ^ (static_cast<std::uint64_t>(y) << 21) ^
               static_cast<std::uint64_t>(z);
    };
    std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> grid;
    grid.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto c = cell_of(points[i]);
        grid[key(c.x(), c.y(), c.z())].push_back(static_cast<std::uint32_t>(i));
    }

    const std::int64_t count = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(dynamic, 256)
    for (std::int64_t i = 0; i < count; ++i) {
        const Vec3d &p = points[static_cast<std::size_t>(i)];
        const auto c = cell_of(p);
        double best2 = std::numeric_limits<double>::infinity();
        for (std::int64_t r = 0; r <= max_ring; ++r) {
            for (std::int64_t dx = -r; dx <= r; ++dx)
                for (std::int64_t dy = -r; dy <= r; ++dy)
                    for (std::int64_t dz = -r; dz <= r; ++dz) {
                        if (std::max({std::abs(dx), std::abs(dy), std::abs(dz)}) != r) continue;
                        const std::int64_t x = c.x() + dx, y = c.y() + dy, z = c.z() + dz;
                        if (x < 0 || y < 0 || z < 0 || x >= dims.x() || y >= dims.y() || z >= dims.z()) continue;
                        const auto it = grid.find(key(x, y, z));
                        if (it == grid.end()) continue;
                        for (const auto j : it->second)
                            if (j != static_cast<std::uint32_t>(i))
                                best2 = std::min(best2, (points[j] - p).squaredNorm());
                    }
            // Anything outside ring r is at least r cells away from p.
            const double reach = static_cast<double>(r) * cell;
            if (best2 <= reach * reach) break;
        }
        out[static_cast<std::size_t>(i)] = std::sqrt(best2);
    }
    return out;
}

template <typename T> std::vector<Gaussian<T>> init_sky(const MapperConfig &cfg, std::uint64_t seed) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x736b79u};
    std::mt19937_64 rng(seq);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    const std::size_t n = static_cast<std::size_t>(cfg.n_sky);
    std::vector<Vec3d> pos(n);
    for (auto &p : pos) {
        // Uniform on the hemisphere surface: z is uniform in [0, 1].
        const double z = uni(rng), phi = 2 * std::numbers::pi * uni(rng);
        const double r = std::sqrt(std::max(0.0, 1 - z * z));
        p = cfg.sky_radius * Vec3d(r * std::cos(phi), r * std::sin(phi), z);
    }
    auto nn = nearest_neighbor_distances(pos);
    std::vector<Gaussian<T>> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double s = std::isfinite(nn[i]) ? nn[i] : cfg.sky_radius * std::sqrt(4 * std::numbers::pi / cfg.n_sky);
        Gaussian<T> &g = out[i];
        g.position = pos[i].cast<T>();
        g.log_scale.setConstant(T(std::log(s)));
        for (int c = 0; c < 3; ++c) g.sh[c] = sh_dc_from_color<T>(T(1));
        g.opacity_logit = logit(T(cfg.o_b));
        g.is_sky = true;
    }
    return out;
}

template <typename T>
std::size_t bootstrap(GaussianMap<T> &map, const CameraFrame &first_frame, const MapperConfig &cfg,
                      std::uint64_t seed) {
    if (!map.empty()) throw std::logic_error("bootstrap requires an empty map");
    const Camera cam = first_frame.camera();
    std::vector<Gaussian<T>> fg;
    fg.reserve(first_frame.points.size());
    for (const auto &p : first_frame.points)
        if (auto g = seed_gaussian_from_point<T>(p, cam, cfg)) fg.push_back(*g);
    if (fg.empty()) std::cerr << "warning: first frame has no usable points; the map starts with the sky only\n";
    if (cfg.sky) {
        auto sky = init_sky<T>(cfg, seed);
        fg.insert(fg.end(), sky.begin(), sky.end());
    }
    map.append(fg);
    return map.size() - map.sky_count();
}

template <typename T>
Plane<bool> expansion_mask(const GaussianMap<T> &map, const Camera &cam, double tau, const MapperConfig &cfg) {
    const auto pass = render_map(map, cam, BinOptions{cfg.tile_size, cfg.cull}, RenderOptions{}, cfg.near);
    return pass.targets.opacity < T(tau);
}

std::optional<Eigen::Vector2i> landing_pixel(const Vec3d &p_w, const Camera &cam, double near) {
    const Vec3d pc = cam.pose.to_camera(p_w);
    if (!(pc.z() > near)) return std::nullopt;
    const double u = cam.intr.fx * pc.x() / pc.z() + cam.intr.cx, v = cam.intr.fy * pc.y() / pc.z() + cam.intr.cy;
    if (!(u > -0.5 && v > -0.5 && u < cam.intr.width - 0.5 && v < cam.intr.height - 0.5)) return std::nullopt;
    const int x = std::clamp(static_cast<int>(std::lround(u)), 0, cam.intr.width - 1);
    const int y = std::clamp(static_cast<int>(std::lround(v)), 0, cam.intr.height - 1);
    return Eigen::Vector2i(x, y);
}

template <typename T>
std::size_t expand_with_mask(GaussianMap<T> &map, const Camera &cam, const Plane<bool> &mask,
                             std::span<const ColoredPoint> points, const MapperConfig &cfg) {
    if (mask.rows() != cam.intr.height || mask.cols() != cam.intr.width)
        throw std::invalid_argument("expansion mask does not match the camera");
    std::vector<Gaussian<T>> added;
    for (const auto &p : points) {
        const auto px = landing_pixel(p.position_w, cam, cfg.near);
        if (!px || !mask((*px)[1], (*px)[0])) continue;
        if (auto g = seed_gaussian_from_point<T>(p, cam, cfg)) added.push_back(*g);
    }
    map.append(added);
    return added.size();
}

template <typename T>
std::size_t expand(GaussianMap<T> &map, const Camera &cam, std::span<const ColoredPoint> points,
                   const MapperConfig &cfg) {
    const Plane<bool> mask = expansion_mask(map, cam, cfg.tau, cfg);
    return expand_with_mask(map, cam, mask, points, cfg);
}

std::uint64_t uniform_index(std::mt19937_64 &rng, std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("uniform_index: empty range");
    const std::uint64_t threshold = (0 - n) % n;
    std::uint64_t x = rng();
    while (x < threshold) x = rng();
    return x % n;
}

std::vector<std::size_t> sample_keyframes(std::size_t n, std::size_t k, std::mt19937_64 &rng) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    const std::size_t m = std::min(k, n);
    for (std::size_t i = 0; i < m; ++i) std::swap(idx[i], idx[i + uniform_index(rng, n - i)]);
    idx.resize(m);
    return idx;
}

template <typename T>
TrainLogEntry train_step(GaussianMap<T> &map, Keyframe<T> &kf, TrainingState<T> &state, const MapperConfig &cfg) {
    if (state.adam.size() != map.size()) state.adam.resize(map.size());
    const auto pass = render_map(map, kf.camera, BinOptions{cfg.tile_size, cfg.cull}, RenderOptions{}, cfg.near);
    const auto loss = photometric_loss(pass.targets.color, kf.image, kf.exposure, T(cfg.lambda));

    TrainLogEntry entry;
    entry.iteration = ++state.iteration;
    entry.keyframe = kf.frame_index;
    entry.l1 = static_cast<double>(loss.l1);
    entry.dssim = static_cast<double>(loss.dssim);
    entry.loss = static_cast<double>(loss.loss);
    entry.psnr = psnr_8bit(apply_exposure(kf.exposure, pass.targets.color), kf.image);

    const auto grads =
        backward_per_gaussian<T>(map, kf.camera, pass.targets, loss.d_rendered, pass.projected, pass.grid);
    const auto active = frustum_active_set(map, kf.camera, cfg.near);
    adam_step(map, grads, state.adam, cfg.lr, std::span<const std::uint32_t>(active));
    if (cfg.optimize_exposure) kf.exposure_adam.step(kf.exposure, loss.d_exposure, cfg.lr.exposure);
    return entry;
}

template <typename T>
std::vector<TrainLogEntry> optimize_map(GaussianMap<T> &map, KeyframeStore<T> &store, TrainingState<T> &state,
                                        const MapperConfig &cfg) {
    if (store.empty()) throw std::logic_error("optimize_map needs at least one keyframe");
    // Global mode keeps every keyframe's copy equal; the oldest keyframe holds the canonical one.
    auto share = [&](const Keyframe<T> &from) {
        for (auto &kf : store.keyframes) {
            kf.exposure = from.exposure;
            kf.exposure_adam = from.exposure_adam;
        }
    };
    if (cfg.global_exposure) share(store.keyframes.front());
    std::vector<TrainLogEntry> log;
    for (int round = 0; round < cfg.iterations_per_keyframe; ++round) {
        const auto order = sample_keyframes(store.size(), static_cast<std::size_t>(cfg.replay_keyframes), state.rng);
        for (const auto k : order) {
            log.push_back(train_step(map, store.keyframes[k], state, cfg));
            if (cfg.global_exposure) share(store.keyframes[k]);
        }
    }
    return log;
}

template <typename T> Mapper<T>::Mapper(const MapperConfig &cfg) : cfg_(cfg) {
    cfg_.validate();
    std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32), 0x6b66u};
    state_.rng.seed(seq);
}

template <typename T> void Mapper<T>::process_frame(const CameraFrame &frame) {
    if (last_index_ && frame.frame_index <= *last_index_)
        throw std::logic_error("frame " + std::to_string(frame.frame_index) + " arrived after frame " +
                               std::to_string(*last_index_));
    last_index_ = frame.frame_index;
    const Camera cam = frame.camera();

    if (store_.empty()) {
        last_expansion_ = bootstrap(map_, frame, cfg_, cfg_.seed);
    } else if (is_keyframe_index(frame.frame_index)) {
        std::vector<ColoredPoint> merged = std::move(buffer_);
        buffer_.clear();
        merged.insert(merged.end(), frame.points.begin(), frame.points.end());
        last_expansion_ = expand(map_, cam, merged, cfg_);
    } else {
        buffer_.insert(buffer_.end(), frame.points.begin(), frame.points.end());
        if (on_frame) on_frame(frame, *this);
        return;
    }
    store_.add(frame);
    state_.adam.resize(map_.size());
    if (cfg_.optimize) {
        auto entries = optimize_map(map_, store_, state_, cfg_);
        log_.insert(log_.end(), entries.begin(), entries.end());
    }
    if (on_frame) on_frame(frame, *this);
}

namespace {

constexpr char kCheckpointMagic[5] = "SMCK";
constexpr std::uint32_t kCheckpointVersion = 1;

template <typename P> void put(std::ostream &os, const P &v) { detail::write_pod(os, v); }
template <typename P> P get(std::istream &is) { return detail::read_pod<P>(is); }

template <typename V> void put_vec(std::ostream &os, const V &v) {
    put<std::uint64_t>(os, v.size());
    detail::write_raw(os, std::span(v.data(), v.size()));
}
template <typename E> void get_vec(std::istream &is, std::vector<E> &v) {
    detail::read_raw(is, v, get<std::uint64_t>(is));
}

template <typename M> void put_dense(std::ostream &os, const M &m) {
    put<std::int64_t>(os, m.rows());
    put<std::int64_t>(os, m.cols());
    detail::write_raw(os, std::span(m.data(), static_cast<std::size_t>(m.size())));
}
template <typename M> void get_dense(std::istream &is, M &m) {
    const auto r = get<std::int64_t>(is), c = get<std::int64_t>(is);
    if (r < 0 || c < 0 || (M::RowsAtCompileTime > 0 && r != M::RowsAtCompileTime) ||
        (M::ColsAtCompileTime > 0 && c != M::ColsAtCompileTime))
        throw DataError("checkpoint: bad matrix shape");
    m.resize(r, c);
    if (!is.read(reinterpret_cast<char *>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(m.data()[0]))))
        throw DataError("checkpoint: truncated matrix");
}

void put_string(std::ostream &os, const std::string &s) {
    put<std::uint64_t>(os, s.size());
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}
std::string get_string(std::istream &is) {
    std::string s(get<std::uint64_t>(is), '\0');
    if (!is.read(s.data(), static_cast<std::streamsize>(s.size()))) throw DataError("checkpoint: truncated string");
    return s;
}

void put_camera(std::ostream &os, const Camera &c) {
    put_dense(os, c.pose.rotation_wc);
    put_dense(os, c.pose.translation_wc);
    for (double v : {c.intr.fx, c.intr.fy, c.intr.cx, c.intr.cy}) put(os, v);
    put<std::int32_t>(os, c.intr.width);
    put<std::int32_t>(os, c.intr.height);
}
Camera get_camera(std::istream &is) {
    Camera c;
    get_dense(is, c.pose.rotation_wc);
    get_dense(is, c.pose.translation_wc);
    for (double *v : {&c.intr.fx, &c.intr.fy, &c.intr.cx, &c.intr.cy}) *v = get<double>(is);
    c.intr.width = get<std::int32_t>(is);
    c.intr.height = get<std::int32_t>(is);
    return c;
}

} // namespace

template <typename T> void Mapper<T>::save_checkpoint(const fs::path &dir) const {
    fs::create_directories(dir);
    write_map(dir / "map.bin", map_);

    std::ofstream os(dir / "state.bin", std::ios::binary);
    if (!os) throw DataError("cannot write checkpoint in " + dir.string());
    os.write(kCheckpointMagic, 4);
    put(os, kCheckpointVersion);
    put<std::uint32_t>(os, sizeof(T));

    put_vec(os, map_.positions);
    put_vec(os, map_.log_scales);
    put_vec(os, map_.rotations);
    put_vec(os, map_.opacity_logits);
    put_vec(os, map_.sh);
    put_vec(os, map_.sky);

    const auto &a = state_.adam;
    for (const auto *v : {&a.m_position, &a.v_position, &a.m_log_scale, &a.v_log_scale, &a.m_rotation,
                          &a.v_rotation, &a.m_opacity, &a.v_opacity, &a.m_sh, &a.v_sh})
        put_vec(os, *v);
    put_vec(os, a.steps);
    put<std::int64_t>(os, state_.iteration);
    std::ostringstream rng_text;
    rng_text << state_.rng;
    put_string(os, rng_text.str());

    put<std::int32_t>(os, last_index_.has_value());
    put<std::int32_t>(os, last_index_.value_or(0));
    put<std::uint64_t>(os, last_expansion_);

    put<std::uint64_t>(os, buffer_.size());
    for (const auto &p : buffer_) {
        put_dense(os, p.position_w);
        put_dense(os, p.rgb);
        put<std::uint8_t>(os, static_cast<std::uint8_t>(p.source));
    }

    put<std::uint64_t>(os, store_.size());
    for (const auto &kf : store_.keyframes) {
        put<std::int32_t>(os, kf.frame_index);
        put_camera(os, kf.camera);
        for (const auto &c : kf.image.ch) put_dense(os, c);
        put_dense(os, kf.exposure.matrix);
        put_dense(os, kf.exposure_adam.m);
        put_dense(os, kf.exposure_adam.v);
        put<std::uint32_t>(os, kf.exposure_adam.steps);
    }

    put<std::uint64_t>(os, log_.size());
    for (const auto &e : log_) {
        put(os, e.iteration);
        put<std::int32_t>(os, e.keyframe);
        for (double v : {e.l1, e.dssim, e.loss, e.psnr}) put(os, v);
    }
    if (!os) throw DataError("checkpoint write failed in " + dir.string());
}

template <typename T> Mapper<T> Mapper<T>::load_checkpoint(const fs::path &dir, const MapperConfig &cfg) {
    std::ifstream is(dir / "state.bin", std::ios::binary);
    if (!is) throw DataError("no checkpoint state in " + dir.string());
    detail::expect_magic(is, kCheckpointMagic);
    if (get<std::uint32_t>(is) != kCheckpointVersion) throw DataError("unsupported checkpoint version");
    if (get<std::uint32_t>(is) != sizeof(T)) throw DataError("checkpoint precision does not match");

    Mapper m(cfg);
    GaussianMap<T> raw;
    get_vec(is, raw.positions);
    get_vec(is, raw.log_scales);
    get_vec(is, raw.rotations);
    get_vec(is, raw.opacity_logits);
    get_vec(is, raw.sh);
    get_vec(is, raw.sky);
    const std::size_t n = raw.opacity_logits.size();
    if (raw.positions.size() != 3 * n || raw.log_scales.size() != 3 * n || raw.rotations.size() != 4 * n ||
        raw.sh.size() != kShCoeffs * n || raw.sky.size() != n)
        throw DataError("checkpoint: inconsistent map arrays");
    std::vector<Gaussian<T>> gs(n);
    for (std::size_t i = 0; i < n; ++i) gs[i] = raw.get(i);
    m.map_.append(gs);

    auto &a = m.state_.adam;
    for (auto *v : {&a.m_position, &a.v_position, &a.m_log_scale, &a.v_log_scale, &a.m_rotation, &a.v_rotation,
                    &a.m_opacity, &a.v_opacity, &a.m_sh, &a.v_sh})
        get_vec(is, *v);
    get_vec(is, a.steps);
    if (a.steps.size() != n) throw DataError("checkpoint: optimizer state does not match the map");
    m.state_.iteration = get<std::int64_t>(is);
    std::istringstream rng_text(get_string(is));
    rng_text >> m.state_.rng;
    if (!rng_text) throw DataError("checkpoint: bad rng state");

    const bool has_last = get<std::int32_t>(is) != 0;
    const int last = get<std::int32_t>(is);
    if (has_last) m.last_index_ = last;
    m.last_expansion_ = get<std::uint64_t>(is);

    m.buffer_.resize(get<std::uint64_t>(is));
    for (auto &p : m.buffer_) {
        get_dense(is, p.position_w);
        get_dense(is, p.rgb);
        p.source = static_cast<PointSource>(get<std::uint8_t>(is));
    }

    m.store_.keyframes.resize(get<std::uint64_t>(is));
    for (auto &kf : m.store_.keyframes) {
        kf.frame_index = get<std::int32_t>(is);
        kf.camera = get_camera(is);
        for (auto &c : kf.image.ch) get_dense(is, c);
        get_dense(is, kf.exposure.matrix);
        get_dense(is, kf.exposure_adam.m);
        get_dense(is, kf.exposure_adam.v);
        kf.exposure_adam.steps = get<std::uint32_t>(is);
    }

    m.log_.resize(get<std::uint64_t>(is));
    for (auto &e : m.log_) {
        e.iteration = get<std::int64_t>(is);
        e.keyframe = get<std::int32_t>(is);
        for (double *v : {&e.l1, &e.dssim, &e.loss, &e.psnr}) *v = get<double>(is);
    }
    return m;
}

template <typename T>
void run_pipeline(Mapper<T> &mapper, const std::function<void(FrameQueue &)> &produce, std::size_t capacity) {
    FrameQueue queue(capacity);
    std::exception_ptr producer_error;
    std::thread producer([&] {
        try {
            produce(queue);
        } catch (...) {
            producer_error = std::current_exception();
        }
        queue.close();
    });
    try {
        while (auto frame = queue.pop()) mapper.process_frame(*frame);
    } catch (...) {
        queue.close();
        producer.join();
        throw;
    }
    producer.join();
    if (producer_error) std::rethrow_exception(producer_error);
}

#define SPLATMAP_INSTANTIATE(T)                                                                                        \
    template struct KeyframeStore<T>;                                                                                  \
    template class Mapper<T>;                                                                                          \
    template std::optional<Gaussian<T>> seed_gaussian_from_point<T>(const ColoredPoint &, const Camera &,              \
                                                                    const MapperConfig &);                             \
    template std::vector<Gaussian<T>> init_sky<T>(const MapperConfig &, std::uint64_t);                                \
    template std::size_t bootstrap<T>(GaussianMap<T> &, const CameraFrame &, const MapperConfig &, std::uint64_t);     \
    template Plane<bool> expansion_mask<T>(const GaussianMap<T> &, const Camera &, double, const MapperConfig &);      \
    template std::size_t expand_with_mask<T>(GaussianMap<T> &, const Camera &, const Plane<bool> &,                    \
                                             std::span<const ColoredPoint>, const MapperConfig &);                     \
    template std::size_t expand<T>(GaussianMap<T> &, const Camera &, std::span<const ColoredPoint>,                    \
                                   const MapperConfig &);                                                              \
    template TrainLogEntry train_step<T>(GaussianMap<T> &, Keyframe<T> &, TrainingState<T> &, const MapperConfig &);   \
    template std::vector<TrainLogEntry> optimize_map<T>(GaussianMap<T> &, KeyframeStore<T> &, TrainingState<T> &,      \
                                                        const MapperConfig &);                                         \
    template void run_pipeline<T>(Mapper<T> &, const std::function<void(FrameQueue &)> &, std::size_t);

SPLATMAP_INSTANTIATE(float)
SPLATMAP_INSTANTIATE(double)
#undef SPLATMAP_INSTANTIATE

} // namespace splatmap
