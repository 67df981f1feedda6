// Copyright Contributors to the splatmap project
// SPDX-License-Identifier: Apache-2.0
//
// Incremental mapping: bootstrap from the first frame, sky shell, keyframe
// cadence, opacity-masked expansion and random keyframe replay.
//
#pragma once

#include "splatmap/optimizer.hpp"
#include "splatmap/rasterizer.hpp"

#include <condition_variable>
#include <deque>
#include <filesystem>
#include <functional>
#include <mutex>
#include <optional>
#include <random>

namespace splatmap {

struct MapperConfig {
    double o_a = 0.1;        // seed opacity
    double o_b = 0.7;        // sky opacity
    int n_sky = 100000;      // N_s
    double sky_radius = 1e4; // R
    double tau = 0.99;       // expansion mask threshold
    int replay_keyframes = 100; // K
    double lambda = 0.2;
    /// Replay passes over the sampled keyframes per incoming keyframe.
    int iterations_per_keyframe = 10;

    bool sky = true;
    bool optimize = true;
    bool optimize_exposure = true;
    /// One exposure matrix shared by every keyframe instead of one per keyframe.
    bool global_exposure = false;
    bool cull = true;
    int tile_size = kDefaultTileSize;
    double near = kDefaultNear;
    LearningRates lr;
    std::uint64_t seed = 0;

    /// Throws std::invalid_argument when a field is out of range.
    void validate() const;
};

template <typename T> struct Keyframe {
    int frame_index = 0;
    Camera camera;
    RgbImage<T> image;
    ExposureAffine<T> exposure;
    ExposureAdam<T> exposure_adam;
};

template <typename T> struct KeyframeStore {
    std::vector<Keyframe<T>> keyframes;

    std::size_t size() const { return keyframes.size(); }
    bool empty() const { return keyframes.empty(); }
    /// Registers a keyframe with identity exposure. Indices must be strictly increasing.
    Keyframe<T> &add(const CameraFrame &frame);
};

struct TrainLogEntry {
    std::int64_t iteration = 0;
    int keyframe = 0; // frame index of the supervising keyframe
    double l1 = 0, dssim = 0, loss = 0, psnr = 0;
};

void write_training_log(const std::filesystem::path &path, std::span<const TrainLogEntry> log);

/// New Gaussian at the point, sized by its depth in `cam`. Empty if the point is not in front of
/// the near plane.
template <typename T>
std::optional<Gaussian<T>> seed_gaussian_from_point(const ColoredPoint &point, const Camera &cam,
                                                    const MapperConfig &cfg);

/// Sky shell: n_sky points uniform on the upper (+z) hemisphere of radius sky_radius, white, opacity
/// o_b, isotropic scale equal to the exact nearest-neighbor distance.
template <typename T> std::vector<Gaussian<T>> init_sky(const MapperConfig &cfg, std::uint64_t seed);

/// Exact nearest-neighbor distance for every point (grid hash). Single points get +inf.
std::vector<double> nearest_neighbor_distances(std::span<const Vec3d> points);

/// Seeds the first frame's points plus the sky shell into an empty map. Returns the number of
/// foreground Gaussians added. Throws std::logic_error if the map is not empty.
template <typename T>
std::size_t bootstrap(GaussianMap<T> &map, const CameraFrame &first_frame, const MapperConfig &cfg,
                      std::uint64_t seed);

/// Per pixel: rendered opacity < tau.
template <typename T>
Plane<bool> expansion_mask(const GaussianMap<T> &map, const Camera &cam, double tau, const MapperConfig &cfg = {});

/// Pixel a point lands on (nearest pixel center), if it is in front of `near` and inside the image.
std::optional<Eigen::Vector2i> landing_pixel(const Vec3d &p_w, const Camera &cam, double near = kDefaultNear);

/// Seeds every point landing on a true mask pixel. Returns the number added.
template <typename T>
std::size_t expand_with_mask(GaussianMap<T> &map, const Camera &cam, const Plane<bool> &mask,
                             std::span<const ColoredPoint> points, const MapperConfig &cfg);

/// Renders the mask from `cam` and expands with it.
template <typename T>
std::size_t expand(GaussianMap<T> &map, const Camera &cam, std::span<const ColoredPoint> points,
                   const MapperConfig &cfg);

/// Uniform integer in [0, n) from raw generator output (portable across standard libraries).
std::uint64_t uniform_index(std::mt19937_64 &rng, std::uint64_t n);

/// Random sample of min(k, n) distinct indices of [0, n), in random order.
std::vector<std::size_t> sample_keyframes(std::size_t n, std::size_t k, std::mt19937_64 &rng);

/// Optimizer state that survives across optimize_map calls.
template <typename T> struct TrainingState {
    AdamState<T> adam;
    std::int64_t iteration = 0;
    std::mt19937_64 rng;
};

/// One optimization step on one keyframe: render, loss, per-Gaussian backward, sparse Adam over
/// the keyframe's frustum, exposure step.
template <typename T>
TrainLogEntry train_step(GaussianMap<T> &map, Keyframe<T> &kf, TrainingState<T> &state, const MapperConfig &cfg);

/// iterations_per_keyframe passes; each samples min(K, store size) keyframes without replacement
/// in random order and trains once on each.
template <typename T>
std::vector<TrainLogEntry> optimize_map(GaussianMap<T> &map, KeyframeStore<T> &store, TrainingState<T> &state,
                                        const MapperConfig &cfg);

/// Stateful driver over an ordered frame stream.
template <typename T> class Mapper {
public:
    explicit Mapper(const MapperConfig &cfg);

    /// Frame indices must strictly increase; throws std::logic_error otherwise.
    void process_frame(const CameraFrame &frame);

    const MapperConfig &config() const { return cfg_; }
    GaussianMap<T> &map() { return map_; }
    const GaussianMap<T> &map() const { return map_; }
    KeyframeStore<T> &store() { return store_; }
    const KeyframeStore<T> &store() const { return store_; }
    TrainingState<T> &training() { return state_; }
    const std::vector<TrainLogEntry> &log() const { return log_; }
    std::size_t last_expansion() const { return last_expansion_; }
    std::optional<int> last_frame_index() const { return last_index_; }
    std::size_t buffered_points() const { return buffer_.size(); }

    /// Observer called after each processed frame.
    std::function<void(const CameraFrame &, const Mapper &)> on_frame;

    // Checkpoint directory: map.bin (float32 map, for viewers) and state.bin (native precision:
    // map, Adam moments, keyframes with exposures, buffered points, RNG and counters).
    void save_checkpoint(const std::filesystem::path &dir) const;
    static Mapper load_checkpoint(const std::filesystem::path &dir, const MapperConfig &cfg);

private:
    MapperConfig cfg_;
    GaussianMap<T> map_;
    KeyframeStore<T> store_;
    TrainingState<T> state_;
    std::vector<TrainLogEntry> log_;
    std::vector<ColoredPoint> buffer_;
    std::optional<int> last_index_;
    std::size_t last_expansion_ = 0;
};

/// Bounded blocking queue between the frame producer and the mapper.
template <typename Item> class BoundedQueue {
public:
    explicit BoundedQueue(std::size_t capacity) : capacity_(capacity == 0 ? 1 : capacity) {}

    /// Blocks while full. Returns false if the queue was closed.
    bool push(Item item) {
        std::unique_lock lock(mutex_);
        not_full_.wait(lock, [&] { return closed_ || items_.size() < capacity_; });
        if (closed_) return false;
        items_.push_back(std::move(item));
        not_empty_.notify_one();
        return true;
    }

    /// Blocks while empty. Empty result once closed and drained.
    std::optional<Item> pop() {
        std::unique_lock lock(mutex_);
        not_empty_.wait(lock, [&] { return closed_ || !items_.empty(); });
        if (items_.empty()) return std::nullopt;
        Item item = std::move(items_.front());
        items_.pop_front();
        not_full_.notify_one();
        return item;
    }

    void close() {
        std::lock_guard lock(mutex_);
        closed_ = true;
        not_full_.notify_all();
        not_empty_.notify_all();
    }

    std::size_t size() const {
        std::lock_guard lock(mutex_);
        return items_.size();
    }

private:
    mutable std::mutex mutex_;
    std::condition_variable not_full_, not_empty_;
    std::deque<Item> items_;
    std::size_t capacity_;
    bool closed_ = false;
};

using FrameQueue = BoundedQueue<CameraFrame>;

/// Runs `produce` on a separate thread feeding a queue of `capacity` frames and drains it into
/// the mapper on the calling thread. Rethrows the first error from either side.
template <typename T>
void run_pipeline(Mapper<T> &mapper, const std::function<void(FrameQueue &)> &produce, std::size_t capacity = 4);

} // namespace splatmap
