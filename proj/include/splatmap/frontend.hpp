// Copyright Contributors to the splatmap project
// SPDX-License-Identifier: Apache-2.0
//
// Synthetic sensor frontend: analytic ray-cast scenes standing in for the
// odometry, LiDAR sampling, point colorization, multi-view triangulation and
// the on-disk dataset format consumed by the mapper.
//
#pragma once

#include "splatmap/scene.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace splatmap {

using Rng = std::mt19937_64;

/// Albedo as a function of 2D surface coordinates (meters).
struct Texture {
    enum class Kind { constant, checker, stripes };
    Kind kind = Kind::constant;
    Eigen::Vector3f a = Eigen::Vector3f::Constant(0.5f);
    Eigen::Vector3f b = Eigen::Vector3f::Constant(0.5f);
    double period = 1.0;
    /// Amplitude of a smooth multiplicative shading wave (period 4x the checker period).
    double ramp = 0.0;

    Eigen::Vector3f eval(double u, double v) const;
};

struct Primitive {
    enum class Kind { quad, sphere, box };
    Kind kind = Kind::quad;
    Vec3d center = Vec3d::Zero();
    // quad: unit in-plane axes and half sizes; normal = axis_u x axis_v
    Vec3d axis_u = Vec3d::UnitX(), axis_v = Vec3d::UnitY();
    double half_u = 1, half_v = 1;
    double radius = 1;                       // sphere
    Vec3d half_extents = Vec3d::Ones();       // axis-aligned box
    Texture texture;

    Vec3d normal() const { return axis_u.cross(axis_v).normalized(); }
    double area() const;
};

struct RayHit {
    double t = 0;
    Vec3d point = Vec3d::Zero();
    Vec3d normal = Vec3d::Zero();
    Eigen::Vector3f albedo = Eigen::Vector3f::Zero();
    int primitive = -1;
};

struct SyntheticScene {
    std::string name;
    std::vector<Primitive> primitives;
    /// Background: constant color, or a sky gradient over ray elevation when `sky` is set.
    Eigen::Vector3f background = Eigen::Vector3f::Zero();
    bool sky = false;
    double extent = 10.0;

    std::optional<RayHit> intersect(const Vec3d &origin, const Vec3d &dir) const;
    Eigen::Vector3f background_color(const Vec3d &dir) const;
    /// Unsigned distance from p to the nearest primitive surface.
    double surface_distance(const Vec3d &p) const;
    /// Area-weighted uniform sample on the union of primitive surfaces.
    Vec3d sample_surface(Rng &rng) const;
};

/// Built-in scenes: "room" (closed, textured), "courtyard" (open to the sky), "empty".
SyntheticScene make_scene(const std::string &name);
std::vector<std::string> builtin_scene_names();

/// Default trajectory for a built-in scene.
std::vector<CameraPose> make_trajectory(const std::string &scene_name, int frames);

/// Ground-truth image by ray casting (flat albedo shading, background where nothing is hit).
RgbImage<float> raycast_render(const SyntheticScene &scene, const CameraPose &pose, const CameraIntrinsics &intr);

enum class LidarPattern { spinning, solid_state };

struct LidarConfig {
    LidarPattern pattern = LidarPattern::solid_state;
    int rays = 30000;
    double range_noise = 0.0;       // meters, 1 sigma
    int rings = 16;                 // spinning
    double max_elevation_deg = 15;  // spinning: rings span [-max, +max]
    double cone_half_angle_deg = 38; // solid state
};

/// Elevation angles (radians) of the spinning pattern's rings.
std::vector<double> spinning_elevations(const LidarConfig &cfg);

/// World-frame hit points for one sweep from the camera's origin. The sensor shares the camera
/// frame: solid-state rays fill a cone around +z, spinning rings revolve about the camera's -y axis.
std::vector<Vec3d> simulate_lidar(const SyntheticScene &scene, const CameraPose &pose, const LidarConfig &cfg,
                                  Rng &rng);

/// Casts rays given in the camera frame from the camera center; misses are dropped.
std::vector<Vec3d> cast_rays(const SyntheticScene &scene, const CameraPose &pose, std::span<const Vec3d> dirs_cam,
                             double range_noise, Rng &rng);

/// Keeps each point independently with probability 1 / keep_one_in.
template <typename P> std::vector<P> downsample_points(std::span<const P> points, int keep_one_in, Rng &rng) {
    if (keep_one_in < 1) throw std::invalid_argument("downsample_points: keep_one_in must be >= 1");
    std::vector<P> out;
    if (keep_one_in == 1) return {points.begin(), points.end()};
    std::uniform_int_distribution<int> pick(0, keep_one_in - 1);
    for (const auto &p : points)
        if (pick(rng) == 0) out.push_back(p);
    return out;
}

/// Bilinear image color for every point projecting into [0,W-1] x [0,H-1] in front of the near
/// plane; all others are dropped.
std::vector<ColoredPoint> colorize_points(std::span<const Vec3d> points, const RgbImage<float> &image,
                                          const CameraPose &pose, const CameraIntrinsics &intr,
                                          PointSource source = PointSource::lidar, double near = kDefaultNear);

struct FeatureTrack {
    int id = 0;
    /// (keyframe index, pixel), ordered by keyframe index.
    std::vector<std::pair<int, Vec2d>> observations;
};

struct TriangulationConfig {
    int min_track_length = 9;          // consecutive keyframes required
    double max_reprojection_px = 2.0;  // mean reprojection gate
    double min_parallax_rad = 1e-6;    // rays closer to parallel are degenerate
    double near = kDefaultNear;
};

/// Length of the longest run of consecutive keyframe indices in the track.
int longest_consecutive_run(const FeatureTrack &track);

/// Linear (DLT) triangulation over all observations with cheirality and reprojection checks.
/// `keyframe_poses[k]` is the pose of keyframe index k.
std::optional<Vec3d> triangulate_track(const FeatureTrack &track, std::span<const CameraPose> keyframe_poses,
                                       const CameraIntrinsics &intr, const TriangulationConfig &cfg = {});

/// Tracks of persistent surface anchors across keyframes: an observation is recorded whenever the
/// anchor projects inside the image unoccluded; a track ends at the first keyframe that misses it.
std::vector<FeatureTrack> simulate_tracks(const SyntheticScene &scene, std::span<const Vec3d> anchors,
                                          std::span<const CameraPose> keyframe_poses, const CameraIntrinsics &intr,
                                          double pixel_noise, Rng &rng);

/// True iff `p` is the first surface hit from `center` (within `tol` meters).
bool visible_from(const SyntheticScene &scene, const Vec3d &center, const Vec3d &p, double tol = 1e-6);

struct DatasetConfig {
    std::string scene = "room";
    int frames = 50;
    CameraIntrinsics intr{100, 100, 79.5, 59.5, 160, 120};
    LidarConfig lidar;
    int keep_one_in = 10;   // N_l
    int window = 11;        // N_k
    int track_length = 9;   // N_t
    int sfm_anchors = 3000;
    double sfm_pixel_noise = 0.0;
    double image_noise = 0.0;
    /// Per-keyframe exposure gain drawn uniformly from [gain_min, gain_max] (1 = off). Other frames are left unscaled.
    double gain_min = 1.0, gain_max = 1.0;
    std::uint64_t seed = 7;
};

// Dataset layout:
//   manifest.txt                 key = value lines (frame count, intrinsics, generator settings)
//   frames/NNNNN/image.ppm       8-bit RGB
//   frames/NNNNN/pose.txt        3 rows of "r r r t": world-to-camera [R | t]
//   frames/NNNNN/lidar.bin       float32 records (x, y, z, r, g, b, source_flag)
//   frames/NNNNN/sfm.bin         same record layout, source_flag = 1
void generate_dataset(const SyntheticScene &scene, std::span<const CameraPose> trajectory,
                      const DatasetConfig &cfg, const std::filesystem::path &out_dir);

/// Convenience: builtin scene + its default trajectory.
void generate_dataset(const DatasetConfig &cfg, const std::filesystem::path &out_dir);

struct DatasetInfo {
    std::filesystem::path root;
    int frames = 0;
    CameraIntrinsics intr;
    std::map<std::string, std::string> manifest;
};

DatasetInfo load_dataset_info(const std::filesystem::path &root);
/// Loads frame i (image, pose, LiDAR + SFM points). Throws DataError on malformed files.
CameraFrame load_frame(const DatasetInfo &info, int index);
std::filesystem::path frame_dir(const std::filesystem::path &root, int index);

void write_points(const std::filesystem::path &path, std::span<const ColoredPoint> points);
std::vector<ColoredPoint> read_points(const std::filesystem::path &path);
void write_pose(const std::filesystem::path &path, const CameraPose &pose);
CameraPose read_pose(const std::filesystem::path &path);

} // namespace splatmap
