// Copyright Contributors to the splatmap project
// SPDX-License-Identifier: Apache-2.0
//
// Core data model: cameras, frames and the structure-of-arrays Gaussian map.
//
#pragma once

#include "splatmap/image.hpp"
#include "splatmap/types.hpp"

#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

namespace splatmap {

struct CameraIntrinsics {
    double fx = 1, fy = 1, cx = 0.5, cy = 0.5;
    int width = 1, height = 1;

    bool valid() const {
        return fx > 0 && fy > 0 && cx > 0 && cx < width && cy > 0 && cy < height;
    }
};

/// World-to-camera rigid transform: p_c = rotation_wc * p_w + translation_wc.
struct CameraPose {
    Mat3d rotation_wc = Mat3d::Identity();
    Vec3d translation_wc = Vec3d::Zero();

    Vec3d to_camera(const Vec3d &p_w) const { return rotation_wc * p_w + translation_wc; }
    Vec3d center() const { return -rotation_wc.transpose() * translation_wc; }

    /// Pose of a camera at `center` whose axes (x right, y down, z forward) are the columns of `rotation_cw`.
    static CameraPose from_center(const Mat3d &rotation_cw, const Vec3d &center) {
        CameraPose pose;
        pose.rotation_wc = rotation_cw.transpose();
        pose.translation_wc = -pose.rotation_wc * center;
        return pose;
    }

    /// Camera at `eye` looking at `target`, with image-up roughly along `up`.
    static CameraPose look_at(const Vec3d &eye, const Vec3d &target, const Vec3d &up = Vec3d::UnitZ());

    bool is_rotation(double tol = 1e-9) const {
        return (rotation_wc * rotation_wc.transpose() - Mat3d::Identity()).norm() < tol &&
               std::abs(rotation_wc.determinant() - 1.0) < tol;
    }
};

struct Camera {
    CameraPose pose;
    CameraIntrinsics intr;
};

enum class PointSource : std::uint8_t { lidar = 0, sfm = 1 };

struct ColoredPoint {
    Vec3d position_w = Vec3d::Zero();
    Eigen::Vector3f rgb = Eigen::Vector3f::Zero();
    PointSource source = PointSource::lidar;
};

struct CameraFrame {
    CameraPose pose;
    CameraIntrinsics intr;
    RgbImage<float> image;
    std::vector<ColoredPoint> points;
    int frame_index = 0;
    bool is_keyframe = false;

    Camera camera() const { return {pose, intr}; }
};

/// Keyframe cadence shared by the frontend and the mapper.
inline constexpr int kKeyframeInterval = 5;
inline bool is_keyframe_index(int frame_index) { return frame_index % kKeyframeInterval == 0; }

/// Default padding of the frustum test, as a fraction of image size.
inline constexpr double kFrustumMargin = 0.1;

/// True iff `point_w` lies in front of the near plane and projects inside the image rectangle
/// [0, W-1] x [0, H-1] grown by `margin` * (W, H) on every side.
bool frustum_contains(const CameraPose &pose, const CameraIntrinsics &intr, const Vec3d &point_w,
                      double near = kDefaultNear, double margin = kFrustumMargin);

/// One Gaussian, by value. The map stores these as parallel arrays.
template <typename T> struct Gaussian {
    Vector3<T> position = Vector3<T>::Zero();
    Vector3<T> log_scale = Vector3<T>::Zero();
    Vector4<T> rotation = Vector4<T>(1, 0, 0, 0); // (w, x, y, z)
    T opacity_logit = T(0);
    Eigen::Matrix<T, kShCoeffs, 1> sh = Eigen::Matrix<T, kShCoeffs, 1>::Zero(); // [basis][channel]
    bool is_sky = false;

    bool operator==(const Gaussian &) const = default;
};

inline constexpr std::size_t kDefaultMapCapacity = 4'000'000;

/// Structure-of-arrays Gaussian store. Single writer; concurrent readers only while no append runs.
template <typename T> class GaussianMap {
public:
    explicit GaussianMap(std::size_t capacity = kDefaultMapCapacity) : capacity_(capacity) {}

    std::size_t size() const { return opacity_logits.size(); }
    bool empty() const { return size() == 0; }
    std::size_t sky_count() const { return sky_count_; }
    std::size_t capacity() const { return capacity_; }
    void set_capacity(std::size_t cap) { capacity_ = cap; }

    /// Appends all or nothing; throws CapacityError if the cap would be exceeded.
    std::size_t append(std::span<const Gaussian<T>> gaussians);
    std::size_t append(const Gaussian<T> &g) { return append(std::span<const Gaussian<T>>(&g, 1)); }

    Gaussian<T> get(std::size_t i) const;
    void set(std::size_t i, const Gaussian<T> &g);
    void reserve(std::size_t n);
    void clear();

    Eigen::Map<Vector3<T>> position(std::size_t i) { return Eigen::Map<Vector3<T>>(&positions[3 * i]); }
    Eigen::Map<const Vector3<T>> position(std::size_t i) const {
        return Eigen::Map<const Vector3<T>>(&positions[3 * i]);
    }
    Eigen::Map<const Vector3<T>> log_scale(std::size_t i) const {
        return Eigen::Map<const Vector3<T>>(&log_scales[3 * i]);
    }
    Eigen::Map<const Vector4<T>> rotation(std::size_t i) const {
        return Eigen::Map<const Vector4<T>>(&rotations[4 * i]);
    }
    Eigen::Map<const Eigen::Matrix<T, kShCoeffs, 1>> sh_coeffs(std::size_t i) const {
        return Eigen::Map<const Eigen::Matrix<T, kShCoeffs, 1>>(&sh[kShCoeffs * i]);
    }
    bool is_sky(std::size_t i) const { return sky[i] != 0; }

    /// Renormalizes every stored quaternion to unit length.
    void normalize_rotations();

    template <typename U> GaussianMap<U> cast() const;

    // Parallel parameter arrays (length = size() * width).
    std::vector<T> positions;      // 3
    std::vector<T> log_scales;     // 3
    std::vector<T> rotations;      // 4
    std::vector<T> opacity_logits; // 1
    std::vector<T> sh;             // 48
    std::vector<std::uint8_t> sky; // 1

private:
    std::size_t capacity_;
    std::size_t sky_count_ = 0;

    template <typename U> friend class GaussianMap;
    template <typename U> friend GaussianMap<U> read_map(const std::filesystem::path &);
    template <typename U> friend GaussianMap<U> read_map(std::istream &);
};

// Map binary format (little-endian):
//   char[4] "GSMP", u32 version (=1), u64 count, u64 sky_count,
//   then float32 arrays: positions[3N], log_scales[3N], rotations[4N], opacity_logits[N],
//   sh[48N], sky_flags[N] (0.0 or 1.0).
inline constexpr std::uint32_t kMapFormatVersion = 1;

template <typename T> void write_map(std::ostream &os, const GaussianMap<T> &map);
template <typename T> void write_map(const std::filesystem::path &path, const GaussianMap<T> &map);
template <typename T> GaussianMap<T> read_map(std::istream &is);
template <typename T> GaussianMap<T> read_map(const std::filesystem::path &path);

/// Plain-text summary: count, sky_count, and axis-aligned bounding boxes.
template <typename T> std::string map_summary(const GaussianMap<T> &map);

} // namespace splatmap
