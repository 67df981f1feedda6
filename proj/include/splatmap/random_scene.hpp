// Copyright Contributors to the splatmap project
// SPDX-License-Identifier: Apache-2.0
//
// Random Gaussian workloads used by the gradient check, the benchmarks and
// the test suites.
//
#pragma once

#include "splatmap/projection.hpp"
#include "splatmap/scene.hpp"

#include <numbers>
#include <random>

namespace splatmap {

struct RandomSceneOptions {
    int gaussians = 100;
    double min_depth = 2.0, max_depth = 6.0;
    /// Largest-axis standard deviation range, in pixels at the Gaussian's depth.
    double min_pixels = 0.8, max_pixels = 6.0;
    /// Ratio between the largest and the two smaller axes (1 = isotropic).
    double anisotropy = 1.0;
    double opacity_logit_min = -2.0, opacity_logit_max = 3.0;
    double dc_range = 1.5;
    double sh_rest_sigma = 0.1;
    /// Fraction of the image size by which centers may fall outside the image.
    double border = 0.15;
};

/// Camera at distance 4 from the origin looking at it from a random direction.
inline Camera random_camera(int width, int height, double fx, std::mt19937_64 &rng) {
    std::normal_distribution<double> n01;
    Vec3d dir(n01(rng), n01(rng), n01(rng));
    dir.normalize();
    if (std::abs(dir.z()) > 0.95) dir = Vec3d(1, 0, 0);
    Camera cam;
    cam.intr = CameraIntrinsics{fx, fx, 0.5 * (width - 1), 0.5 * (height - 1), width, height};
    cam.pose = CameraPose::look_at(4.0 * dir, Vec3d::Zero());
    return cam;
}

inline Vector4<double> random_unit_quaternion(std::mt19937_64 &rng) {
    std::normal_distribution<double> n01;
    Vector4<double> q(n01(rng), n01(rng), n01(rng), n01(rng));
    return q / q.norm();
}

/// Gaussians whose centers are spread over the view of `cam` (including a border margin).
template <typename T>
GaussianMap<T> random_map(const RandomSceneOptions &opt, const Camera &cam, std::mt19937_64 &rng) {
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::normal_distribution<double> n01;
    const auto &in = cam.intr;
    const Mat3d r_cw = cam.pose.rotation_wc.transpose();
    const Vec3d center = cam.pose.center();
    std::vector<Gaussian<T>> gs(static_cast<std::size_t>(opt.gaussians));
    for (auto &g : gs) {
        const double u = (-opt.border + (1 + 2 * opt.border) * uni(rng)) * (in.width - 1);
        const double v = (-opt.border + (1 + 2 * opt.border) * uni(rng)) * (in.height - 1);
        const double z = opt.min_depth + (opt.max_depth - opt.min_depth) * uni(rng);
        const Vec3d pc((u - in.cx) / in.fx * z, (v - in.cy) / in.fy * z, z);
        g.position = (r_cw * pc + center).cast<T>();
        const double px = opt.min_pixels + (opt.max_pixels - opt.min_pixels) * uni(rng);
        const double s = px * z / in.fx;
        g.log_scale = Vector3<T>(T(std::log(s)), T(std::log(s / opt.anisotropy)), T(std::log(s / opt.anisotropy)));
        g.rotation = random_unit_quaternion(rng).cast<T>();
        g.opacity_logit = T(opt.opacity_logit_min + (opt.opacity_logit_max - opt.opacity_logit_min) * uni(rng));
        for (int c = 0; c < 3; ++c) g.sh[c] = T(opt.dc_range * (2 * uni(rng) - 1));
        for (int k = 3; k < kShCoeffs; ++k) g.sh[k] = T(opt.sh_rest_sigma * n01(rng));
    }
    GaussianMap<T> map;
    map.append(gs);
    return map;
}

/// Uniform random image in [lo, hi].
template <typename T> RgbImage<T> random_image(int height, int width, std::mt19937_64 &rng, double lo = 0, double hi = 1) {
    std::uniform_real_distribution<double> uni(lo, hi);
    RgbImage<T> img(height, width);
    for (auto &c : img.ch)
        for (Eigen::Index k = 0; k < c.size(); ++k) c.data()[k] = T(uni(rng));
    return img;
}

} // namespace splatmap
