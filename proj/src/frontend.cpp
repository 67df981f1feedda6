// Copyright Contributors to the splatmap project
// SPDX-License-Identifier: Apache-2.0
//
#include "splatmap/frontend.hpp"

#include "binary_io.hpp"

#include <Eigen/SVD>

#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

namespace splatmap {

namespace fs = std::filesystem;

namespace {

constexpr double kRayEpsilon = 1e-9;
constexpr double kPi = std::numbers::pi;

Eigen::Vector3f rgb(float r, float g, float b) { return {r, g, b}; }

int floor_parity(double x, double period) { return static_cast<int>(std::floor(x / period)) & 1; }

Rng stream_rng(std::uint64_t seed, std::uint64_t index, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(stream)};
    return Rng(seq);
}

std::optional<RayHit> intersect_quad(const Primitive &q, const Vec3d &o, const Vec3d &d) {
    const Vec3d n = q.normal();
    const double denom = n.dot(d);
    if (std::abs(denom) < 1e-12) return std::nullopt;
    const double t = n.dot(q.center - o) / denom;
    if (!(t > kRayEpsilon)) return std::nullopt;
    const Vec3d p = o + t * d;
    const double u = (p - q.center).dot(q.axis_u), v = (p - q.center).dot(q.axis_v);
    if (std::abs(u) > q.half_u || std::abs(v) > q.half_v) return std::nullopt;
    RayHit h;
    h.t = t;
    h.point = p;
    h.normal = n;
    h.albedo = q.texture.eval(u + q.half_u, v + q.half_v);
    return h;
}

std::optional<RayHit> intersect_sphere(const Primitive &s, const Vec3d &o, const Vec3d &d) {
    const Vec3d oc = o - s.center;
    const double b = oc.dot(d), c = oc.squaredNorm() - s.radius * s.radius;
    const double disc = b * b - c;
    if (disc < 0) return std::nullopt;
    const double sq = std::sqrt(disc);
    double t = -b - sq;
    if (!(t > kRayEpsilon)) t = -b + sq;
    if (!(t > kRayEpsilon)) return std::nullopt;
    RayHit h;
    h.t = t;
    h.point = o + t * d;
    h.normal = (h.point - s.center) / s.radius;
    const double lon = std::atan2(h.normal.y(), h.normal.x());
    const double lat = std::asin(std::clamp(h.normal.z(), -1.0, 1.0));
    h.albedo = s.texture.eval(s.radius * (lon + kPi), s.radius * (lat + kPi / 2));
    return h;
}

std::optional<RayHit> intersect_box(const Primitive &b, const Vec3d &o, const Vec3d &d) {
    const Vec3d lo = b.center - b.half_extents, hi = b.center + b.half_extents;
    double t_near = -std::numeric_limits<double>::infinity(), t_far = std::numeric_limits<double>::infinity();
    int axis_near = -1, axis_far = -1;
    for (int a = 0; a < 3; ++a) {
        if (std::abs(d[a]) < 1e-15) {
            if (o[a] < lo[a] || o[a] > hi[a]) return std::nullopt;
            continue;
        }
        double t0 = (lo[a] - o[a]) / d[a], t1 = (hi[a] - o[a]) / d[a];
        if (t0 > t1) std::swap(t0, t1);
        if (t0 > t_near) t_near = t0, axis_near = a;
        if (t1 < t_far) t_far = t1, axis_far = a;
    }
    if (t_near > t_far) return std::nullopt;
    double t = t_near;
    int axis = axis_near;
    if (!(t > kRayEpsilon)) t = t_far, axis = axis_far;
    if (!(t > kRayEpsilon) || axis < 0) return std::nullopt;
    RayHit h;
    h.t = t;
    h.point = o + t * d;
    h.normal = Vec3d::Zero();
    h.normal[axis] = h.point[axis] > b.center[axis] ? 1.0 : -1.0;
    const int a1 = (axis + 1) % 3, a2 = (axis + 2) % 3;
    h.albedo = b.texture.eval(h.point[a1] - lo[a1], h.point[a2] - lo[a2]);
    return h;
}

Vec3d sample_unit_sphere(Rng &rng) {
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    const double z = 2 * uni(rng) - 1, phi = 2 * kPi * uni(rng);
    const double r = std::sqrt(std::max(0.0, 1 - z * z));
    return {r * std::cos(phi), r * std::sin(phi), z};
}

Primitive quad(const Vec3d &c, const Vec3d &u, const Vec3d &v, double hu, double hv, const Texture &tex) {
    Primitive p;
    p.kind = Primitive::Kind::quad;
    p.center = c;
    p.axis_u = u.normalized();
    p.axis_v = v.normalized();
    p.half_u = hu;
    p.half_v = hv;
    p.texture = tex;
    return p;
}

Primitive sphere(const Vec3d &c, double r, const Texture &tex) {
    Primitive p;
    p.kind = Primitive::Kind::sphere;
    p.center = c;
    p.radius = r;
    p.texture = tex;
    return p;
}

Primitive box(const Vec3d &c, const Vec3d &half, const Texture &tex) {
    Primitive p;
    p.kind = Primitive::Kind::box;
    p.center = c;
    p.half_extents = half;
    p.texture = tex;
    return p;
}

Texture checker(const Eigen::Vector3f &a, const Eigen::Vector3f &b, double period, double ramp = 0) {
    return {Texture::Kind::checker, a, b, period, ramp};
}
Texture stripes(const Eigen::Vector3f &a, const Eigen::Vector3f &b, double period, double ramp = 0) {
    return {Texture::Kind::stripes, a, b, period, ramp};
}
Texture constant(const Eigen::Vector3f &a, double ramp = 0) { return {Texture::Kind::constant, a, a, 1.0, ramp}; }

SyntheticScene make_room() {
    SyntheticScene s;
    s.name = "room";
    s.extent = 8.0;
    s.background = rgb(0, 0, 0);
    const double h = 4.0, zc = 1.5, hz = 1.5;
    s.primitives.push_back(quad({0, 0, 0}, Vec3d::UnitX(), Vec3d::UnitY(), h, h,
                                checker(rgb(0.55f, 0.50f, 0.40f), rgb(0.30f, 0.26f, 0.22f), 1.0, 0.15)));
    s.primitives.push_back(quad({0, 0, 2 * hz}, Vec3d::UnitY(), Vec3d::UnitX(), h, h,
                                constant(rgb(0.62f, 0.62f, 0.58f), 0.12)));
    s.primitives.push_back(quad({h, 0, zc}, -Vec3d::UnitY(), Vec3d::UnitZ(), h, hz,
                                checker(rgb(0.60f, 0.35f, 0.30f), rgb(0.40f, 0.22f, 0.20f), 0.75, 0.1)));
    s.primitives.push_back(quad({-h, 0, zc}, Vec3d::UnitY(), Vec3d::UnitZ(), h, hz,
                                stripes(rgb(0.30f, 0.50f, 0.35f), rgb(0.20f, 0.35f, 0.25f), 0.6, 0.1)));
    s.primitives.push_back(quad({0, h, zc}, Vec3d::UnitX(), Vec3d::UnitZ(), h, hz,
                                checker(rgb(0.35f, 0.40f, 0.60f), rgb(0.22f, 0.26f, 0.42f), 0.75, 0.1)));
    s.primitives.push_back(quad({0, -h, zc}, -Vec3d::UnitX(), Vec3d::UnitZ(), h, hz,
                                stripes(rgb(0.62f, 0.58f, 0.35f), rgb(0.45f, 0.40f, 0.22f), 0.5, 0.1)));
    s.primitives.push_back(sphere({0.6, -0.5, 0.7}, 0.7,
                                  stripes(rgb(0.65f, 0.30f, 0.25f), rgb(0.45f, 0.20f, 0.15f), 0.4)));
    s.primitives.push_back(box({-0.9, 0.7, 0.6}, {0.5, 0.5, 0.6},
                               checker(rgb(0.20f, 0.45f, 0.60f), rgb(0.15f, 0.30f, 0.45f), 0.3)));
    return s;
}

SyntheticScene make_courtyard() {
    SyntheticScene s;
    s.name = "courtyard";
    s.extent = 30.0;
    s.sky = true;
    s.primitives.push_back(quad({0, 0, 0}, Vec3d::UnitX(), Vec3d::UnitY(), 30, 30,
                                checker(rgb(0.45f, 0.45f, 0.42f), rgb(0.30f, 0.30f, 0.28f), 2.0, 0.1)));
    const std::array<Eigen::Vector3f, 3> wall{rgb(0.60f, 0.45f, 0.35f), rgb(0.40f, 0.50f, 0.60f),
                                              rgb(0.55f, 0.55f, 0.45f)};
    for (int k = 0; k < 6; ++k) {
        const double a = 2 * kPi * k / 6.0 + 0.2;
        const double r = 11 + 2 * (k % 2), hz = 2.0 + 0.8 * (k % 3);
        s.primitives.push_back(box({r * std::cos(a), r * std::sin(a), hz}, {2.0, 2.0, hz},
                                   checker(wall[k % 3], 0.6f * wall[k % 3], 1.0, 0.1)));
    }
    s.primitives.push_back(sphere({5, 2, 1.0}, 1.0, stripes(rgb(0.65f, 0.30f, 0.25f), rgb(0.4f, 0.2f, 0.15f), 0.5)));
    return s;
}

SyntheticScene make_empty() {
    SyntheticScene s;
    s.name = "empty";
    s.background = rgb(0.2f, 0.3f, 0.4f);
    return s;
}

} // namespace

Eigen::Vector3f Texture::eval(double u, double v) const {
    Eigen::Vector3f c = a;
    switch (kind) {
    case Kind::constant: break;
    case Kind::checker: c = (floor_parity(u, period) ^ floor_parity(v, period)) ? b : a; break;
    case Kind::stripes: c = floor_parity(u, period) ? b : a; break;
    }
    if (ramp != 0) {
        const double w = 2 * kPi / (4 * period);
        c *= static_cast<float>(1 + ramp * std::sin(w * u) * std::cos(w * v));
    }
    return c.cwiseMax(0.0f).cwiseMin(1.0f);
}

double Primitive::area() const {
    switch (kind) {
    case Kind::quad: return 4 * half_u * half_v;
    case Kind::sphere: return 4 * kPi * radius * radius;
    case Kind::box: {
        const Vec3d &h = half_extents;
        return 8 * (h.x() * h.y() + h.y() * h.z() + h.x() * h.z());
    }
    }
    return 0;
}

std::optional<RayHit> SyntheticScene::intersect(const Vec3d &origin, const Vec3d &dir) const {
    std::optional<RayHit> best;
    for (std::size_t i = 0; i < primitives.size(); ++i) {
        const Primitive &p = primitives[i];
        std::optional<RayHit> h;
        switch (p.kind) {
        case Primitive::Kind::quad: h = intersect_quad(p, origin, dir); break;
        case Primitive::Kind::sphere: h = intersect_sphere(p, origin, dir); break;
        case Primitive::Kind::box: h = intersect_box(p, origin, dir); break;
        }
        if (h && (!best || h->t < best->t)) {
            h->primitive = static_cast<int>(i);
            best = h;
        }
    }
    return best;
}

Eigen::Vector3f SyntheticScene::background_color(const Vec3d &dir) const {
    if (!sky) return background;
    const double e = std::asin(std::clamp(dir.normalized().z(), -1.0, 1.0));
    if (e < 0) return rgb(0.35f, 0.35f, 0.35f);
    const float s = static_cast<float>(std::min(1.0, e / (kPi / 2)));
    return (1 - s) * rgb(0.78f, 0.85f, 0.93f) + s * rgb(0.35f, 0.55f, 0.85f);
}

double SyntheticScene::surface_distance(const Vec3d &p) const {
    double best = std::numeric_limits<double>::infinity();
    for (const auto &q : primitives) {
        double d = 0;
        switch (q.kind) {
        case Primitive::Kind::quad: {
            const Vec3d r = p - q.center;
            const double u = std::clamp(r.dot(q.axis_u), -q.half_u, q.half_u);
            const double v = std::clamp(r.dot(q.axis_v), -q.half_v, q.half_v);
            d = (r - u * q.axis_u - v * q.axis_v).norm();
            break;
        }
        case Primitive::Kind::sphere: d = std::abs((p - q.center).norm() - q.radius); break;
        case Primitive::Kind::box: {
            const Vec3d e = (p - q.center).cwiseAbs() - q.half_extents;
            d = e.maxCoeff() > 0 ? e.cwiseMax(0.0).norm() : -e.maxCoeff();
            break;
        }
        }
        best = std::min(best, d);
    }
    return best;
}

Vec3d SyntheticScene::sample_surface(Rng &rng) const {
    if (primitives.empty()) throw std::invalid_argument("sample_surface: scene has no primitives");
    std::vector<double> areas;
    for (const auto &p : primitives) areas.push_back(p.area());
    std::discrete_distribution<std::size_t> pick(areas.begin(), areas.end());
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    const Primitive &p = primitives[pick(rng)];
    switch (p.kind) {
    case Primitive::Kind::quad: return p.center + uni(rng) * p.half_u * p.axis_u + uni(rng) * p.half_v * p.axis_v;
    case Primitive::Kind::sphere: return p.center + p.radius * sample_unit_sphere(rng);
    case Primitive::Kind::box: {
        const Vec3d &h = p.half_extents;
        const std::array<double, 3> face{h.y() * h.z(), h.x() * h.z(), h.x() * h.y()};
        std::discrete_distribution<int> pick_axis(face.begin(), face.end());
        const int axis = pick_axis(rng);
        Vec3d local(uni(rng) * h.x(), uni(rng) * h.y(), uni(rng) * h.z());
        local[axis] = (uni(rng) < 0 ? -1.0 : 1.0) * h[axis];
        return p.center + local;
    }
    }
    return p.center;
}

SyntheticScene make_scene(const std::string &name) {
    if (name == "room") return make_room();
    if (name == "courtyard") return make_courtyard();
    if (name == "empty") return make_empty();
    throw std::invalid_argument("unknown scene '" + name + "' (expected room, courtyard or empty)");
}

std::vector<std::string> builtin_scene_names() { return {"room", "courtyard", "empty"}; }

std::vector<CameraPose> make_trajectory(const std::string &scene_name, int frames) {
    if (frames < 1) throw std::invalid_argument("trajectory needs at least one frame");
    std::vector<CameraPose> out;
    const double arc = 2 * kPi / 3;
    for (int i = 0; i < frames; ++i) {
        const double s = frames == 1 ? 0.0 : static_cast<double>(i) / (frames - 1);
        const double th = -kPi / 6 + arc * s;
        if (scene_name == "courtyard") {
            const Vec3d eye(3 * std::cos(th), 3 * std::sin(th), 1.6);
            const Vec3d target(12 * std::cos(th + 0.3), 12 * std::sin(th + 0.3), 3.0);
            out.push_back(CameraPose::look_at(eye, target));
        } else if (scene_name == "room" || scene_name == "empty") {
            const Vec3d eye(2.8 * std::cos(th), 2.8 * std::sin(th), 1.4 + 0.15 * std::sin(2 * th));
            const Vec3d target(0.3 * std::sin(3 * th), 0.3 * std::cos(2 * th), 0.9);
            out.push_back(CameraPose::look_at(eye, target));
        } else {
            throw std::invalid_argument("unknown scene '" + scene_name + "'");
        }
    }
    return out;
}

RgbImage<float> raycast_render(const SyntheticScene &scene, const CameraPose &pose, const CameraIntrinsics &intr) {
    RgbImage<float> img(intr.height, intr.width);
    const Mat3d r_cw = pose.rotation_wc.transpose();
    const Vec3d origin = pose.center();
#pragma omp parallel for schedule(dynamic, 4)
    for (int y = 0; y < intr.height; ++y)
        for (int x = 0; x < intr.width; ++x) {
            const Vec3d d = (r_cw * Vec3d((x - intr.cx) / intr.fx, (y - intr.cy) / intr.fy, 1.0)).normalized();
            const auto hit = scene.intersect(origin, d);
            img.set_pixel(y, x, hit ? hit->albedo : scene.background_color(d));
        }
    return img;
}

std::vector<double> spinning_elevations(const LidarConfig &cfg) {
    if (cfg.rings < 1) throw std::invalid_argument("spinning LiDAR needs at least one ring");
    std::vector<double> el;
    const double m = cfg.max_elevation_deg * kPi / 180;
    for (int k = 0; k < cfg.rings; ++k) el.push_back(cfg.rings == 1 ? 0.0 : -m + 2 * m * k / (cfg.rings - 1));
    return el;
}

std::vector<Vec3d> cast_rays(const SyntheticScene &scene, const CameraPose &pose, std::span<const Vec3d> dirs_cam,
                             double range_noise, Rng &rng) {
    std::vector<Vec3d> out;
    out.reserve(dirs_cam.size());
    const Mat3d r_cw = pose.rotation_wc.transpose();
    const Vec3d origin = pose.center();
    std::normal_distribution<double> noise(0.0, range_noise > 0 ? range_noise : 1.0);
    for (const auto &dc : dirs_cam) {
        const Vec3d d = (r_cw * dc).normalized();
        const auto hit = scene.intersect(origin, d);
        if (!hit) continue;
        const double t = range_noise > 0 ? hit->t + noise(rng) : hit->t;
        out.push_back(origin + t * d);
    }
    return out;
}

std::vector<Vec3d> simulate_lidar(const SyntheticScene &scene, const CameraPose &pose, const LidarConfig &cfg,
                                  Rng &rng) {
    if (cfg.rays <= 0) throw std::invalid_argument("simulate_lidar: rays must be positive");
    std::vector<Vec3d> dirs;
    dirs.reserve(static_cast<std::size_t>(cfg.rays));
    if (cfg.pattern == LidarPattern::spinning) {
        const auto el = spinning_elevations(cfg);
        const int rings = static_cast<int>(el.size());
        const int per_ring = (cfg.rays + rings - 1) / rings;
        for (int j = 0; j < cfg.rays; ++j) {
            const double e = el[j % rings], az = 2 * kPi * (j / rings) / per_ring;
            dirs.emplace_back(std::cos(e) * std::sin(az), -std::sin(e), std::cos(e) * std::cos(az));
        }
    } else {
        std::uniform_real_distribution<double> uni(0.0, 1.0);
        const double cmin = std::cos(cfg.cone_half_angle_deg * kPi / 180);
        for (int j = 0; j < cfg.rays; ++j) {
            const double c = cmin + (1 - cmin) * uni(rng), phi = 2 * kPi * uni(rng);
            const double s = std::sqrt(std::max(0.0, 1 - c * c));
            dirs.emplace_back(s * std::cos(phi), s * std::sin(phi), c);
        }
    }
    return cast_rays(scene, pose, dirs, cfg.range_noise, rng);
}

std::vector<ColoredPoint> colorize_points(std::span<const Vec3d> points, const RgbImage<float> &image,
                                          const CameraPose &pose, const CameraIntrinsics &intr, PointSource source,
                                          double near) {
    if (image.width() != intr.width || image.height() != intr.height)
        throw std::invalid_argument("colorize_points: image does not match intrinsics");
    std::vector<ColoredPoint> out;
    for (const auto &p : points) {
        if (!frustum_contains(pose, intr, p, near, 0.0)) continue;
        const Vec3d pc = pose.to_camera(p);
        const double u = intr.fx * pc.x() / pc.z() + intr.cx, v = intr.fy * pc.y() / pc.z() + intr.cy;
        out.push_back({p, sample_bilinear(image, u, v), source});
    }
    return out;
}

int longest_consecutive_run(const FeatureTrack &track) {
    int best = 0, run = 0, prev = 0;
    for (std::size_t k = 0; k < track.observations.size(); ++k) {
        const int idx = track.observations[k].first;
        run = (k > 0 && idx == prev + 1) ? run + 1 : 1;
        prev = idx;
        best = std::max(best, run);
    }
    return best;
}

std::optional<Vec3d> triangulate_track(const FeatureTrack &track, std::span<const CameraPose> keyframe_poses,
                                       const CameraIntrinsics &intr, const TriangulationConfig &cfg) {
    const auto &obs = track.observations;
    if (obs.size() < 2 || longest_consecutive_run(track) < cfg.min_track_length) return std::nullopt;
    for (const auto &[k, px] : obs)
        if (k < 0 || static_cast<std::size_t>(k) >= keyframe_poses.size())
            throw std::out_of_range("triangulate_track: keyframe index " + std::to_string(k) + " has no pose");

    // Degenerate when every ray is parallel to every other one, or all rays share one center.
    std::vector<Vec3d> rays;
    double max_angle = 0, max_baseline = 0;
    for (const auto &[k, px] : obs) {
        const CameraPose &pose = keyframe_poses[k];
        const Vec3d dc((px.x() - intr.cx) / intr.fx, (px.y() - intr.cy) / intr.fy, 1.0);
        rays.push_back((pose.rotation_wc.transpose() * dc).normalized());
    }
    for (std::size_t i = 0; i < obs.size(); ++i)
        for (std::size_t j = i + 1; j < obs.size(); ++j) {
            max_angle = std::max(max_angle, std::acos(std::clamp(rays[i].dot(rays[j]), -1.0, 1.0)));
            max_baseline = std::max(
                max_baseline, (keyframe_poses[obs[i].first].center() - keyframe_poses[obs[j].first].center()).norm());
        }
    if (max_angle < cfg.min_parallax_rad || max_baseline < 1e-9) return std::nullopt;

    Eigen::MatrixXd a(2 * obs.size(), 4);
    for (std::size_t i = 0; i < obs.size(); ++i) {
        const CameraPose &pose = keyframe_poses[obs[i].first];
        Matrix34<double> p;
        p.leftCols<3>() = pose.rotation_wc;
        p.col(3) = pose.translation_wc;
        const double xn = (obs[i].second.x() - intr.cx) / intr.fx, yn = (obs[i].second.y() - intr.cy) / intr.fy;
        a.row(2 * i) = xn * p.row(2) - p.row(0);
        a.row(2 * i + 1) = yn * p.row(2) - p.row(1);
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
    const Eigen::Vector4d x = svd.matrixV().col(3);
    if (std::abs(x[3]) < 1e-12 * x.norm()) return std::nullopt;
    const Vec3d point = x.head<3>() / x[3];

    double err = 0;
    for (const auto &[k, px] : obs) {
        const Vec3d pc = keyframe_poses[k].to_camera(point);
        if (!(pc.z() > cfg.near)) return std::nullopt;
        const Vec2d proj(intr.fx * pc.x() / pc.z() + intr.cx, intr.fy * pc.y() / pc.z() + intr.cy);
        err += (proj - px).norm();
    }
    if (err / static_cast<double>(obs.size()) > cfg.max_reprojection_px) return std::nullopt;
    return point;
}

bool visible_from(const SyntheticScene &scene, const Vec3d &center, const Vec3d &p, double tol) {
    const Vec3d d = p - center;
    const double dist = d.norm();
    if (dist <= 0) return false;
    const auto hit = scene.intersect(center, d / dist);
    return hit && std::abs(hit->t - dist) <= tol * std::max(1.0, dist);
}

std::vector<FeatureTrack> simulate_tracks(const SyntheticScene &scene, std::span<const Vec3d> anchors,
                                          std::span<const CameraPose> keyframe_poses, const CameraIntrinsics &intr,
                                          double pixel_noise, Rng &rng) {
    std::vector<FeatureTrack> out;
    std::normal_distribution<double> noise(0.0, pixel_noise > 0 ? pixel_noise : 1.0);
    int next_id = 0;
    for (const auto &a : anchors) {
        FeatureTrack cur;
        auto flush = [&] {
            if (cur.observations.size() >= 2) {
                cur.id = next_id++;
                out.push_back(std::move(cur));
            }
            cur = FeatureTrack{};
        };
        for (std::size_t k = 0; k < keyframe_poses.size(); ++k) {
            const CameraPose &pose = keyframe_poses[k];
            if (!frustum_contains(pose, intr, a, kDefaultNear, 0.0) || !visible_from(scene, pose.center(), a)) {
                flush();
                continue;
            }
            const Vec3d pc = pose.to_camera(a);
            Vec2d px(intr.fx * pc.x() / pc.z() + intr.cx, intr.fy * pc.y() / pc.z() + intr.cy);
            if (pixel_noise > 0) px += Vec2d(noise(rng), noise(rng));
            cur.observations.emplace_back(static_cast<int>(k), px);
        }
        flush();
    }
    return out;
}

fs::path frame_dir(const fs::path &root, int index) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%05d", index);
    return root / "frames" / buf;
}

void write_points(const fs::path &path, std::span<const ColoredPoint> points) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot open " + path.string() + " for writing");
    for (const auto &p : points) {
        const std::array<float, 7> rec{static_cast<float>(p.position_w.x()), static_cast<float>(p.position_w.y()),
                                       static_cast<float>(p.position_w.z()), p.rgb.x(), p.rgb.y(), p.rgb.z(),
                                       static_cast<float>(p.source)};
        detail::write_pod(os, rec);
    }
    if (!os) throw DataError("write failed: " + path.string());
}

std::vector<ColoredPoint> read_points(const fs::path &path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open " + path.string());
    const auto bytes = fs::file_size(path);
    if (bytes % (7 * sizeof(float)) != 0) throw DataError("point file size is not a multiple of 28: " + path.string());
    std::vector<ColoredPoint> out(bytes / (7 * sizeof(float)));
    for (auto &p : out) {
        const auto rec = detail::read_pod<std::array<float, 7>>(is);
        p.position_w = Vec3d(rec[0], rec[1], rec[2]);
        p.rgb = Eigen::Vector3f(rec[3], rec[4], rec[5]);
        if (rec[6] != 0.0f && rec[6] != 1.0f) throw DataError("bad source flag in " + path.string());
        p.source = rec[6] == 0.0f ? PointSource::lidar : PointSource::sfm;
    }
    return out;
}

void write_pose(const fs::path &path, const CameraPose &pose) {
    std::ofstream os(path);
    if (!os) throw DataError("cannot open " + path.string() + " for writing");
    char buf[64];
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 4; ++c) {
            const double v = c < 3 ? pose.rotation_wc(r, c) : pose.translation_wc[r];
            std::snprintf(buf, sizeof buf, "%.17g", v);
            os << buf << (c < 3 ? ' ' : '\n');
        }
    }
    if (!os) throw DataError("write failed: " + path.string());
}

CameraPose read_pose(const fs::path &path) {
    std::ifstream is(path);
    if (!is) throw DataError("cannot open " + path.string());
    CameraPose pose;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 4; ++c) {
            double v;
            if (!(is >> v)) throw DataError("malformed pose file " + path.string());
            (c < 3 ? pose.rotation_wc(r, c) : pose.translation_wc[r]) = v;
        }
    if (!pose.is_rotation(1e-6)) throw DataError("pose rotation is not orthonormal in " + path.string());
    return pose;
}

namespace {

void write_manifest(const fs::path &root, const DatasetConfig &cfg, int frames) {
    std::ofstream os(root / "manifest.txt");
    if (!os) throw DataError("cannot write manifest in " + root.string());
    char buf[64];
    auto num = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
    };
    os << "# splatmap synthetic dataset\n"
       << "format = 1\n"
       << "frames = " << frames << "\n"
       << "width = " << cfg.intr.width << "\n"
       << "height = " << cfg.intr.height << "\n"
       << "fx = " << num(cfg.intr.fx) << "\n"
       << "fy = " << num(cfg.intr.fy) << "\n"
       << "cx = " << num(cfg.intr.cx) << "\n"
       << "cy = " << num(cfg.intr.cy) << "\n"
       << "keyframe_interval = " << kKeyframeInterval << "\n"
       << "scene = " << cfg.scene << "\n"
       << "seed = " << cfg.seed << "\n"
       << "lidar_pattern = " << (cfg.lidar.pattern == LidarPattern::spinning ? "spinning" : "solid_state") << "\n"
       << "lidar_rays = " << cfg.lidar.rays << "\n"
       << "lidar_range_noise = " << num(cfg.lidar.range_noise) << "\n"
       << "keep_one_in = " << cfg.keep_one_in << "\n"
       << "window = " << cfg.window << "\n"
       << "track_length = " << cfg.track_length << "\n"
       << "sfm_anchors = " << cfg.sfm_anchors << "\n"
       << "sfm_pixel_noise = " << num(cfg.sfm_pixel_noise) << "\n"
       << "image_noise = " << num(cfg.image_noise) << "\n"
       << "gain_min = " << num(cfg.gain_min) << "\n"
       << "gain_max = " << num(cfg.gain_max) << "\n";
    if (!os) throw DataError("write failed: manifest.txt");
}

} // namespace

void generate_dataset(const SyntheticScene &scene, std::span<const CameraPose> trajectory, const DatasetConfig &cfg,
                      const fs::path &out_dir) {
    if (!cfg.intr.valid()) throw std::invalid_argument("generate_dataset: invalid intrinsics");
    if (cfg.keep_one_in < 1 || cfg.window < 1 || cfg.track_length < 2)
        throw std::invalid_argument("generate_dataset: keep_one_in, window and track_length must be positive");
    for (const auto &p : trajectory)
        if (!p.is_rotation(1e-6)) throw std::invalid_argument("generate_dataset: trajectory pose is not a rotation");
    const int frames = static_cast<int>(trajectory.size());
    fs::create_directories(out_dir / "frames");
    write_manifest(out_dir, cfg, frames);

    std::vector<RgbImage<float>> keyframe_images(static_cast<std::size_t>(frames));
    std::vector<std::string> errors(static_cast<std::size_t>(frames));

#pragma omp parallel for schedule(dynamic, 1)
    for (int i = 0; i < frames; ++i) {
        try {
            const fs::path dir = frame_dir(out_dir, i);
            fs::create_directories(dir);
            const CameraPose &pose = trajectory[static_cast<std::size_t>(i)];
            Rng img_rng = stream_rng(cfg.seed, static_cast<std::uint64_t>(i), 1);
            RgbImage<float> img = raycast_render(scene, pose, cfg.intr);
            std::uniform_real_distribution<double> gain_dist(cfg.gain_min, cfg.gain_max);
            // Exposure changes are applied to keyframe images only.
            float gain = 1.0f;
            if (is_keyframe_index(i))
                gain = cfg.gain_min == cfg.gain_max ? static_cast<float>(cfg.gain_min)
                                                    : static_cast<float>(gain_dist(img_rng));
            std::normal_distribution<float> pix_noise(0.0f, static_cast<float>(cfg.image_noise));
            for (auto &c : img.ch) {
                c *= gain;
                if (cfg.image_noise > 0)
                    for (Eigen::Index k = 0; k < c.size(); ++k) c.data()[k] += pix_noise(img_rng);
            }
            img = quantize_8bit(img);
            write_ppm(dir / "image.ppm", img);
            write_pose(dir / "pose.txt", pose);

            Rng lidar_rng = stream_rng(cfg.seed, static_cast<std::uint64_t>(i), 2);
            const auto hits = simulate_lidar(scene, pose, cfg.lidar, lidar_rng);
            const auto kept = downsample_points<Vec3d>(hits, cfg.keep_one_in, lidar_rng);
            write_points(dir / "lidar.bin", colorize_points(kept, img, pose, cfg.intr));
            if (is_keyframe_index(i)) keyframe_images[static_cast<std::size_t>(i)] = std::move(img);
        } catch (const std::exception &e) {
            errors[static_cast<std::size_t>(i)] = e.what();
        }
    }
    for (const auto &e : errors)
        if (!e.empty()) throw DataError("dataset generation failed: " + e);

    // Sliding-window feature tracking over keyframes; a point is triangulated once, at the
    // keyframe where its consecutive run first reaches track_length.
    std::vector<int> keyframes;
    std::vector<CameraPose> kf_poses;
    for (int i = 0; i < frames; ++i)
        if (is_keyframe_index(i)) {
            keyframes.push_back(i);
            kf_poses.push_back(trajectory[static_cast<std::size_t>(i)]);
        }
    std::vector<Vec3d> anchors;
    Rng anchor_rng = stream_rng(cfg.seed, 0, 3);
    if (!scene.primitives.empty())
        for (int k = 0; k < cfg.sfm_anchors; ++k) anchors.push_back(scene.sample_surface(anchor_rng));
    std::vector<FeatureTrack> runs(anchors.size());
    std::vector<bool> done(anchors.size(), false);
    std::normal_distribution<double> px_noise(0.0, cfg.sfm_pixel_noise > 0 ? cfg.sfm_pixel_noise : 1.0);
    TriangulationConfig tcfg;
    tcfg.min_track_length = cfg.track_length;

    std::vector<std::vector<ColoredPoint>> sfm(static_cast<std::size_t>(frames));
    for (std::size_t j = 0; j < keyframes.size(); ++j) {
        const CameraPose &pose = kf_poses[j];
        std::vector<Vec3d> fresh;
        for (std::size_t a = 0; a < anchors.size(); ++a) {
            if (done[a]) continue;
            auto &obs = runs[a].observations;
            if (!frustum_contains(pose, cfg.intr, anchors[a], kDefaultNear, 0.0) ||
                !visible_from(scene, pose.center(), anchors[a])) {
                obs.clear();
                continue;
            }
            const Vec3d pc = pose.to_camera(anchors[a]);
            Vec2d px(cfg.intr.fx * pc.x() / pc.z() + cfg.intr.cx, cfg.intr.fy * pc.y() / pc.z() + cfg.intr.cy);
            if (cfg.sfm_pixel_noise > 0) px += Vec2d(px_noise(anchor_rng), px_noise(anchor_rng));
            obs.emplace_back(static_cast<int>(j), px);
            if (static_cast<int>(obs.size()) > cfg.window) obs.erase(obs.begin());
            if (static_cast<int>(obs.size()) < cfg.track_length) continue;
            if (auto p = triangulate_track(runs[a], kf_poses, cfg.intr, tcfg)) {
                fresh.push_back(*p);
                done[a] = true;
                obs.clear();
            }
        }
        const int f = keyframes[j];
        sfm[static_cast<std::size_t>(f)] =
            colorize_points(fresh, keyframe_images[static_cast<std::size_t>(f)], pose, cfg.intr, PointSource::sfm);
    }
    for (int i = 0; i < frames; ++i) write_points(frame_dir(out_dir, i) / "sfm.bin", sfm[static_cast<std::size_t>(i)]);
}

void generate_dataset(const DatasetConfig &cfg, const fs::path &out_dir) {
    const SyntheticScene scene = make_scene(cfg.scene);
    const auto traj = make_trajectory(cfg.scene, cfg.frames);
    generate_dataset(scene, traj, cfg, out_dir);
}

DatasetInfo load_dataset_info(const fs::path &root) {
    std::ifstream is(root / "manifest.txt");
    if (!is) throw DataError("no manifest.txt in " + root.string());
    DatasetInfo info;
    info.root = root;
    std::string line;
    while (std::getline(is, line)) {
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r"), e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        info.manifest[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    auto get = [&](const std::string &key) -> double {
        const auto it = info.manifest.find(key);
        if (it == info.manifest.end()) throw DataError("manifest is missing '" + key + "'");
        try {
            std::size_t used = 0;
            const double v = std::stod(it->second, &used);
            if (used != it->second.size()) throw std::invalid_argument(key);
            return v;
        } catch (const std::exception &) {
            throw DataError("manifest value for '" + key + "' is not a number: " + it->second);
        }
    };
    info.frames = static_cast<int>(get("frames"));
    info.intr = CameraIntrinsics{get("fx"), get("fy"), get("cx"), get("cy"), static_cast<int>(get("width")),
                                 static_cast<int>(get("height"))};
    if (info.frames < 0 || !info.intr.valid()) throw DataError("manifest has invalid frame count or intrinsics");
    return info;
}

CameraFrame load_frame(const DatasetInfo &info, int index) {
    if (index < 0 || index >= info.frames) throw std::out_of_range("frame index out of range");
    const fs::path dir = frame_dir(info.root, index);
    CameraFrame f;
    f.frame_index = index;
    f.is_keyframe = is_keyframe_index(index);
    f.intr = info.intr;
    f.pose = read_pose(dir / "pose.txt");
    f.image = read_ppm(dir / "image.ppm");
    if (f.image.width() != info.intr.width || f.image.height() != info.intr.height)
        throw DataError("image size does not match intrinsics in " + dir.string());
    f.points = read_points(dir / "lidar.bin");
    const auto sfm = read_points(dir / "sfm.bin");
    f.points.insert(f.points.end(), sfm.begin(), sfm.end());
    return f;
}

} // namespace splatmap
