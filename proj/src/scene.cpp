// Copyright Contributors to the splatmap project
// SPDX-License-Identifier: Apache-2.0
//
#include "splatmap/scene.hpp"

#include "binary_io.hpp"

#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

namespace splatmap {

CameraPose CameraPose::look_at(const Vec3d &eye, const Vec3d &target, const Vec3d &up) {
    const Vec3d z = (target - eye).normalized();
    Vec3d x = z.cross(up);
    if (x.norm() < 1e-9) x = z.cross(Vec3d::UnitX());
    x.normalize();
    const Vec3d y = z.cross(x);
    Mat3d rotation_cw;
    rotation_cw << x, y, z;
    return from_center(rotation_cw, eye);
}

bool frustum_contains(const CameraPose &pose, const CameraIntrinsics &intr, const Vec3d &point_w, double near,
                      double margin) {
    const Vec3d pc = pose.to_camera(point_w);
    if (!(pc.z() > near)) return false;
    const double u = intr.fx * pc.x() / pc.z() + intr.cx;
    const double v = intr.fy * pc.y() / pc.z() + intr.cy;
    const double mx = margin * intr.width, my = margin * intr.height;
    return u >= -mx && u <= intr.width - 1 + mx && v >= -my && v <= intr.height - 1 + my;
}

template <typename T> std::size_t GaussianMap<T>::append(std::span<const Gaussian<T>> gaussians) {
    if (size() + gaussians.size() > capacity_)
        throw CapacityError("Gaussian map capacity " + std::to_string(capacity_) + " exceeded (have " +
                            std::to_string(size()) + ", appending " + std::to_string(gaussians.size()) + ")");
    reserve(size() + gaussians.size());
    for (const auto &g : gaussians) {
        positions.insert(positions.end(), g.position.data(), g.position.data() + 3);
        log_scales.insert(log_scales.end(), g.log_scale.data(), g.log_scale.data() + 3);
        rotations.insert(rotations.end(), g.rotation.data(), g.rotation.data() + 4);
        opacity_logits.push_back(g.opacity_logit);
        sh.insert(sh.end(), g.sh.data(), g.sh.data() + kShCoeffs);
        sky.push_back(g.is_sky ? 1 : 0);
        sky_count_ += g.is_sky ? 1 : 0;
    }
    return size();
}

template <typename T> Gaussian<T> GaussianMap<T>::get(std::size_t i) const {
    Gaussian<T> g;
    g.position = position(i);
    g.log_scale = log_scale(i);
    g.rotation = rotation(i);
    g.opacity_logit = opacity_logits[i];
    g.sh = sh_coeffs(i);
    g.is_sky = is_sky(i);
    return g;
}

template <typename T> void GaussianMap<T>::set(std::size_t i, const Gaussian<T> &g) {
    std::copy_n(g.position.data(), 3, &positions[3 * i]);
    std::copy_n(g.log_scale.data(), 3, &log_scales[3 * i]);
    std::copy_n(g.rotation.data(), 4, &rotations[4 * i]);
    opacity_logits[i] = g.opacity_logit;
    std::copy_n(g.sh.data(), kShCoeffs, &sh[kShCoeffs * i]);
    if (is_sky(i) != g.is_sky) {
        sky_count_ = g.is_sky ? sky_count_ + 1 : sky_count_ - 1;
        sky[i] = g.is_sky ? 1 : 0;
    }
}

template <typename T> void GaussianMap<T>::reserve(std::size_t n) {
    positions.reserve(3 * n);
    log_scales.reserve(3 * n);
    rotations.reserve(4 * n);
    opacity_logits.reserve(n);
    sh.reserve(kShCoeffs * n);
    sky.reserve(n);
}

template <typename T> void GaussianMap<T>::clear() {
    positions.clear();
    log_scales.clear();
    rotations.clear();
    opacity_logits.clear();
    sh.clear();
    sky.clear();
    sky_count_ = 0;
}

template <typename T> void GaussianMap<T>::normalize_rotations() {
    for (std::size_t i = 0; i < size(); ++i) {
        Eigen::Map<Vector4<T>> q(&rotations[4 * i]);
        const T n = q.norm();
        if (n > T(0)) q /= n;
        else q = Vector4<T>(1, 0, 0, 0);
    }
}

template <typename T> template <typename U> GaussianMap<U> GaussianMap<T>::cast() const {
    GaussianMap<U> out(capacity_);
    out.positions.assign(positions.begin(), positions.end());
    out.log_scales.assign(log_scales.begin(), log_scales.end());
    out.rotations.assign(rotations.begin(), rotations.end());
    out.opacity_logits.assign(opacity_logits.begin(), opacity_logits.end());
    out.sh.assign(sh.begin(), sh.end());
    out.sky = sky;
    out.sky_count_ = sky_count_;
    return out;
}

template <typename T> void write_map(std::ostream &os, const GaussianMap<T> &map) {
    os.write("GSMP", 4);
    detail::write_pod<std::uint32_t>(os, kMapFormatVersion);
    detail::write_pod<std::uint64_t>(os, map.size());
    detail::write_pod<std::uint64_t>(os, map.sky_count());
    detail::write_f32<T>(os, map.positions);
    detail::write_f32<T>(os, map.log_scales);
    detail::write_f32<T>(os, map.rotations);
    detail::write_f32<T>(os, map.opacity_logits);
    detail::write_f32<T>(os, map.sh);
    std::vector<float> flags(map.sky.begin(), map.sky.end());
    detail::write_f32<float>(os, flags);
    if (!os) throw DataError("failed writing map");
}

template <typename T> void write_map(const std::filesystem::path &path, const GaussianMap<T> &map) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot open " + path.string() + " for writing");
    write_map(os, map);
}

template <typename T> GaussianMap<T> read_map(std::istream &is) {
    detail::expect_magic(is, "GSMP");
    const auto version = detail::read_pod<std::uint32_t>(is);
    if (version != kMapFormatVersion) throw DataError("unsupported map version " + std::to_string(version));
    const auto n = detail::read_pod<std::uint64_t>(is);
    const auto sky_count = detail::read_pod<std::uint64_t>(is);
    GaussianMap<T> map(std::max<std::size_t>(kDefaultMapCapacity, n));
    detail::read_f32(is, map.positions, 3 * n);
    detail::read_f32(is, map.log_scales, 3 * n);
    detail::read_f32(is, map.rotations, 4 * n);
    detail::read_f32(is, map.opacity_logits, n);
    detail::read_f32(is, map.sh, kShCoeffs * n);
    std::vector<float> flags;
    detail::read_f32(is, flags, n);
    map.sky.resize(n);
    std::size_t counted = 0;
    for (std::size_t i = 0; i < n; ++i) {
        map.sky[i] = flags[i] != 0.0f ? 1 : 0;
        counted += map.sky[i];
    }
    if (counted != sky_count) throw DataError("map sky_count does not match sky flags");
    map.sky_count_ = counted;
    return map;
}

template <typename T> GaussianMap<T> read_map(const std::filesystem::path &path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open " + path.string());
    return read_map<T>(is);
}

template <typename T> std::string map_summary(const GaussianMap<T> &map) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    Vec3d lo_all = Vec3d::Constant(inf), hi_all = Vec3d::Constant(-inf);
    Vec3d lo_fg = lo_all, hi_fg = hi_all;
    for (std::size_t i = 0; i < map.size(); ++i) {
        const Vec3d p = map.position(i).template cast<double>();
        lo_all = lo_all.cwiseMin(p);
        hi_all = hi_all.cwiseMax(p);
        if (!map.is_sky(i)) {
            lo_fg = lo_fg.cwiseMin(p);
            hi_fg = hi_fg.cwiseMax(p);
        }
    }
    std::ostringstream ss;
    ss << std::setprecision(9);
    ss << "count = " << map.size() << "\n";
    ss << "sky_count = " << map.sky_count() << "\n";
    auto box = [&](const char *name, const Vec3d &lo, const Vec3d &hi) {
        if (lo.x() > hi.x()) {
            ss << name << " = empty\n";
            return;
        }
        ss << name << " = " << lo.x() << " " << lo.y() << " " << lo.z() << " " << hi.x() << " " << hi.y() << " "
           << hi.z() << "\n";
    };
    box("bbox_all", lo_all, hi_all);
    box("bbox_foreground", lo_fg, hi_fg);
    return ss.str();
}

#define SPLATMAP_INSTANTIATE(T)                                                                                        \
    template class GaussianMap<T>;                                                                                     \
    template void write_map<T>(std::ostream &, const GaussianMap<T> &);                                                \
    template void write_map<T>(const std::filesystem::path &, const GaussianMap<T> &);                                 \
    template GaussianMap<T> read_map<T>(std::istream &);                                                               \
    template GaussianMap<T> read_map<T>(const std::filesystem::path &);                                                \
    template std::string map_summary<T>(const GaussianMap<T> &);

SPLATMAP_INSTANTIATE(float)
SPLATMAP_INSTANTIATE(double)
#undef SPLATMAP_INSTANTIATE

template GaussianMap<double> GaussianMap<float>::cast<double>() const;
template GaussianMap<float> GaussianMap<double>::cast<float>() const;
template GaussianMap<float> GaussianMap<float>::cast<float>() const;
template GaussianMap<double> GaussianMap<double>::cast<double>() const;

} // namespace splatmap
