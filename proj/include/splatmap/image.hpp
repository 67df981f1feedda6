// Copyright Contributors to the splatmap project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include "splatmap/types.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>

namespace splatmap {

/// Single-channel H x W image, row-major, indexed (y, x).
template <typename T> using Plane = Eigen::Array<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Channel-planar RGB image.
template <typename T> struct RgbImage {
    std::array<Plane<T>, 3> ch;

    RgbImage() = default;
    RgbImage(int height, int width, T fill = T(0)) {
        for (auto &c : ch) c = Plane<T>::Constant(height, width, fill);
    }

    int height() const { return static_cast<int>(ch[0].rows()); }
    int width() const { return static_cast<int>(ch[0].cols()); }
    bool empty() const { return ch[0].size() == 0; }

    Vector3<T> pixel(int y, int x) const { return {ch[0](y, x), ch[1](y, x), ch[2](y, x)}; }
    void set_pixel(int y, int x, const Vector3<T> &rgb) {
        for (int c = 0; c < 3; ++c) ch[c](y, x) = rgb[c];
    }

    template <typename U> RgbImage<U> cast() const {
        RgbImage<U> out;
        for (int c = 0; c < 3; ++c) out.ch[c] = ch[c].template cast<U>();
        return out;
    }
};

/// Bilinear sample at continuous pixel coordinates; requires 0 <= u <= W-1, 0 <= v <= H-1.
template <typename T> Vector3<T> sample_bilinear(const RgbImage<T> &img, double u, double v) {
    const int w = img.width(), h = img.height();
    int x0 = std::min(static_cast<int>(std::floor(u)), w - 1);
    int y0 = std::min(static_cast<int>(std::floor(v)), h - 1);
    const int x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1);
    const T fx = T(u - x0), fy = T(v - y0);
    Vector3<T> out;
    for (int c = 0; c < 3; ++c) {
        const auto &p = img.ch[c];
        out[c] = (T(1) - fy) * ((T(1) - fx) * p(y0, x0) + fx * p(y0, x1)) +
                 fy * ((T(1) - fx) * p(y1, x0) + fx * p(y1, x1));
    }
    return out;
}

// Binary PPM (P6, 8-bit). Values are clamped to [0,1] and rounded.
void write_ppm(const std::filesystem::path &path, const RgbImage<float> &img);
RgbImage<float> read_ppm(const std::filesystem::path &path);

/// Quantizes to 8 bits and back, as a PPM round trip would.
RgbImage<float> quantize_8bit(const RgbImage<float> &img);

// Raw float plane: "PLN1", u32 width, u32 height, then width*height little-endian float32.
void write_plane(const std::filesystem::path &path, const Plane<float> &plane);
Plane<float> read_plane(const std::filesystem::path &path);

} // namespace splatmap
