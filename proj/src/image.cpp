// Copyright Contributors to the splatmap project
// SPDX-License-Identifier: Apache-2.0
//
#include "splatmap/image.hpp"

#include "binary_io.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

namespace splatmap {

namespace {

std::uint8_t to_byte(float v) {
    const float c = std::clamp(v, 0.0f, 1.0f);
    return static_cast<std::uint8_t>(std::lround(c * 255.0f));
}

// Skips whitespace and '#' comments between PPM header tokens.
int read_header_int(std::istream &is) {
    for (;;) {
        const int c = is.peek();
        if (c == '#') {
            std::string line;
            std::getline(is, line);
        } else if (std::isspace(c)) {
            is.get();
        } else {
            break;
        }
    }
    int v = 0;
    if (!(is >> v)) throw DataError("malformed PPM header");
    return v;
}

} // namespace

void write_ppm(const std::filesystem::path &path, const RgbImage<float> &img) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot open " + path.string() + " for writing");
    os << "P6\n" << img.width() << " " << img.height() << "\n255\n";
    std::vector<std::uint8_t> row(static_cast<std::size_t>(img.width()) * 3);
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x)
            for (int c = 0; c < 3; ++c) row[3 * x + c] = to_byte(img.ch[c](y, x));
        os.write(reinterpret_cast<const char *>(row.data()), static_cast<std::streamsize>(row.size()));
    }
    if (!os) throw DataError("write failed: " + path.string());
}

RgbImage<float> read_ppm(const std::filesystem::path &path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open " + path.string());
    std::string magic;
    is >> magic;
    if (magic != "P6") throw DataError("not a binary PPM: " + path.string());
    const int w = read_header_int(is), h = read_header_int(is), maxval = read_header_int(is);
    if (w <= 0 || h <= 0 || maxval != 255) throw DataError("unsupported PPM: " + path.string());
    is.get(); // single whitespace after maxval
    RgbImage<float> img(h, w);
    std::vector<std::uint8_t> row(static_cast<std::size_t>(w) * 3);
    for (int y = 0; y < h; ++y) {
        if (!is.read(reinterpret_cast<char *>(row.data()), static_cast<std::streamsize>(row.size())))
            throw DataError("truncated PPM: " + path.string());
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c) img.ch[c](y, x) = row[3 * x + c] / 255.0f;
    }
    return img;
}

RgbImage<float> quantize_8bit(const RgbImage<float> &img) {
    RgbImage<float> out = img;
    for (auto &p : out.ch) p = p.unaryExpr([](float v) { return to_byte(v) / 255.0f; });
    return out;
}

void write_plane(const std::filesystem::path &path, const Plane<float> &plane) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot open " + path.string() + " for writing");
    os.write("PLN1", 4);
    detail::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(plane.cols()));
    detail::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(plane.rows()));
    os.write(reinterpret_cast<const char *>(plane.data()), static_cast<std::streamsize>(plane.size() * sizeof(float)));
}

Plane<float> read_plane(const std::filesystem::path &path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open " + path.string());
    detail::expect_magic(is, "PLN1");
    const auto w = detail::read_pod<std::uint32_t>(is);
    const auto h = detail::read_pod<std::uint32_t>(is);
    Plane<float> plane(h, w);
    if (!is.read(reinterpret_cast<char *>(plane.data()), static_cast<std::streamsize>(plane.size() * sizeof(float))))
        throw DataError("truncated plane: " + path.string());
    return plane;
}

} // namespace splatmap
