// Copyright Contributors to the splatmap project
// SPDX-License-Identifier: Apache-2.0
//
// Little-endian binary helpers shared by the map, checkpoint and dataset writers.
//
#pragma once

#include "splatmap/types.hpp"

#include <bit>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <vector>

namespace splatmap::detail {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

template <typename P> void write_pod(std::ostream &os, const P &v) {
    os.write(reinterpret_cast<const char *>(&v), sizeof(P));
}

template <typename P> P read_pod(std::istream &is) {
    P v{};
    if (!is.read(reinterpret_cast<char *>(&v), sizeof(P))) throw DataError("unexpected end of binary stream");
    return v;
}

template <typename T> void write_f32(std::ostream &os, std::span<const T> values) {
    std::vector<float> buf(values.begin(), values.end());
    os.write(reinterpret_cast<const char *>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float)));
}

template <typename T> void read_f32(std::istream &is, std::vector<T> &out, std::size_t n) {
    std::vector<float> buf(n);
    if (!is.read(reinterpret_cast<char *>(buf.data()), static_cast<std::streamsize>(n * sizeof(float))))
        throw DataError("truncated float32 array");
    out.assign(buf.begin(), buf.end());
}

/// Raw scalar array in the native width of T.
template <typename T> void write_raw(std::ostream &os, std::span<const T> values) {
    os.write(reinterpret_cast<const char *>(values.data()), static_cast<std::streamsize>(values.size_bytes()));
}

template <typename T> void read_raw(std::istream &is, std::vector<T> &out, std::size_t n) {
    out.resize(n);
    if (!is.read(reinterpret_cast<char *>(out.data()), static_cast<std::streamsize>(n * sizeof(T))))
        throw DataError("truncated array");
}

inline void expect_magic(std::istream &is, const char (&magic)[5]) {
    char buf[4];
    if (!is.read(buf, 4) || std::memcmp(buf, magic, 4) != 0)
        throw DataError(std::string("bad magic, expected ") + magic);
}

} // namespace splatmap::detail
