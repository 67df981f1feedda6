// Copyright Contributors to the splatmap project
// SPDX-License-Identifier: Apache-2.0
//
#include "splatmap/loss.hpp"

#include <stdexcept>

namespace splatmap {

namespace {

constexpr int kRadius = 5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

// numpy-style "reflect" (edge sample not repeated).
inline int reflect(int i, int n) {
    if (n == 1) return 0;
    while (i < 0 || i >= n) i = i < 0 ? -i : 2 * (n - 1) - i;
    return i;
}

template <typename T> void check_same_shape(const RgbImage<T> &a, const RgbImage<T> &b) {
    if (a.width() != b.width() || a.height() != b.height())
        throw std::invalid_argument("image shapes differ: " + std::to_string(a.width()) + "x" +
                                    std::to_string(a.height()) + " vs " + std::to_string(b.width()) + "x" +
                                    std::to_string(b.height()));
}

} // namespace

std::array<double, 11> ssim_kernel() {
    std::array<double, 11> k{};
    double sum = 0;
    for (int i = 0; i < 11; ++i) {
        const double d = i - kRadius;
        k[i] = std::exp(-d * d / (2 * 1.5 * 1.5));
        sum += k[i];
    }
    for (auto &v : k) v /= sum;
    return k;
}

template <typename T> Plane<T> ssim_filter(const Plane<T> &in) {
    static const auto kd = ssim_kernel();
    const int h = static_cast<int>(in.rows()), w = static_cast<int>(in.cols());
    Plane<T> tmp(h, w), out(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            T acc = T(0);
            for (int j = 0; j < 11; ++j) acc += T(kd[j]) * in(y, reflect(x + j - kRadius, w));
            tmp(y, x) = acc;
        }
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            T acc = T(0);
            for (int j = 0; j < 11; ++j) acc += T(kd[j]) * tmp(reflect(y + j - kRadius, h), x);
            out(y, x) = acc;
        }
    return out;
}

template <typename T> Plane<T> ssim_filter_adjoint(const Plane<T> &in) {
    static const auto kd = ssim_kernel();
    const int h = static_cast<int>(in.rows()), w = static_cast<int>(in.cols());
    Plane<T> tmp = Plane<T>::Zero(h, w), out = Plane<T>::Zero(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int j = 0; j < 11; ++j) tmp(reflect(y + j - kRadius, h), x) += T(kd[j]) * in(y, x);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int j = 0; j < 11; ++j) out(y, reflect(x + j - kRadius, w)) += T(kd[j]) * tmp(y, x);
    return out;
}

namespace {

template <typename T> struct SsimChannel {
    T mean;
    Plane<T> d_x; // empty unless requested
};

template <typename T> SsimChannel<T> ssim_channel(const Plane<T> &x, const Plane<T> &y, bool gradient) {
    const T c1 = T(kC1), c2 = T(kC2);
    const Plane<T> mu_x = ssim_filter<T>(x), mu_y = ssim_filter<T>(y);
    const Plane<T> sxx = ssim_filter<T>(x * x) - mu_x * mu_x;
    const Plane<T> syy = ssim_filter<T>(y * y) - mu_y * mu_y;
    const Plane<T> sxy = ssim_filter<T>(x * y) - mu_x * mu_y;
    const Plane<T> a1 = T(2) * mu_x * mu_y + c1, a2 = T(2) * sxy + c2;
    const Plane<T> b1 = mu_x * mu_x + mu_y * mu_y + c1, b2 = sxx + syy + c2;
    const Plane<T> s = (a1 * a2) / (b1 * b2);
    SsimChannel<T> out{s.mean(), {}};
    if (!gradient) return out;

    const T inv_n = T(1) / T(s.size());
    // s as a function of m1 = F(x), m2 = F(x^2), m3 = F(xy).
    const Plane<T> d_m2 = -s / b2;
    const Plane<T> d_m3 = T(2) * a1 / (b1 * b2);
    const Plane<T> d_m1 = T(2) * mu_y * a2 / (b1 * b2) - s * T(2) * mu_x / b1 - T(2) * mu_x * d_m2 - mu_y * d_m3;
    out.d_x = inv_n * (ssim_filter_adjoint<T>(d_m1) + T(2) * x * ssim_filter_adjoint<T>(d_m2) +
                       y * ssim_filter_adjoint<T>(d_m3));
    return out;
}

} // namespace

template <typename T> T ssim(const RgbImage<T> &x, const RgbImage<T> &y) {
    check_same_shape(x, y);
    T sum = T(0);
    for (int c = 0; c < 3; ++c) sum += ssim_channel<T>(x.ch[c], y.ch[c], false).mean;
    return sum / T(3);
}

template <typename T> T ssim_with_gradient(const RgbImage<T> &x, const RgbImage<T> &y, RgbImage<T> &d_x) {
    check_same_shape(x, y);
    T sum = T(0);
    d_x = RgbImage<T>(x.height(), x.width());
    for (int c = 0; c < 3; ++c) {
        auto r = ssim_channel<T>(x.ch[c], y.ch[c], true);
        sum += r.mean;
        d_x.ch[c] = r.d_x / T(3);
    }
    return sum / T(3);
}

template <typename T> RgbImage<T> apply_exposure(const ExposureAffine<T> &e, const RgbImage<T> &image) {
    RgbImage<T> out(image.height(), image.width());
    for (int r = 0; r < 3; ++r) {
        out.ch[r] = Plane<T>::Constant(image.height(), image.width(), e.matrix(r, 3));
        for (int c = 0; c < 3; ++c) out.ch[r] += e.matrix(r, c) * image.ch[c];
    }
    return out;
}

template <typename T> RgbImage<T> invert_exposure(const ExposureAffine<T> &e, const RgbImage<T> &image) {
    ExposureAffine<T> inv;
    const Matrix3<T> m_inv = e.scale().inverse();
    inv.matrix.template leftCols<3>() = m_inv;
    inv.matrix.col(3) = -m_inv * e.offset();
    return apply_exposure(inv, image);
}

template <typename T>
LossResult<T> photometric_loss(const RgbImage<T> &rendered, const RgbImage<T> &ground_truth,
                               const ExposureAffine<T> &exposure, T lambda) {
    check_same_shape(rendered, ground_truth);
    if (!(lambda >= T(0) && lambda <= T(1))) throw std::invalid_argument("loss weight lambda must lie in [0, 1]");
    const RgbImage<T> out = apply_exposure(exposure, rendered);
    const T n = T(3) * T(rendered.width()) * T(rendered.height());

    LossResult<T> res;
    RgbImage<T> d_ssim;
    const T ssim_value = ssim_with_gradient(out, ground_truth, d_ssim);
    T abs_sum = T(0);
    RgbImage<T> d_out(rendered.height(), rendered.width());
    for (int c = 0; c < 3; ++c) {
        const Plane<T> diff = out.ch[c] - ground_truth.ch[c];
        abs_sum += diff.abs().sum();
        d_out.ch[c] = ((T(1) - lambda) / n) * diff.sign() - (lambda / T(2)) * d_ssim.ch[c];
    }
    res.l1 = abs_sum / n;
    res.dssim = (T(1) - ssim_value) / T(2);
    res.loss = (T(1) - lambda) * res.l1 + lambda * res.dssim;

    // Back through the affine map.
    res.d_rendered = RgbImage<T>(rendered.height(), rendered.width());
    for (int c = 0; c < 3; ++c) {
        for (int r = 0; r < 3; ++r) {
            res.d_rendered.ch[c] += exposure.matrix(r, c) * d_out.ch[r];
            res.d_exposure(r, c) = (d_out.ch[r] * rendered.ch[c]).sum();
        }
    }
    for (int r = 0; r < 3; ++r) res.d_exposure(r, 3) = d_out.ch[r].sum();
    return res;
}

template <typename T> double psnr_8bit(const RgbImage<T> &a, const RgbImage<T> &b) {
    check_same_shape(a, b);
    auto q = [](T v) { return std::lround(std::clamp(static_cast<double>(v), 0.0, 1.0) * 255.0); };
    double sse = 0;
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < a.height(); ++y)
            for (int x = 0; x < a.width(); ++x) {
                const double d = static_cast<double>(q(a.ch[c](y, x)) - q(b.ch[c](y, x)));
                sse += d * d;
            }
    if (sse == 0.0) return kPsnrIdentical;
    const double mse = sse / (3.0 * a.width() * a.height());
    return 10.0 * std::log10(255.0 * 255.0 / mse);
}

#define SPLATMAP_INSTANTIATE(T)                                                                                        \
    template Plane<T> ssim_filter<T>(const Plane<T> &);                                                                \
    template Plane<T> ssim_filter_adjoint<T>(const Plane<T> &);                                                        \
    template T ssim<T>(const RgbImage<T> &, const RgbImage<T> &);                                                      \
    template T ssim_with_gradient<T>(const RgbImage<T> &, const RgbImage<T> &, RgbImage<T> &);                         \
    template RgbImage<T> apply_exposure<T>(const ExposureAffine<T> &, const RgbImage<T> &);                           \
    template RgbImage<T> invert_exposure<T>(const ExposureAffine<T> &, const RgbImage<T> &);                          \
    template LossResult<T> photometric_loss<T>(const RgbImage<T> &, const RgbImage<T> &, const ExposureAffine<T> &,   \
                                               T);                                                                     \
    template double psnr_8bit<T>(const RgbImage<T> &, const RgbImage<T> &);

SPLATMAP_INSTANTIATE(float)
SPLATMAP_INSTANTIATE(double)
#undef SPLATMAP_INSTANTIATE

} // namespace splatmap
