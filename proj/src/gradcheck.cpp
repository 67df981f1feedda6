// Copyright Contributors to the splatmap project
// SPDX-License-Identifier: Apache-2.0
//
#include "splatmap/gradcheck.hpp"

#include "splatmap/rasterizer.hpp"

namespace splatmap {

namespace {

RenderOptions render_options(const GradcheckConfig &cfg, bool signature) {
    RenderOptions o;
    o.early_termination = cfg.early_termination;
    o.record_signature = signature;
    return o;
}

inline void mix(std::uint64_t &h, std::uint64_t v) {
    h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
}

} // namespace

GradcheckScene random_gradcheck_scene(const GradcheckConfig &cfg, std::mt19937_64 &rng) {
    GradcheckScene s;
    s.camera = random_camera(cfg.width, cfg.height, cfg.fx, rng);
    RandomSceneOptions opt;
    opt.gaussians = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(std::max(1, cfg.max_gaussians)));
    opt.min_pixels = 1.0;
    opt.max_pixels = 5.0;
    opt.opacity_logit_min = -2.0;
    opt.opacity_logit_max = 5.0;
    opt.anisotropy = 2.0;
    s.map = random_map<double>(opt, s.camera, rng);
    s.target = random_image<double>(cfg.height, cfg.width, rng);
    std::normal_distribution<double> n01;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 4; ++c) s.exposure.matrix(r, c) += 0.05 * n01(rng);
    return s;
}

double gradcheck_loss(const GradcheckScene &scene, const GradcheckConfig &cfg) {
    const auto pass = render_map<double>(scene.map, scene.camera, BinOptions{}, render_options(cfg, false));
    return photometric_loss(pass.targets.color, scene.target, scene.exposure, cfg.lambda).loss;
}

FdReport check_scene_gradients(GradcheckScene &scene, const GradcheckConfig &cfg) {
    const auto pass = render_map<double>(scene.map, scene.camera, BinOptions{}, render_options(cfg, false));
    const auto loss = photometric_loss(pass.targets.color, scene.target, scene.exposure, cfg.lambda);
    GradientBuffer<double> g =
        cfg.variant == BackwardVariant::per_gaussian
            ? backward_per_gaussian<double>(scene.map, scene.camera, pass.targets, loss.d_rendered, pass.projected,
                                            pass.grid)
            : backward_per_pixel<double>(scene.map, scene.camera, pass.targets, loss.d_rendered, pass.projected,
                                         pass.grid);
    g.d_exposure = loss.d_exposure;
    if (cfg.inject == "position_sign")
        for (auto &v : g.d_position) v = -v;
    else if (cfg.inject == "sh_sign")
        for (auto &v : g.d_sh) v = -v;
    else if (cfg.inject == "exposure_sign")
        g.d_exposure = -g.d_exposure;
    else if (!cfg.inject.empty())
        throw std::invalid_argument("unknown gradcheck defect '" + cfg.inject + "'");

    std::vector<FdParameter> params;
    auto &m = scene.map;
    for (std::size_t i = 0; i < m.size(); ++i) {
        const std::string p = "g" + std::to_string(i) + ".";
        for (int k = 0; k < 3; ++k)
            params.push_back({p + "position[" + std::to_string(k) + "]", &m.positions[3 * i + k], g.d_position[3 * i + k]});
        for (int k = 0; k < 3; ++k)
            params.push_back(
                {p + "log_scale[" + std::to_string(k) + "]", &m.log_scales[3 * i + k], g.d_log_scale[3 * i + k]});
        for (int k = 0; k < 4; ++k)
            params.push_back({p + "rotation[" + std::to_string(k) + "]", &m.rotations[4 * i + k], g.d_rotation[4 * i + k]});
        params.push_back({p + "opacity_logit", &m.opacity_logits[i], g.d_opacity_logit[i]});
        for (int k = 0; k < kShCoeffs; ++k)
            params.push_back({p + "sh[" + std::to_string(k) + "]", &m.sh[kShCoeffs * i + k], g.d_sh[kShCoeffs * i + k]});
    }
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 4; ++c)
            params.push_back({"exposure(" + std::to_string(r) + "," + std::to_string(c) + ")",
                              &scene.exposure.matrix(r, c), g.d_exposure(r, c)});

    FdOptions fd;
    fd.epsilon = cfg.epsilon;
    fd.rel_tol = cfg.rel_tol;
    fd.abs_floor = cfg.abs_floor;
    // Piecewise-smooth regions: contributor sets and clamp states per pixel, plus the sign
    // pattern of the L1 residual.
    fd.region = [&]() {
        const auto p = render_map<double>(scene.map, scene.camera, BinOptions{}, render_options(cfg, true));
        const auto out = apply_exposure(scene.exposure, p.targets.color);
        std::uint64_t h = 0;
        for (Eigen::Index k = 0; k < p.targets.signature.size(); ++k) mix(h, p.targets.signature.data()[k]);
        for (int c = 0; c < 3; ++c)
            for (Eigen::Index k = 0; k < out.ch[c].size(); ++k)
                mix(h, out.ch[c].data()[k] > scene.target.ch[c].data()[k] ? 1u : 0u);
        return h;
    };
    return finite_difference_check(params, [&] { return gradcheck_loss(scene, cfg); }, fd);
}

GradcheckSummary run_gradcheck(const GradcheckConfig &cfg) {
    std::mt19937_64 rng(cfg.seed);
    GradcheckSummary out;
    for (int s = 0; s < cfg.scenes; ++s) {
        GradcheckScene scene = random_gradcheck_scene(cfg, rng);
        FdReport r = check_scene_gradients(scene, cfg);
        out.worst = std::max(out.worst, r.max_error);
        out.checked += r.checked;
        out.reports.push_back(std::move(r));
    }
    out.passed = out.worst <= cfg.rel_tol;
    return out;
}

} // namespace splatmap
