// Copyright Contributors to the splatmap project
// SPDX-License-Identifier: Apache-2.0
//
// End-to-end gradient verification: randomized small scenes, the full
// photometric loss through the rasterizer, and central differences on every
// parameter in 64-bit.
//
#pragma once

#include "splatmap/backward.hpp"
#include "splatmap/loss.hpp"
#include "splatmap/random_scene.hpp"

namespace splatmap {

struct GradcheckConfig {
    int scenes = 20;
    int max_gaussians = 30;
    int width = 24, height = 24;
    double fx = 26.0;
    double epsilon = 1e-5;
    double rel_tol = 1e-4;
    double abs_floor = 1e-7;
    double lambda = 0.2;
    bool early_termination = true;
    BackwardVariant variant = BackwardVariant::per_gaussian;
    std::uint64_t seed = 1;
    /// Deliberate defect for self-tests: "" (none), "position_sign", "sh_sign", "exposure_sign".
    std::string inject;
};

struct GradcheckScene {
    GaussianMap<double> map;
    Camera camera;
    RgbImage<double> target;
    ExposureAffine<double> exposure;
};

GradcheckScene random_gradcheck_scene(const GradcheckConfig &cfg, std::mt19937_64 &rng);

/// Loss value of the scene as configured.
double gradcheck_loss(const GradcheckScene &scene, const GradcheckConfig &cfg);

/// Checks every Gaussian parameter and the exposure matrix against central differences.
FdReport check_scene_gradients(GradcheckScene &scene, const GradcheckConfig &cfg);

struct GradcheckSummary {
    std::vector<FdReport> reports;
    double worst = 0.0;
    std::size_t checked = 0;
    bool passed = true;
};

GradcheckSummary run_gradcheck(const GradcheckConfig &cfg);

} // namespace splatmap
