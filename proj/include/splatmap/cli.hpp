// Copyright Contributors to the splatmap project
// SPDX-License-Identifier: Apache-2.0
//
// Run configuration and the command implementations behind the `splatmap`
// executable. Commands return process exit codes.
//
#pragma once

#include "splatmap/frontend.hpp"
#include "splatmap/gradcheck.hpp"
#include "splatmap/mapper.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace splatmap {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitCheck = 3;

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct BenchConfig {
    int width = 640, height = 480;
    double fx = 500;
    int gaussians = 100000;
    int reps = 10;
    int adam_gaussians = 1000000;
    double adam_occupancy = 0.1;
    double anisotropy = 1.0;
    /// Comma-separated subset of: forward_tiled, forward_reference, forward_cull_on, forward_cull_off,
    /// backward_per_gaussian, backward_per_pixel, adam_sparse, adam_dense.
    std::string workloads = "forward_tiled,forward_reference,forward_cull_on,forward_cull_off,"
                            "backward_per_gaussian,backward_per_pixel,adam_sparse,adam_dense";
};

struct RunConfig {
    MapperConfig mapper;
    DatasetConfig dataset;
    GradcheckConfig gradcheck;
    BenchConfig bench;
    std::filesystem::path dataset_path;
    std::filesystem::path output_path;
    std::filesystem::path map_path;     // render
    std::filesystem::path renders_path; // eval
    std::uint64_t seed = 0;
    int precision = 32;
    bool deterministic = true;
    int threads = 0; // 0: runtime default
    int holdout_stride = 10;
    int max_frames = 0; // 0: all
    std::vector<double> gradcheck_epsilons;
    bool quiet = false;
};

/// Applies one `key = value` setting. Throws UsageError for unknown keys or malformed values.
void set_config_value(RunConfig &cfg, const std::string &key, const std::string &value);

/// Reads `key = value` lines (`#` starts a comment). Throws UsageError on bad content, DataError if
/// the file cannot be read.
void load_config_file(RunConfig &cfg, const std::filesystem::path &path);

/// Splits "key=value"; throws UsageError when there is no '='.
std::pair<std::string, std::string> split_assignment(const std::string &text);

/// All settings as `key = value` lines, in a fixed order.
std::string describe_config(const RunConfig &cfg);

/// True for frames held out as novel views (never given to the mapper).
bool is_holdout_frame(int frame_index, int stride);

struct ViewMetrics {
    int frame = 0;
    bool novel = false;
    double psnr = 0, ssim = 0;
};

struct MapSummary {
    std::vector<ViewMetrics> views;
    double train_psnr = 0, train_ssim = 0, novel_psnr = 0, novel_ssim = 0;
    std::size_t gaussians = 0, keyframes = 0;
    double seconds = 0;
};

/// Writes one row per view plus train and novel means.
void write_metrics(const std::filesystem::path &path, const MapSummary &summary);

int cmd_generate(const RunConfig &cfg, std::ostream &log);
int cmd_map(const RunConfig &cfg, std::ostream &log);
int cmd_render(const RunConfig &cfg, std::ostream &log);
int cmd_gradcheck(const RunConfig &cfg, std::ostream &log);
int cmd_bench(const RunConfig &cfg, std::ostream &log);
int cmd_eval(const RunConfig &cfg, std::ostream &log);

/// The mapping run behind cmd_map; also used directly by the acceptance suite.
MapSummary run_map(const RunConfig &cfg, std::ostream &log);

struct BenchRow {
    std::string workload;
    int reps = 0;
    double median_ms = 0, p95_ms = 0;
    std::size_t pairs = 0;
    double max_abs_diff = 0;
};

std::vector<BenchRow> run_bench(const BenchConfig &cfg, std::uint64_t seed, std::ostream &log);

/// Median and nearest-rank 95th percentile.
std::pair<double, double> median_p95(std::vector<double> samples);

/// Maps an exception from a command to an exit code, printing the message.
int exit_code_for_current_exception(std::ostream &err);

} // namespace splatmap
