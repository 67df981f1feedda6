// Copyright Contributors to the splatmap project
// SPDX-License-Identifier: Apache-2.0
//
// splatmap: dataset generation, incremental mapping, rendering, evaluation,
// gradient checks and benchmarks.
//
#include "splatmap/cli.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <map>
#include <optional>

namespace {

struct CommandArgs {
    std::string config_file;
    std::vector<std::string> assignments;
    // Shorthand flags, applied after the config file and before --set.
    std::vector<std::pair<std::string, std::string>> shorthand;
};

void add_common(CLI::App *cmd, CommandArgs &args, const std::vector<std::pair<std::string, std::string>> &flags) {
    cmd->add_option("-c,--config", args.config_file, "key = value configuration file");
    cmd->add_option("-s,--set", args.assignments, "override a setting, key=value (repeatable)");
    for (const auto &[flag, key] : flags) {
        auto *opt = cmd->add_option_function<std::string>(
            flag, [&args, key](const std::string &v) { args.shorthand.emplace_back(key, v); },
            "shorthand for --set " + key + "=...");
        opt->type_name("VALUE");
    }
}

} // namespace

int main(int argc, char **argv) {
    using namespace splatmap;
    CLI::App app{"splatmap: incremental Gaussian-splatting mapping on synthetic sensor data"};
    app.require_subcommand(1);

    std::map<std::string, CommandArgs> args;
    const std::vector<std::pair<std::string, std::string>> run_flags{
        {"--seed", "seed"}, {"--threads", "threads"}, {"--precision", "precision"}};

    auto *gen = app.add_subcommand("generate", "write a synthetic dataset");
    add_common(gen, args["generate"], {{"--scene", "scene"}, {"--frames", "frames"}, {"-o,--output", "output"},
                                       {"--seed", "seed"}, {"--threads", "threads"}});
    auto *map = app.add_subcommand("map", "run the mapper over a dataset and evaluate train/novel views");
    auto map_flags = run_flags;
    map_flags.insert(map_flags.end(), {{"-d,--dataset", "dataset"},
                                       {"-o,--output", "output"},
                                       {"--iterations", "iterations_per_keyframe"},
                                       {"--stride", "holdout_stride"},
                                       {"--max-frames", "max_frames"}});
    add_common(map, args["map"], map_flags);
    auto *render = app.add_subcommand("render", "render a saved map from every dataset pose");
    add_common(render, args["render"], {{"-m,--map", "map"}, {"-d,--dataset", "dataset"}, {"-o,--output", "output"},
                                        {"--threads", "threads"}});
    auto *eval = app.add_subcommand("eval", "PSNR/SSIM of existing renders against a dataset");
    add_common(eval, args["eval"], {{"-r,--renders", "renders"}, {"-d,--dataset", "dataset"},
                                    {"-o,--output", "output"}, {"--stride", "holdout_stride"}});
    auto *grad = app.add_subcommand("gradcheck", "finite-difference check of the backward pass");
    add_common(grad, args["gradcheck"], {{"--scenes", "gradcheck_scenes"}, {"--epsilons", "gradcheck_epsilons"},
                                         {"--inject", "gradcheck_inject"}, {"--seed", "seed"},
                                         {"--threads", "threads"}});
    auto *bench = app.add_subcommand("bench", "time rasterizer and optimizer variants");
    add_common(bench, args["bench"], {{"--reps", "bench_reps"}, {"--gaussians", "bench_gaussians"},
                                      {"--workloads", "bench_workloads"}, {"-o,--output", "output"},
                                      {"--seed", "seed"}, {"--threads", "threads"}});

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    CLI::App *cmd = app.get_subcommands().front();
    const std::string name = cmd->get_name();
    const CommandArgs &a = args[name];
    try {
        RunConfig cfg;
        if (!a.config_file.empty()) load_config_file(cfg, a.config_file);
        for (const auto &[k, v] : a.shorthand) set_config_value(cfg, k, v);
        for (const auto &s : a.assignments) {
            const auto [k, v] = split_assignment(s);
            set_config_value(cfg, k, v);
        }
        if (name == "generate") return cmd_generate(cfg, std::cout);
        if (name == "map") return cmd_map(cfg, std::cout);
        if (name == "render") return cmd_render(cfg, std::cout);
        if (name == "eval") return cmd_eval(cfg, std::cout);
        if (name == "gradcheck") return cmd_gradcheck(cfg, std::cout);
        if (name == "bench") return cmd_bench(cfg, std::cout);
        return kExitUsage;
    } catch (...) {
        return exit_code_for_current_exception(std::cerr);
    }
}
