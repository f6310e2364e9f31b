// Command-line entry point: pretrain, train-adapter, bench, ablate.

#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "shad/harness.hpp"
#include "shad/kernels.hpp"

namespace {

struct CommonArgs {
    std::string config_path;
    std::vector<std::string> overrides;
    std::string out_dir;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("-c,--config", args.config_path, "flat key = value config file");
    cmd->add_option("-s,--set", args.overrides,
                    "override a config key, e.g. --set scenario.severity=5 (repeatable)");
    cmd->add_option("-o,--out", args.out_dir, "output directory (same as --set out.dir=...)");
}

shad::RunConfig build_config(const CommonArgs& args) {
    shad::RunConfig cfg;
    if (!args.config_path.empty()) cfg.apply_file(args.config_path);
    for (const auto& kv : args.overrides) {
        const size_t eq = kv.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
        cfg.apply(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (!args.out_dir.empty()) cfg.out_dir = args.out_dir;
    cfg.validate();
    return cfg;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"label-shift-aware test-time adaptation benchmark"};
    app.require_subcommand(1);

    CommonArgs pretrain_args, adapter_args, bench_args, ablate_args;
    bool ablate_components = false;
    std::string ablate_taus;

    CLI::App* pretrain = app.add_subcommand("pretrain", "train the source model per seed");
    add_common(pretrain, pretrain_args);
    CLI::App* train_adapter =
        app.add_subcommand("train-adapter", "train the label shift adapter against frozen models");
    add_common(train_adapter, adapter_args);
    CLI::App* bench =
        app.add_subcommand("bench", "run every method over the seven test distributions");
    add_common(bench, bench_args);
    CLI::App* ablate = app.add_subcommand("ablate", "adapter ablation sweeps");
    add_common(ablate, ablate_args);
    ablate->add_flag("--components", ablate_components,
                     "run the seven component masks (gamma/beta/dW/db combinations)");
    ablate->add_option("--taus", ablate_taus,
                       "semicolon-separated tau triples, e.g. \"0,1,2;1,-1.5,3\"");

    CLI11_PARSE(app, argc, argv);

    try {
        if (pretrain->parsed()) {
            const auto cfg = build_config(pretrain_args);
            const auto result = shad::cmd_pretrain(cfg);
            for (const auto& sr : result.per_seed)
                std::printf("seed %llu: probe accuracy %.4f (macro %.4f) -> %s\n",
                            static_cast<unsigned long long>(sr.seed), sr.probe_accuracy,
                            sr.probe_macro_accuracy, sr.checkpoint.c_str());
        } else if (train_adapter->parsed()) {
            const auto cfg = build_config(adapter_args);
            const auto result = shad::cmd_train_adapter(cfg);
            for (const auto& sr : result.per_seed)
                std::printf("seed %llu: branch losses %.4f / %.4f / %.4f -> %s\n",
                            static_cast<unsigned long long>(sr.seed), sr.final_loss[0],
                            sr.final_loss[1], sr.final_loss[2], sr.checkpoint.c_str());
        } else if (bench->parsed()) {
            const auto cfg = build_config(bench_args);
            std::printf("kernels: %s\n", shad::kernels::active().name);
            shad::cmd_bench(cfg);
        } else if (ablate->parsed()) {
            const auto cfg = build_config(ablate_args);
            if (!ablate_components && ablate_taus.empty())
                throw std::invalid_argument("ablate: pass --components and/or --taus");
            if (ablate_components) shad::cmd_ablate_components(cfg);
            if (!ablate_taus.empty()) shad::cmd_ablate_taus(cfg, ablate_taus);
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
