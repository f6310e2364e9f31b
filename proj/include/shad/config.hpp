#pragma once

// Run configuration: a flat key = value text format with dotted keys.
// Every field has a default, unknown keys are rejected, and the fully
// resolved config is echoed into each run manifest.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "shad/network.hpp"
#include "shad/shiftbench.hpp"
#include "shad/tta.hpp"

namespace shad {

struct RunConfig {
    // scenario.*
    ShiftScenario scenario;

    // network.*
    NetworkSpec network;

    // norm.* / iabn.*
    double norm_momentum = 0.1;
    double iabn_alpha = 4.0;
    double iabn_momentum = 0.01;

    // pretrain.*
    int pretrain_epochs = 30;
    double pretrain_lr = 0.1;
    double pretrain_weight_decay = 5e-4;
    double pretrain_momentum = 0.9;
    int pretrain_batch_size = 128;
    std::string pretrain_loss = "balanced_softmax";  // or cross_entropy
    bool pretrain_cosine_lr = true;
    int probe_per_class = 200;

    // adapter.*
    int adapter_iters = 4000;
    double adapter_lr = 1e-3;
    double adapter_momentum = 0.9;
    int adapter_batch_size = 128;
    int adapter_hidden = 100;
    std::array<double, 3> adapter_tau = {0.0, 1.0, 2.0};
    std::string adapter_components = "gamma,beta,dw,db";

    // tta.*
    TtaOptions tta;
    bool tta_log_batches = false;

    // bench.*
    std::vector<std::string> methods = {"source",  "bn_stats", "pseudo_label", "tent",
                                        "tent_adapter", "iabn", "iabn_adapter"};
    std::vector<double> rho_targets = {10.0, 25.0, 50.0};
    std::vector<uint64_t> seeds = {0, 1, 2};
    int threads = 0;  // 0 = hardware concurrency

    // ablate.*
    std::string ablate_method = "iabn_adapter";

    // out.*
    std::string out_dir = "runs/default";

    // Parses "key = value" lines ('#' comments); throws on unknown keys or
    // malformed values.
    void apply_file(const std::string& path);
    void apply(const std::string& key, const std::string& value);

    // Canonical (key, value) listing of the resolved config.
    std::vector<std::pair<std::string, std::string>> items() const;

    AdapterConfig adapter_config() const;
    void validate() const;
};

std::vector<std::string> split_list(const std::string& s, char sep = ',');

} // namespace shad
