#pragma once

// Experiment orchestration behind the CLI: pretrain -> train-adapter ->
// bench -> ablate. Checkpoints and manifests land in config.out_dir; bench
// emits results.csv (one row per method/direction/rho/seed cell) and
// aggregate.csv (one row per method over the seven distribution columns
// plus their average). Every number regenerates from (config, seed).

#include <map>
#include <string>
#include <vector>

#include "shad/adapter.hpp"
#include "shad/config.hpp"
#include "shad/network.hpp"
#include "shad/tta.hpp"

namespace shad {

// One of the seven evaluation columns (direction x target ratio).
struct BenchColumn {
    std::string label;  // F50 ... U ... B50
    TargetDirection direction;
    double rho_target;
};

std::vector<BenchColumn> bench_columns(const std::vector<double>& rho_targets);

struct PretrainSeedResult {
    uint64_t seed = 0;
    std::string checkpoint;
    double final_loss = 0.0;
    double probe_accuracy = 0.0;        // balanced probe, severity 0
    double probe_macro_accuracy = 0.0;
    std::vector<double> probe_per_class;
    unsigned long long param_hash = 0;
};

struct PretrainResult {
    std::vector<PretrainSeedResult> per_seed;
};

struct AdapterSeedResult {
    uint64_t seed = 0;
    std::string checkpoint;
    std::array<double, 3> final_loss{};  // per conditioning branch
    unsigned long long model_hash_before = 0;
    unsigned long long model_hash_after = 0;
};

struct AdapterTrainResult {
    std::vector<AdapterSeedResult> per_seed;
};

struct CellResult {
    std::string method;
    std::string column;
    uint64_t seed = 0;
    StreamMetrics metrics;
};

struct BenchResult {
    std::vector<BenchColumn> columns;
    std::vector<CellResult> cells;
    // Per method: seed-averaged accuracy per column, plus the row average.
    std::map<std::string, std::vector<double>> table;
    std::map<std::string, double> row_average;

    double value(const std::string& method, const std::string& column) const;
};

struct AblateRow {
    std::string label;          // component mask or tau triple
    std::vector<double> accuracy;  // per column, seed-averaged
    double average = 0.0;
};

struct AblateResult {
    std::vector<BenchColumn> columns;
    std::vector<AblateRow> rows;
};

// Cost accounting in the style of a MACs/params table; adapter numbers come
// from the closed-form expressions.
struct CostReport {
    long long backbone_macs = 0;
    long long backbone_params = 0;
    long long adapter_macs = 0;
    long long adapter_params = 0;
};

CostReport cost_report(const RunConfig& cfg);

std::string model_checkpoint_path(const RunConfig& cfg, uint64_t seed);
std::string adapter_checkpoint_path(const RunConfig& cfg, uint64_t seed);

// Trains the backbone + head per seed on the generated source set with the
// configured loss (balanced softmax by default) and writes checkpoints and
// a manifest. Throws on divergence.
PretrainResult cmd_pretrain(const RunConfig& cfg);

// Trains the label shift adapter per seed against the frozen pretrained
// model; model checkpoints must exist.
AdapterTrainResult cmd_train_adapter(const RunConfig& cfg);

// Runs every configured method over the seven columns and seeds; writes
// results.csv, aggregate.csv and the bench manifest.
BenchResult cmd_bench(const RunConfig& cfg);

// Component-mask sweep: trains one adapter per mask (7 masks) and benches
// the configured adapter method; writes ablate_components.csv.
AblateResult cmd_ablate_components(const RunConfig& cfg);

// Tau-triple sweep over "t0,t1,t2;t0,t1,t2;..." specs.
AblateResult cmd_ablate_taus(const RunConfig& cfg, const std::string& triples);

} // namespace shad
