#include "shad/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "shad/losses.hpp"
#include "shad/optimizer.hpp"

namespace shad {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

constexpr double kPi = 3.14159265358979323846;

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

std::string rho_label(double rho) {
    char buf[32];
    if (rho == std::floor(rho))
        std::snprintf(buf, sizeof(buf), "%lld", static_cast<long long>(rho));
    else
        std::snprintf(buf, sizeof(buf), "%g", rho);
    return buf;
}

ordered_json config_json(const RunConfig& cfg) {
    ordered_json j;
    for (const auto& [k, v] : cfg.items()) j[k] = v;
    return j;
}

void write_json(const std::string& path, const ordered_json& j) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write '" + path + "'");
    os << j.dump(2) << "\n";
}

void ensure_out_dir(const RunConfig& cfg) { fs::create_directories(cfg.out_dir); }

// Scenario with the network/norm hyperparameters applied; direction and
// rho_target are whatever the caller set.
ShiftScenario seeded_scenario(const RunConfig& cfg, uint64_t seed) {
    ShiftScenario s = cfg.scenario;
    s.seed = seed;
    return s;
}

NetworkSpec network_spec(const RunConfig& cfg) {
    NetworkSpec spec = cfg.network;
    spec.input_dim = cfg.scenario.input_dim;
    spec.num_classes = cfg.scenario.num_classes;
    spec.validate();
    return spec;
}

void apply_norm_hparams(Model& model, const RunConfig& cfg) {
    for (auto& l : model.norm_layers()) {
        if (l.width == 0) continue;
        l.momentum_stats = cfg.norm_momentum;
        l.alpha_shrink = cfg.iabn_alpha;
        l.m_iabn = cfg.iabn_momentum;
    }
}

Model load_model(const RunConfig& cfg, uint64_t seed) {
    const std::string path = model_checkpoint_path(cfg, seed);
    if (!fs::exists(path))
        throw std::runtime_error("missing model checkpoint '" + path + "' (run pretrain first)");
    Model model = Model::load(network_spec(cfg), path);
    apply_norm_hparams(model, cfg);
    return model;
}

double evaluate_accuracy(Model& model, const Matrix& x, const std::vector<int>& y,
                         std::vector<double>* per_class, double* macro) {
    const int c = model.spec().num_classes;
    std::vector<long long> totals(static_cast<size_t>(c), 0), hits(static_cast<size_t>(c), 0);
    long long correct = 0;
    const AdapterOutput neutral = AdapterOutput::neutral(model.spec().feature_dim(), c);
    const int chunk = 512;
    for (int start = 0; start < x.rows(); start += chunk) {
        const int n = std::min(chunk, x.rows() - start);
        Matrix xb(n, x.cols());
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < x.cols(); ++j) xb(i, j) = x(start + i, j);
        Graph g;
        Node h = model.forward_features(g, xb, NormMode::eval_source);
        Node logits = model.forward_head(g, h, neutral);
        const auto pred = argmax_rows(logits.value());
        for (int i = 0; i < n; ++i) {
            const int label = y[static_cast<size_t>(start + i)];
            ++totals[static_cast<size_t>(label)];
            if (pred[static_cast<size_t>(i)] == label) {
                ++hits[static_cast<size_t>(label)];
                ++correct;
            }
        }
    }
    if (per_class) per_class->assign(static_cast<size_t>(c), 0.0);
    double macro_sum = 0.0;
    int seen = 0;
    for (int k = 0; k < c; ++k)
        if (totals[static_cast<size_t>(k)] > 0) {
            const double a = static_cast<double>(hits[static_cast<size_t>(k)]) /
                             totals[static_cast<size_t>(k)];
            if (per_class) (*per_class)[static_cast<size_t>(k)] = a;
            macro_sum += a;
            ++seen;
        }
    if (macro) *macro = seen ? macro_sum / seen : 0.0;
    return x.rows() ? static_cast<double>(correct) / x.rows() : 0.0;
}

// Simple bounded worker pool over an index range; results land in
// caller-owned slots so output order never depends on scheduling.
void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
    if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
    threads = std::max(1, std::min(threads, n));
    if (threads == 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(static_cast<size_t>(threads));
    for (int t = 0; t < threads; ++t)
        pool.emplace_back([&, t] {
            try {
                for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
            } catch (...) {
                errors[static_cast<size_t>(t)] = std::current_exception();
            }
        });
    for (auto& th : pool) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

} // namespace

std::vector<BenchColumn> bench_columns(const std::vector<double>& rho_targets) {
    std::vector<double> rhos = rho_targets;
    std::sort(rhos.begin(), rhos.end());
    std::vector<BenchColumn> cols;
    for (auto it = rhos.rbegin(); it != rhos.rend(); ++it)
        cols.push_back({"F" + rho_label(*it), TargetDirection::forward, *it});
    cols.push_back({"U", TargetDirection::uniform, 1.0});
    for (double r : rhos) cols.push_back({"B" + rho_label(r), TargetDirection::backward, r});
    return cols;
}

double BenchResult::value(const std::string& method, const std::string& column) const {
    auto it = table.find(method);
    if (it == table.end()) throw std::out_of_range("no bench row for method '" + method + "'");
    for (size_t i = 0; i < columns.size(); ++i)
        if (columns[i].label == column) return it->second[i];
    throw std::out_of_range("no bench column '" + column + "'");
}

CostReport cost_report(const RunConfig& cfg) {
    const NetworkSpec spec = network_spec(cfg);
    Model model(spec, 0);
    Adapter adapter(spec.feature_dim(), spec.num_classes, cfg.adapter_config(), 0);
    CostReport r;
    r.backbone_macs = model.forward_macs();
    r.backbone_params = model.params().num_values();
    r.adapter_macs = adapter.forward_macs();
    r.adapter_params = adapter.reported_param_count();
    return r;
}

std::string model_checkpoint_path(const RunConfig& cfg, uint64_t seed) {
    return cfg.out_dir + "/model_seed" + std::to_string(seed) + ".ckpt";
}

std::string adapter_checkpoint_path(const RunConfig& cfg, uint64_t seed) {
    return cfg.out_dir + "/adapter_seed" + std::to_string(seed) + ".ckpt";
}

PretrainResult cmd_pretrain(const RunConfig& cfg) {
    cfg.validate();
    ensure_out_dir(cfg);
    const NetworkSpec spec = network_spec(cfg);
    const double tau = cfg.pretrain_loss == "balanced_softmax" ? 1.0 : 0.0;

    PretrainResult result;
    for (uint64_t seed : cfg.seeds) {
        const ShiftScenario scen = seeded_scenario(cfg, seed);
        const SourceData data = make_source(scen);
        Model model(spec, derive_seed(seed, "model"));
        apply_norm_hparams(model, cfg);
        model.set_stage(Stage::pretrain);

        SgdOptimizer opt(cfg.pretrain_lr, cfg.pretrain_momentum, cfg.pretrain_weight_decay);
        Rng shuffle_rng(derive_seed(seed, "pretrain_shuffle"));
        std::vector<int> order(static_cast<size_t>(data.x.rows()));
        for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);

        const int bs = std::min(cfg.pretrain_batch_size, data.x.rows());
        const int steps_per_epoch = std::max(1, data.x.rows() / bs);
        const long long total_steps =
            std::max<long long>(1, static_cast<long long>(cfg.pretrain_epochs) * steps_per_epoch);
        long long step = 0;
        double last_loss = 0.0;

        for (int epoch = 0; epoch < cfg.pretrain_epochs; ++epoch) {
            shuffle_rng.shuffle(order);
            for (int b = 0; b < steps_per_epoch; ++b) {
                Matrix xb(bs, data.x.cols());
                std::vector<int> yb(static_cast<size_t>(bs));
                for (int i = 0; i < bs; ++i) {
                    const int src = order[static_cast<size_t>(b * bs + i)];
                    for (int j = 0; j < data.x.cols(); ++j) xb(i, j) = data.x(src, j);
                    yb[static_cast<size_t>(i)] = data.y[static_cast<size_t>(src)];
                }
                if (cfg.pretrain_cosine_lr)
                    opt.set_lr(cfg.pretrain_lr * 0.5 *
                               (1.0 + std::cos(kPi * static_cast<double>(step) / total_steps)));
                Graph g;
                Node h = model.forward_features(g, xb, NormMode::train);
                Node logits = model.forward_head(
                    g, h, AdapterOutput::neutral(spec.feature_dim(), spec.num_classes));
                Node loss = generalized_logit_adjusted(g, logits, yb, data.pi_s, tau);
                last_loss = loss.scalar();
                if (!std::isfinite(last_loss))
                    throw std::runtime_error("pretrain diverged (non-finite loss) at step " +
                                             std::to_string(step));
                model.params().zero_grads();
                g.backward(loss);
                opt.step(model.params());
                ++step;
            }
        }

        PretrainSeedResult sr;
        sr.seed = seed;
        sr.final_loss = last_loss;
        const SourceData probe = make_balanced_probe(scen, cfg.probe_per_class);
        sr.probe_accuracy =
            evaluate_accuracy(model, probe.x, probe.y, &sr.probe_per_class, &sr.probe_macro_accuracy);
        sr.param_hash = model.param_hash();
        sr.checkpoint = model_checkpoint_path(cfg, seed);
        model.save(sr.checkpoint);
        result.per_seed.push_back(std::move(sr));
    }

    ordered_json manifest;
    manifest["command"] = "pretrain";
    manifest["config"] = config_json(cfg);
    manifest["seeds"] = ordered_json::array();
    for (const auto& sr : result.per_seed) {
        ordered_json j;
        j["seed"] = sr.seed;
        j["checkpoint"] = sr.checkpoint;
        j["final_loss"] = sr.final_loss;
        j["probe_accuracy"] = sr.probe_accuracy;
        j["probe_macro_accuracy"] = sr.probe_macro_accuracy;
        j["probe_per_class"] = sr.probe_per_class;
        j["param_hash"] = sr.param_hash;
        manifest["seeds"].push_back(j);
    }
    write_json(cfg.out_dir + "/pretrain_manifest.json", manifest);
    return result;
}

AdapterTrainResult cmd_train_adapter(const RunConfig& cfg) {
    cfg.validate();
    ensure_out_dir(cfg);
    const NetworkSpec spec = network_spec(cfg);
    const AdapterConfig acfg = cfg.adapter_config();

    AdapterTrainResult result;
    for (uint64_t seed : cfg.seeds) {
        Model model = load_model(cfg, seed);
        model.set_stage(Stage::adapter_train);
        const SourceData data = make_source(seeded_scenario(cfg, seed));

        Adapter adapter(spec.feature_dim(), spec.num_classes, acfg, derive_seed(seed, "adapter"));
        AdapterTrainSchedule sched;
        sched.iterations = cfg.adapter_iters;
        sched.batch_size = cfg.adapter_batch_size;
        sched.lr = cfg.adapter_lr;
        sched.momentum = cfg.adapter_momentum;
        sched.tau = cfg.adapter_tau;
        sched.seed = seed;

        AdapterSeedResult sr;
        sr.seed = seed;
        sr.model_hash_before = model.param_hash();
        const AdapterTrainReport report =
            train_adapter(adapter, model, data.x, data.y, data.pi_s, sched);
        sr.model_hash_after = model.param_hash();
        if (sr.model_hash_before != sr.model_hash_after)
            throw std::logic_error("train-adapter mutated the frozen model");
        sr.final_loss = report.final_loss;
        sr.checkpoint = adapter_checkpoint_path(cfg, seed);
        adapter.save(sr.checkpoint);
        result.per_seed.push_back(std::move(sr));
    }

    ordered_json manifest;
    manifest["command"] = "train-adapter";
    manifest["config"] = config_json(cfg);
    manifest["seeds"] = ordered_json::array();
    for (const auto& sr : result.per_seed) {
        ordered_json j;
        j["seed"] = sr.seed;
        j["checkpoint"] = sr.checkpoint;
        j["final_loss_pi_s"] = sr.final_loss[0];
        j["final_loss_uniform"] = sr.final_loss[1];
        j["final_loss_reversed"] = sr.final_loss[2];
        j["model_hash_before"] = sr.model_hash_before;
        j["model_hash_after"] = sr.model_hash_after;
        manifest["seeds"].push_back(j);
    }
    write_json(cfg.out_dir + "/train_adapter_manifest.json", manifest);
    return result;
}

namespace {

struct BenchPlan {
    std::vector<BenchColumn> columns;
    // Flattened (method, column, seed) cells in canonical order.
    struct Cell {
        size_t method_idx, column_idx, seed_idx;
    };
    std::vector<Cell> cells;
};

BenchResult run_bench(const RunConfig& cfg, const std::vector<std::string>& methods,
                      const AdapterConfig& acfg,
                      const std::function<std::string(uint64_t)>& adapter_path_for_seed) {
    const NetworkSpec spec = network_spec(cfg);
    BenchPlan plan;
    plan.columns = bench_columns(cfg.rho_targets);
    for (size_t m = 0; m < methods.size(); ++m)
        for (size_t c = 0; c < plan.columns.size(); ++c)
            for (size_t s = 0; s < cfg.seeds.size(); ++s) plan.cells.push_back({m, c, s});

    // Per-seed prototypes; each cell copies its own mutable model.
    std::vector<Model> models;
    std::vector<Adapter> adapters;
    bool any_adapter = false;
    for (const auto& name : methods) any_adapter |= tta_method(name).use_adapter;
    for (uint64_t seed : cfg.seeds) {
        models.push_back(load_model(cfg, seed));
        if (any_adapter) {
            const std::string path = adapter_path_for_seed(seed);
            if (!fs::exists(path))
                throw std::runtime_error("missing adapter checkpoint '" + path + "'");
            adapters.push_back(Adapter::load(spec.feature_dim(), spec.num_classes, acfg, path));
        }
    }

    TtaOptions options = cfg.tta;
    std::vector<CellResult> cells(plan.cells.size());
    parallel_for(static_cast<int>(plan.cells.size()), cfg.threads, [&](int i) {
        const auto& cell = plan.cells[static_cast<size_t>(i)];
        const TtaMethodSpec method = tta_method(methods[cell.method_idx]);
        const BenchColumn& col = plan.columns[cell.column_idx];
        const uint64_t seed = cfg.seeds[cell.seed_idx];

        ShiftScenario scen = seeded_scenario(cfg, seed);
        scen.direction = col.direction;
        scen.rho_target = col.rho_target;

        Model model = models[cell.seed_idx];
        model.set_stage(Stage::tta);
        const SourceData source_meta = [&] {
            // pi_s comes from the profile, not the stored samples.
            SourceData d;
            d.counts = imbalance_profile(scen.num_classes, scen.rho_source, scen.train_per_class_max);
            d.pi_s = LabelDistribution::from_counts(d.counts);
            return d;
        }();
        const TargetStream stream = make_target_stream(scen);
        const Adapter* adapter = method.use_adapter ? &adapters[cell.seed_idx] : nullptr;

        CellResult r;
        r.method = method.name;
        r.column = col.label;
        r.seed = seed;
        r.metrics = run_stream(method, model, adapter, source_meta.pi_s, stream, options,
                               cfg.tta_log_batches);
        cells[static_cast<size_t>(i)] = std::move(r);
    });

    BenchResult result;
    result.columns = plan.columns;
    result.cells = std::move(cells);
    for (const auto& name : methods) {
        std::vector<double> row(plan.columns.size(), 0.0);
        for (size_t c = 0; c < plan.columns.size(); ++c) {
            double acc = 0.0;
            int n = 0;
            for (const auto& cell : result.cells)
                if (cell.method == name && cell.column == plan.columns[c].label) {
                    acc += cell.metrics.accuracy;
                    ++n;
                }
            row[c] = n ? acc / n : 0.0;
        }
        double avg = 0.0;
        for (double v : row) avg += v;
        result.table[name] = row;
        result.row_average[name] = avg / static_cast<double>(row.size());
    }
    return result;
}

void write_results_csv(const std::string& path, const BenchResult& r,
                       const std::vector<BenchColumn>& columns) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write '" + path + "'");
    os << "method,direction,rho_target,seed,accuracy,macro_accuracy,prior_l1\n";
    for (const auto& cell : r.cells) {
        const auto col = std::find_if(columns.begin(), columns.end(),
                                      [&](const BenchColumn& c) { return c.label == cell.column; });
        os << cell.method << "," << direction_name(col->direction) << "," << rho_label(col->rho_target)
           << "," << cell.seed << "," << fmt(cell.metrics.accuracy) << ","
           << fmt(cell.metrics.macro_accuracy) << "," << fmt(cell.metrics.prior_l1) << "\n";
    }
}

void write_aggregate_csv(const std::string& path, const BenchResult& r,
                         const std::vector<std::string>& methods) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write '" + path + "'");
    os << "method";
    for (const auto& col : r.columns) os << "," << col.label;
    os << ",Avg\n";
    for (const auto& m : methods) {
        os << m;
        for (double v : r.table.at(m)) os << "," << fmt(v);
        os << "," << fmt(r.row_average.at(m)) << "\n";
    }
}

} // namespace

BenchResult cmd_bench(const RunConfig& cfg) {
    cfg.validate();
    ensure_out_dir(cfg);
    const AdapterConfig acfg = cfg.adapter_config();
    BenchResult result = run_bench(cfg, cfg.methods, acfg,
                                   [&](uint64_t seed) { return adapter_checkpoint_path(cfg, seed); });

    write_results_csv(cfg.out_dir + "/results.csv", result, result.columns);
    write_aggregate_csv(cfg.out_dir + "/aggregate.csv", result, cfg.methods);

    const CostReport costs = cost_report(cfg);
    ordered_json manifest;
    manifest["command"] = "bench";
    manifest["config"] = config_json(cfg);
    manifest["columns"] = ordered_json::array();
    for (const auto& c : result.columns) manifest["columns"].push_back(c.label);
    manifest["aggregate"] = ordered_json::object();
    for (const auto& m : cfg.methods) {
        ordered_json row;
        for (size_t i = 0; i < result.columns.size(); ++i)
            row[result.columns[i].label] = result.table.at(m)[i];
        row["Avg"] = result.row_average.at(m);
        manifest["aggregate"][m] = row;
    }
    manifest["runs"] = ordered_json::array();
    for (const auto& cell : result.cells) {
        const auto col = std::find_if(result.columns.begin(), result.columns.end(),
                                      [&](const BenchColumn& bc) { return bc.label == cell.column; });
        ordered_json run;
        run["method"] = cell.method;
        run["direction"] = direction_name(col->direction);
        run["rho_target"] = col->rho_target;
        run["seed"] = cell.seed;
        run["samples"] = cell.metrics.samples;
        run["accuracy"] = cell.metrics.accuracy;
        run["macro_accuracy"] = cell.metrics.macro_accuracy;
        run["per_class_accuracy"] = cell.metrics.per_class_accuracy;
        run["prior_l1"] = cell.metrics.prior_l1;
        ordered_json yhat = ordered_json::array();
        for (int i = 0; i < cell.metrics.final_y_hat.size(); ++i)
            yhat.push_back(cell.metrics.final_y_hat.at_flat(i));
        run["final_y_hat"] = yhat;
        manifest["runs"].push_back(run);
    }
    manifest["costs"] = {{"backbone_macs", costs.backbone_macs},
                         {"backbone_params", costs.backbone_params},
                         {"adapter_macs", costs.adapter_macs},
                         {"adapter_params", costs.adapter_params}};
    write_json(cfg.out_dir + "/bench_manifest.json", manifest);

    if (cfg.tta_log_batches) {
        for (const auto& cell : result.cells) {
            const std::string path = cfg.out_dir + "/batches_" + cell.method + "_" + cell.column +
                                     "_seed" + std::to_string(cell.seed) + ".csv";
            std::ofstream os(path, std::ios::trunc);
            os << "t,batch_accuracy,loss,prior_l1\n";
            for (const auto& row : cell.metrics.batch_log)
                os << row.t << "," << fmt(row.batch_accuracy) << "," << fmt(row.loss) << ","
                   << fmt(row.prior_l1) << "\n";
        }
    }

    std::printf("costs: backbone %lld MACs / %lld params; +adapter %lld MACs / %lld params\n",
                costs.backbone_macs, costs.backbone_params, costs.backbone_macs + costs.adapter_macs,
                costs.backbone_params + costs.adapter_params);
    std::printf("%-22s", "method");
    for (const auto& c : result.columns) std::printf(" %7s", c.label.c_str());
    std::printf(" %7s\n", "Avg");
    for (const auto& m : cfg.methods) {
        std::printf("%-22s", m.c_str());
        for (double v : result.table.at(m)) std::printf(" %7.2f", 100.0 * v);
        std::printf(" %7.2f\n", 100.0 * result.row_average.at(m));
    }
    return result;
}

namespace {

AblateResult run_mask_sweep(const RunConfig& cfg, const std::vector<AdapterConfig>& configs,
                            const std::vector<std::string>& labels,
                            const std::vector<std::array<double, 3>>& taus) {
    AblateResult result;
    result.columns = bench_columns(cfg.rho_targets);
    const NetworkSpec spec = network_spec(cfg);

    for (size_t v = 0; v < configs.size(); ++v) {
        // Train one adapter per seed for this variant, then bench it.
        RunConfig variant = cfg;
        variant.methods = {cfg.ablate_method};
        const std::string tag = "ablate" + std::to_string(v);
        for (uint64_t seed : cfg.seeds) {
            Model model = load_model(cfg, seed);
            model.set_stage(Stage::adapter_train);
            const SourceData data = make_source(seeded_scenario(cfg, seed));
            Adapter adapter(spec.feature_dim(), spec.num_classes, configs[v],
                            derive_seed(seed, "adapter"));
            AdapterTrainSchedule sched;
            sched.iterations = cfg.adapter_iters;
            sched.batch_size = cfg.adapter_batch_size;
            sched.lr = cfg.adapter_lr;
            sched.momentum = cfg.adapter_momentum;
            sched.tau = taus[v];
            sched.seed = seed;
            train_adapter(adapter, model, data.x, data.y, data.pi_s, sched);
            adapter.save(cfg.out_dir + "/" + tag + "_seed" + std::to_string(seed) + ".ckpt");
        }
        BenchResult bench = run_bench(variant, variant.methods, configs[v], [&](uint64_t seed) {
            return cfg.out_dir + "/" + tag + "_seed" + std::to_string(seed) + ".ckpt";
        });
        AblateRow row;
        row.label = labels[v];
        row.accuracy = bench.table.at(cfg.ablate_method);
        row.average = bench.row_average.at(cfg.ablate_method);
        result.rows.push_back(std::move(row));
    }
    return result;
}

void write_ablate_csv(const std::string& path, const AblateResult& r, const char* label_header) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write '" + path + "'");
    os << label_header;
    for (const auto& col : r.columns) os << "," << col.label;
    os << ",Avg\n";
    for (const auto& row : r.rows) {
        os << row.label;
        for (double v : row.accuracy) os << "," << fmt(v);
        os << "," << fmt(row.average) << "\n";
    }
}

} // namespace

AblateResult cmd_ablate_components(const RunConfig& cfg) {
    cfg.validate();
    ensure_out_dir(cfg);
    const int h = cfg.adapter_hidden;
    // The seven architecture masks of the component ablation.
    const std::vector<AdapterConfig> configs = {
        AdapterConfig::with_mask(true, false, false, false, h),
        AdapterConfig::with_mask(false, true, false, false, h),
        AdapterConfig::with_mask(false, false, true, false, h),
        AdapterConfig::with_mask(false, false, false, true, h),
        AdapterConfig::with_mask(true, true, false, false, h),
        AdapterConfig::with_mask(false, false, true, true, h),
        AdapterConfig::with_mask(true, true, true, true, h),
    };
    std::vector<std::string> labels = {"gamma", "beta", "dW", "db", "gamma+beta", "dW+db", "all"};
    std::vector<std::array<double, 3>> taus(configs.size(), cfg.adapter_tau);
    AblateResult result = run_mask_sweep(cfg, configs, labels, taus);
    write_ablate_csv(cfg.out_dir + "/ablate_components.csv", result, "mask");

    std::printf("%-12s", "mask");
    for (const auto& c : result.columns) std::printf(" %7s", c.label.c_str());
    std::printf(" %7s\n", "Avg");
    for (const auto& row : result.rows) {
        std::printf("%-12s", row.label.c_str());
        for (double v : row.accuracy) std::printf(" %7.2f", 100.0 * v);
        std::printf(" %7.2f\n", 100.0 * row.average);
    }
    return result;
}

AblateResult cmd_ablate_taus(const RunConfig& cfg, const std::string& triples) {
    cfg.validate();
    ensure_out_dir(cfg);
    std::vector<AdapterConfig> configs;
    std::vector<std::string> labels;
    std::vector<std::array<double, 3>> taus;
    for (const auto& spec : split_list(triples, ';')) {
        const auto parts = split_list(spec);
        if (parts.size() != 3)
            throw std::invalid_argument("ablate: tau triple '" + spec + "' needs 3 values");
        std::array<double, 3> t{};
        for (int i = 0; i < 3; ++i) t[static_cast<size_t>(i)] = std::stod(parts[static_cast<size_t>(i)]);
        configs.push_back(cfg.adapter_config());
        labels.push_back(spec);
        taus.push_back(t);
    }
    if (configs.empty()) throw std::invalid_argument("ablate: no tau triples given");
    AblateResult result = run_mask_sweep(cfg, configs, labels, taus);
    write_ablate_csv(cfg.out_dir + "/ablate_taus.csv", result, "tau");
    return result;
}

} // namespace shad
