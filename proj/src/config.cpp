#include "shad/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>

namespace shad {

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

double parse_double(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("trailing");
        return d;
    } catch (...) {
        throw std::invalid_argument("config: bad number '" + v + "' for key '" + key + "'");
    }
}

int parse_int(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        long n = std::stol(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("trailing");
        return static_cast<int>(n);
    } catch (...) {
        throw std::invalid_argument("config: bad integer '" + v + "' for key '" + key + "'");
    }
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw std::invalid_argument("config: bad bool '" + v + "' for key '" + key + "'");
}

std::string fmt_double(double d) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%g", d);
    return buf;
}

std::string join(const std::vector<std::string>& parts, char sep = ',') {
    std::string out;
    for (size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

} // namespace

std::vector<std::string> split_list(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep)) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

void RunConfig::apply(const std::string& key, const std::string& raw) {
    const std::string value = trim(raw);
    auto ints = [&](std::vector<int>& dst) {
        dst.clear();
        for (const auto& p : split_list(value)) dst.push_back(parse_int(key, p));
    };

    if (key == "scenario.num_classes") scenario.num_classes = parse_int(key, value);
    else if (key == "scenario.input_dim") scenario.input_dim = parse_int(key, value);
    else if (key == "scenario.mean_scale") scenario.mean_scale = parse_double(key, value);
    else if (key == "scenario.within_sigma") scenario.within_sigma = parse_double(key, value);
    else if (key == "scenario.train_per_class") scenario.train_per_class_max = parse_int(key, value);
    else if (key == "scenario.rho_source") scenario.rho_source = parse_double(key, value);
    else if (key == "scenario.severity") scenario.severity = parse_int(key, value);
    else if (key == "scenario.stream_length") scenario.stream_length = parse_int(key, value);
    else if (key == "scenario.batch_size") scenario.batch_size = parse_int(key, value);
    else if (key == "scenario.max_rotation_deg") scenario.cov.max_rotation_deg = parse_double(key, value);
    else if (key == "scenario.max_noise_factor") scenario.cov.max_noise_factor = parse_double(key, value);
    else if (key == "scenario.max_scale_jitter") scenario.cov.max_scale_jitter = parse_double(key, value);
    else if (key == "scenario.max_offset_sigma") scenario.cov.max_offset_sigma = parse_double(key, value);
    else if (key == "network.hidden") ints(network.hidden_dims);
    else if (key == "network.norm") network.norm_flavor = value;
    else if (key == "network.freeze_top") network.freeze_top = parse_int(key, value);
    else if (key == "norm.momentum") norm_momentum = parse_double(key, value);
    else if (key == "iabn.alpha") iabn_alpha = parse_double(key, value);
    else if (key == "iabn.momentum") iabn_momentum = parse_double(key, value);
    else if (key == "pretrain.epochs") pretrain_epochs = parse_int(key, value);
    else if (key == "pretrain.lr") pretrain_lr = parse_double(key, value);
    else if (key == "pretrain.weight_decay") pretrain_weight_decay = parse_double(key, value);
    else if (key == "pretrain.momentum") pretrain_momentum = parse_double(key, value);
    else if (key == "pretrain.batch_size") pretrain_batch_size = parse_int(key, value);
    else if (key == "pretrain.loss") {
        if (value != "balanced_softmax" && value != "cross_entropy")
            throw std::invalid_argument("config: pretrain.loss must be balanced_softmax or cross_entropy");
        pretrain_loss = value;
    } else if (key == "pretrain.cosine_lr") pretrain_cosine_lr = parse_bool(key, value);
    else if (key == "pretrain.probe_per_class") probe_per_class = parse_int(key, value);
    else if (key == "adapter.iters") adapter_iters = parse_int(key, value);
    else if (key == "adapter.lr") adapter_lr = parse_double(key, value);
    else if (key == "adapter.momentum") adapter_momentum = parse_double(key, value);
    else if (key == "adapter.batch_size") adapter_batch_size = parse_int(key, value);
    else if (key == "adapter.hidden") adapter_hidden = parse_int(key, value);
    else if (key == "adapter.tau") {
        auto parts = split_list(value);
        if (parts.size() != 3)
            throw std::invalid_argument("config: adapter.tau needs exactly 3 values");
        for (int i = 0; i < 3; ++i)
            adapter_tau[static_cast<size_t>(i)] = parse_double(key, parts[static_cast<size_t>(i)]);
    } else if (key == "adapter.components") {
        adapter_components = value;
        adapter_config();  // validates
    } else if (key == "tta.lr") tta.lr = parse_double(key, value);
    else if (key == "tta.momentum") tta.momentum = parse_double(key, value);
    else if (key == "tta.alpha") tta.estimator_alpha = parse_double(key, value);
    else if (key == "tta.top_k") tta.estimator_top_k = parse_int(key, value);
    else if (key == "tta.score_after_update") tta.score_after_update = parse_bool(key, value);
    else if (key == "tta.log_batches") tta_log_batches = parse_bool(key, value);
    else if (key == "bench.methods") methods = split_list(value);
    else if (key == "bench.rho_targets") {
        rho_targets.clear();
        for (const auto& p : split_list(value)) rho_targets.push_back(parse_double(key, p));
    } else if (key == "bench.seeds") {
        seeds.clear();
        for (const auto& p : split_list(value))
            seeds.push_back(static_cast<uint64_t>(std::stoull(p)));
    } else if (key == "bench.threads") threads = parse_int(key, value);
    else if (key == "ablate.method") ablate_method = value;
    else if (key == "out.dir") out_dir = value;
    else throw std::invalid_argument("config: unknown key '" + key + "'");
}

void RunConfig::apply_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("config: cannot open '" + path + "'");
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config: " + path + ":" + std::to_string(lineno) +
                                        ": expected key = value");
        apply(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
}

std::vector<std::pair<std::string, std::string>> RunConfig::items() const {
    std::vector<std::pair<std::string, std::string>> kv;
    auto add = [&](const std::string& k, const std::string& v) { kv.emplace_back(k, v); };
    add("scenario.num_classes", std::to_string(scenario.num_classes));
    add("scenario.input_dim", std::to_string(scenario.input_dim));
    add("scenario.mean_scale", fmt_double(scenario.mean_scale));
    add("scenario.within_sigma", fmt_double(scenario.within_sigma));
    add("scenario.train_per_class", std::to_string(scenario.train_per_class_max));
    add("scenario.rho_source", fmt_double(scenario.rho_source));
    add("scenario.severity", std::to_string(scenario.severity));
    add("scenario.stream_length", std::to_string(scenario.stream_length));
    add("scenario.batch_size", std::to_string(scenario.batch_size));
    add("scenario.max_rotation_deg", fmt_double(scenario.cov.max_rotation_deg));
    add("scenario.max_noise_factor", fmt_double(scenario.cov.max_noise_factor));
    add("scenario.max_scale_jitter", fmt_double(scenario.cov.max_scale_jitter));
    add("scenario.max_offset_sigma", fmt_double(scenario.cov.max_offset_sigma));
    {
        std::vector<std::string> hs;
        for (int h : network.hidden_dims) hs.push_back(std::to_string(h));
        add("network.hidden", join(hs));
    }
    add("network.norm", network.norm_flavor);
    add("network.freeze_top", std::to_string(network.freeze_top));
    add("norm.momentum", fmt_double(norm_momentum));
    add("iabn.alpha", fmt_double(iabn_alpha));
    add("iabn.momentum", fmt_double(iabn_momentum));
    add("pretrain.epochs", std::to_string(pretrain_epochs));
    add("pretrain.lr", fmt_double(pretrain_lr));
    add("pretrain.weight_decay", fmt_double(pretrain_weight_decay));
    add("pretrain.momentum", fmt_double(pretrain_momentum));
    add("pretrain.batch_size", std::to_string(pretrain_batch_size));
    add("pretrain.loss", pretrain_loss);
    add("pretrain.cosine_lr", pretrain_cosine_lr ? "true" : "false");
    add("pretrain.probe_per_class", std::to_string(probe_per_class));
    add("adapter.iters", std::to_string(adapter_iters));
    add("adapter.lr", fmt_double(adapter_lr));
    add("adapter.momentum", fmt_double(adapter_momentum));
    add("adapter.batch_size", std::to_string(adapter_batch_size));
    add("adapter.hidden", std::to_string(adapter_hidden));
    add("adapter.tau", fmt_double(adapter_tau[0]) + "," + fmt_double(adapter_tau[1]) + "," +
                           fmt_double(adapter_tau[2]));
    add("adapter.components", adapter_components);
    add("tta.lr", fmt_double(tta.lr));
    add("tta.momentum", fmt_double(tta.momentum));
    add("tta.alpha", fmt_double(tta.estimator_alpha));
    add("tta.top_k", std::to_string(tta.estimator_top_k));
    add("tta.score_after_update", tta.score_after_update ? "true" : "false");
    add("tta.log_batches", tta_log_batches ? "true" : "false");
    add("bench.methods", join(methods));
    {
        std::vector<std::string> rs;
        for (double r : rho_targets) rs.push_back(fmt_double(r));
        add("bench.rho_targets", join(rs));
    }
    {
        std::vector<std::string> ss;
        for (uint64_t s : seeds) ss.push_back(std::to_string(s));
        add("bench.seeds", join(ss));
    }
    add("bench.threads", std::to_string(threads));
    add("ablate.method", ablate_method);
    add("out.dir", out_dir);
    return kv;
}

AdapterConfig RunConfig::adapter_config() const {
    AdapterConfig c;
    c.hidden = adapter_hidden;
    c.use_gamma = c.use_beta = c.use_delta_w = c.use_delta_b = false;
    for (const auto& part : split_list(adapter_components)) {
        if (part == "gamma") c.use_gamma = true;
        else if (part == "beta") c.use_beta = true;
        else if (part == "dw") c.use_delta_w = true;
        else if (part == "db") c.use_delta_b = true;
        else if (part == "none") {}
        else throw std::invalid_argument("config: unknown adapter component '" + part + "'");
    }
    return c;
}

void RunConfig::validate() const {
    scenario.validate();
    network.validate();
    if (pretrain_epochs < 0 || adapter_iters < 0)
        throw std::invalid_argument("config: negative training length");
    if (methods.empty()) throw std::invalid_argument("config: bench.methods is empty");
    for (const auto& m : methods) tta_method(m);  // throws on unknown names
    if (seeds.empty()) throw std::invalid_argument("config: bench.seeds is empty");
    if (rho_targets.empty()) throw std::invalid_argument("config: bench.rho_targets is empty");
    for (double r : rho_targets)
        if (r < 1.0) throw std::invalid_argument("config: rho_target must be >= 1");
    tta_method(ablate_method);
}

} // namespace shad
