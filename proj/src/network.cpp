#include "shad/network.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_map>

#include "shad/checkpoint.hpp"

namespace shad {

namespace {
std::vector<std::string> norm_flavors(const std::string& spec, int blocks) {
    std::vector<std::string> parts;
    std::string cur;
    for (char ch : spec + ",") {
        if (ch == ',') {
            if (!cur.empty()) parts.push_back(cur);
            cur.clear();
        } else if (ch != ' ') {
            cur += ch;
        }
    }
    // Pad with the last entry so "bn,none" means: first block bn, the rest
    // unnormalized. Entries beyond the block count are ignored.
    while (!parts.empty() && static_cast<int>(parts.size()) < blocks) parts.push_back(parts.back());
    return parts;
}
} // namespace

bool NetworkSpec::block_normalized(int i) const {
    const auto flavors = norm_flavors(norm_flavor, num_blocks());
    if (i < 0 || i >= num_blocks()) return false;
    const size_t idx = std::min(static_cast<size_t>(i), flavors.size() - 1);
    return flavors[idx] != "none";
}

void NetworkSpec::validate() const {
    if (input_dim < 1) throw std::invalid_argument("NetworkSpec: input_dim must be >= 1");
    if (num_classes < 2) throw std::invalid_argument("NetworkSpec: num_classes must be >= 2");
    for (int h : hidden_dims)
        if (h < 1) throw std::invalid_argument("NetworkSpec: hidden width must be >= 1");
    if (freeze_top < 0 || freeze_top > num_blocks())
        throw std::invalid_argument("NetworkSpec: freeze_top out of range");
    const auto flavors = norm_flavors(norm_flavor, num_blocks());
    if (flavors.empty()) throw std::invalid_argument("NetworkSpec: empty norm flavor");
    for (const auto& f : flavors)
        if (f != "bn" && f != "none")
            throw std::invalid_argument("NetworkSpec: unknown norm flavor '" + f + "'");
}

AdapterOutput AdapterOutput::neutral(int feature_dim, int num_classes) {
    AdapterOutput o;
    o.gamma_h = Matrix::ones(1, feature_dim);
    o.beta_h = Matrix::zeros(1, feature_dim);
    o.delta_w = Matrix::zeros(feature_dim, num_classes);
    o.delta_b = Matrix::zeros(1, num_classes);
    return o;
}

bool AdapterOutput::all_finite() const {
    return gamma_h.all_finite() && beta_h.all_finite() && delta_w.all_finite() &&
           delta_b.all_finite();
}

namespace {
std::string block_prefix(int i) { return "block" + std::to_string(i); }
} // namespace

Model::Model(NetworkSpec spec, uint64_t init_seed) : spec_(std::move(spec)) {
    spec_.validate();
    Rng rng(derive_seed(init_seed, "model_init"));
    int in = spec_.input_dim;
    for (int i = 0; i < spec_.num_blocks(); ++i) {
        const int out = spec_.hidden_dims[static_cast<size_t>(i)];
        const std::string p = block_prefix(i);
        params_.add(p + ".linear.W", rng.normal_matrix(in, out, std::sqrt(2.0 / in)));
        params_.add(p + ".linear.b", Matrix::zeros(1, out));
        if (spec_.block_normalized(i)) {
            params_.add(p + ".norm.gamma", Matrix::ones(1, out));
            params_.add(p + ".norm.beta", Matrix::zeros(1, out));
            norm_layers_.emplace_back(out);
        } else {
            norm_layers_.emplace_back(0);  // placeholder keeps block indexing aligned
        }
        in = out;
    }
    const int d = spec_.feature_dim();
    params_.add("head.W", rng.normal_matrix(d, spec_.num_classes, std::sqrt(1.0 / d)));
    params_.add("head.b", Matrix::zeros(1, spec_.num_classes));
}

Node Model::forward_features(Graph& g, const Matrix& x, NormMode mode, bool update_running) {
    if (x.cols() != spec_.input_dim)
        throw_shape_error("forward_features: input " + x.shape_str() + " vs input_dim " +
                          std::to_string(spec_.input_dim));
    if (!x.all_finite()) throw std::invalid_argument("forward_features: non-finite input");
    Node h = g.constant(x);
    for (int i = 0; i < spec_.num_blocks(); ++i) {
        const std::string p = block_prefix(i);
        Node z = g.matmul(h, g.param(params_.get(p + ".linear.W")));
        const int w = spec_.hidden_dims[static_cast<size_t>(i)];
        z = g.rowwise_affine(z, g.constant(Matrix::ones(1, w)), g.param(params_.get(p + ".linear.b")));
        if (spec_.block_normalized(i))
            z = normalize(g, z, norm_layers_[static_cast<size_t>(i)], params_.get(p + ".norm.gamma"),
                          params_.get(p + ".norm.beta"), mode, update_running);
        h = g.relu(z);
    }
    return h;
}

Node Model::forward_head(Graph& g, Node h, const HeadCorrection& corr) {
    const int d = spec_.feature_dim();
    const int c = spec_.num_classes;
    if (h.cols() != d)
        throw_shape_error("forward_head: h " + h.value().shape_str() + " vs feature_dim " +
                          std::to_string(d));
    Node z = g.rowwise_affine(h, corr.gamma_h, corr.beta_h);
    Node w_sum = g.add(g.param(params_.get("head.W")), corr.delta_w);
    Node b_sum = g.add(g.param(params_.get("head.b")), corr.delta_b);
    Node logits = g.matmul(z, w_sum);
    return g.rowwise_affine(logits, g.constant(Matrix::ones(1, c)), b_sum);
}

Node Model::forward_head(Graph& g, Node h, const AdapterOutput& corr) {
    HeadCorrection nodes{g.constant(corr.gamma_h), g.constant(corr.beta_h),
                         g.constant(corr.delta_w), g.constant(corr.delta_b)};
    return forward_head(g, h, nodes);
}

bool Model::is_norm_affine(const std::string& name) {
    return name.find(".norm.gamma") != std::string::npos ||
           name.find(".norm.beta") != std::string::npos;
}

void Model::set_stage(Stage stage) {
    stage_ = stage;
    switch (stage) {
    case Stage::pretrain:
        params_.set_all_trainable(true);
        break;
    case Stage::adapter_train:
        params_.set_all_trainable(false);
        break;
    case Stage::tta: {
        params_.set_all_trainable(false);
        const int unfrozen = spec_.num_blocks() - spec_.freeze_top;
        for (int i = 0; i < unfrozen; ++i) {
            if (!spec_.block_normalized(i)) continue;
            params_.set_trainable(block_prefix(i) + ".norm.gamma", true);
            params_.set_trainable(block_prefix(i) + ".norm.beta", true);
        }
        break;
    }
    }
}

unsigned long long Model::param_hash(bool exclude_norm_affine) const {
    if (!exclude_norm_affine) return params_.hash();
    return params_.hash([](const std::string& n) { return !is_norm_affine(n); });
}

void Model::save(const std::string& path) const {
    std::vector<std::pair<std::string, const Matrix*>> entries;
    for (const auto& name : params_.names()) entries.emplace_back(name, &params_.get(name).value);
    for (int i = 0; i < spec_.num_blocks(); ++i) {
        if (!spec_.block_normalized(i)) continue;
        const auto& l = norm_layers_[static_cast<size_t>(i)];
        entries.emplace_back(block_prefix(i) + ".norm.running_mean", &l.running_mean);
        entries.emplace_back(block_prefix(i) + ".norm.running_var", &l.running_var);
    }
    save_checkpoint(path, entries);
}

Model Model::load(const NetworkSpec& spec, const std::string& path) {
    Model model(spec, 0);
    auto entries = load_checkpoint(path);
    std::unordered_map<std::string, Matrix*> slots;
    for (const auto& name : model.params_.names()) slots[name] = &model.params_.get(name).value;
    for (int i = 0; i < model.spec_.num_blocks(); ++i) {
        if (!model.spec_.block_normalized(i)) continue;
        auto& l = model.norm_layers_[static_cast<size_t>(i)];
        slots[block_prefix(i) + ".norm.running_mean"] = &l.running_mean;
        slots[block_prefix(i) + ".norm.running_var"] = &l.running_var;
    }
    size_t filled = 0;
    for (auto& [name, value] : entries) {
        auto it = slots.find(name);
        if (it == slots.end())
            throw std::runtime_error("checkpoint: unexpected entry '" + name + "' in '" + path + "'");
        if (!it->second->same_shape(value))
            throw std::runtime_error("checkpoint: shape mismatch for '" + name + "': stored " +
                                     value.shape_str() + ", spec wants " + it->second->shape_str());
        *it->second = std::move(value);
        ++filled;
    }
    if (filled != slots.size())
        throw std::runtime_error("checkpoint: '" + path + "' is missing entries (" +
                                 std::to_string(filled) + "/" + std::to_string(slots.size()) + ")");
    return model;
}

long long Model::forward_macs() const {
    long long macs = 0;
    int in = spec_.input_dim;
    for (int h : spec_.hidden_dims) {
        macs += static_cast<long long>(in) * h;
        in = h;
    }
    macs += static_cast<long long>(spec_.feature_dim()) * spec_.num_classes;
    return macs;
}

} // namespace shad
