#include "shad/adapter.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "shad/checkpoint.hpp"
#include "shad/losses.hpp"
#include "shad/optimizer.hpp"
#include "shad/rng.hpp"

namespace shad {

MappingVector MappingVector::from_source_distribution(const LabelDistribution& pi_s) {
    const int c = pi_s.num_classes();
    if (c < 2) throw std::invalid_argument("MappingVector: needs >= 2 classes");
    std::vector<int> order(static_cast<size_t>(c));
    std::iota(order.begin(), order.end(), 0);
    // Rank 0 = most frequent; ties resolve by class index for determinism.
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return pi_s[a] > pi_s[b]; });
    Matrix m(1, c);
    for (int rank = 0; rank < c; ++rank)
        m.at_flat(order[static_cast<size_t>(rank)]) = 2.0 * rank / (c - 1) - 1.0;
    return MappingVector(std::move(m));
}

double MappingVector::map(const LabelDistribution& pi) const {
    if (pi.num_classes() != m_.cols()) throw_shape_error("MappingVector::map", m_, pi.probs());
    double s = 0.0;
    for (int i = 0; i < m_.cols(); ++i) s += m_.at_flat(i) * pi[i];
    return s;
}

std::string AdapterConfig::mask_label() const {
    std::string s;
    if (use_gamma) s += "g";
    if (use_beta) s += "b";
    if (use_delta_w) s += "W";
    if (use_delta_b) s += "d";
    return s.empty() ? "none" : s;
}

AdapterConfig AdapterConfig::with_mask(bool g, bool b, bool w, bool d, int hidden) {
    AdapterConfig c;
    c.hidden = hidden;
    c.use_gamma = g;
    c.use_beta = b;
    c.use_delta_w = w;
    c.use_delta_b = d;
    return c;
}

Adapter::Adapter(int feature_dim, int num_classes, AdapterConfig cfg, uint64_t init_seed)
    : d_(feature_dim), c_(num_classes), cfg_(cfg) {
    if (d_ < 1 || c_ < 2 || cfg_.hidden < 1)
        throw std::invalid_argument("Adapter: bad dimensions");
    Rng rng(derive_seed(init_seed, "adapter_init"));
    const int h = cfg_.hidden;
    // First layers random, final layers zero: the untrained adapter is the
    // neutral element.
    params_.add("adapter.a.fc1.W", rng.normal_matrix(1, h, 1.0));
    params_.add("adapter.a.fc1.b", Matrix::zeros(1, h));
    params_.add("adapter.a.out.W", Matrix::zeros(h, 2 * d_));
    params_.add("adapter.a.out.b", Matrix::zeros(1, 2 * d_));
    params_.add("adapter.b.fc1.W", rng.normal_matrix(1, h, 1.0));
    params_.add("adapter.b.fc1.b", Matrix::zeros(1, h));
    params_.add("adapter.b.out.W", Matrix::zeros(h, d_ * c_ + c_));
    params_.add("adapter.b.out.b", Matrix::zeros(1, d_ * c_ + c_));
}

HeadCorrection Adapter::forward_nodes(Graph& g, double scalar_input) const {
    auto& self = const_cast<Adapter&>(*this);
    const int h = cfg_.hidden;
    Node in = g.constant(Matrix(1, 1, std::vector<double>{scalar_input}));
    auto branch = [&](const char* prefix) {
        Node z = g.matmul(in, g.param(self.params_.get(std::string(prefix) + ".fc1.W")));
        z = g.rowwise_affine(z, g.constant(Matrix::ones(1, h)),
                             g.param(self.params_.get(std::string(prefix) + ".fc1.b")));
        z = g.relu(z);
        Node out = g.matmul(z, g.param(self.params_.get(std::string(prefix) + ".out.W")));
        const int w = out.cols();
        return g.rowwise_affine(out, g.constant(Matrix::ones(1, w)),
                                g.param(self.params_.get(std::string(prefix) + ".out.b")));
    };

    HeadCorrection corr;
    Node out_a = branch("adapter.a");
    Node out_b = branch("adapter.b");
    if (cfg_.use_gamma)
        corr.gamma_h = g.add(g.slice_cols(out_a, 0, d_), g.constant(Matrix::ones(1, d_)));
    else
        corr.gamma_h = g.constant(Matrix::ones(1, d_));
    corr.beta_h = cfg_.use_beta ? g.slice_cols(out_a, d_, d_) : g.constant(Matrix::zeros(1, d_));
    corr.delta_w = cfg_.use_delta_w ? g.reshape(g.slice_cols(out_b, 0, d_ * c_), d_, c_)
                                    : g.constant(Matrix::zeros(d_, c_));
    corr.delta_b = cfg_.use_delta_b ? g.slice_cols(out_b, d_ * c_, c_)
                                    : g.constant(Matrix::zeros(1, c_));
    return corr;
}

AdapterOutput Adapter::forward(double scalar_input) const {
    Graph g;
    HeadCorrection corr = forward_nodes(g, scalar_input);
    AdapterOutput out;
    out.gamma_h = corr.gamma_h.value();
    out.beta_h = corr.beta_h.value();
    out.delta_w = corr.delta_w.value();
    out.delta_b = corr.delta_b.value();
    return out;
}

long long Adapter::reported_param_count() const {
    const long long h = cfg_.hidden, d = d_, c = c_;
    const long long branch_a = 2 * (h + h * 2 * d);
    const long long branch_b = h + h * (d * c + c);
    return branch_a + branch_b;
}

long long Adapter::forward_macs() const {
    const long long h = cfg_.hidden, d = d_, c = c_;
    return (h + h * 2 * d) + (h + h * (d * c + c));
}

void Adapter::save(const std::string& path) const {
    std::vector<std::pair<std::string, const Matrix*>> entries;
    for (const auto& name : params_.names()) entries.emplace_back(name, &params_.get(name).value);
    save_checkpoint(path, entries);
}

Adapter Adapter::load(int feature_dim, int num_classes, AdapterConfig cfg,
                      const std::string& path) {
    Adapter a(feature_dim, num_classes, cfg, 0);
    auto entries = load_checkpoint(path);
    size_t filled = 0;
    for (auto& [name, value] : entries) {
        if (!a.params_.has(name))
            throw std::runtime_error("checkpoint: unexpected entry '" + name + "' in '" + path + "'");
        Param& p = a.params_.get(name);
        if (!p.value.same_shape(value))
            throw std::runtime_error("checkpoint: shape mismatch for '" + name + "'");
        p.value = std::move(value);
        ++filled;
    }
    if (filled != a.params_.size())
        throw std::runtime_error("checkpoint: '" + path + "' is missing adapter entries");
    return a;
}

AdapterTrainReport train_adapter(Adapter& adapter, Model& model, const Matrix& train_x,
                                 const std::vector<int>& train_y, const LabelDistribution& pi_s,
                                 const AdapterTrainSchedule& schedule) {
    if (model.stage() != Stage::adapter_train)
        throw std::logic_error("train_adapter: model must be in the adapter_train stage, is " +
                               std::string(stage_name(model.stage())));
    if (!model.params().trainable_names().empty())
        throw std::logic_error("train_adapter: model has trainable parameters");
    if (train_x.rows() != static_cast<int>(train_y.size()))
        throw std::invalid_argument("train_adapter: feature/label count mismatch");

    const MappingVector m = MappingVector::from_source_distribution(pi_s);
    const LabelDistribution u = LabelDistribution::uniform(pi_s.num_classes());
    const LabelDistribution pi_rev = pi_s.reversed();
    const std::array<const LabelDistribution*, 3> pis = {&pi_s, &u, &pi_rev};

    // The model is frozen, so features are constants; compute them once.
    Matrix features(train_x.rows(), model.spec().feature_dim());
    {
        const int chunk = 512;
        for (int start = 0; start < train_x.rows(); start += chunk) {
            const int n = std::min(chunk, train_x.rows() - start);
            Matrix xb(n, train_x.cols());
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < train_x.cols(); ++j) xb(i, j) = train_x(start + i, j);
            Graph g;
            Node h = model.forward_features(g, xb, NormMode::eval_source);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < features.cols(); ++j) features(start + i, j) = h.value()(i, j);
        }
    }

    Rng rng(derive_seed(schedule.seed, "adapter_train"));
    SgdOptimizer opt(schedule.lr, schedule.momentum);
    const int n_total = train_x.rows();
    const int bs = std::min(schedule.batch_size, n_total);

    auto batch_loss = [&](const std::vector<int>& idx, int pi_index, bool with_grad) {
        Matrix hb(static_cast<int>(idx.size()), features.cols());
        std::vector<int> yb(idx.size());
        for (size_t i = 0; i < idx.size(); ++i) {
            for (int j = 0; j < features.cols(); ++j)
                hb(static_cast<int>(i), j) = features(idx[i], j);
            yb[i] = train_y[static_cast<size_t>(idx[i])];
        }
        Graph g;
        HeadCorrection corr = adapter.forward_nodes(g, m.map(*pis[static_cast<size_t>(pi_index)]));
        Node logits = model.forward_head(g, g.constant(std::move(hb)), corr);
        Node loss = generalized_logit_adjusted(g, logits, yb, pi_s,
                                               schedule.tau[static_cast<size_t>(pi_index)]);
        if (with_grad) {
            adapter.params().zero_grads();
            g.backward(loss);
        }
        return loss.scalar();
    };

    for (int k = 0; k < schedule.iterations; ++k) {
        std::vector<int> idx(static_cast<size_t>(bs));
        for (int i = 0; i < bs; ++i) idx[static_cast<size_t>(i)] = rng.uniform_int(n_total);
        const int pi_index = rng.uniform_int(3);
        const double loss = batch_loss(idx, pi_index, true);
        if (!std::isfinite(loss))
            throw std::runtime_error("train_adapter: non-finite loss at iteration " +
                                     std::to_string(k));
        opt.step(adapter.params());
    }

    AdapterTrainReport report;
    report.iterations = schedule.iterations;
    // Final per-branch loss on a fixed probe batch.
    const int probe_n = std::min(512, n_total);
    std::vector<int> probe_idx(static_cast<size_t>(probe_n));
    std::iota(probe_idx.begin(), probe_idx.end(), 0);
    for (int j = 0; j < 3; ++j)
        report.final_loss[static_cast<size_t>(j)] = batch_loss(probe_idx, j, false);
    return report;
}

} // namespace shad
