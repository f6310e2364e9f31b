#include "shad/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace shad {

// ---- LabelDistribution ----

LabelDistribution LabelDistribution::uniform(int num_classes) {
    if (num_classes < 1) throw std::invalid_argument("LabelDistribution: empty");
    return LabelDistribution(Matrix(1, num_classes, 1.0 / num_classes));
}

LabelDistribution LabelDistribution::from_counts(const std::vector<long long>& counts) {
    long long total = 0;
    for (long long c : counts) {
        if (c < 0) throw std::invalid_argument("LabelDistribution: negative count");
        total += c;
    }
    if (total <= 0) throw std::invalid_argument("LabelDistribution: zero total count");
    Matrix p(1, static_cast<int>(counts.size()));
    for (size_t i = 0; i < counts.size(); ++i)
        p.at_flat(static_cast<int>(i)) = static_cast<double>(counts[i]) / static_cast<double>(total);
    return LabelDistribution(std::move(p));
}

LabelDistribution LabelDistribution::from_probs(Matrix probs) {
    if (probs.rows() != 1 || probs.cols() < 1)
        throw_shape_error("LabelDistribution: expected 1xC, got " + probs.shape_str());
    double sum = 0.0;
    for (int i = 0; i < probs.size(); ++i) {
        if (probs.at_flat(i) < 0.0)
            throw std::invalid_argument("LabelDistribution: negative probability");
        sum += probs.at_flat(i);
    }
    if (std::fabs(sum - 1.0) > 1e-9)
        throw std::invalid_argument("LabelDistribution: probabilities sum to " + std::to_string(sum));
    return LabelDistribution(std::move(probs));
}

LabelDistribution LabelDistribution::reversed() const {
    Matrix p(1, probs_.cols());
    for (int i = 0; i < probs_.cols(); ++i) p.at_flat(i) = probs_.at_flat(probs_.cols() - 1 - i);
    return LabelDistribution(std::move(p));
}

Matrix LabelDistribution::log_floored() const {
    Matrix out(1, probs_.cols());
    for (int i = 0; i < probs_.cols(); ++i)
        out.at_flat(i) = std::log(probs_.at_flat(i) > kProbFloor ? probs_.at_flat(i) : kProbFloor);
    return out;
}

double LabelDistribution::l1_distance(const LabelDistribution& o) const {
    if (num_classes() != o.num_classes()) throw_shape_error("l1_distance", probs_, o.probs_);
    double d = 0.0;
    for (int i = 0; i < probs_.cols(); ++i) d += std::fabs(probs_.at_flat(i) - o.probs_.at_flat(i));
    return d;
}

// ---- helpers ----

std::vector<int> argmax_rows(const Matrix& m) {
    std::vector<int> out(static_cast<size_t>(m.rows()));
    for (int i = 0; i < m.rows(); ++i) {
        int best = 0;
        for (int j = 1; j < m.cols(); ++j)
            if (m(i, j) > m(i, best)) best = j;
        out[static_cast<size_t>(i)] = best;
    }
    return out;
}

Matrix softmax_rows(const Matrix& logits) {
    Matrix out(logits.rows(), logits.cols());
    for (int i = 0; i < logits.rows(); ++i) {
        double mx = logits(i, 0);
        for (int j = 1; j < logits.cols(); ++j) mx = std::max(mx, logits(i, j));
        double z = 0.0;
        for (int j = 0; j < logits.cols(); ++j) {
            out(i, j) = std::exp(logits(i, j) - mx);
            z += out(i, j);
        }
        for (int j = 0; j < logits.cols(); ++j) out(i, j) /= z;
    }
    return out;
}

namespace {

Matrix one_hot(const std::vector<int>& labels, int num_classes) {
    Matrix m(static_cast<int>(labels.size()), num_classes);
    for (size_t i = 0; i < labels.size(); ++i) {
        const int y = labels[i];
        if (y < 0 || y >= num_classes)
            throw std::invalid_argument("label " + std::to_string(y) + " out of range [0, " +
                                        std::to_string(num_classes) + ")");
        m(static_cast<int>(i), y) = 1.0;
    }
    return m;
}

} // namespace

Node cross_entropy(Graph& g, Node logits, const std::vector<int>& labels) {
    const int n = logits.rows();
    if (static_cast<int>(labels.size()) != n)
        throw std::invalid_argument("cross_entropy: " + std::to_string(labels.size()) +
                                    " labels for " + std::to_string(n) + " rows");
    Node lsm = g.log_softmax(logits);
    Node picked = g.mul(lsm, g.constant(one_hot(labels, logits.cols())));
    return g.scale(g.reduce_sum(picked), -1.0 / n);
}

Node generalized_logit_adjusted(Graph& g, Node logits, const std::vector<int>& labels,
                                const LabelDistribution& pi_s, double tau) {
    if (pi_s.num_classes() != logits.cols())
        throw_shape_error("generalized_logit_adjusted: pi_s has " +
                          std::to_string(pi_s.num_classes()) + " classes, logits " +
                          logits.value().shape_str());
    Matrix shift = pi_s.log_floored();
    for (int i = 0; i < shift.size(); ++i) shift.at_flat(i) *= tau;
    Node shifted = g.rowwise_affine(logits, g.constant(Matrix::ones(1, logits.cols())),
                                    g.constant(std::move(shift)));
    return cross_entropy(g, shifted, labels);
}

Node entropy_loss(Graph& g, Node logits) {
    const int n = logits.rows();
    Node lsm = g.log_softmax(logits);
    Node p = g.exp(lsm);
    return g.scale(g.reduce_sum(g.mul(p, lsm)), -1.0 / n);
}

Node info_max_loss(Graph& g, Node logits) {
    if (logits.rows() < 2)
        throw std::invalid_argument("info_max_loss: needs a batch of >= 2, got " +
                                    std::to_string(logits.rows()));
    Node lsm = g.log_softmax(logits);
    Node p = g.exp(lsm);
    Node ent = g.scale(g.reduce_sum(g.mul(p, lsm)), -1.0 / logits.rows());
    Node p_bar = g.mean_rows(p);
    Node marginal_ent = g.scale(g.reduce_sum(g.mul(p_bar, g.log(p_bar))), -1.0);
    return g.sub(ent, marginal_ent);
}

Matrix posthoc_logit_adjust(const Matrix& logits, const LabelDistribution& target_prior,
                            const LabelDistribution& pi_s) {
    if (target_prior.num_classes() != logits.cols() || pi_s.num_classes() != logits.cols())
        throw_shape_error("posthoc_logit_adjust: class count mismatch with " + logits.shape_str());
    const Matrix log_t = target_prior.log_floored();
    const Matrix log_s = pi_s.log_floored();
    Matrix shift(1, logits.cols());
    for (int j = 0; j < logits.cols(); ++j) shift.at_flat(j) = log_t.at_flat(j) - log_s.at_flat(j);
    Matrix out(logits.rows(), logits.cols());
    for (int i = 0; i < logits.rows(); ++i)
        for (int j = 0; j < logits.cols(); ++j) out(i, j) = logits(i, j) + shift.at_flat(j);
    return out;
}

Node pseudo_label_loss(Graph& g, Node logits) {
    return cross_entropy(g, logits, argmax_rows(logits.value()));
}

} // namespace shad
