#include "shad/estimator.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace shad {

PriorEstimate::PriorEstimate(int num_classes, double alpha, int top_k)
    : y_hat_(1, num_classes, 1.0 / num_classes), alpha_(alpha), top_k_(top_k) {
    if (num_classes < 2) throw std::invalid_argument("PriorEstimate: needs >= 2 classes");
    if (alpha < 0.0 || alpha > 1.0)
        throw std::invalid_argument("PriorEstimate: alpha must be in [0, 1]");
}

void PriorEstimate::update(const Matrix& probs) {
    const int c = y_hat_.cols();
    if (probs.rows() < 1) throw std::invalid_argument("PriorEstimate: empty batch");
    if (probs.cols() != c) throw_shape_error("PriorEstimate::update", probs, y_hat_);

    Matrix mean(1, c);
    std::vector<double> row(static_cast<size_t>(c));
    std::vector<int> order(static_cast<size_t>(c));
    for (int i = 0; i < probs.rows(); ++i) {
        for (int j = 0; j < c; ++j) row[static_cast<size_t>(j)] = probs(i, j);
        if (top_k_ > 0 && top_k_ < c) {
            std::iota(order.begin(), order.end(), 0);
            // Keep the k largest; ties resolve toward the lower class index.
            std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
                return row[static_cast<size_t>(a)] > row[static_cast<size_t>(b)];
            });
            double kept = 0.0;
            for (int r = 0; r < top_k_; ++r) kept += row[static_cast<size_t>(order[static_cast<size_t>(r)])];
            std::vector<double> filtered(static_cast<size_t>(c), 0.0);
            for (int r = 0; r < top_k_; ++r) {
                const int j = order[static_cast<size_t>(r)];
                filtered[static_cast<size_t>(j)] = row[static_cast<size_t>(j)] / kept;
            }
            row.swap(filtered);
        }
        for (int j = 0; j < c; ++j) mean.at_flat(j) += row[static_cast<size_t>(j)];
    }
    for (int j = 0; j < c; ++j) mean.at_flat(j) /= probs.rows();

    // alpha * mean + (1 - alpha) * y_hat, written so a fixed point is exact.
    for (int j = 0; j < c; ++j)
        y_hat_.at_flat(j) += alpha_ * (mean.at_flat(j) - y_hat_.at_flat(j));
    ++step_;
}

void PriorEstimate::reset() {
    y_hat_.fill(1.0 / y_hat_.cols());
    step_ = 0;
}

LabelDistribution PriorEstimate::distribution() const {
    // Renormalize away accumulated rounding before validation.
    Matrix p = y_hat_;
    double s = 0.0;
    for (int j = 0; j < p.size(); ++j) s += p.at_flat(j);
    for (int j = 0; j < p.size(); ++j) p.at_flat(j) /= s;
    return LabelDistribution::from_probs(std::move(p));
}

} // namespace shad
