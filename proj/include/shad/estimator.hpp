#pragma once

// Online target-label-distribution estimate: exponential moving average of
// the batch-mean prediction, initialized at uniform, with optional top-k
// filtering of each prediction row before averaging.

#include "shad/label_distribution.hpp"
#include "shad/matrix.hpp"

namespace shad {

class PriorEstimate {
public:
    // top_k = 0 disables filtering.
    PriorEstimate(int num_classes, double alpha = 0.1, int top_k = 0);

    // probs: n x C rows of valid distributions. Applies top-k filtering and
    // row renormalization, then y_hat = alpha * mean_row + (1-alpha) * y_hat.
    void update(const Matrix& probs);

    void reset();

    const Matrix& y_hat() const { return y_hat_; }
    LabelDistribution distribution() const;
    int step() const { return step_; }
    double alpha() const { return alpha_; }

private:
    Matrix y_hat_;
    int step_ = 0;
    double alpha_;
    int top_k_;
};

} // namespace shad
