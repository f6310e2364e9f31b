#pragma once

// Probability vector over C classes.

#include <vector>

#include "shad/matrix.hpp"

namespace shad {

class LabelDistribution {
public:
    static constexpr double kProbFloor = 1e-12;

    LabelDistribution() = default;  // empty; populate via the factories

    static LabelDistribution uniform(int num_classes);
    static LabelDistribution from_counts(const std::vector<long long>& counts);
    // Validates: entries >= 0 and sum within 1e-9 of 1.
    static LabelDistribution from_probs(Matrix probs);

    int num_classes() const { return probs_.cols(); }
    double operator[](int c) const { return probs_.at_flat(c); }
    const Matrix& probs() const { return probs_; }

    LabelDistribution reversed() const;

    // log(max(p_c, kProbFloor)) as a 1 x C matrix.
    Matrix log_floored() const;

    double l1_distance(const LabelDistribution& o) const;

private:
    explicit LabelDistribution(Matrix p) : probs_(std::move(p)) {}
    Matrix probs_;
};

} // namespace shad
