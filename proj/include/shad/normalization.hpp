#pragma once

// Normalization layer with the statistic regimes under comparison:
//
//   train       — standardize by batch stats, EMA-update running stats
//   eval_source — standardize by stored running stats
//   eval_batch  — standardize by the current batch, no running update
//   eval_iabn   — running stats corrected per-channel toward batch stats
//                 through a soft-shrinkage gate, then EMA-update running
//                 stats with its own momentum
//
// In every mode the affine (gamma, beta) application is on the tape, so
// gradients reach the affine parameters; batch-statistic dependence on x is
// also differentiated (deeper layers see it through their inputs).

#include "shad/graph.hpp"
#include "shad/matrix.hpp"

namespace shad {

enum class NormMode { train, eval_source, eval_batch, eval_iabn };

const char* norm_mode_name(NormMode m);

struct NormLayer {
    int width = 0;
    Matrix running_mean;        // 1 x width
    Matrix running_var;         // 1 x width, entries > 0
    double momentum_stats = 0.1; // train-mode EMA weight of the new batch
    double alpha_shrink = 4.0;   // soft-shrinkage width for eval_iabn
    double m_iabn = 0.01;        // eval_iabn running-stat EMA momentum

    explicit NormLayer(int w)
        : width(w), running_mean(1, w), running_var(1, w, 1.0) {}
    NormLayer() = default;
};

// Variance floor applied before any division by a standard deviation.
constexpr double kVarFloor = 1e-8;

// Soft shrinkage: sign(x) * max(|x| - lambda, 0).
double soft_shrink(double x, double lambda);

// Standardizes x per the mode and applies the gamma/beta affine. Mutates
// layer running stats in train and eval_iabn modes unless update_running is
// false. Throws on n < 2 whenever batch statistics are required.
Node normalize(Graph& g, Node x, NormLayer& layer, Param& gamma, Param& beta, NormMode mode,
               bool update_running = true);

} // namespace shad
