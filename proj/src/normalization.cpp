#include "shad/normalization.hpp"

#include <cmath>
#include <stdexcept>

namespace shad {

const char* norm_mode_name(NormMode m) {
    switch (m) {
    case NormMode::train: return "train";
    case NormMode::eval_source: return "eval_source";
    case NormMode::eval_batch: return "eval_batch";
    case NormMode::eval_iabn: return "eval_iabn";
    }
    return "?";
}

double soft_shrink(double x, double lambda) {
    if (x > lambda) return x - lambda;
    if (x < -lambda) return x + lambda;
    return 0.0;
}

namespace {

struct BatchStats {
    Matrix mean;          // 1 x d
    Matrix var_biased;    // 1 x d  (1/n)
    Matrix var_unbiased;  // 1 x d  (1/(n-1))
};

BatchStats batch_stats(const Matrix& x) {
    const int n = x.rows();
    const int d = x.cols();
    BatchStats s{Matrix(1, d), Matrix(1, d), Matrix(1, d)};
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) s.mean.at_flat(j) += x(i, j);
    for (int j = 0; j < d; ++j) s.mean.at_flat(j) /= n;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) {
            const double c = x(i, j) - s.mean.at_flat(j);
            s.var_biased.at_flat(j) += c * c;
        }
    for (int j = 0; j < d; ++j) {
        s.var_unbiased.at_flat(j) = s.var_biased.at_flat(j) / (n - 1);
        s.var_biased.at_flat(j) /= n;
    }
    return s;
}

void ema_update(Matrix& running, const Matrix& batch, double momentum) {
    for (int j = 0; j < running.size(); ++j)
        running.at_flat(j) = (1.0 - momentum) * running.at_flat(j) + momentum * batch.at_flat(j);
}

double inv_std_of(double var) { return 1.0 / std::sqrt(var > kVarFloor ? var : kVarFloor); }

} // namespace

Node normalize(Graph& g, Node x, NormLayer& layer, Param& gamma, Param& beta, NormMode mode,
               bool update_running) {
    const Matrix& xv = x.value();
    const int d = xv.cols();
    if (d != layer.width)
        throw_shape_error("normalize: input width " + std::to_string(d) + " vs layer width " +
                          std::to_string(layer.width));
    const int n = xv.rows();
    const bool needs_batch = mode != NormMode::eval_source;
    if (needs_batch && n < 2)
        throw std::invalid_argument("normalize: degenerate batch of " + std::to_string(n) +
                                    " sample(s) with batch statistics (" +
                                    std::string(norm_mode_name(mode)) + ")");

    StandardizeSpec spec;
    spec.center = Matrix(1, d);
    spec.inv_std = Matrix(1, d);
    spec.batch_mean = Matrix(1, d);
    spec.mean_active = Matrix(1, d);
    spec.var_active = Matrix(1, d);

    switch (mode) {
    case NormMode::train:
    case NormMode::eval_batch: {
        BatchStats s = batch_stats(xv);
        spec.center = s.mean;
        spec.batch_mean = s.mean;
        for (int j = 0; j < d; ++j) spec.inv_std.at_flat(j) = inv_std_of(s.var_biased.at_flat(j));
        spec.mean_active.fill(1.0);
        spec.var_active.fill(1.0);
        if (mode == NormMode::train && update_running) {
            ema_update(layer.running_mean, s.mean, layer.momentum_stats);
            ema_update(layer.running_var, s.var_unbiased, layer.momentum_stats);
        }
        break;
    }
    case NormMode::eval_source: {
        spec.center = layer.running_mean;
        spec.batch_mean = layer.running_mean;
        for (int j = 0; j < d; ++j)
            spec.inv_std.at_flat(j) = inv_std_of(layer.running_var.at_flat(j));
        break;
    }
    case NormMode::eval_iabn: {
        BatchStats s = batch_stats(xv);
        spec.batch_mean = s.mean;
        const double a = layer.alpha_shrink;
        for (int j = 0; j < d; ++j) {
            const double mu_r = layer.running_mean.at_flat(j);
            const double s2 = std::max(layer.running_var.at_flat(j), kVarFloor);
            const double lambda_mu = a * std::sqrt(s2 / n);
            const double lambda_var = a * std::sqrt(2.0 * s2 * s2 / (n - 1));
            const double dmu = s.mean.at_flat(j) - mu_r;
            const double dvar = s.var_biased.at_flat(j) - s2;
            spec.center.at_flat(j) = mu_r + soft_shrink(dmu, lambda_mu);
            spec.inv_std.at_flat(j) = inv_std_of(s2 + soft_shrink(dvar, lambda_var));
            spec.mean_active.at_flat(j) = std::fabs(dmu) > lambda_mu ? 1.0 : 0.0;
            spec.var_active.at_flat(j) = std::fabs(dvar) > lambda_var ? 1.0 : 0.0;
        }
        if (update_running) {
            ema_update(layer.running_mean, s.mean, layer.m_iabn);
            ema_update(layer.running_var, s.var_unbiased, layer.m_iabn);
        }
        break;
    }
    }

    Node xhat = g.standardize(x, std::move(spec));
    return g.rowwise_affine(xhat, g.param(gamma), g.param(beta));
}

} // namespace shad
