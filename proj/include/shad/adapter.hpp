#pragma once

// The label shift adapter: a frozen classifier is conditioned on a scalar
// summary of a label distribution, m^T pi, and two FC-ReLU-FC branches emit
// head corrections — branch A the feature affine (gamma_h, beta_h), branch B
// the weight/bias deltas (dW, db). Final layers start at zero and gamma_h is
// emitted as 1 + raw, so an untrained adapter is exactly neutral.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "shad/label_distribution.hpp"
#include "shad/network.hpp"
#include "shad/param_store.hpp"

namespace shad {

// Fixed class-wise coefficients in [-1, 1], increasing with rarity rank:
// the most frequent training class maps to -1, the rarest to +1. m^T u = 0
// for any C by symmetry of the rank grid.
class MappingVector {
public:
    static MappingVector from_source_distribution(const LabelDistribution& pi_s);

    double map(const LabelDistribution& pi) const;
    const Matrix& values() const { return m_; }

private:
    explicit MappingVector(Matrix m) : m_(std::move(m)) {}
    Matrix m_;
};

struct AdapterConfig {
    int hidden = 100;
    // Component mask over {gamma_h, beta_h, dW, db}; masked-off components
    // come out neutral.
    bool use_gamma = true;
    bool use_beta = true;
    bool use_delta_w = true;
    bool use_delta_b = true;

    std::string mask_label() const;
    static AdapterConfig with_mask(bool g, bool b, bool w, bool d, int hidden = 100);
};

class Adapter {
public:
    Adapter(int feature_dim, int num_classes, AdapterConfig cfg, uint64_t init_seed);

    const AdapterConfig& config() const { return cfg_; }
    int feature_dim() const { return d_; }
    int num_classes() const { return c_; }
    ParamStore& params() { return params_; }
    const ParamStore& params() const { return params_; }

    // Tape-recorded forward for training; gradients flow to the adapter
    // parameters through whatever consumes the corrections.
    HeadCorrection forward_nodes(Graph& g, double scalar_input) const;

    // Value-level forward for inference.
    AdapterOutput forward(double scalar_input) const;

    // Closed-form reported parameter count: 2*(h + h*2d) for branch A plus
    // (h + h*(dC + C)) for branch B.
    long long reported_param_count() const;
    // Per-query multiply-accumulates of the two branches.
    long long forward_macs() const;

    void save(const std::string& path) const;
    static Adapter load(int feature_dim, int num_classes, AdapterConfig cfg,
                        const std::string& path);

private:
    int d_ = 0;
    int c_ = 0;
    AdapterConfig cfg_;
    ParamStore params_;
};

struct AdapterTrainSchedule {
    int iterations = 4000;
    int batch_size = 128;
    double lr = 1e-3;
    double momentum = 0.9;
    // tau paired with the sampled distribution, ordered (pi_s, u, pi_s reversed).
    std::array<double, 3> tau = {0.0, 1.0, 2.0};
    uint64_t seed = 0;
};

struct AdapterTrainReport {
    // Final loss evaluated per conditioning branch, ordered (pi_s, u, reversed).
    std::array<double, 3> final_loss{};
    int iterations = 0;
};

// Supplementary-algorithm training loop: per iteration sample a mini-batch
// and one (pi, tau) pair from {(pi_s, tau0), (u, tau1), (rev pi_s, tau2)},
// then take one SGD step on the adapter parameters only. The model must be
// in the adapter_train stage (fully frozen).
AdapterTrainReport train_adapter(Adapter& adapter, Model& model, const Matrix& train_x,
                                 const std::vector<int>& train_y, const LabelDistribution& pi_s,
                                 const AdapterTrainSchedule& schedule);

} // namespace shad
