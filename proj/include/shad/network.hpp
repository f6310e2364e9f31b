#pragma once

// The classifier: feature extractor (Linear -> Norm -> ReLU blocks) plus a
// linear head, with the correction-modulated head forward
//
//   y = (gamma_h h + beta_h) (W + dW) + (b + db)
//
// and parameter-group partitioning for the three pipeline stages.

#include <cstdint>
#include <string>
#include <vector>

#include "shad/graph.hpp"
#include "shad/normalization.hpp"
#include "shad/param_store.hpp"
#include "shad/rng.hpp"

namespace shad {

struct NetworkSpec {
    int input_dim = 16;
    std::vector<int> hidden_dims = {64, 64};
    int num_classes = 10;
    // Per-block normalization: "bn" or "none", comma-separated; a single
    // entry broadcasts to every block. The default leaves the top block
    // unnormalized so the features feeding the head are not re-centered
    // per batch.
    std::string norm_flavor = "bn,none";
    int freeze_top = 1;  // hidden blocks whose affine stays frozen in tta stage

    int feature_dim() const { return hidden_dims.empty() ? input_dim : hidden_dims.back(); }
    int num_blocks() const { return static_cast<int>(hidden_dims.size()); }
    // True when block i carries a normalization layer.
    bool block_normalized(int i) const;
    void validate() const;
};

// The generated head corrections. The neutral element leaves the head
// untouched: gamma_h = 1, beta_h = 0, dW = 0, db = 0.
struct AdapterOutput {
    Matrix gamma_h;  // 1 x d
    Matrix beta_h;   // 1 x d
    Matrix delta_w;  // d x C
    Matrix delta_b;  // 1 x C

    static AdapterOutput neutral(int feature_dim, int num_classes);
    bool all_finite() const;
};

// Same corrections as tape nodes, for when gradients must flow through them.
struct HeadCorrection {
    Node gamma_h, beta_h, delta_w, delta_b;
};

class Model {
public:
    Model(NetworkSpec spec, uint64_t init_seed);

    const NetworkSpec& spec() const { return spec_; }
    ParamStore& params() { return params_; }
    const ParamStore& params() const { return params_; }
    std::vector<NormLayer>& norm_layers() { return norm_layers_; }
    Stage stage() const { return stage_; }

    // x: n x input_dim -> features n x d. Records the graph; running stats
    // update per mode unless update_running is false.
    Node forward_features(Graph& g, const Matrix& x, NormMode mode, bool update_running = true);

    Node forward_head(Graph& g, Node h, const HeadCorrection& corr);
    Node forward_head(Graph& g, Node h, const AdapterOutput& corr);

    // pretrain: everything trainable. adapter_train: everything frozen.
    // tta: only normalization affine of the blocks below the top freeze_top.
    void set_stage(Stage stage);

    // Hash over parameter values; optionally excluding normalization affine
    // entries (the only ones a TTA run may legitimately change).
    unsigned long long param_hash(bool exclude_norm_affine = false) const;

    void save(const std::string& path) const;
    static Model load(const NetworkSpec& spec, const std::string& path);

    // Analytic per-sample multiply-accumulate count of the linear layers.
    long long forward_macs() const;

    static bool is_norm_affine(const std::string& name);

private:
    NetworkSpec spec_;
    ParamStore params_;
    std::vector<NormLayer> norm_layers_;
    Stage stage_ = Stage::pretrain;
};

} // namespace shad
