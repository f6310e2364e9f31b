#pragma once

// The online adaptation loop: a method registry (source, bn_stats,
// pseudo_label, tent, iabn, the +adapter variants, logit_adjust, im_loss),
// one gradient step per batch on the normalization affine parameters, and
// prior-conditioned head corrections when an adapter is attached.

#include <optional>
#include <string>
#include <vector>

#include "shad/adapter.hpp"
#include "shad/estimator.hpp"
#include "shad/network.hpp"
#include "shad/optimizer.hpp"
#include "shad/shiftbench.hpp"

namespace shad {

enum class TtaLoss { none, entropy, pseudo_label, info_max };

struct TtaMethodSpec {
    std::string name;
    NormMode norm_mode = NormMode::eval_source;
    TtaLoss loss = TtaLoss::none;
    bool use_adapter = false;
    bool posthoc_adjust = false;
    bool oracle_prior = false;  // feed the true target prior instead of the estimate
};

// Throws on unknown names. Known: source, bn_stats, pseudo_label, tent,
// tent_adapter, tent_adapter_oracle, iabn, iabn_adapter, iabn_adapter_oracle,
// logit_adjust, im_loss.
TtaMethodSpec tta_method(const std::string& name);
std::vector<std::string> tta_method_names();

struct TtaOptions {
    double lr = 1e-3;
    double momentum = 0.9;
    double estimator_alpha = 0.1;
    int estimator_top_k = 0;
    // Score the logits recomputed after the gradient step instead of the
    // ones the step was taken from.
    bool score_after_update = false;
};

struct TtaState {
    int t = 0;
    PriorEstimate prior;
    SgdOptimizer optimizer;

    TtaState(int num_classes, const TtaOptions& o)
        : prior(num_classes, o.estimator_alpha, o.estimator_top_k),
          optimizer(o.lr, o.momentum, 0.0) {}
};

struct TtaStepResult {
    Matrix scored_logits;   // what predictions are read from (post adjustment)
    Matrix probs;           // softmax of scored_logits
    double loss = 0.0;      // 0 when the method has no loss
};

// One adaptation step on batch x. Labels are never read. The adapter (when
// attached) is queried with the previous-step prior estimate and its output
// treated as a constant; the estimator is updated last.
TtaStepResult tta_step(const TtaMethodSpec& method, Model& model, const Adapter* adapter,
                       const MappingVector* mapping, const LabelDistribution& pi_s,
                       TtaState& state, const Matrix& x, const TtaOptions& options,
                       const LabelDistribution* true_prior = nullptr);

struct BatchLogRow {
    int t;
    double batch_accuracy;
    double loss;
    double prior_l1;
};

struct StreamMetrics {
    int samples = 0;
    double accuracy = 0.0;
    double macro_accuracy = 0.0;
    std::vector<double> per_class_accuracy;
    Matrix final_y_hat;
    double prior_l1 = 0.0;  // || final estimate - true prior ||_1
    std::vector<BatchLogRow> batch_log;
};

// Sequential pass over the stream in batch_size chunks; a trailing chunk of
// fewer than 2 samples is skipped. Hidden labels are used only for scoring.
StreamMetrics run_stream(const TtaMethodSpec& method, Model& model, const Adapter* adapter,
                         const LabelDistribution& pi_s, const TargetStream& stream,
                         const TtaOptions& options, bool keep_batch_log = false);

} // namespace shad
