#include "shad/tta.hpp"

#include <cmath>
#include <stdexcept>

#include "shad/losses.hpp"

namespace shad {

TtaMethodSpec tta_method(const std::string& name) {
    TtaMethodSpec m;
    m.name = name;
    if (name == "source") {
        m.norm_mode = NormMode::eval_source;
        m.loss = TtaLoss::none;
    } else if (name == "bn_stats") {
        m.norm_mode = NormMode::eval_batch;
        m.loss = TtaLoss::none;
    } else if (name == "pseudo_label") {
        m.norm_mode = NormMode::eval_batch;
        m.loss = TtaLoss::pseudo_label;
    } else if (name == "tent") {
        m.norm_mode = NormMode::eval_batch;
        m.loss = TtaLoss::entropy;
    } else if (name == "tent_adapter" || name == "tent_adapter_oracle") {
        m.norm_mode = NormMode::eval_batch;
        m.loss = TtaLoss::entropy;
        m.use_adapter = true;
        m.oracle_prior = name == "tent_adapter_oracle";
    } else if (name == "iabn") {
        m.norm_mode = NormMode::eval_iabn;
        m.loss = TtaLoss::entropy;
    } else if (name == "iabn_adapter" || name == "iabn_adapter_oracle") {
        m.norm_mode = NormMode::eval_iabn;
        m.loss = TtaLoss::entropy;
        m.use_adapter = true;
        m.oracle_prior = name == "iabn_adapter_oracle";
    } else if (name == "logit_adjust") {
        m.norm_mode = NormMode::eval_iabn;
        m.loss = TtaLoss::entropy;
        m.posthoc_adjust = true;
    } else if (name == "im_loss") {
        m.norm_mode = NormMode::eval_iabn;
        m.loss = TtaLoss::info_max;
    } else {
        throw std::invalid_argument("unknown TTA method '" + name + "'");
    }
    return m;
}

std::vector<std::string> tta_method_names() {
    return {"source",      "bn_stats",     "pseudo_label",        "tent",
            "tent_adapter", "tent_adapter_oracle", "iabn",        "iabn_adapter",
            "iabn_adapter_oracle", "logit_adjust", "im_loss"};
}

namespace {

Node make_loss(Graph& g, Node logits, TtaLoss loss) {
    switch (loss) {
    case TtaLoss::entropy: return entropy_loss(g, logits);
    case TtaLoss::pseudo_label: return pseudo_label_loss(g, logits);
    case TtaLoss::info_max: return info_max_loss(g, logits);
    case TtaLoss::none: break;
    }
    throw std::logic_error("make_loss: method has no loss");
}

} // namespace

TtaStepResult tta_step(const TtaMethodSpec& method, Model& model, const Adapter* adapter,
                       const MappingVector* mapping, const LabelDistribution& pi_s,
                       TtaState& state, const Matrix& x, const TtaOptions& options,
                       const LabelDistribution* true_prior) {
    if (model.stage() != Stage::tta)
        throw std::logic_error("tta_step: model must be in the tta stage");

    // 1. Head corrections from the previous-step prior estimate (or the true
    //    prior for the oracle variants). The adapter is frozen; its output is
    //    a constant for this step's gradient.
    AdapterOutput corr =
        AdapterOutput::neutral(model.spec().feature_dim(), model.spec().num_classes);
    LabelDistribution prior_used = state.prior.distribution();
    if (method.use_adapter) {
        if (!adapter || !mapping)
            throw std::invalid_argument("tta_step: method '" + method.name +
                                        "' needs an adapter and mapping vector");
        if (method.oracle_prior) {
            if (!true_prior)
                throw std::invalid_argument("tta_step: oracle variant needs the true prior");
            prior_used = *true_prior;
        }
        corr = adapter->forward(mapping->map(prior_used));
    }

    // 2. Forward with the method's normalization regime.
    Graph g;
    Node h = model.forward_features(g, x, method.norm_mode, /*update_running=*/true);
    Node logits = model.forward_head(g, h, corr);

    // 3. One optimizer step on the trainable affine parameters.
    double loss_value = 0.0;
    if (method.loss != TtaLoss::none) {
        Node loss = make_loss(g, logits, method.loss);
        loss_value = loss.scalar();
        if (!std::isfinite(loss_value))
            throw std::runtime_error("tta_step: non-finite loss at t=" + std::to_string(state.t) +
                                     " with method '" + method.name + "'");
        model.params().zero_grads();
        g.backward(loss);
        state.optimizer.step(model.params());
    }

    // 4. Predictions: by default the logits the step was computed from;
    //    optionally a second forward after the update.
    TtaStepResult result;
    if (options.score_after_update && method.loss != TtaLoss::none) {
        Graph g2;
        Node h2 = model.forward_features(g2, x, method.norm_mode, /*update_running=*/false);
        result.scored_logits = model.forward_head(g2, h2, corr).value();
    } else {
        result.scored_logits = logits.value();
    }
    if (method.posthoc_adjust)
        result.scored_logits = posthoc_logit_adjust(result.scored_logits, prior_used, pi_s);
    result.probs = softmax_rows(result.scored_logits);
    result.loss = loss_value;

    // 5. The estimator sees what the method predicts with.
    state.prior.update(result.probs);
    state.t += 1;
    return result;
}

StreamMetrics run_stream(const TtaMethodSpec& method, Model& model, const Adapter* adapter,
                         const LabelDistribution& pi_s, const TargetStream& stream,
                         const TtaOptions& options, bool keep_batch_log) {
    const int c = model.spec().num_classes;
    TtaState state(c, options);
    std::optional<MappingVector> mapping;
    if (method.use_adapter) mapping.emplace(MappingVector::from_source_distribution(pi_s));

    StreamMetrics metrics;
    metrics.per_class_accuracy.assign(static_cast<size_t>(c), 0.0);
    std::vector<long long> class_total(static_cast<size_t>(c), 0);
    std::vector<long long> class_correct(static_cast<size_t>(c), 0);
    long long correct = 0, total = 0;

    const int n = stream.x.rows();
    for (int start = 0; start + 2 <= n; start += stream.batch_size) {
        const int bs = std::min(stream.batch_size, n - start);  // trailing chunk of 1 is skipped
        Matrix xb(bs, stream.x.cols());
        for (int i = 0; i < bs; ++i)
            for (int j = 0; j < stream.x.cols(); ++j) xb(i, j) = stream.x(start + i, j);

        TtaStepResult step = tta_step(method, model, adapter, mapping ? &*mapping : nullptr, pi_s,
                                      state, xb, options, &stream.true_prior);

        const std::vector<int> pred = argmax_rows(step.scored_logits);
        int batch_correct = 0;
        for (int i = 0; i < bs; ++i) {
            const int y = stream.y[static_cast<size_t>(start + i)];
            ++class_total[static_cast<size_t>(y)];
            if (pred[static_cast<size_t>(i)] == y) {
                ++class_correct[static_cast<size_t>(y)];
                ++batch_correct;
            }
        }
        correct += batch_correct;
        total += bs;
        if (keep_batch_log) {
            BatchLogRow row;
            row.t = state.t;
            row.batch_accuracy = static_cast<double>(batch_correct) / bs;
            row.loss = step.loss;
            row.prior_l1 = state.prior.distribution().l1_distance(stream.true_prior);
            metrics.batch_log.push_back(row);
        }
    }

    metrics.samples = static_cast<int>(total);
    metrics.accuracy = total > 0 ? static_cast<double>(correct) / total : 0.0;
    int seen_classes = 0;
    double macro = 0.0;
    for (int k = 0; k < c; ++k) {
        if (class_total[static_cast<size_t>(k)] > 0) {
            const double a = static_cast<double>(class_correct[static_cast<size_t>(k)]) /
                             class_total[static_cast<size_t>(k)];
            metrics.per_class_accuracy[static_cast<size_t>(k)] = a;
            macro += a;
            ++seen_classes;
        }
    }
    metrics.macro_accuracy = seen_classes > 0 ? macro / seen_classes : 0.0;
    metrics.final_y_hat = state.prior.y_hat();
    metrics.prior_l1 = state.prior.distribution().l1_distance(stream.true_prior);
    return metrics;
}

} // namespace shad
