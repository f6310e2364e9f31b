#pragma once

// Training and adaptation objectives: cross-entropy, the generalized
// logit-adjusted loss (balanced softmax at tau = 1), entropy minimization,
// and the comparison baselines (information maximization, post-hoc logit
// adjustment, hard pseudo labels).

#include <vector>

#include "shad/graph.hpp"
#include "shad/label_distribution.hpp"

namespace shad {

// Argmax per row; ties break to the lowest class index.
std::vector<int> argmax_rows(const Matrix& m);

// Row-wise softmax of a plain matrix (no tape).
Matrix softmax_rows(const Matrix& logits);

// Mean over the batch of -log softmax(logits)[label].
Node cross_entropy(Graph& g, Node logits, const std::vector<int>& labels);

// Cross-entropy on logits + tau * log(pi_s): a controlled bias toward the
// head (small tau) or tail (large tau) of the training distribution.
// tau = 0 is plain cross-entropy, tau = 1 is balanced softmax.
Node generalized_logit_adjusted(Graph& g, Node logits, const std::vector<int>& labels,
                                const LabelDistribution& pi_s, double tau);

// Mean Shannon entropy (natural log) of the row-wise softmax.
Node entropy_loss(Graph& g, Node logits);

// entropy_loss minus the entropy of the batch-averaged prediction; pushing
// it down sharpens individual rows while keeping the batch diverse.
Node info_max_loss(Graph& g, Node logits);

// Inference-time transform: logits + log(target_prior) - log(pi_s).
Matrix posthoc_logit_adjust(const Matrix& logits, const LabelDistribution& target_prior,
                            const LabelDistribution& pi_s);

// Cross-entropy against the row argmax held constant.
Node pseudo_label_loss(Graph& g, Node logits);

} // namespace shad
