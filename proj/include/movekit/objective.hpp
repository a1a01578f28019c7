#pragma once

#include <vector>

#include "movekit/head.hpp"

namespace movekit {

// Minibatch pairs for the contrastive term. Indices address rows of the
// batch; same_class carries y_ij.
struct PairBatch {
  struct Pair {
    std::size_t i = 0;
    std::size_t j = 0;
    bool same_class = false;
  };
  std::vector<Pair> pairs;
};

struct LossConfig {
  double margin = 0.5;        // contrastive margin in [0, 1)
  double pair_weight = 1.0;   // weight on the summed pair losses, >= 0
  double weight_decay = 0.0;  // L2 coefficient on weights (biases excluded)
};

struct Batch {
  // One row per sample, each of head dim; labels as class indices 0..3.
  std::vector<std::vector<double>> x;
  std::vector<int> y;
};

// Same-class: 1 - cos(a, b). Different-class: max(0, cos(a, b) - margin).
double cosine_pair_loss(const std::vector<double>& a, const std::vector<double>& b,
                        bool same_class, double margin);

// max_k (1 - [k == y] + f_k - f_y); always >= 0 since the k == y term is 0.
double multiclass_hinge(const std::vector<double>& logits, int y);

struct LossBreakdown {
  double total = 0.0;
  double reg = 0.0;          // weight_decay * sum of squared weights
  double hinge = 0.0;        // summed over the batch
  double contrastive = 0.0;  // pair_weight * summed pair losses
};

LossBreakdown total_loss(const HeadParams& params, const Batch& batch,
                         const PairBatch& pairs, const LossConfig& cfg);

// Exact analytic gradient of total_loss. Subgradient conventions:
// relu'(0) = 0, hinge argmax ties go to the lowest class index, and the
// contrastive hinge contributes 0 exactly at cos == margin.
LossBreakdown grad_total_loss(const HeadParams& params, const Batch& batch,
                              const PairBatch& pairs, const LossConfig& cfg,
                              HeadParams& grads);

}  // namespace movekit
