#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "aqa/graph.hpp"
#include "aqa/skeleton.hpp"

namespace aqa {

// Two-layer relu trunk on the sparse feature vector, then a sigmoid-bounded
// score head and a 2-logit gender head.
struct MlpParams {
  Tensor w1, b1;              // [D,H], [H]
  Tensor w2, b2;              // [H,H], [H]
  Tensor score_w, score_b;    // [H,1], [1]
  Tensor gender_w, gender_b;  // [H,2], [2]
};

MlpParams make_mlp_params(int in_len, int hidden);

struct BoundMlp {
  NodeId w1 = -1, b1 = -1, w2 = -1, b2 = -1;
  NodeId score_w = -1, score_b = -1, gender_w = -1, gender_b = -1;
};

struct PredictionNodes {
  NodeId score = -1;          // [1,1], in (0,1)
  NodeId gender_logits = -1;  // [1,2]
};

struct Prediction {
  double score_norm = 0.5;
  std::array<double, 2> gender_logits{0.0, 0.0};
  int predicted_gender() const { return gender_logits[1] > gender_logits[0] ? 1 : 0; }
};

PredictionNodes mlp_forward(Graph& g, NodeId features, const BoundMlp& p);
Prediction read_prediction(const Graph& g, const PredictionNodes& nodes);

struct LossWeights {
  double w = 1.0;              // weight on the squared term in |e| + w*e^2
  double lambda_gender = 0.1;  // weight on the gender cross-entropy
  bool class_loss_enabled = true;
};

// |e| + w*e^2 with e = score - label, plus weighted two-class cross-entropy
// on the gender logits when enabled. label_norm01 must already be min-max
// normalized to [0,1].
NodeId total_loss(Graph& g, const PredictionNodes& pred, double label_norm01, Gender gender,
                  const LossWeights& lw);

// 1-based ranks with average ranks assigned to ties.
std::vector<double> average_ranks(const std::vector<double>& values);

// Spearman rank correlation (Pearson correlation of the rank vectors).
// Throws NumericError for fewer than 2 points or zero rank variance.
double spearman(const std::vector<double>& a, const std::vector<double>& b);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::int64_t t = 0;
};

void adam_init(AdamState& state, const std::vector<Tensor*>& params);

// Bias-corrected first/second-moment update. Shapes of params, grads and
// state must agree.
void adam_step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads,
               AdamState& state, const AdamConfig& cfg);

}  // namespace aqa
