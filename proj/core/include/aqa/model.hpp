#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "aqa/attention.hpp"
#include "aqa/heads.hpp"
#include "aqa/jfe.hpp"
#include "aqa/rng.hpp"

namespace aqa {

struct ModelConfig {
  DistillMode mode = DistillMode::dnla_delta_emb;
  int clip_len = 16;
  JfeConfig jfe;
  int embed_dim = 0;  // 0 -> feature channels / 2
  double quantile_q = 0.25;
  int vfd_kernel = 200;
  int vfd_stride = 100;
  int mlp_hidden = 64;

  int feature_channels() const { return jfe.t2_out; }
  int encoded_frames() const { return jfe_encoded_frames(clip_len); }
  int positions() const { return kClipCount * encoded_frames() * kNumJoints; }
  int effective_embed_dim() const {
    return embed_dim > 0 ? embed_dim : std::max(1, feature_channels() / 2);
  }
};

struct AttentionParams {
  NlaParams nla;
  MotionBranchParams motion;
  DeltaHeads delta;
};

struct ParamRef {
  std::string name;
  Tensor* tensor;
};

// All learnable state for one configured pipeline, the per-graph parameter
// binding, and the forward builder. Parameter order is fixed and shared by
// the optimizer, the checkpoints and the gradient audit.
class Model {
 public:
  explicit Model(ModelConfig cfg);

  // Training init: scaled-uniform weights, zero gates/output projections/
  // biases so every attention block starts as identity + residual.
  void init(SeededRng& rng);
  // Gradient-audit init: every tensor uniform in [-half_range, half_range],
  // so no parameter group sits at a zero-gradient saddle by construction.
  void init_uniform(SeededRng& rng, double half_range);

  std::vector<ParamRef> params();
  std::vector<const Tensor*> param_values() const;

  struct Bound {
    BoundJfe jfe;
    BoundAttention att;
    BoundMlp mlp;
    std::vector<NodeId> ids;  // parallel to params()
  };

  Bound bind(Graph& g) const;
  PredictionNodes forward(Graph& g, const Bound& b, const Tensor& clips) const;
  NodeId forward_features(Graph& g, const Bound& b, const Tensor& clips) const;

  const ModelConfig& config() const { return cfg_; }
  const AdjacencyGraph& adjacency() const { return adj_; }
  const VfdConfig& vfd() const { return vfd_; }
  int feature_length() const { return distill_output_length(cfg_.feature_channels(), vfd_); }

  JfeParams jfe;
  AttentionParams att;
  MlpParams mlp;

 private:
  ModelConfig cfg_;
  AdjacencyGraph adj_;
  VfdConfig vfd_;
};

}  // namespace aqa
