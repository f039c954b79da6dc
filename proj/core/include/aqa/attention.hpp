#pragma once

#include <string>
#include <string_view>

#include "aqa/jfe.hpp"

namespace aqa {

enum class Pairwise { embedded_gaussian, concat };

enum class DistillMode {
  vfd,
  nla_emb,
  nla_cat,
  dnla_mu_emb,
  dnla_mu_cat,
  dnla_delta_emb,
};

DistillMode parse_distill_mode(std::string_view name);
std::string_view distill_mode_name(DistillMode mode);
bool mode_uses_nla(DistillMode mode);
bool mode_uses_motion(DistillMode mode);
bool mode_uses_delta(DistillMode mode);
Pairwise mode_pairwise(DistillMode mode);

// Non-local block parameters. theta/phi/g embed positions into a
// bottleneck of width C_e <= C; w_out projects back and the input is added
// as a residual. w_cat is only allocated for the concat pairwise function.
struct NlaParams {
  Tensor w_theta;  // [C, C_e]
  Tensor w_phi;    // [C, C_e]
  Tensor w_g;      // [C, C_e]
  Tensor w_out;    // [C_e, C]
  Tensor w_cat;    // [2*C_e, 1] (concat variant)
  Pairwise pairwise = Pairwise::embedded_gaussian;
};

NlaParams make_nla_params(int channels, int embed_dim, Pairwise pairwise);

// Motion branch: consecutive-frame differences of the g-embedding, lower
// quantile masked out, then an encoding layer.
struct MotionBranchParams {
  double q = 0.25;
  Tensor w_m;  // [C_e, C_e]
};

// Axis-factored attention: one head across the 25 joints within each frame,
// one across frames within each joint trajectory. Independent parameters.
struct DeltaHeads {
  NlaParams spatial;
  NlaParams temporal;
};

// Overlapping average pooling (stride < kernel) plus a global position max,
// concatenated per channel into a vector of length C*(out_len+1).
struct VfdConfig {
  int kernel = 0;
  int stride = 0;
  int out_len = 0;
};

VfdConfig make_vfd_config(int kernel, int stride, int positions);
int distill_output_length(int channels, const VfdConfig& cfg);

struct BoundNla {
  NodeId w_theta = -1, w_phi = -1, w_g = -1, w_out = -1, w_cat = -1;
  Pairwise pairwise = Pairwise::embedded_gaussian;
};

struct BoundMotion {
  NodeId w_m = -1;
  double q = 0.25;
};

struct BoundDelta {
  BoundNla spatial;
  BoundNla temporal;
};

struct BoundAttention {
  BoundNla nla;
  BoundMotion motion;
  BoundDelta delta;
};

// y_i = (1/C(x)) sum_j f(x_i, x_j) g(x_j) over all positions, then
// z = y W_out + x. Embedded Gaussian f yields softmax attention rows;
// the concat variant uses f = relu(w_cat^T [theta_i; phi_j]) with C(x) = N.
FeatureNode nla_forward(Graph& g, const FeatureNode& x, const BoundNla& p);

// Non-local trunk plus a motion branch fused additively into the embedding
// before the output projection (an embedded residual): the branch takes the
// g-embedding, differences consecutive frames, masks the lower quantile,
// encodes, mean-pools over time per (clip, joint) and broadcasts back.
FeatureNode dnla_mu_forward(Graph& g, const FeatureNode& x, const BoundNla& p,
                            const BoundMotion& m);

// Spatial head attends across joints within each frame, temporal head
// across frames within each joint trajectory; both deltas are added to x.
FeatureNode dnla_delta_forward(Graph& g, const FeatureNode& x, const BoundDelta& heads);

// Sparse vector of length C*(out_len+1): overlapping average pooling along
// positions plus the global per-channel max, grouped per channel.
NodeId vfd_forward(Graph& g, NodeId x, const VfdConfig& cfg);

// Applies the mode's attention block (if any), then vfd_forward. Output
// length depends only on (channels, cfg), never on the input length.
NodeId distill(Graph& g, const FeatureNode& x, DistillMode mode, const BoundAttention& att,
               const VfdConfig& cfg);

}  // namespace aqa
