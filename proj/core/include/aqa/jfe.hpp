#pragma once

#include <filesystem>

#include "aqa/graph.hpp"
#include "aqa/skeleton.hpp"

namespace aqa {

// Position layout of an encoded feature matrix: positions are ordered
// clip-major, then time, then joint.
struct FeatureLayout {
  int clips = 1;
  int frames = 1;
  int joints = 1;
  int channels = 0;
  int positions() const { return clips * frames * joints; }
};

// Value form (file loaders) and graph form (model builders).
struct FeatureMatrix {
  Tensor features;  // [positions, channels]
  FeatureLayout layout;
};

struct FeatureNode {
  NodeId node = -1;
  FeatureLayout layout;
};

// Spatial graph convolution weights plus the learnable self-loop gate g:
// propagation matrix is A_norm + g*I, g starts at 0.
struct GcnParams {
  Tensor w;     // [C_in, C_out]
  Tensor gate;  // [1]
};

// Separable temporal stage: per-channel temporal kernel, then 1x1 channel
// mixing. Kernel width must be odd so same-length output falls out of
// symmetric padding.
struct SepTemporalParams {
  Tensor depthwise;  // [C, k_t]
  Tensor pointwise;  // [C, C_out]
};

struct JfeParams {
  GcnParams gcn;
  SepTemporalParams t1;
  SepTemporalParams t2;  // applied with temporal stride 2
};

struct JfeConfig {
  int in_channels = 2;
  int spatial_out = 32;
  int t1_out = 32;
  int t2_out = 64;
  int kernel_t = 9;
};

JfeParams make_jfe_params(const JfeConfig& cfg);

struct BoundJfe {
  NodeId w = -1, gate = -1, dw1 = -1, pw1 = -1, dw2 = -1, pw2 = -1;
};

// H = relu((A_norm + g*I) X W) applied per frame; x: [T,25,C_in].
NodeId spatial_graph_conv(Graph& g, NodeId x, const AdjacencyGraph& adj, NodeId w, NodeId gate);

// depthwise temporal conv (symmetric zero padding), pointwise mixing, relu.
NodeId separable_temporal_conv(Graph& g, NodeId x, NodeId depthwise, NodeId pointwise,
                               int stride);

// Runs every clip through the GCN and both temporal stages (the second with
// stride 2) and concatenates clip outputs along the position axis.
FeatureNode jfe_forward(Graph& g, const Tensor& clips, const BoundJfe& p,
                        const AdjacencyGraph& adj);

int jfe_encoded_frames(int clip_len);

// Precomputed appearance features, concatenated along time in clip order.
// Container: magic "AQAFEAT1", u32 clips/frames/channels, f32 payload
// row-major [clip][frame][channel], little-endian.
FeatureMatrix load_appearance_features(const std::filesystem::path& path,
                                       int expected_clips = kClipCount);
void write_appearance_features(const std::filesystem::path& path, const Tensor& features);

}  // namespace aqa
