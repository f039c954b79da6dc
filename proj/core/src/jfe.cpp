#include "aqa/jfe.hpp"

#include <fstream>

#include "binary_io.hpp"

namespace aqa {

JfeParams make_jfe_params(const JfeConfig& cfg) {
  if (cfg.kernel_t % 2 == 0) {
    throw ConfigError("jfe: temporal kernel must be odd, got " + std::to_string(cfg.kernel_t));
  }
  JfeParams p;
  p.gcn.w = Tensor({cfg.in_channels, cfg.spatial_out});
  p.gcn.gate = Tensor({1});
  p.t1.depthwise = Tensor({cfg.spatial_out, cfg.kernel_t});
  p.t1.pointwise = Tensor({cfg.spatial_out, cfg.t1_out});
  p.t2.depthwise = Tensor({cfg.t1_out, cfg.kernel_t});
  p.t2.pointwise = Tensor({cfg.t1_out, cfg.t2_out});
  return p;
}

NodeId spatial_graph_conv(Graph& g, NodeId x, const AdjacencyGraph& adj, NodeId w, NodeId gate) {
  const Tensor& xv = g.value(x);
  if (xv.rank() != 3 || xv.dim(1) != kNumJoints) {
    throw ShapeError("spatial_graph_conv: expected [T,25,C], got " + xv.shape_str());
  }
  const int t = xv.dim(0);
  const int c_in = xv.dim(2);
  const Tensor& wv = g.value(w);
  if (wv.rank() != 2 || wv.dim(0) != c_in) {
    throw ShapeError("spatial_graph_conv: weight " + wv.shape_str() + " does not match input " +
                     xv.shape_str());
  }
  const int c_out = wv.dim(1);

  NodeId xw = g.reshape(g.matmul(g.reshape(x, {t * kNumJoints, c_in}), w),
                        {t, kNumJoints, c_out});

  // constant per-frame copy of the normalized adjacency
  Tensor a_tiled({t, kNumJoints, kNumJoints});
  for (int f = 0; f < t; ++f) {
    std::copy(adj.a_norm.data(), adj.a_norm.data() + adj.a_norm.numel(),
              a_tiled.data() + static_cast<std::int64_t>(f) * kNumJoints * kNumJoints);
  }
  NodeId propagated = g.bmm(g.input(std::move(a_tiled)), xw);
  NodeId gated = g.add(propagated, g.scale(xw, gate));
  return g.relu(gated);
}

NodeId separable_temporal_conv(Graph& g, NodeId x, NodeId depthwise, NodeId pointwise,
                               int stride) {
  NodeId y = g.depthwise_conv1d(x, depthwise, stride);
  NodeId z = g.pointwise_conv(y, pointwise);
  return g.relu(z);
}

int jfe_encoded_frames(int clip_len) { return (clip_len - 1) / 2 + 1; }

FeatureNode jfe_forward(Graph& g, const Tensor& clips, const BoundJfe& p,
                        const AdjacencyGraph& adj) {
  if (clips.rank() != 4 || clips.dim(0) != kClipCount || clips.dim(2) != kNumJoints) {
    throw ShapeError("jfe_forward: expected [7,T,25,C] clips, got " + clips.shape_str());
  }
  const int t = clips.dim(1);
  const int c_in = clips.dim(3);
  const std::int64_t clip_sz = static_cast<std::int64_t>(t) * kNumJoints * c_in;

  std::vector<NodeId> parts;
  int enc_frames = 0;
  int enc_channels = 0;
  for (int c = 0; c < kClipCount; ++c) {
    Tensor clip({t, kNumJoints, c_in});
    std::copy(clips.data() + c * clip_sz, clips.data() + (c + 1) * clip_sz, clip.data());
    NodeId h = spatial_graph_conv(g, g.input(std::move(clip)), adj, p.w, p.gate);
    h = separable_temporal_conv(g, h, p.dw1, p.pw1, 1);
    h = separable_temporal_conv(g, h, p.dw2, p.pw2, 2);
    const Tensor& hv = g.value(h);
    enc_frames = hv.dim(0);
    enc_channels = hv.dim(2);
    parts.push_back(g.reshape(h, {enc_frames * kNumJoints, enc_channels}));
  }
  FeatureNode out;
  out.node = g.concat(parts, 0);
  out.layout = {kClipCount, enc_frames, kNumJoints, enc_channels};
  return out;
}

namespace {
constexpr char kFeatMagic[] = "AQAFEAT1";
}

void write_appearance_features(const std::filesystem::path& path, const Tensor& features) {
  if (features.rank() != 3) {
    throw ShapeError("appearance features must be [clips,frames,channels], got " +
                     features.shape_str());
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path.string());
  os.write(kFeatMagic, 8);
  detail::put_u32(os, static_cast<std::uint32_t>(features.dim(0)));
  detail::put_u32(os, static_cast<std::uint32_t>(features.dim(1)));
  detail::put_u32(os, static_cast<std::uint32_t>(features.dim(2)));
  for (std::int64_t i = 0; i < features.numel(); ++i) {
    detail::put_f32(os, static_cast<float>(features[i]));
  }
  if (!os) throw IoError("write failed: " + path.string());
}

FeatureMatrix load_appearance_features(const std::filesystem::path& path, int expected_clips) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open: " + path.string());
  const std::string what = "feature file " + path.string();
  detail::expect_magic(is, kFeatMagic, what);
  const int clips = static_cast<int>(detail::get_u32(is, what));
  const int frames = static_cast<int>(detail::get_u32(is, what));
  const int channels = static_cast<int>(detail::get_u32(is, what));
  if (clips != expected_clips) {
    throw SchemaError(what + ": expected " + std::to_string(expected_clips) + " clips, got " +
                      std::to_string(clips));
  }
  if (frames < 1 || channels < 1) {
    throw SchemaError(what + ": nonpositive frames/channels in header");
  }
  FeatureMatrix out;
  out.layout = {clips, frames, 1, channels};
  out.features = Tensor({clips * frames, channels});
  for (std::int64_t i = 0; i < out.features.numel(); ++i) {
    out.features[i] = static_cast<double>(detail::get_f32(is, what));
  }
  return out;
}

}  // namespace aqa
