#include "aqa/attention.hpp"

namespace aqa {

DistillMode parse_distill_mode(std::string_view name) {
  if (name == "vfd") return DistillMode::vfd;
  if (name == "nla_emb") return DistillMode::nla_emb;
  if (name == "nla_cat") return DistillMode::nla_cat;
  if (name == "dnla_mu_emb") return DistillMode::dnla_mu_emb;
  if (name == "dnla_mu_cat") return DistillMode::dnla_mu_cat;
  if (name == "dnla_delta_emb") return DistillMode::dnla_delta_emb;
  throw ConfigError("unknown distill mode '" + std::string(name) +
                    "' (expected vfd|nla_emb|nla_cat|dnla_mu_emb|dnla_mu_cat|dnla_delta_emb)");
}

std::string_view distill_mode_name(DistillMode mode) {
  switch (mode) {
    case DistillMode::vfd: return "vfd";
    case DistillMode::nla_emb: return "nla_emb";
    case DistillMode::nla_cat: return "nla_cat";
    case DistillMode::dnla_mu_emb: return "dnla_mu_emb";
    case DistillMode::dnla_mu_cat: return "dnla_mu_cat";
    case DistillMode::dnla_delta_emb: return "dnla_delta_emb";
  }
  throw ConfigError("invalid distill mode value");
}

bool mode_uses_nla(DistillMode mode) {
  return mode == DistillMode::nla_emb || mode == DistillMode::nla_cat ||
         mode == DistillMode::dnla_mu_emb || mode == DistillMode::dnla_mu_cat;
}

bool mode_uses_motion(DistillMode mode) {
  return mode == DistillMode::dnla_mu_emb || mode == DistillMode::dnla_mu_cat;
}

bool mode_uses_delta(DistillMode mode) { return mode == DistillMode::dnla_delta_emb; }

Pairwise mode_pairwise(DistillMode mode) {
  return (mode == DistillMode::nla_cat || mode == DistillMode::dnla_mu_cat)
             ? Pairwise::concat
             : Pairwise::embedded_gaussian;
}

NlaParams make_nla_params(int channels, int embed_dim, Pairwise pairwise) {
  if (embed_dim < 1 || embed_dim > channels) {
    throw ConfigError("nla: embed_dim " + std::to_string(embed_dim) +
                      " must be in [1, channels=" + std::to_string(channels) + "]");
  }
  NlaParams p;
  p.pairwise = pairwise;
  p.w_theta = Tensor({channels, embed_dim});
  p.w_phi = Tensor({channels, embed_dim});
  p.w_g = Tensor({channels, embed_dim});
  p.w_out = Tensor({embed_dim, channels});
  if (pairwise == Pairwise::concat) p.w_cat = Tensor({2 * embed_dim, 1});
  return p;
}

VfdConfig make_vfd_config(int kernel, int stride, int positions) {
  if (kernel < 2 || stride < 1 || stride >= kernel) {
    throw ConfigError("vfd: need 1 <= stride < kernel, got kernel " + std::to_string(kernel) +
                      ", stride " + std::to_string(stride));
  }
  if (kernel > positions) {
    throw ConfigError("vfd: kernel " + std::to_string(kernel) + " exceeds position count " +
                      std::to_string(positions));
  }
  VfdConfig cfg;
  cfg.kernel = kernel;
  cfg.stride = stride;
  cfg.out_len = (positions - kernel) / stride + 1;
  return cfg;
}

int distill_output_length(int channels, const VfdConfig& cfg) {
  return channels * (cfg.out_len + 1);
}

namespace {

// Embedding + attention over the row axis of a batched [B, n, C_e] view.
// Returns the pre-projection embedding y = att * g per position.
NodeId attention_rows(Graph& g, NodeId theta, NodeId phi, NodeId gee) {
  NodeId logits = g.bmm(theta, g.permute(phi, {0, 2, 1}));
  NodeId att = g.softmax(logits, 2);
  return g.bmm(att, gee);
}

}  // namespace

FeatureNode nla_forward(Graph& g, const FeatureNode& x, const BoundNla& p) {
  const Tensor& xv = g.value(x.node);
  if (xv.rank() != 2) {
    throw ShapeError("nla_forward: expected [N,C] features, got " + xv.shape_str());
  }
  const int n = xv.dim(0);
  NodeId theta = g.matmul(x.node, p.w_theta);
  NodeId phi = g.matmul(x.node, p.w_phi);
  NodeId gee = g.matmul(x.node, p.w_g);

  NodeId y;
  if (p.pairwise == Pairwise::embedded_gaussian) {
    NodeId logits = g.matmul(theta, g.permute(phi, {1, 0}));
    NodeId att = g.softmax(logits, 1);
    y = g.matmul(att, gee);
  } else {
    const int ce = g.value(p.w_theta).dim(1);
    // split w_cat into its theta and phi halves with constant selectors
    Tensor sel_a({ce, 2 * ce});
    Tensor sel_b({ce, 2 * ce});
    for (int i = 0; i < ce; ++i) {
      sel_a.at({i, i}) = 1.0;
      sel_b.at({i, ce + i}) = 1.0;
    }
    NodeId w_a = g.matmul(g.input(std::move(sel_a)), p.w_cat);  // [Ce,1]
    NodeId w_b = g.matmul(g.input(std::move(sel_b)), p.w_cat);
    NodeId a = g.matmul(theta, w_a);  // [N,1]
    NodeId b = g.matmul(phi, w_b);    // [N,1]
    NodeId ones_row = g.input(Tensor::full({1, n}, 1.0));
    NodeId ones_col = g.input(Tensor::full({n, 1}, 1.0));
    NodeId pair = g.relu(g.add(g.matmul(a, ones_row), g.matmul(ones_col, g.permute(b, {1, 0}))));
    y = g.cscale(g.matmul(pair, gee), 1.0 / static_cast<double>(n));
  }
  FeatureNode out;
  out.node = g.add(g.matmul(y, p.w_out), x.node);
  out.layout = x.layout;
  return out;
}

FeatureNode dnla_mu_forward(Graph& g, const FeatureNode& x, const BoundNla& p,
                            const BoundMotion& m) {
  const Tensor& xv = g.value(x.node);
  if (xv.rank() != 2 || xv.dim(0) != x.layout.positions()) {
    throw ShapeError("dnla_mu_forward: features " + xv.shape_str() +
                     " do not match the declared layout");
  }
  if (x.layout.frames < 2) {
    throw DegenerateInputError("dnla_mu_forward: motion branch needs at least 2 frames, got " +
                               std::to_string(x.layout.frames));
  }
  const int clips = x.layout.clips;
  const int frames = x.layout.frames;
  const int joints = x.layout.joints;
  const int ce = g.value(p.w_theta).dim(1);
  const int n = xv.dim(0);

  NodeId theta = g.matmul(x.node, p.w_theta);
  NodeId phi = g.matmul(x.node, p.w_phi);
  NodeId gee = g.matmul(x.node, p.w_g);

  // trunk: attention-weighted g-embedding
  NodeId y;
  if (p.pairwise == Pairwise::embedded_gaussian) {
    NodeId logits = g.matmul(theta, g.permute(phi, {1, 0}));
    NodeId att = g.softmax(logits, 1);
    y = g.matmul(att, gee);
  } else {
    Tensor sel_a({ce, 2 * ce});
    Tensor sel_b({ce, 2 * ce});
    for (int i = 0; i < ce; ++i) {
      sel_a.at({i, i}) = 1.0;
      sel_b.at({i, ce + i}) = 1.0;
    }
    NodeId w_a = g.matmul(g.input(std::move(sel_a)), p.w_cat);
    NodeId w_b = g.matmul(g.input(std::move(sel_b)), p.w_cat);
    NodeId a = g.matmul(theta, w_a);
    NodeId b = g.matmul(phi, w_b);
    NodeId ones_row = g.input(Tensor::full({1, n}, 1.0));
    NodeId ones_col = g.input(Tensor::full({n, 1}, 1.0));
    NodeId pair = g.relu(g.add(g.matmul(a, ones_row), g.matmul(ones_col, g.permute(b, {1, 0}))));
    y = g.cscale(g.matmul(pair, gee), 1.0 / static_cast<double>(n));
  }

  // motion branch on the g-embedding: difference consecutive frames, mask
  // the lower quantile, encode, pool over time, broadcast back
  NodeId g4 = g.reshape(gee, {clips, frames, joints, ce});
  NodeId diff = g.temporal_difference(g4, 1);
  NodeId mask = g.quantile_mask(diff, m.q);
  NodeId gated = g.mul(diff, mask);
  NodeId encoded = g.relu(g.reshape(
      g.matmul(g.reshape(gated, {clips * (frames - 1) * joints, ce}), m.w_m),
      {clips, frames - 1, joints, ce}));
  NodeId pooled = g.mean_axis(encoded, 1);            // [clips, joints, Ce]
  NodeId spread = g.expand_axis(pooled, 1, frames);   // [clips, T, joints, Ce]
  NodeId branch = g.reshape(spread, {n, ce});

  // embedded residual: fuse before the output projection
  NodeId fused = g.add(y, branch);
  FeatureNode out;
  out.node = g.add(g.matmul(fused, p.w_out), x.node);
  out.layout = x.layout;
  return out;
}

FeatureNode dnla_delta_forward(Graph& g, const FeatureNode& x, const BoundDelta& heads) {
  const Tensor& xv = g.value(x.node);
  if (xv.rank() != 2 || xv.dim(0) != x.layout.positions()) {
    throw ShapeError("dnla_delta_forward: features " + xv.shape_str() +
                     " do not match the declared layout");
  }
  const int clips = x.layout.clips;
  const int frames = x.layout.frames;
  const int joints = x.layout.joints;
  const int n = xv.dim(0);

  // spatial head: attend across joints within each frame
  NodeId delta_s;
  {
    const BoundNla& p = heads.spatial;
    const int ce = g.value(p.w_theta).dim(1);
    const int b = clips * frames;
    NodeId theta = g.reshape(g.matmul(x.node, p.w_theta), {b, joints, ce});
    NodeId phi = g.reshape(g.matmul(x.node, p.w_phi), {b, joints, ce});
    NodeId gee = g.reshape(g.matmul(x.node, p.w_g), {b, joints, ce});
    NodeId y = attention_rows(g, theta, phi, gee);
    delta_s = g.matmul(g.reshape(y, {n, ce}), p.w_out);
  }

  // temporal head: attend across frames within each joint trajectory
  NodeId delta_t;
  {
    const BoundNla& p = heads.temporal;
    const int ce = g.value(p.w_theta).dim(1);
    auto to_traj = [&](NodeId emb) {
      NodeId shaped = g.reshape(emb, {clips, frames, joints, ce});
      NodeId swapped = g.permute(shaped, {0, 2, 1, 3});  // [clips, joints, T, Ce]
      return g.reshape(swapped, {clips * joints, frames, ce});
    };
    NodeId theta = to_traj(g.matmul(x.node, p.w_theta));
    NodeId phi = to_traj(g.matmul(x.node, p.w_phi));
    NodeId gee = to_traj(g.matmul(x.node, p.w_g));
    NodeId y = attention_rows(g, theta, phi, gee);
    NodeId back = g.permute(g.reshape(y, {clips, joints, frames, ce}), {0, 2, 1, 3});
    delta_t = g.matmul(g.reshape(back, {n, ce}), p.w_out);
  }

  FeatureNode out;
  out.node = g.add(g.add(x.node, delta_s), delta_t);
  out.layout = x.layout;
  return out;
}

NodeId vfd_forward(Graph& g, NodeId x, const VfdConfig& cfg) {
  const Tensor& xv = g.value(x);
  if (xv.rank() != 2) {
    throw ShapeError("vfd_forward: expected [N,C] features, got " + xv.shape_str());
  }
  const int n = xv.dim(0);
  const int c = xv.dim(1);
  if (cfg.kernel > n) {
    throw ConfigError("vfd_forward: kernel " + std::to_string(cfg.kernel) +
                      " exceeds position count " + std::to_string(n));
  }
  NodeId pooled = g.overlap_avg_pool(x, cfg.kernel, cfg.stride);  // [L, C]
  const int len = g.value(pooled).dim(0);
  if (cfg.out_len != 0 && len != cfg.out_len) {
    throw ConfigError("vfd_forward: pooled length " + std::to_string(len) +
                      " does not match configured out_len " + std::to_string(cfg.out_len));
  }
  NodeId mx = g.global_max_pool(x);                                   // [C]
  NodeId per_channel = g.concat({g.permute(pooled, {1, 0}), g.reshape(mx, {c, 1})}, 1);
  return g.reshape(per_channel, {c * (len + 1)});
}

NodeId distill(Graph& g, const FeatureNode& x, DistillMode mode, const BoundAttention& att,
               const VfdConfig& cfg) {
  switch (mode) {
    case DistillMode::vfd:
      return vfd_forward(g, x.node, cfg);
    case DistillMode::nla_emb:
    case DistillMode::nla_cat:
      return vfd_forward(g, nla_forward(g, x, att.nla).node, cfg);
    case DistillMode::dnla_mu_emb:
    case DistillMode::dnla_mu_cat:
      return vfd_forward(g, dnla_mu_forward(g, x, att.nla, att.motion).node, cfg);
    case DistillMode::dnla_delta_emb:
      return vfd_forward(g, dnla_delta_forward(g, x, att.delta).node, cfg);
  }
  throw ConfigError("distill: invalid mode value");
}

}  // namespace aqa
