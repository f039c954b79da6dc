#include "aqa/model.hpp"

#include <cmath>

namespace aqa {

namespace {

void fill_uniform(Tensor& t, SeededRng& rng, double half_range) {
  for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(-half_range, half_range);
}

// scaled by fan-in so early activations stay O(1)
void fill_scaled(Tensor& t, SeededRng& rng, int fan_in) {
  const double s = 1.0 / std::sqrt(static_cast<double>(fan_in));
  fill_uniform(t, rng, s);
}

}  // namespace

Model::Model(ModelConfig cfg) : cfg_(cfg), adj_(build_adjacency()) {
  jfe = make_jfe_params(cfg_.jfe);
  const int c = cfg_.feature_channels();
  const int ce = cfg_.effective_embed_dim();
  const Pairwise pw = mode_pairwise(cfg_.mode);
  if (mode_uses_nla(cfg_.mode)) {
    att.nla = make_nla_params(c, ce, pw);
  }
  if (mode_uses_motion(cfg_.mode)) {
    if (cfg_.quantile_q < 0.0 || cfg_.quantile_q >= 1.0) {
      throw ConfigError("model: quantile_q must be in [0,1), got " +
                        std::to_string(cfg_.quantile_q));
    }
    att.motion.q = cfg_.quantile_q;
    att.motion.w_m = Tensor({ce, ce});
  }
  if (mode_uses_delta(cfg_.mode)) {
    att.delta.spatial = make_nla_params(c, ce, Pairwise::embedded_gaussian);
    att.delta.temporal = make_nla_params(c, ce, Pairwise::embedded_gaussian);
  }
  vfd_ = make_vfd_config(cfg_.vfd_kernel, cfg_.vfd_stride, cfg_.positions());
  mlp = make_mlp_params(feature_length(), cfg_.mlp_hidden);
}

void Model::init(SeededRng& rng) {
  fill_scaled(jfe.gcn.w, rng, cfg_.jfe.in_channels);
  jfe.gcn.gate = Tensor({1});  // starts at 0: pure normalized adjacency
  fill_scaled(jfe.t1.depthwise, rng, cfg_.jfe.kernel_t);
  fill_scaled(jfe.t1.pointwise, rng, cfg_.jfe.spatial_out);
  fill_scaled(jfe.t2.depthwise, rng, cfg_.jfe.kernel_t);
  fill_scaled(jfe.t2.pointwise, rng, cfg_.jfe.t1_out);

  const int c = cfg_.feature_channels();
  auto init_nla = [&](NlaParams& p) {
    fill_scaled(p.w_theta, rng, c);
    fill_scaled(p.w_phi, rng, c);
    fill_scaled(p.w_g, rng, c);
    p.w_out = Tensor(p.w_out.shape());  // zero: block starts as identity + residual
    if (p.w_cat.numel() > 0) fill_scaled(p.w_cat, rng, p.w_cat.dim(0));
  };
  if (mode_uses_nla(cfg_.mode)) init_nla(att.nla);
  if (mode_uses_motion(cfg_.mode)) fill_scaled(att.motion.w_m, rng, att.motion.w_m.dim(0));
  if (mode_uses_delta(cfg_.mode)) {
    init_nla(att.delta.spatial);
    init_nla(att.delta.temporal);
  }

  fill_scaled(mlp.w1, rng, mlp.w1.dim(0));
  mlp.b1 = Tensor(mlp.b1.shape());
  fill_scaled(mlp.w2, rng, mlp.w2.dim(0));
  mlp.b2 = Tensor(mlp.b2.shape());
  fill_scaled(mlp.score_w, rng, mlp.score_w.dim(0));
  mlp.score_b = Tensor(mlp.score_b.shape());
  fill_scaled(mlp.gender_w, rng, mlp.gender_w.dim(0));
  mlp.gender_b = Tensor(mlp.gender_b.shape());
}

void Model::init_uniform(SeededRng& rng, double half_range) {
  for (ParamRef& p : params()) fill_uniform(*p.tensor, rng, half_range);
}

std::vector<ParamRef> Model::params() {
  std::vector<ParamRef> out;
  out.push_back({"jfe.gcn.w", &jfe.gcn.w});
  out.push_back({"jfe.gcn.gate", &jfe.gcn.gate});
  out.push_back({"jfe.t1.depthwise", &jfe.t1.depthwise});
  out.push_back({"jfe.t1.pointwise", &jfe.t1.pointwise});
  out.push_back({"jfe.t2.depthwise", &jfe.t2.depthwise});
  out.push_back({"jfe.t2.pointwise", &jfe.t2.pointwise});
  auto push_nla = [&out](const std::string& prefix, NlaParams& p) {
    out.push_back({prefix + ".w_theta", &p.w_theta});
    out.push_back({prefix + ".w_phi", &p.w_phi});
    out.push_back({prefix + ".w_g", &p.w_g});
    out.push_back({prefix + ".w_out", &p.w_out});
    if (p.w_cat.numel() > 0) out.push_back({prefix + ".w_cat", &p.w_cat});
  };
  if (mode_uses_nla(cfg_.mode)) push_nla("att.nla", att.nla);
  if (mode_uses_motion(cfg_.mode)) out.push_back({"att.motion.w_m", &att.motion.w_m});
  if (mode_uses_delta(cfg_.mode)) {
    push_nla("att.spatial", att.delta.spatial);
    push_nla("att.temporal", att.delta.temporal);
  }
  out.push_back({"mlp.w1", &mlp.w1});
  out.push_back({"mlp.b1", &mlp.b1});
  out.push_back({"mlp.w2", &mlp.w2});
  out.push_back({"mlp.b2", &mlp.b2});
  out.push_back({"mlp.score_w", &mlp.score_w});
  out.push_back({"mlp.score_b", &mlp.score_b});
  out.push_back({"mlp.gender_w", &mlp.gender_w});
  out.push_back({"mlp.gender_b", &mlp.gender_b});
  return out;
}

std::vector<const Tensor*> Model::param_values() const {
  auto refs = const_cast<Model*>(this)->params();
  std::vector<const Tensor*> out;
  out.reserve(refs.size());
  for (const ParamRef& r : refs) out.push_back(r.tensor);
  return out;
}

Model::Bound Model::bind(Graph& g) const {
  auto refs = const_cast<Model*>(this)->params();
  Bound b;
  b.ids.reserve(refs.size());
  std::vector<std::pair<std::string, NodeId>> by_name;
  for (const ParamRef& r : refs) {
    const NodeId id = g.param(*r.tensor);
    b.ids.push_back(id);
    by_name.emplace_back(r.name, id);
  }
  auto find = [&by_name](const std::string& name) {
    for (const auto& [n, id] : by_name) {
      if (n == name) return id;
    }
    return NodeId{-1};
  };
  b.jfe = {find("jfe.gcn.w"),       find("jfe.gcn.gate"),    find("jfe.t1.depthwise"),
           find("jfe.t1.pointwise"), find("jfe.t2.depthwise"), find("jfe.t2.pointwise")};
  auto bind_nla = [&find](const std::string& prefix, Pairwise pw) {
    BoundNla bn;
    bn.w_theta = find(prefix + ".w_theta");
    bn.w_phi = find(prefix + ".w_phi");
    bn.w_g = find(prefix + ".w_g");
    bn.w_out = find(prefix + ".w_out");
    bn.w_cat = find(prefix + ".w_cat");
    bn.pairwise = pw;
    return bn;
  };
  if (mode_uses_nla(cfg_.mode)) b.att.nla = bind_nla("att.nla", mode_pairwise(cfg_.mode));
  if (mode_uses_motion(cfg_.mode)) {
    b.att.motion.w_m = find("att.motion.w_m");
    b.att.motion.q = att.motion.q;
  }
  if (mode_uses_delta(cfg_.mode)) {
    b.att.delta.spatial = bind_nla("att.spatial", Pairwise::embedded_gaussian);
    b.att.delta.temporal = bind_nla("att.temporal", Pairwise::embedded_gaussian);
  }
  b.mlp = {find("mlp.w1"),       find("mlp.b1"),       find("mlp.w2"),
           find("mlp.b2"),       find("mlp.score_w"),  find("mlp.score_b"),
           find("mlp.gender_w"), find("mlp.gender_b")};
  return b;
}

NodeId Model::forward_features(Graph& g, const Bound& b, const Tensor& clips) const {
  FeatureNode encoded = jfe_forward(g, clips, b.jfe, adj_);
  return distill(g, encoded, cfg_.mode, b.att, vfd_);
}

PredictionNodes Model::forward(Graph& g, const Bound& b, const Tensor& clips) const {
  return mlp_forward(g, forward_features(g, b, clips), b.mlp);
}

}  // namespace aqa
