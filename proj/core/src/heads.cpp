#include "aqa/heads.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace aqa {

MlpParams make_mlp_params(int in_len, int hidden) {
  if (in_len < 1 || hidden < 1) {
    throw ConfigError("mlp: nonpositive layer size (in_len " + std::to_string(in_len) +
                      ", hidden " + std::to_string(hidden) + ")");
  }
  MlpParams p;
  p.w1 = Tensor({in_len, hidden});
  p.b1 = Tensor({hidden});
  p.w2 = Tensor({hidden, hidden});
  p.b2 = Tensor({hidden});
  p.score_w = Tensor({hidden, 1});
  p.score_b = Tensor({1});
  p.gender_w = Tensor({hidden, 2});
  p.gender_b = Tensor({2});
  return p;
}

PredictionNodes mlp_forward(Graph& g, NodeId features, const BoundMlp& p) {
  const Tensor& fv = g.value(features);
  if (fv.rank() != 1) {
    throw ShapeError("mlp_forward: expected a feature vector, got " + fv.shape_str());
  }
  const int d = fv.dim(0);
  const Tensor& w1 = g.value(p.w1);
  if (w1.dim(0) != d) {
    throw ShapeError("mlp_forward: feature length " + std::to_string(d) +
                     " does not match trunk weight " + w1.shape_str());
  }
  NodeId x = g.reshape(features, {1, d});
  NodeId h1 = g.relu(g.add_bias(g.matmul(x, p.w1), p.b1));
  NodeId h2 = g.relu(g.add_bias(g.matmul(h1, p.w2), p.b2));
  PredictionNodes out;
  out.score = g.sigmoid(g.add_bias(g.matmul(h2, p.score_w), p.score_b));
  out.gender_logits = g.add_bias(g.matmul(h2, p.gender_w), p.gender_b);
  return out;
}

Prediction read_prediction(const Graph& g, const PredictionNodes& nodes) {
  Prediction p;
  p.score_norm = g.value(nodes.score)[0];
  p.gender_logits = {g.value(nodes.gender_logits)[0], g.value(nodes.gender_logits)[1]};
  return p;
}

NodeId total_loss(Graph& g, const PredictionNodes& pred, double label_norm01, Gender gender,
                  const LossWeights& lw) {
  NodeId label = g.input(Tensor::scalar(label_norm01));
  NodeId e = g.sub(g.reshape(pred.score, {1}), label);
  NodeId l1 = g.add(g.relu(e), g.relu(g.cscale(e, -1.0)));  // |e|
  NodeId l2 = g.mul(e, e);
  NodeId loss = g.add(l1, g.cscale(l2, lw.w));
  if (lw.class_loss_enabled) {
    Tensor onehot({1, 2});
    onehot[gender == Gender::female ? 0 : 1] = 1.0;
    NodeId logp = g.log_softmax(pred.gender_logits, 1);
    NodeId ce = g.cscale(g.sum_all(g.mul(logp, g.input(std::move(onehot)))), -1.0);
    loss = g.add(loss, g.cscale(ce, lw.lambda_gender));
  }
  return loss;
}

std::vector<double> average_ranks(const std::vector<double>& values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    return values[i] < values[j] || (values[i] == values[j] && i < j);
  });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    // positions i..j (0-based) share the mean of ranks i+1..j+1
    const double avg = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) {
    throw ShapeError("spearman: length mismatch " + std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()));
  }
  if (a.size() < 2) {
    throw NumericError("spearman: undefined for fewer than 2 points");
  }
  const std::vector<double> ra = average_ranks(a);
  const std::vector<double> rb = average_ranks(b);
  const double n = static_cast<double>(a.size());
  double mean_a = 0.0, mean_b = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    mean_a += ra[i];
    mean_b += rb[i];
  }
  mean_a /= n;
  mean_b /= n;
  double cov = 0.0, var_a = 0.0, var_b = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    const double da = ra[i] - mean_a;
    const double db = rb[i] - mean_b;
    cov += da * db;
    var_a += da * da;
    var_b += db * db;
  }
  if (var_a == 0.0 || var_b == 0.0) {
    throw NumericError("spearman: undefined correlation (zero rank variance)");
  }
  return cov / std::sqrt(var_a * var_b);
}

void adam_init(AdamState& state, const std::vector<Tensor*>& params) {
  state.m.clear();
  state.v.clear();
  state.t = 0;
  for (const Tensor* p : params) {
    state.m.push_back(Tensor::zeros(p->shape()));
    state.v.push_back(Tensor::zeros(p->shape()));
  }
}

void adam_step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads,
               AdamState& state, const AdamConfig& cfg) {
  if (params.size() != grads.size() || params.size() != state.m.size()) {
    throw ShapeError("adam_step: params/grads/state count mismatch");
  }
  state.t += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    const Tensor& g = grads[i];
    if (!p.same_shape(g) || !p.same_shape(state.m[i])) {
      throw ShapeError("adam_step: shape mismatch for parameter " + std::to_string(i) + ": " +
                       p.shape_str() + " vs grad " + g.shape_str());
    }
    Tensor& m = state.m[i];
    Tensor& v = state.v[i];
    for (std::int64_t k = 0; k < p.numel(); ++k) {
      m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g[k];
      v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g[k] * g[k];
      const double mhat = m[k] / bc1;
      const double vhat = v[k] / bc2;
      p[k] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
}

}  // namespace aqa
