#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "aqa/tensor.hpp"

namespace aqa {

using NodeId = int;

// Define-by-run computation graph with reverse-mode differentiation.
// Nodes are appended in evaluation order, so construction order is a
// topological order and backward() is a single reverse sweep that visits
// each reachable node exactly once. All operations are sequential and
// deterministic: identical inputs produce bitwise identical outputs.
class Graph {
 public:
  Graph() = default;
  // backprop closures capture `this`
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  // leaves
  NodeId leaf(Tensor value, bool requires_grad);
  NodeId input(Tensor value);  // requires_grad taken from the tensor flag
  NodeId param(Tensor value);  // gradient leaf

  // linear algebra
  NodeId matmul(NodeId a, NodeId b);     // [m,k] x [k,n] -> [m,n]
  NodeId bmm(NodeId a, NodeId b);        // [B,m,k] x [B,k,n] -> [B,m,n]

  // elementwise
  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);
  NodeId add_bias(NodeId x, NodeId bias);  // bias broadcast over the last axis
  NodeId scale(NodeId x, NodeId s);        // s is a 1-element node
  NodeId cscale(NodeId x, double c);       // constant scale
  NodeId relu(NodeId x);
  NodeId sigmoid(NodeId x);
  NodeId log(NodeId x);  // requires strictly positive input

  // normalizations and reductions
  NodeId softmax(NodeId x, int axis);      // max-subtracted, slices sum to 1
  NodeId log_softmax(NodeId x, int axis);
  NodeId sum_all(NodeId x);                // -> [1]
  NodeId mean_axis(NodeId x, int axis);    // drops the axis
  NodeId max_axis(NodeId x, int axis);     // drops the axis; ties -> lowest index

  // layout
  NodeId concat(const std::vector<NodeId>& xs, int axis);
  NodeId reshape(NodeId x, std::vector<int> shape);
  NodeId permute(NodeId x, std::vector<int> perm);
  NodeId expand_axis(NodeId x, int axis, int copies);  // insert repeated axis

  // sequence ops
  // x: [T,J,C] convolved along T per (joint, channel); kernel: [C,K], K odd,
  // symmetric zero padding (K-1)/2, temporal stride >= 1.
  NodeId depthwise_conv1d(NodeId x, NodeId kernel, int stride);
  // x: [T,J,C] mixed across channels at every (t,j); weights: [C,C_out].
  NodeId pointwise_conv(NodeId x, NodeId weights);
  // x: [T,C]; windows of `kernel` rows averaged at the given stride.
  NodeId overlap_avg_pool(NodeId x, int kernel, int stride);
  // x: [N,C] -> [C], max over positions.
  NodeId global_max_pool(NodeId x);
  // out[t] = x[t+1] - x[t] along the axis (default first).
  NodeId temporal_difference(NodeId x, int axis = 0);
  // Binary mask; threshold is the element at index floor(q*N) of the
  // ascending sort. The mask is a constant: no gradient flows through it.
  NodeId quantile_mask(NodeId x, double q);

  const Tensor& value(NodeId id) const;
  const std::string& op_name(NodeId id) const;
  std::size_t size() const { return nodes_.size(); }

  // Reverse accumulation from a scalar loss node.
  void backward(NodeId loss);
  // Gradient of the loss w.r.t. a node; zeros if the node was not reached.
  Tensor grad(NodeId id) const;

  // First node (in construction order) whose value contains NaN/Inf.
  std::optional<NodeId> first_nonfinite() const;

  // Mask record/replay keeps quantile masks fixed across the re-evaluations
  // a finite-difference audit performs. Tapes outlive the graph.
  void record_masks(std::vector<Tensor>* tape) { mask_record_ = tape; }
  void replay_masks(const std::vector<Tensor>* tape) {
    mask_replay_ = tape;
    mask_replay_pos_ = 0;
  }

 private:
  struct Node {
    std::string op;
    std::vector<NodeId> inputs;
    Tensor value;
    bool needs_grad = false;
    std::function<void(const Tensor&)> backprop;
  };

  NodeId push(std::string op, std::vector<NodeId> inputs, Tensor value,
              std::function<void(const Tensor&)> backprop);
  const Node& node(NodeId id) const;
  bool any_needs_grad(const std::vector<NodeId>& ids) const;
  Tensor& grad_buf(NodeId id);

  std::vector<Node> nodes_;
  std::vector<Tensor> grads_;

  std::vector<Tensor>* mask_record_ = nullptr;
  const std::vector<Tensor>* mask_replay_ = nullptr;
  std::size_t mask_replay_pos_ = 0;
};

}  // namespace aqa
