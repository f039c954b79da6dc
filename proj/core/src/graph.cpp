#include "aqa/graph.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <utility>

#include "aqa/errors.hpp"

namespace aqa {

namespace {

// Flattened view of a tensor around one axis: [outer, n, inner].
struct AxisView {
  std::int64_t outer;
  std::int64_t n;
  std::int64_t inner;
};

AxisView axis_view(const std::vector<int>& shape, int axis) {
  AxisView v{1, shape[static_cast<std::size_t>(axis)], 1};
  for (int i = 0; i < axis; ++i) v.outer *= shape[static_cast<std::size_t>(i)];
  for (std::size_t i = static_cast<std::size_t>(axis) + 1; i < shape.size(); ++i) {
    v.inner *= shape[i];
  }
  return v;
}

void check_axis(const char* op, const Tensor& t, int axis) {
  if (axis < 0 || axis >= t.rank()) {
    throw ShapeError(std::string(op) + ": axis " + std::to_string(axis) +
                     " out of range for shape " + t.shape_str());
  }
}

double stable_sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

NodeId Graph::push(std::string op, std::vector<NodeId> inputs, Tensor value,
                   std::function<void(const Tensor&)> backprop) {
  Node n;
  n.op = std::move(op);
  n.inputs = std::move(inputs);
  n.needs_grad = any_needs_grad(n.inputs);
  n.value = std::move(value);
  n.backprop = std::move(backprop);
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size()) - 1;
}

const Graph::Node& Graph::node(NodeId id) const {
  return nodes_[static_cast<std::size_t>(id)];
}

bool Graph::any_needs_grad(const std::vector<NodeId>& ids) const {
  for (NodeId id : ids) {
    if (node(id).needs_grad) return true;
  }
  return false;
}

Tensor& Graph::grad_buf(NodeId id) {
  Tensor& g = grads_[static_cast<std::size_t>(id)];
  if (g.empty()) g = Tensor::zeros(node(id).value.shape());
  return g;
}

const Tensor& Graph::value(NodeId id) const { return node(id).value; }

const std::string& Graph::op_name(NodeId id) const { return node(id).op; }

NodeId Graph::leaf(Tensor value, bool requires_grad) {
  Node n;
  n.op = requires_grad ? "param" : "input";
  n.value = std::move(value);
  n.needs_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size()) - 1;
}

NodeId Graph::input(Tensor value) {
  const bool rg = value.requires_grad;
  return leaf(std::move(value), rg);
}

NodeId Graph::param(Tensor value) { return leaf(std::move(value), true); }

NodeId Graph::matmul(NodeId a, NodeId b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  if (av.rank() != 2 || bv.rank() != 2 || av.dim(1) != bv.dim(0)) {
    throw ShapeError("matmul: shape mismatch " + av.shape_str() + " x " + bv.shape_str());
  }
  const int m = av.dim(0), k = av.dim(1), n = bv.dim(1);
  Tensor out({m, n});
  {
    const double* A = av.data();
    const double* B = bv.data();
    double* C = out.data();
    for (int i = 0; i < m; ++i) {
      for (int p = 0; p < k; ++p) {
        const double aip = A[i * k + p];
        if (aip == 0.0) continue;
        const double* Bp = B + p * n;
        double* Ci = C + i * n;
        for (int j = 0; j < n; ++j) Ci[j] += aip * Bp[j];
      }
    }
  }
  return push("matmul", {a, b}, std::move(out), [this, a, b, m, k, n](const Tensor& gout) {
    const double* G = gout.data();
    if (node(a).needs_grad) {
      double* GA = grad_buf(a).data();
      const double* B = value(b).data();
      for (int i = 0; i < m; ++i) {
        for (int p = 0; p < k; ++p) {
          const double* Bp = B + p * n;
          const double* Gi = G + i * n;
          double acc = 0.0;
          for (int j = 0; j < n; ++j) acc += Gi[j] * Bp[j];
          GA[i * k + p] += acc;
        }
      }
    }
    if (node(b).needs_grad) {
      double* GB = grad_buf(b).data();
      const double* A = value(a).data();
      for (int i = 0; i < m; ++i) {
        const double* Gi = G + i * n;
        for (int p = 0; p < k; ++p) {
          const double aip = A[i * k + p];
          if (aip == 0.0) continue;
          double* GBp = GB + p * n;
          for (int j = 0; j < n; ++j) GBp[j] += aip * Gi[j];
        }
      }
    }
  });
}

NodeId Graph::bmm(NodeId a, NodeId b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  if (av.rank() != 3 || bv.rank() != 3 || av.dim(0) != bv.dim(0) || av.dim(2) != bv.dim(1)) {
    throw ShapeError("bmm: shape mismatch " + av.shape_str() + " x " + bv.shape_str());
  }
  const int batch = av.dim(0), m = av.dim(1), k = av.dim(2), n = bv.dim(2);
  Tensor out({batch, m, n});
  {
    const double* A = av.data();
    const double* B = bv.data();
    double* C = out.data();
    for (int t = 0; t < batch; ++t) {
      const double* At = A + static_cast<std::int64_t>(t) * m * k;
      const double* Bt = B + static_cast<std::int64_t>(t) * k * n;
      double* Ct = C + static_cast<std::int64_t>(t) * m * n;
      for (int i = 0; i < m; ++i) {
        for (int p = 0; p < k; ++p) {
          const double aip = At[i * k + p];
          if (aip == 0.0) continue;
          const double* Bp = Bt + p * n;
          double* Ci = Ct + i * n;
          for (int j = 0; j < n; ++j) Ci[j] += aip * Bp[j];
        }
      }
    }
  }
  return push("bmm", {a, b}, std::move(out),
              [this, a, b, batch, m, k, n](const Tensor& gout) {
                const double* G = gout.data();
                if (node(a).needs_grad) {
                  double* GA = grad_buf(a).data();
                  const double* B = value(b).data();
                  for (int t = 0; t < batch; ++t) {
                    const double* Bt = B + static_cast<std::int64_t>(t) * k * n;
                    const double* Gt = G + static_cast<std::int64_t>(t) * m * n;
                    double* GAt = GA + static_cast<std::int64_t>(t) * m * k;
                    for (int i = 0; i < m; ++i) {
                      for (int p = 0; p < k; ++p) {
                        const double* Bp = Bt + p * n;
                        const double* Gi = Gt + i * n;
                        double acc = 0.0;
                        for (int j = 0; j < n; ++j) acc += Gi[j] * Bp[j];
                        GAt[i * k + p] += acc;
                      }
                    }
                  }
                }
                if (node(b).needs_grad) {
                  double* GB = grad_buf(b).data();
                  const double* A = value(a).data();
                  for (int t = 0; t < batch; ++t) {
                    const double* At = A + static_cast<std::int64_t>(t) * m * k;
                    const double* Gt = G + static_cast<std::int64_t>(t) * m * n;
                    double* GBt = GB + static_cast<std::int64_t>(t) * k * n;
                    for (int i = 0; i < m; ++i) {
                      const double* Gi = Gt + i * n;
                      for (int p = 0; p < k; ++p) {
                        const double aip = At[i * k + p];
                        if (aip == 0.0) continue;
                        double* GBp = GBt + p * n;
                        for (int j = 0; j < n; ++j) GBp[j] += aip * Gi[j];
                      }
                    }
                  }
                }
              });
}

NodeId Graph::add(NodeId a, NodeId b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  if (!av.same_shape(bv)) {
    throw ShapeError("add: shape mismatch " + av.shape_str() + " vs " + bv.shape_str());
  }
  Tensor out(av.shape());
  for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = av[i] + bv[i];
  return push("add", {a, b}, std::move(out), [this, a, b](const Tensor& gout) {
    if (node(a).needs_grad) {
      Tensor& ga = grad_buf(a);
      for (std::int64_t i = 0; i < gout.numel(); ++i) ga[i] += gout[i];
    }
    if (node(b).needs_grad) {
      Tensor& gb = grad_buf(b);
      for (std::int64_t i = 0; i < gout.numel(); ++i) gb[i] += gout[i];
    }
  });
}

NodeId Graph::sub(NodeId a, NodeId b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  if (!av.same_shape(bv)) {
    throw ShapeError("sub: shape mismatch " + av.shape_str() + " vs " + bv.shape_str());
  }
  Tensor out(av.shape());
  for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = av[i] - bv[i];
  return push("sub", {a, b}, std::move(out), [this, a, b](const Tensor& gout) {
    if (node(a).needs_grad) {
      Tensor& ga = grad_buf(a);
      for (std::int64_t i = 0; i < gout.numel(); ++i) ga[i] += gout[i];
    }
    if (node(b).needs_grad) {
      Tensor& gb = grad_buf(b);
      for (std::int64_t i = 0; i < gout.numel(); ++i) gb[i] -= gout[i];
    }
  });
}

NodeId Graph::mul(NodeId a, NodeId b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  if (!av.same_shape(bv)) {
    throw ShapeError("mul: shape mismatch " + av.shape_str() + " vs " + bv.shape_str());
  }
  Tensor out(av.shape());
  for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = av[i] * bv[i];
  return push("mul", {a, b}, std::move(out), [this, a, b](const Tensor& gout) {
    if (node(a).needs_grad) {
      Tensor& ga = grad_buf(a);
      const Tensor& bv2 = value(b);
      for (std::int64_t i = 0; i < gout.numel(); ++i) ga[i] += gout[i] * bv2[i];
    }
    if (node(b).needs_grad) {
      Tensor& gb = grad_buf(b);
      const Tensor& av2 = value(a);
      for (std::int64_t i = 0; i < gout.numel(); ++i) gb[i] += gout[i] * av2[i];
    }
  });
}

NodeId Graph::add_bias(NodeId x, NodeId bias) {
  const Tensor& xv = value(x);
  const Tensor& bv = value(bias);
  if (xv.rank() < 1 || bv.rank() != 1 || xv.dim(xv.rank() - 1) != bv.dim(0)) {
    throw ShapeError("add_bias: shape mismatch " + xv.shape_str() + " vs " + bv.shape_str());
  }
  const std::int64_t c = bv.numel();
  const std::int64_t rows = xv.numel() / c;
  Tensor out(xv.shape());
  for (std::int64_t r = 0; r < rows; ++r) {
    for (std::int64_t j = 0; j < c; ++j) out[r * c + j] = xv[r * c + j] + bv[j];
  }
  return push("add_bias", {x, bias}, std::move(out), [this, x, bias, rows, c](const Tensor& gout) {
    if (node(x).needs_grad) {
      Tensor& gx = grad_buf(x);
      for (std::int64_t i = 0; i < gout.numel(); ++i) gx[i] += gout[i];
    }
    if (node(bias).needs_grad) {
      Tensor& gb = grad_buf(bias);
      for (std::int64_t r = 0; r < rows; ++r) {
        for (std::int64_t j = 0; j < c; ++j) gb[j] += gout[r * c + j];
      }
    }
  });
}

NodeId Graph::scale(NodeId x, NodeId s) {
  const Tensor& xv = value(x);
  const Tensor& sv = value(s);
  if (sv.numel() != 1) {
    throw ShapeError("scale: scalar operand must have one element, got " + sv.shape_str());
  }
  Tensor out(xv.shape());
  const double c = sv[0];
  for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = xv[i] * c;
  return push("scale", {x, s}, std::move(out), [this, x, s](const Tensor& gout) {
    if (node(x).needs_grad) {
      Tensor& gx = grad_buf(x);
      const double c2 = value(s)[0];
      for (std::int64_t i = 0; i < gout.numel(); ++i) gx[i] += c2 * gout[i];
    }
    if (node(s).needs_grad) {
      Tensor& gs = grad_buf(s);
      const Tensor& xv2 = value(x);
      double acc = 0.0;
      for (std::int64_t i = 0; i < gout.numel(); ++i) acc += gout[i] * xv2[i];
      gs[0] += acc;
    }
  });
}

NodeId Graph::cscale(NodeId x, double c) {
  const Tensor& xv = value(x);
  Tensor out(xv.shape());
  for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = xv[i] * c;
  return push("cscale", {x}, std::move(out), [this, x, c](const Tensor& gout) {
    if (node(x).needs_grad) {
      Tensor& gx = grad_buf(x);
      for (std::int64_t i = 0; i < gout.numel(); ++i) gx[i] += c * gout[i];
    }
  });
}

NodeId Graph::relu(NodeId x) {
  const Tensor& xv = value(x);
  Tensor out(xv.shape());
  for (std::int64_t i = 0; i < out.numel(); ++i) {
    const double v = xv[i];
    // NaN propagates so corrupt inputs surface as a non-finite loss
    out[i] = (v > 0.0 || v != v) ? v : 0.0;
  }
  return push("relu", {x}, std::move(out), [this, x](const Tensor& gout) {
    if (!node(x).needs_grad) return;
    Tensor& gx = grad_buf(x);
    const Tensor& xv2 = value(x);
    for (std::int64_t i = 0; i < gout.numel(); ++i) {
      if (xv2[i] > 0.0) gx[i] += gout[i];
    }
  });
}

NodeId Graph::sigmoid(NodeId x) {
  const Tensor& xv = value(x);
  Tensor out(xv.shape());
  for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = stable_sigmoid(xv[i]);
  NodeId id = push("sigmoid", {x}, std::move(out), nullptr);
  nodes_.back().backprop = [this, x, id](const Tensor& gout) {
    if (!node(x).needs_grad) return;
    Tensor& gx = grad_buf(x);
    const Tensor& y = value(id);
    for (std::int64_t i = 0; i < gout.numel(); ++i) gx[i] += gout[i] * y[i] * (1.0 - y[i]);
  };
  return id;
}

NodeId Graph::log(NodeId x) {
  const Tensor& xv = value(x);
  Tensor out(xv.shape());
  for (std::int64_t i = 0; i < out.numel(); ++i) {
    if (!(xv[i] > 0.0)) {
      throw NumericError("log: nonpositive input value " + std::to_string(xv[i]));
    }
    out[i] = std::log(xv[i]);
  }
  return push("log", {x}, std::move(out), [this, x](const Tensor& gout) {
    if (!node(x).needs_grad) return;
    Tensor& gx = grad_buf(x);
    const Tensor& xv2 = value(x);
    for (std::int64_t i = 0; i < gout.numel(); ++i) gx[i] += gout[i] / xv2[i];
  });
}

NodeId Graph::softmax(NodeId x, int axis) {
  const Tensor& xv = value(x);
  check_axis("softmax", xv, axis);
  const AxisView v = axis_view(xv.shape(), axis);
  Tensor out(xv.shape());
  for (std::int64_t o = 0; o < v.outer; ++o) {
    for (std::int64_t i = 0; i < v.inner; ++i) {
      const std::int64_t base = o * v.n * v.inner + i;
      double m = xv[base];
      for (std::int64_t a = 1; a < v.n; ++a) m = std::max(m, xv[base + a * v.inner]);
      double s = 0.0;
      for (std::int64_t a = 0; a < v.n; ++a) {
        const double e = std::exp(xv[base + a * v.inner] - m);
        out[base + a * v.inner] = e;
        s += e;
      }
      for (std::int64_t a = 0; a < v.n; ++a) out[base + a * v.inner] /= s;
    }
  }
  NodeId id = push("softmax", {x}, std::move(out), nullptr);
  nodes_.back().backprop = [this, x, id, v](const Tensor& gout) {
    if (!node(x).needs_grad) return;
    Tensor& gx = grad_buf(x);
    const Tensor& y = value(id);
    for (std::int64_t o = 0; o < v.outer; ++o) {
      for (std::int64_t i = 0; i < v.inner; ++i) {
        const std::int64_t base = o * v.n * v.inner + i;
        double dot = 0.0;
        for (std::int64_t a = 0; a < v.n; ++a) {
          dot += gout[base + a * v.inner] * y[base + a * v.inner];
        }
        for (std::int64_t a = 0; a < v.n; ++a) {
          const std::int64_t k = base + a * v.inner;
          gx[k] += y[k] * (gout[k] - dot);
        }
      }
    }
  };
  return id;
}

NodeId Graph::log_softmax(NodeId x, int axis) {
  const Tensor& xv = value(x);
  check_axis("log_softmax", xv, axis);
  const AxisView v = axis_view(xv.shape(), axis);
  Tensor out(xv.shape());
  for (std::int64_t o = 0; o < v.outer; ++o) {
    for (std::int64_t i = 0; i < v.inner; ++i) {
      const std::int64_t base = o * v.n * v.inner + i;
      double m = xv[base];
      for (std::int64_t a = 1; a < v.n; ++a) m = std::max(m, xv[base + a * v.inner]);
      double s = 0.0;
      for (std::int64_t a = 0; a < v.n; ++a) s += std::exp(xv[base + a * v.inner] - m);
      const double lse = m + std::log(s);
      for (std::int64_t a = 0; a < v.n; ++a) {
        out[base + a * v.inner] = xv[base + a * v.inner] - lse;
      }
    }
  }
  NodeId id = push("log_softmax", {x}, std::move(out), nullptr);
  nodes_.back().backprop = [this, x, id, v](const Tensor& gout) {
    if (!node(x).needs_grad) return;
    Tensor& gx = grad_buf(x);
    const Tensor& L = value(id);
    for (std::int64_t o = 0; o < v.outer; ++o) {
      for (std::int64_t i = 0; i < v.inner; ++i) {
        const std::int64_t base = o * v.n * v.inner + i;
        double sum_g = 0.0;
        for (std::int64_t a = 0; a < v.n; ++a) sum_g += gout[base + a * v.inner];
        for (std::int64_t a = 0; a < v.n; ++a) {
          const std::int64_t k = base + a * v.inner;
          gx[k] += gout[k] - std::exp(L[k]) * sum_g;
        }
      }
    }
  };
  return id;
}

NodeId Graph::sum_all(NodeId x) {
  const Tensor& xv = value(x);
  double s = 0.0;
  for (std::int64_t i = 0; i < xv.numel(); ++i) s += xv[i];
  return push("sum_all", {x}, Tensor::scalar(s), [this, x](const Tensor& gout) {
    if (!node(x).needs_grad) return;
    Tensor& gx = grad_buf(x);
    const double g = gout[0];
    for (std::int64_t i = 0; i < gx.numel(); ++i) gx[i] += g;
  });
}

NodeId Graph::mean_axis(NodeId x, int axis) {
  const Tensor& xv = value(x);
  check_axis("mean_axis", xv, axis);
  const AxisView v = axis_view(xv.shape(), axis);
  std::vector<int> out_shape = xv.shape();
  out_shape.erase(out_shape.begin() + axis);
  if (out_shape.empty()) out_shape = {1};
  Tensor out(out_shape);
  const double inv = 1.0 / static_cast<double>(v.n);
  for (std::int64_t o = 0; o < v.outer; ++o) {
    for (std::int64_t i = 0; i < v.inner; ++i) {
      double s = 0.0;
      for (std::int64_t a = 0; a < v.n; ++a) s += xv[o * v.n * v.inner + a * v.inner + i];
      out[o * v.inner + i] = s * inv;
    }
  }
  return push("mean_axis", {x}, std::move(out), [this, x, v, inv](const Tensor& gout) {
    if (!node(x).needs_grad) return;
    Tensor& gx = grad_buf(x);
    for (std::int64_t o = 0; o < v.outer; ++o) {
      for (std::int64_t i = 0; i < v.inner; ++i) {
        const double g = gout[o * v.inner + i] * inv;
        for (std::int64_t a = 0; a < v.n; ++a) gx[o * v.n * v.inner + a * v.inner + i] += g;
      }
    }
  });
}

NodeId Graph::max_axis(NodeId x, int axis) {
  const Tensor& xv = value(x);
  check_axis("max_axis", xv, axis);
  const AxisView v = axis_view(xv.shape(), axis);
  std::vector<int> out_shape = xv.shape();
  out_shape.erase(out_shape.begin() + axis);
  if (out_shape.empty()) out_shape = {1};
  Tensor out(out_shape);
  // Ties route to the lowest index; stable and documented.
  auto argmax = std::make_shared<std::vector<std::int64_t>>(
      static_cast<std::size_t>(v.outer * v.inner));
  for (std::int64_t o = 0; o < v.outer; ++o) {
    for (std::int64_t i = 0; i < v.inner; ++i) {
      std::int64_t best = 0;
      double bv = xv[o * v.n * v.inner + i];
      for (std::int64_t a = 1; a < v.n; ++a) {
        const double cand = xv[o * v.n * v.inner + a * v.inner + i];
        if (cand > bv) {
          bv = cand;
          best = a;
        }
      }
      out[o * v.inner + i] = bv;
      (*argmax)[static_cast<std::size_t>(o * v.inner + i)] = best;
    }
  }
  return push("max_axis", {x}, std::move(out), [this, x, v, argmax](const Tensor& gout) {
    if (!node(x).needs_grad) return;
    Tensor& gx = grad_buf(x);
    for (std::int64_t o = 0; o < v.outer; ++o) {
      for (std::int64_t i = 0; i < v.inner; ++i) {
        const std::int64_t a = (*argmax)[static_cast<std::size_t>(o * v.inner + i)];
        gx[o * v.n * v.inner + a * v.inner + i] += gout[o * v.inner + i];
      }
    }
  });
}

NodeId Graph::concat(const std::vector<NodeId>& xs, int axis) {
  if (xs.empty()) throw ShapeError("concat: no inputs");
  const Tensor& first = value(xs[0]);
  check_axis("concat", first, axis);
  int total = 0;
  for (NodeId id : xs) {
    const Tensor& t = value(id);
    if (t.rank() != first.rank()) {
      throw ShapeError("concat: rank mismatch " + t.shape_str() + " vs " + first.shape_str());
    }
    for (int d = 0; d < first.rank(); ++d) {
      if (d != axis && t.dim(d) != first.dim(d)) {
        throw ShapeError("concat: shape mismatch " + t.shape_str() + " vs " + first.shape_str());
      }
    }
    total += t.dim(axis);
  }
  std::vector<int> out_shape = first.shape();
  out_shape[static_cast<std::size_t>(axis)] = total;
  Tensor out(out_shape);
  const AxisView ov = axis_view(out_shape, axis);
  std::vector<int> offsets;
  {
    int off = 0;
    for (NodeId id : xs) {
      offsets.push_back(off);
      const Tensor& t = value(id);
      const int dn = t.dim(axis);
      for (std::int64_t o = 0; o < ov.outer; ++o) {
        const double* src = t.data() + o * dn * ov.inner;
        double* dst = out.data() + (o * ov.n + off) * ov.inner;
        std::copy(src, src + dn * ov.inner, dst);
      }
      off += dn;
    }
  }
  auto parts = std::make_shared<std::vector<NodeId>>(xs);
  auto offs = std::make_shared<std::vector<int>>(std::move(offsets));
  return push("concat", xs, std::move(out), [this, parts, offs, ov, axis](const Tensor& gout) {
    for (std::size_t t = 0; t < parts->size(); ++t) {
      const NodeId id = (*parts)[t];
      if (!node(id).needs_grad) continue;
      Tensor& gx = grad_buf(id);
      const int dn = value(id).dim(axis);
      const int off = (*offs)[t];
      for (std::int64_t o = 0; o < ov.outer; ++o) {
        const double* src = gout.data() + (o * ov.n + off) * ov.inner;
        double* dst = gx.data() + o * dn * ov.inner;
        for (std::int64_t i = 0; i < dn * ov.inner; ++i) dst[i] += src[i];
      }
    }
  });
}

NodeId Graph::reshape(NodeId x, std::vector<int> shape) {
  const Tensor& xv = value(x);
  if (shape_numel(shape) != xv.numel()) {
    throw ShapeError("reshape: cannot view " + xv.shape_str() + " as " + shape_to_string(shape));
  }
  Tensor out(shape);
  std::copy(xv.data(), xv.data() + xv.numel(), out.data());
  return push("reshape", {x}, std::move(out), [this, x](const Tensor& gout) {
    if (!node(x).needs_grad) return;
    Tensor& gx = grad_buf(x);
    for (std::int64_t i = 0; i < gout.numel(); ++i) gx[i] += gout[i];
  });
}

namespace {

std::vector<std::int64_t> row_major_strides(const std::vector<int>& shape) {
  std::vector<std::int64_t> s(shape.size(), 1);
  for (int i = static_cast<int>(shape.size()) - 2; i >= 0; --i) {
    s[static_cast<std::size_t>(i)] =
        s[static_cast<std::size_t>(i) + 1] * shape[static_cast<std::size_t>(i) + 1];
  }
  return s;
}

}  // namespace

NodeId Graph::permute(NodeId x, std::vector<int> perm) {
  const Tensor& xv = value(x);
  if (static_cast<int>(perm.size()) != xv.rank()) {
    throw ShapeError("permute: permutation size " + std::to_string(perm.size()) +
                     " does not match rank of " + xv.shape_str());
  }
  std::vector<bool> seen(perm.size(), false);
  for (int p : perm) {
    if (p < 0 || p >= xv.rank() || seen[static_cast<std::size_t>(p)]) {
      throw ShapeError("permute: invalid permutation for shape " + xv.shape_str());
    }
    seen[static_cast<std::size_t>(p)] = true;
  }
  std::vector<int> out_shape(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) {
    out_shape[i] = xv.dim(perm[i]);
  }
  const auto in_strides = row_major_strides(xv.shape());
  // stride in the input for each output axis
  std::vector<std::int64_t> map_strides(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) {
    map_strides[i] = in_strides[static_cast<std::size_t>(perm[i])];
  }
  Tensor out(out_shape);
  const int r = xv.rank();
  std::vector<int> idx(static_cast<std::size_t>(r), 0);
  std::int64_t in_flat = 0;
  for (std::int64_t of = 0; of < out.numel(); ++of) {
    out[of] = xv[in_flat];
    // odometer increment over the output index
    for (int d = r - 1; d >= 0; --d) {
      idx[static_cast<std::size_t>(d)]++;
      in_flat += map_strides[static_cast<std::size_t>(d)];
      if (idx[static_cast<std::size_t>(d)] < out_shape[static_cast<std::size_t>(d)]) break;
      in_flat -= map_strides[static_cast<std::size_t>(d)] * out_shape[static_cast<std::size_t>(d)];
      idx[static_cast<std::size_t>(d)] = 0;
    }
  }
  auto strides = std::make_shared<std::vector<std::int64_t>>(std::move(map_strides));
  auto oshape = std::make_shared<std::vector<int>>(out_shape);
  return push("permute", {x}, std::move(out), [this, x, strides, oshape, r](const Tensor& gout) {
    if (!node(x).needs_grad) return;
    Tensor& gx = grad_buf(x);
    std::vector<int> idx2(static_cast<std::size_t>(r), 0);
    std::int64_t in_flat2 = 0;
    for (std::int64_t of = 0; of < gout.numel(); ++of) {
      gx[in_flat2] += gout[of];
      for (int d = r - 1; d >= 0; --d) {
        idx2[static_cast<std::size_t>(d)]++;
        in_flat2 += (*strides)[static_cast<std::size_t>(d)];
        if (idx2[static_cast<std::size_t>(d)] < (*oshape)[static_cast<std::size_t>(d)]) break;
        in_flat2 -= (*strides)[static_cast<std::size_t>(d)] * (*oshape)[static_cast<std::size_t>(d)];
        idx2[static_cast<std::size_t>(d)] = 0;
      }
    }
  });
}

NodeId Graph::expand_axis(NodeId x, int axis, int copies) {
  const Tensor& xv = value(x);
  if (axis < 0 || axis > xv.rank()) {
    throw ShapeError("expand_axis: axis " + std::to_string(axis) + " out of range for shape " +
                     xv.shape_str());
  }
  if (copies < 1) throw ShapeError("expand_axis: copies must be positive");
  std::vector<int> out_shape = xv.shape();
  out_shape.insert(out_shape.begin() + axis, copies);
  std::int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= xv.dim(i);
  for (int i = axis; i < xv.rank(); ++i) inner *= xv.dim(i);
  Tensor out(out_shape);
  for (std::int64_t o = 0; o < outer; ++o) {
    const double* src = xv.data() + o * inner;
    for (int rpt = 0; rpt < copies; ++rpt) {
      double* dst = out.data() + (o * copies + rpt) * inner;
      std::copy(src, src + inner, dst);
    }
  }
  return push("expand_axis", {x}, std::move(out),
              [this, x, outer, inner, copies](const Tensor& gout) {
                if (!node(x).needs_grad) return;
                Tensor& gx = grad_buf(x);
                for (std::int64_t o = 0; o < outer; ++o) {
                  double* dst = gx.data() + o * inner;
                  for (int rpt = 0; rpt < copies; ++rpt) {
                    const double* src = gout.data() + (o * copies + rpt) * inner;
                    for (std::int64_t i = 0; i < inner; ++i) dst[i] += src[i];
                  }
                }
              });
}

NodeId Graph::depthwise_conv1d(NodeId x, NodeId kernel, int stride) {
  const Tensor& xv = value(x);
  const Tensor& kv = value(kernel);
  if (xv.rank() != 3 || kv.rank() != 2 || xv.dim(2) != kv.dim(0)) {
    throw ShapeError("depthwise_conv1d: shape mismatch " + xv.shape_str() + " with kernel " +
                     kv.shape_str());
  }
  const int t_in = xv.dim(0), joints = xv.dim(1), ch = xv.dim(2), k = kv.dim(1);
  if (k % 2 == 0) throw ConfigError("depthwise_conv1d: kernel width must be odd, got " + std::to_string(k));
  if (k > t_in) {
    throw ConfigError("depthwise_conv1d: kernel width " + std::to_string(k) +
                      " exceeds input length " + std::to_string(t_in));
  }
  if (stride < 1) throw ConfigError("depthwise_conv1d: stride must be >= 1");
  const int pad = (k - 1) / 2;
  const int t_out = (t_in + 2 * pad - k) / stride + 1;
  Tensor out({t_out, joints, ch});
  for (int t = 0; t < t_out; ++t) {
    for (int u = 0; u < k; ++u) {
      const int ti = t * stride + u - pad;
      if (ti < 0 || ti >= t_in) continue;
      const double* xr = xv.data() + (static_cast<std::int64_t>(ti) * joints) * ch;
      double* orow = out.data() + (static_cast<std::int64_t>(t) * joints) * ch;
      for (int j = 0; j < joints; ++j) {
        for (int c = 0; c < ch; ++c) {
          orow[j * ch + c] += xr[j * ch + c] * kv[c * k + u];
        }
      }
    }
  }
  return push("depthwise_conv1d", {x, kernel}, std::move(out),
              [this, x, kernel, t_in, t_out, joints, ch, k, pad, stride](const Tensor& gout) {
                const bool gx_needed = node(x).needs_grad;
                const bool gk_needed = node(kernel).needs_grad;
                if (!gx_needed && !gk_needed) return;
                const Tensor& xv2 = value(x);
                const Tensor& kv2 = value(kernel);
                Tensor* gx = gx_needed ? &grad_buf(x) : nullptr;
                Tensor* gk = gk_needed ? &grad_buf(kernel) : nullptr;
                for (int t = 0; t < t_out; ++t) {
                  for (int u = 0; u < k; ++u) {
                    const int ti = t * stride + u - pad;
                    if (ti < 0 || ti >= t_in) continue;
                    for (int j = 0; j < joints; ++j) {
                      const std::int64_t go = (static_cast<std::int64_t>(t) * joints + j) * ch;
                      const std::int64_t xo = (static_cast<std::int64_t>(ti) * joints + j) * ch;
                      for (int c = 0; c < ch; ++c) {
                        const double g = gout[go + c];
                        if (gx) (*gx)[xo + c] += g * kv2[c * k + u];
                        if (gk) (*gk)[c * k + u] += g * xv2[xo + c];
                      }
                    }
                  }
                }
              });
}

NodeId Graph::pointwise_conv(NodeId x, NodeId weights) {
  // dims copied up front: pushing nodes below may reallocate nodes_
  const Tensor& xv = value(x);
  const Tensor& wv = value(weights);
  if (xv.rank() != 3 || wv.rank() != 2 || xv.dim(2) != wv.dim(0)) {
    throw ShapeError("pointwise_conv: shape mismatch " + xv.shape_str() + " with weights " +
                     wv.shape_str());
  }
  const int t = xv.dim(0), j = xv.dim(1), c = xv.dim(2), c_out = wv.dim(1);
  NodeId flat = reshape(x, {t * j, c});
  NodeId mixed = matmul(flat, weights);
  return reshape(mixed, {t, j, c_out});
}

NodeId Graph::overlap_avg_pool(NodeId x, int kernel, int stride) {
  const Tensor& xv = value(x);
  if (xv.rank() != 2) {
    throw ShapeError("overlap_avg_pool: expected a rank-2 input, got " + xv.shape_str());
  }
  const int t_in = xv.dim(0), ch = xv.dim(1);
  if (kernel > t_in) {
    throw ConfigError("overlap_avg_pool: kernel " + std::to_string(kernel) +
                      " exceeds input length " + std::to_string(t_in));
  }
  if (stride < 1 || stride >= kernel) {
    throw ConfigError("overlap_avg_pool: stride " + std::to_string(stride) +
                      " must be in [1, kernel) with kernel " + std::to_string(kernel));
  }
  const int len = (t_in - kernel) / stride + 1;
  Tensor out({len, ch});
  const double inv = 1.0 / static_cast<double>(kernel);
  for (int l = 0; l < len; ++l) {
    for (int u = 0; u < kernel; ++u) {
      const double* xr = xv.data() + static_cast<std::int64_t>(l * stride + u) * ch;
      double* orow = out.data() + static_cast<std::int64_t>(l) * ch;
      for (int c = 0; c < ch; ++c) orow[c] += xr[c];
    }
    double* orow = out.data() + static_cast<std::int64_t>(l) * ch;
    for (int c = 0; c < ch; ++c) orow[c] *= inv;
  }
  return push("overlap_avg_pool", {x}, std::move(out),
              [this, x, len, ch, kernel, stride, inv](const Tensor& gout) {
                if (!node(x).needs_grad) return;
                Tensor& gx = grad_buf(x);
                for (int l = 0; l < len; ++l) {
                  const double* grow = gout.data() + static_cast<std::int64_t>(l) * ch;
                  for (int u = 0; u < kernel; ++u) {
                    double* gr = gx.data() + static_cast<std::int64_t>(l * stride + u) * ch;
                    for (int c = 0; c < ch; ++c) gr[c] += grow[c] * inv;
                  }
                }
              });
}

NodeId Graph::global_max_pool(NodeId x) {
  const Tensor& xv = value(x);
  if (xv.rank() != 2) {
    throw ShapeError("global_max_pool: expected a rank-2 input, got " + xv.shape_str());
  }
  return max_axis(x, 0);
}

NodeId Graph::temporal_difference(NodeId x, int axis) {
  const Tensor& xv = value(x);
  check_axis("temporal_difference", xv, axis);
  const AxisView v = axis_view(xv.shape(), axis);
  if (v.n < 2) {
    throw DegenerateInputError(
        "temporal_difference: need at least 2 steps along axis, got " + std::to_string(v.n));
  }
  std::vector<int> out_shape = xv.shape();
  out_shape[static_cast<std::size_t>(axis)] = static_cast<int>(v.n) - 1;
  Tensor out(out_shape);
  for (std::int64_t o = 0; o < v.outer; ++o) {
    for (std::int64_t a = 0; a + 1 < v.n; ++a) {
      for (std::int64_t i = 0; i < v.inner; ++i) {
        out[(o * (v.n - 1) + a) * v.inner + i] =
            xv[(o * v.n + a + 1) * v.inner + i] - xv[(o * v.n + a) * v.inner + i];
      }
    }
  }
  return push("temporal_difference", {x}, std::move(out), [this, x, v](const Tensor& gout) {
    if (!node(x).needs_grad) return;
    Tensor& gx = grad_buf(x);
    for (std::int64_t o = 0; o < v.outer; ++o) {
      for (std::int64_t a = 0; a + 1 < v.n; ++a) {
        for (std::int64_t i = 0; i < v.inner; ++i) {
          const double g = gout[(o * (v.n - 1) + a) * v.inner + i];
          gx[(o * v.n + a + 1) * v.inner + i] += g;
          gx[(o * v.n + a) * v.inner + i] -= g;
        }
      }
    }
  });
}

NodeId Graph::quantile_mask(NodeId x, double q) {
  const Tensor& xv = value(x);
  if (q < 0.0 || q >= 1.0) {
    throw ConfigError("quantile_mask: q must be in [0,1), got " + std::to_string(q));
  }
  if (!xv.all_finite()) throw NumericError("quantile_mask: input contains NaN/Inf");
  Tensor mask(xv.shape());
  if (mask_replay_ != nullptr) {
    if (mask_replay_pos_ >= mask_replay_->size() ||
        !(*mask_replay_)[mask_replay_pos_].same_shape(xv)) {
      throw ShapeError("quantile_mask: replay tape does not match graph structure");
    }
    mask = (*mask_replay_)[mask_replay_pos_++];
  } else {
    std::vector<double> sorted(xv.data(), xv.data() + xv.numel());
    std::sort(sorted.begin(), sorted.end());
    const auto idx = static_cast<std::size_t>(
        std::floor(q * static_cast<double>(xv.numel())));
    const double threshold = sorted[idx];
    for (std::int64_t i = 0; i < xv.numel(); ++i) {
      mask[i] = xv[i] < threshold ? 0.0 : 1.0;
    }
  }
  if (mask_record_ != nullptr) mask_record_->push_back(mask);
  // Constant in gradient computation: no backprop and no grad requirement.
  Node n;
  n.op = "quantile_mask";
  n.inputs = {x};
  n.value = std::move(mask);
  n.needs_grad = false;
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size()) - 1;
}

void Graph::backward(NodeId loss) {
  const Tensor& lv = value(loss);
  if (lv.numel() != 1) {
    throw ShapeError("backward: loss must be a scalar, got shape " + lv.shape_str());
  }
  grads_.assign(nodes_.size(), Tensor());
  grad_buf(loss)[0] = 1.0;
  for (NodeId id = loss; id >= 0; --id) {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    if (grads_[static_cast<std::size_t>(id)].empty()) continue;
    if (!n.needs_grad || !n.backprop) continue;
    n.backprop(grads_[static_cast<std::size_t>(id)]);
  }
}

Tensor Graph::grad(NodeId id) const {
  if (static_cast<std::size_t>(id) < grads_.size() &&
      !grads_[static_cast<std::size_t>(id)].empty()) {
    return grads_[static_cast<std::size_t>(id)];
  }
  return Tensor::zeros(node(id).value.shape());
}

std::optional<NodeId> Graph::first_nonfinite() const {
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (!nodes_[i].value.all_finite()) return static_cast<NodeId>(i);
  }
  return std::nullopt;
}

}  // namespace aqa
