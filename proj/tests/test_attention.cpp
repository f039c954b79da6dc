#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "aqa/attention.hpp"
#include "aqa/model.hpp"
#include "test_util.hpp"

using namespace aqa;
using aqatest::random_tensor;

namespace {

NlaParams rand_nla(int c, int ce, Pairwise pw, SeededRng& rng) {
  NlaParams p = make_nla_params(c, ce, pw);
  for (Tensor* t : {&p.w_theta, &p.w_phi, &p.w_g, &p.w_out}) {
    for (std::int64_t i = 0; i < t->numel(); ++i) (*t)[i] = rng.uniform(-0.7, 0.7);
  }
  for (std::int64_t i = 0; i < p.w_cat.numel(); ++i) p.w_cat[i] = rng.uniform(-0.7, 0.7);
  return p;
}

BoundNla bind_nla(Graph& g, const NlaParams& p) {
  BoundNla b;
  b.w_theta = g.param(p.w_theta);
  b.w_phi = g.param(p.w_phi);
  b.w_g = g.param(p.w_g);
  b.w_out = g.param(p.w_out);
  if (p.w_cat.numel() > 0) b.w_cat = g.param(p.w_cat);
  b.pairwise = p.pairwise;
  return b;
}

Tensor embed(const Tensor& x, const Tensor& w) {
  const int n = x.dim(0), c = x.dim(1), ce = w.dim(1);
  Tensor e({n, ce});
  for (int i = 0; i < n; ++i) {
    for (int a = 0; a < ce; ++a) {
      double acc = 0.0;
      for (int b = 0; b < c; ++b) acc += x.at({i, b}) * w.at({b, a});
      e.at({i, a}) = acc;
    }
  }
  return e;
}

// Plain double-loop evaluation of the normalized weighted-sum attention:
// y_i = (1/C(x)) sum_j f(x_i,x_j) g(x_j), z = y W_out + x.
Tensor nla_oracle(const Tensor& x, const NlaParams& p) {
  const int n = x.dim(0), c = x.dim(1), ce = p.w_theta.dim(1);
  const Tensor th = embed(x, p.w_theta);
  const Tensor ph = embed(x, p.w_phi);
  const Tensor ge = embed(x, p.w_g);
  Tensor y({n, ce});
  if (p.pairwise == Pairwise::embedded_gaussian) {
    for (int i = 0; i < n; ++i) {
      std::vector<double> f(static_cast<std::size_t>(n));
      double norm = 0.0;
      for (int j = 0; j < n; ++j) {
        double dot = 0.0;
        for (int a = 0; a < ce; ++a) dot += th.at({i, a}) * ph.at({j, a});
        f[static_cast<std::size_t>(j)] = std::exp(dot);
        norm += f[static_cast<std::size_t>(j)];
      }
      for (int j = 0; j < n; ++j) {
        for (int a = 0; a < ce; ++a) {
          y.at({i, a}) += f[static_cast<std::size_t>(j)] / norm * ge.at({j, a});
        }
      }
    }
  } else {
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        double s = 0.0;
        for (int a = 0; a < ce; ++a) s += p.w_cat[a] * th.at({i, a});
        for (int a = 0; a < ce; ++a) s += p.w_cat[ce + a] * ph.at({j, a});
        const double f = s > 0.0 ? s : 0.0;
        for (int a = 0; a < ce; ++a) y.at({i, a}) += f * ge.at({j, a});
      }
      for (int a = 0; a < ce; ++a) y.at({i, a}) /= n;
    }
  }
  Tensor z({n, c});
  for (int i = 0; i < n; ++i) {
    for (int b = 0; b < c; ++b) {
      double acc = x.at({i, b});
      for (int a = 0; a < ce; ++a) acc += y.at({i, a}) * p.w_out.at({a, b});
      z.at({i, b}) = acc;
    }
  }
  return z;
}

int flat_pos(const FeatureLayout& l, int clip, int t, int j) {
  return (clip * l.frames + t) * l.joints + j;
}

// Independent re-implementation of the motion branch fused before W_out:
// difference consecutive frames of the g-embedding, sort-based quantile
// mask, encode, mean over time, broadcast, add to the attention output.
Tensor dnla_mu_oracle(const Tensor& x, const NlaParams& p, const Tensor& wm, double q,
                      const FeatureLayout& layout) {
  const int n = x.dim(0), c = x.dim(1), ce = p.w_theta.dim(1);
  const Tensor th = embed(x, p.w_theta);
  const Tensor ph = embed(x, p.w_phi);
  const Tensor ge = embed(x, p.w_g);
  Tensor y({n, ce});
  if (p.pairwise == Pairwise::embedded_gaussian) {
    for (int i = 0; i < n; ++i) {
      std::vector<double> f(static_cast<std::size_t>(n));
      double norm = 0.0;
      for (int j = 0; j < n; ++j) {
        double dot = 0.0;
        for (int a = 0; a < ce; ++a) dot += th.at({i, a}) * ph.at({j, a});
        f[static_cast<std::size_t>(j)] = std::exp(dot);
        norm += f[static_cast<std::size_t>(j)];
      }
      for (int j = 0; j < n; ++j) {
        for (int a = 0; a < ce; ++a) {
          y.at({i, a}) += f[static_cast<std::size_t>(j)] / norm * ge.at({j, a});
        }
      }
    }
  } else {
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        double s = 0.0;
        for (int a = 0; a < ce; ++a) s += p.w_cat[a] * th.at({i, a});
        for (int a = 0; a < ce; ++a) s += p.w_cat[ce + a] * ph.at({j, a});
        const double f = s > 0.0 ? s : 0.0;
        for (int a = 0; a < ce; ++a) y.at({i, a}) += f * ge.at({j, a});
      }
      for (int a = 0; a < ce; ++a) y.at({i, a}) /= n;
    }
  }

  const int clips = layout.clips, frames = layout.frames, joints = layout.joints;
  std::vector<double> diff(static_cast<std::size_t>(clips * (frames - 1) * joints * ce));
  std::size_t k = 0;
  for (int cl = 0; cl < clips; ++cl) {
    for (int t = 0; t + 1 < frames; ++t) {
      for (int j = 0; j < joints; ++j) {
        for (int a = 0; a < ce; ++a) {
          diff[k++] = ge.at({flat_pos(layout, cl, t + 1, j), a}) -
                      ge.at({flat_pos(layout, cl, t, j), a});
        }
      }
    }
  }
  std::vector<double> sorted = diff;
  std::sort(sorted.begin(), sorted.end());
  const double thr = sorted[static_cast<std::size_t>(std::floor(q * sorted.size()))];
  for (double& v : diff) {
    if (v < thr) v = 0.0;
  }
  // encode + mean over time, then broadcast into y
  k = 0;
  std::vector<double> pooled(static_cast<std::size_t>(clips * joints * ce), 0.0);
  for (int cl = 0; cl < clips; ++cl) {
    for (int t = 0; t + 1 < frames; ++t) {
      for (int j = 0; j < joints; ++j) {
        for (int a = 0; a < ce; ++a) {
          double acc = 0.0;
          for (int b = 0; b < ce; ++b) {
            acc += diff[k + static_cast<std::size_t>(b)] * wm.at({b, a});
          }
          if (acc < 0.0) acc = 0.0;
          pooled[static_cast<std::size_t>((cl * joints + j) * ce + a)] += acc / (frames - 1);
        }
        k += static_cast<std::size_t>(ce);
      }
    }
  }
  for (int cl = 0; cl < clips; ++cl) {
    for (int t = 0; t < frames; ++t) {
      for (int j = 0; j < joints; ++j) {
        for (int a = 0; a < ce; ++a) {
          y.at({flat_pos(layout, cl, t, j), a}) +=
              pooled[static_cast<std::size_t>((cl * joints + j) * ce + a)];
        }
      }
    }
  }

  Tensor z({n, c});
  for (int i = 0; i < n; ++i) {
    for (int b = 0; b < c; ++b) {
      double acc = x.at({i, b});
      for (int a = 0; a < ce; ++a) acc += y.at({i, a}) * p.w_out.at({a, b});
      z.at({i, b}) = acc;
    }
  }
  return z;
}

// Per-axis oracle: one attention pass over joints within each frame, one
// over frames within each trajectory, both deltas added to x.
Tensor dnla_delta_oracle(const Tensor& x, const DeltaHeads& heads, const FeatureLayout& layout) {
  const int n = x.dim(0), c = x.dim(1);
  Tensor z = x;
  auto head_pass = [&](const NlaParams& p, bool spatial) {
    const int ce = p.w_theta.dim(1);
    const Tensor th = embed(x, p.w_theta);
    const Tensor ph = embed(x, p.w_phi);
    const Tensor ge = embed(x, p.w_g);
    Tensor y({n, ce});
    const int groups = spatial ? layout.clips * layout.frames : layout.clips * layout.joints;
    const int glen = spatial ? layout.joints : layout.frames;
    for (int grp = 0; grp < groups; ++grp) {
      std::vector<int> pos(static_cast<std::size_t>(glen));
      for (int m = 0; m < glen; ++m) {
        if (spatial) {
          const int cl = grp / layout.frames, t = grp % layout.frames;
          pos[static_cast<std::size_t>(m)] = flat_pos(layout, cl, t, m);
        } else {
          const int cl = grp / layout.joints, j = grp % layout.joints;
          pos[static_cast<std::size_t>(m)] = flat_pos(layout, cl, m, j);
        }
      }
      for (int mi = 0; mi < glen; ++mi) {
        std::vector<double> f(static_cast<std::size_t>(glen));
        double norm = 0.0;
        for (int mj = 0; mj < glen; ++mj) {
          double dot = 0.0;
          for (int a = 0; a < ce; ++a) {
            dot += th.at({pos[static_cast<std::size_t>(mi)], a}) *
                   ph.at({pos[static_cast<std::size_t>(mj)], a});
          }
          f[static_cast<std::size_t>(mj)] = std::exp(dot);
          norm += f[static_cast<std::size_t>(mj)];
        }
        for (int mj = 0; mj < glen; ++mj) {
          for (int a = 0; a < ce; ++a) {
            y.at({pos[static_cast<std::size_t>(mi)], a}) +=
                f[static_cast<std::size_t>(mj)] / norm * ge.at({pos[static_cast<std::size_t>(mj)], a});
          }
        }
      }
    }
    for (int i = 0; i < n; ++i) {
      for (int b = 0; b < c; ++b) {
        double acc = 0.0;
        for (int a = 0; a < ce; ++a) acc += y.at({i, a}) * p.w_out.at({a, b});
        z.at({i, b}) += acc;
      }
    }
  };
  head_pass(heads.spatial, true);
  head_pass(heads.temporal, false);
  return z;
}

std::vector<double> vfd_oracle(const Tensor& x, int kernel, int stride) {
  const int n = x.dim(0), c = x.dim(1);
  const int len = (n - kernel) / stride + 1;
  std::vector<double> out(static_cast<std::size_t>(c * (len + 1)));
  for (int ch = 0; ch < c; ++ch) {
    for (int l = 0; l < len; ++l) {
      double acc = 0.0;
      for (int u = 0; u < kernel; ++u) acc += x.at({l * stride + u, ch});
      out[static_cast<std::size_t>(ch * (len + 1) + l)] = acc / kernel;
    }
    double mx = x.at({0, ch});
    for (int i = 1; i < n; ++i) mx = std::max(mx, x.at({i, ch}));
    out[static_cast<std::size_t>(ch * (len + 1) + len)] = mx;
  }
  return out;
}

}  // namespace

TEST_CASE("nla_forward matches the double-loop oracle, both pairwise functions") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    SeededRng rng(1000 + seed);
    const int n = 2 + rng.uniform_int(9);  // <= 10
    const int c = 2 + rng.uniform_int(7);  // <= 8
    const int ce = std::max(1, c / 2);
    const Tensor x = random_tensor({n, c}, rng);
    for (Pairwise pw : {Pairwise::embedded_gaussian, Pairwise::concat}) {
      const NlaParams p = rand_nla(c, ce, pw, rng);
      Graph g;
      FeatureNode fx{g.input(x), {1, n, 1, c}};
      FeatureNode out = nla_forward(g, fx, bind_nla(g, p));
      const Tensor expected = nla_oracle(x, p);
      for (std::int64_t i = 0; i < expected.numel(); ++i) {
        CHECK(std::abs(g.value(out.node)[i] - expected[i]) < 1e-12);
      }
    }
  }
}

TEST_CASE("nla_forward trivial cases") {
  SeededRng rng(41);

  SUBCASE("identical rows attend uniformly and stay identical") {
    const int n = 6, c = 4;
    Tensor x({n, c});
    for (int i = 0; i < n; ++i) {
      for (int b = 0; b < c; ++b) x.at({i, b}) = 0.3 * b - 0.5;
    }
    const NlaParams p = rand_nla(c, 2, Pairwise::embedded_gaussian, rng);
    Graph g;
    FeatureNode out = nla_forward(g, {g.input(x), {1, n, 1, c}}, bind_nla(g, p));
    for (int i = 1; i < n; ++i) {
      for (int b = 0; b < c; ++b) {
        CHECK(g.value(out.node).at({i, b}) == g.value(out.node).at({0, b}));
      }
    }
  }

  SUBCASE("single position reduces to a linear path plus residual") {
    const int c = 5, ce = 2;
    const Tensor x = random_tensor({1, c}, rng);
    const NlaParams p = rand_nla(c, ce, Pairwise::embedded_gaussian, rng);
    Graph g;
    FeatureNode out = nla_forward(g, {g.input(x), {1, 1, 1, c}}, bind_nla(g, p));
    for (int b = 0; b < c; ++b) {
      double acc = x.at({0, b});
      for (int a = 0; a < ce; ++a) {
        double gea = 0.0;
        for (int bb = 0; bb < c; ++bb) gea += x.at({0, bb}) * p.w_g.at({bb, a});
        acc += gea * p.w_out.at({a, b});
      }
      CHECK(std::abs(g.value(out.node).at({0, b}) - acc) < 1e-12);
    }
  }
}

TEST_CASE("embedded-Gaussian attention rows sum to 1 and lie in (0,1)") {
  SeededRng rng(42);
  const int n = 40, c = 8, ce = 4;
  const Tensor x = random_tensor({n, c}, rng);
  const NlaParams p = rand_nla(c, ce, Pairwise::embedded_gaussian, rng);
  Graph g;
  NodeId th = g.matmul(g.input(x), g.input(p.w_theta));
  NodeId ph = g.matmul(g.input(x), g.input(p.w_phi));
  NodeId att = g.softmax(g.matmul(th, g.permute(ph, {1, 0})), 1);
  for (int i = 0; i < n; ++i) {
    double s = 0.0;
    for (int j = 0; j < n; ++j) {
      const double a = g.value(att).at({i, j});
      CHECK(a > 0.0);
      CHECK(a < 1.0);
      s += a;
    }
    CHECK(std::abs(s - 1.0) < 1e-9);
  }
}

TEST_CASE("nla_forward is permutation-equivariant (embedded Gaussian)") {
  SeededRng rng(43);
  const int n = 12, c = 6, ce = 3;
  const Tensor x = random_tensor({n, c}, rng);
  const NlaParams p = rand_nla(c, ce, Pairwise::embedded_gaussian, rng);

  Graph g;
  FeatureNode base = nla_forward(g, {g.input(x), {1, n, 1, c}}, bind_nla(g, p));

  for (int trial = 0; trial < 5; ++trial) {
    std::vector<int> perm(n);
    for (int i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
    for (int i = n; i > 1; --i) {
      std::swap(perm[static_cast<std::size_t>(i - 1)],
                perm[static_cast<std::size_t>(rng.uniform_int(i))]);
    }
    Tensor px({n, c});
    for (int i = 0; i < n; ++i) {
      for (int b = 0; b < c; ++b) px.at({i, b}) = x.at({perm[static_cast<std::size_t>(i)], b});
    }
    Graph g2;
    FeatureNode got = nla_forward(g2, {g2.input(px), {1, n, 1, c}}, bind_nla(g2, p));
    for (int i = 0; i < n; ++i) {
      for (int b = 0; b < c; ++b) {
        CHECK(std::abs(g2.value(got.node).at({i, b}) -
                       g.value(base.node).at({perm[static_cast<std::size_t>(i)], b})) < 1e-12);
      }
    }
  }
}

TEST_CASE("dnla_mu_forward") {
  SeededRng rng(44);
  const FeatureLayout layout{2, 4, 3, 6};  // 24 positions, 6 channels
  const int n = layout.positions(), c = layout.channels, ce = 3;

  SUBCASE("time-constant input collapses to nla_forward bitwise") {
    Tensor x({n, c});
    for (int cl = 0; cl < layout.clips; ++cl) {
      for (int t = 0; t < layout.frames; ++t) {
        for (int j = 0; j < layout.joints; ++j) {
          for (int b = 0; b < c; ++b) {
            x.at({flat_pos(layout, cl, t, j), b}) = 0.1 * cl + 0.05 * j + 0.01 * b;
          }
        }
      }
    }
    const NlaParams p = rand_nla(c, ce, Pairwise::embedded_gaussian, rng);
    Tensor wm = random_tensor({ce, ce}, rng);

    Graph g1;
    FeatureNode plain = nla_forward(g1, {g1.input(x), layout}, bind_nla(g1, p));
    Graph g2;
    BoundMotion m{g2.param(wm), 0.25};
    FeatureNode gated = dnla_mu_forward(g2, {g2.input(x), layout}, bind_nla(g2, p), m);
    for (std::int64_t i = 0; i < g1.value(plain.node).numel(); ++i) {
      CHECK(g1.value(plain.node)[i] == g2.value(gated.node)[i]);
    }
  }

  SUBCASE("q=0 equals the unmasked branch bitwise") {
    const Tensor x = random_tensor({n, c}, rng);
    const NlaParams p = rand_nla(c, ce, Pairwise::embedded_gaussian, rng);
    const Tensor wm = random_tensor({ce, ce}, rng);

    Graph g;
    BoundMotion m{g.param(wm), 0.0};
    FeatureNode out = dnla_mu_forward(g, {g.input(x), layout}, bind_nla(g, p), m);

    // replica without the mask node
    Graph r;
    BoundNla b = bind_nla(r, p);
    NodeId xn = r.input(x);
    NodeId th = r.matmul(xn, b.w_theta);
    NodeId ph = r.matmul(xn, b.w_phi);
    NodeId ge = r.matmul(xn, b.w_g);
    NodeId att = r.softmax(r.matmul(th, r.permute(ph, {1, 0})), 1);
    NodeId y = r.matmul(att, ge);
    NodeId g4 = r.reshape(ge, {layout.clips, layout.frames, layout.joints, ce});
    NodeId d = r.temporal_difference(g4, 1);
    NodeId enc = r.relu(r.reshape(
        r.matmul(r.reshape(d, {layout.clips * (layout.frames - 1) * layout.joints, ce}),
                 r.param(wm)),
        {layout.clips, layout.frames - 1, layout.joints, ce}));
    NodeId pooled = r.mean_axis(enc, 1);
    NodeId spread = r.expand_axis(pooled, 1, layout.frames);
    NodeId branch = r.reshape(spread, {n, ce});
    NodeId z = r.add(r.matmul(r.add(y, branch), b.w_out), xn);
    for (std::int64_t i = 0; i < g.value(out.node).numel(); ++i) {
      CHECK(g.value(out.node)[i] == r.value(z)[i]);
    }
  }

  SUBCASE("random input matches the composition oracle, both pairwise functions") {
    for (Pairwise pw : {Pairwise::embedded_gaussian, Pairwise::concat}) {
      const Tensor x = random_tensor({n, c}, rng);
      const NlaParams p = rand_nla(c, ce, pw, rng);
      const Tensor wm = random_tensor({ce, ce}, rng);
      Graph g;
      BoundMotion m{g.param(wm), 0.25};
      FeatureNode out = dnla_mu_forward(g, {g.input(x), layout}, bind_nla(g, p), m);
      const Tensor expected = dnla_mu_oracle(x, p, wm, 0.25, layout);
      for (std::int64_t i = 0; i < expected.numel(); ++i) {
        CHECK(std::abs(g.value(out.node)[i] - expected[i]) < 1e-12);
      }
    }
  }

  SUBCASE("single-frame layout is degenerate") {
    const FeatureLayout flat{2, 1, 3, 6};
    const Tensor x = random_tensor({flat.positions(), c}, rng);
    const NlaParams p = rand_nla(c, ce, Pairwise::embedded_gaussian, rng);
    const Tensor wm = random_tensor({ce, ce}, rng);
    Graph g;
    BoundMotion m{g.param(wm), 0.25};
    CHECK_THROWS_AS(dnla_mu_forward(g, {g.input(x), flat}, bind_nla(g, p), m),
                    DegenerateInputError);
  }
}

TEST_CASE("dnla_delta_forward") {
  SeededRng rng(45);
  const FeatureLayout layout{2, 3, 4, 6};
  const int n = layout.positions(), c = layout.channels, ce = 3;

  auto rand_heads = [&]() {
    DeltaHeads h;
    h.spatial = rand_nla(c, ce, Pairwise::embedded_gaussian, rng);
    h.temporal = rand_nla(c, ce, Pairwise::embedded_gaussian, rng);
    return h;
  };

  auto bind_heads = [](Graph& g, const DeltaHeads& h) {
    BoundDelta b;
    b.spatial = bind_nla(g, h.spatial);
    b.temporal = bind_nla(g, h.temporal);
    return b;
  };

  SUBCASE("zero input maps to zero") {
    const DeltaHeads h = rand_heads();
    Graph g;
    FeatureNode out = dnla_delta_forward(g, {g.input(Tensor({n, c})), layout}, bind_heads(g, h));
    for (std::int64_t i = 0; i < g.value(out.node).numel(); ++i) {
      CHECK(g.value(out.node)[i] == 0.0);
    }
  }

  SUBCASE("random input matches the per-axis oracle") {
    const DeltaHeads h = rand_heads();
    const Tensor x = random_tensor({n, c}, rng);
    Graph g;
    FeatureNode out = dnla_delta_forward(g, {g.input(x), layout}, bind_heads(g, h));
    const Tensor expected = dnla_delta_oracle(x, h, layout);
    for (std::int64_t i = 0; i < expected.numel(); ++i) {
      CHECK(std::abs(g.value(out.node)[i] - expected[i]) < 1e-12);
    }
  }

  SUBCASE("single-frame layout: temporal head degenerates to its linear path") {
    const FeatureLayout flat{2, 1, 4, 6};
    const DeltaHeads h = rand_heads();
    const Tensor x = random_tensor({flat.positions(), c}, rng);
    Graph g;
    FeatureNode out = dnla_delta_forward(g, {g.input(x), flat}, bind_heads(g, h));
    const Tensor expected = dnla_delta_oracle(x, h, flat);
    for (std::int64_t i = 0; i < expected.numel(); ++i) {
      CHECK(std::abs(g.value(out.node)[i] - expected[i]) < 1e-12);
    }
    // with one frame the temporal attention is the 1x1 identity distribution,
    // so the temporal delta is exactly (x W_g) W_out
    Graph lin;
    NodeId tlin = lin.matmul(lin.matmul(lin.input(x), lin.input(h.temporal.w_g)),
                             lin.input(h.temporal.w_out));
    Graph sp;
    BoundDelta bd;
    bd.spatial = bind_nla(sp, h.spatial);
    bd.temporal = bind_nla(sp, h.temporal);
    // subtract the spatial-only output to isolate the temporal delta
    FeatureNode with_both = dnla_delta_forward(sp, {sp.input(x), flat}, bd);
    const Tensor spatial_only = [&]() {
      DeltaHeads zeroed = h;
      zeroed.temporal.w_out = Tensor({ce, c});
      Graph g2;
      BoundDelta b2;
      b2.spatial = bind_nla(g2, zeroed.spatial);
      b2.temporal = bind_nla(g2, zeroed.temporal);
      FeatureNode o = dnla_delta_forward(g2, {g2.input(x), flat}, b2);
      return g2.value(o.node);
    }();
    for (std::int64_t i = 0; i < spatial_only.numel(); ++i) {
      CHECK(std::abs(sp.value(with_both.node)[i] - spatial_only[i] - lin.value(tlin)[i]) < 1e-12);
    }
  }
}

TEST_CASE("vfd_forward") {
  SeededRng rng(46);

  SUBCASE("constant input pools to the constant everywhere") {
    Graph g;
    const VfdConfig cfg = make_vfd_config(4, 2, 12);
    NodeId out = vfd_forward(g, g.input(Tensor::full({12, 3}, 2.5)), cfg);
    for (std::int64_t i = 0; i < g.value(out).numel(); ++i) CHECK(g.value(out)[i] == 2.5);
  }

  SUBCASE("C=2, L=4 gives a vector of length 10") {
    Graph g;
    const VfdConfig cfg = make_vfd_config(4, 2, 10);
    CHECK(cfg.out_len == 4);
    NodeId out = vfd_forward(g, g.input(random_tensor({10, 2}, rng)), cfg);
    CHECK(g.value(out).shape() == std::vector<int>{10});
    CHECK(distill_output_length(2, cfg) == 10);
  }

  SUBCASE("random input matches the pool+max+concat oracle") {
    const Tensor x = random_tensor({30, 5}, rng);
    const VfdConfig cfg = make_vfd_config(8, 4, 30);
    Graph g;
    NodeId out = vfd_forward(g, g.input(x), cfg);
    const std::vector<double> expected = vfd_oracle(x, 8, 4);
    REQUIRE(g.value(out).numel() == static_cast<std::int64_t>(expected.size()));
    for (std::size_t i = 0; i < expected.size(); ++i) {
      CHECK(std::abs(g.value(out)[static_cast<std::int64_t>(i)] - expected[i]) < 1e-12);
    }
  }

  SUBCASE("too few positions is a configuration error") {
    Graph g;
    const VfdConfig cfg{16, 8, 0};
    CHECK_THROWS_AS(vfd_forward(g, g.input(Tensor({8, 2})), cfg), ConfigError);
    CHECK_THROWS_AS(make_vfd_config(16, 8, 8), ConfigError);
    CHECK_THROWS_AS(make_vfd_config(4, 4, 100), ConfigError);
  }
}

TEST_CASE("distill") {
  SeededRng rng(47);
  const FeatureLayout layout{kClipCount, 4, kNumJoints, 8};
  const int n = layout.positions(), c = layout.channels, ce = 4;
  const VfdConfig cfg = make_vfd_config(100, 50, n);

  const NlaParams nla_emb = rand_nla(c, ce, Pairwise::embedded_gaussian, rng);
  const NlaParams nla_cat = rand_nla(c, ce, Pairwise::concat, rng);
  const Tensor wm = random_tensor({ce, ce}, rng);
  DeltaHeads heads;
  heads.spatial = rand_nla(c, ce, Pairwise::embedded_gaussian, rng);
  heads.temporal = rand_nla(c, ce, Pairwise::embedded_gaussian, rng);

  auto run_mode = [&](DistillMode mode, const Tensor& x) {
    Graph g;
    BoundAttention att;
    if (mode_uses_nla(mode)) {
      att.nla = bind_nla(g, mode_pairwise(mode) == Pairwise::concat ? nla_cat : nla_emb);
    }
    if (mode_uses_motion(mode)) att.motion = {g.param(wm), 0.25};
    if (mode_uses_delta(mode)) {
      att.delta.spatial = bind_nla(g, heads.spatial);
      att.delta.temporal = bind_nla(g, heads.temporal);
    }
    NodeId out = distill(g, {g.input(x), layout}, mode, att, cfg);
    return g.value(out);
  };

  SUBCASE("mode=vfd is vfd_forward") {
    const Tensor x = random_tensor({n, c}, rng);
    const Tensor via_mode = run_mode(DistillMode::vfd, x);
    Graph g;
    NodeId direct = vfd_forward(g, g.input(x), cfg);
    REQUIRE(via_mode.numel() == g.value(direct).numel());
    for (std::int64_t i = 0; i < via_mode.numel(); ++i) CHECK(via_mode[i] == g.value(direct)[i]);
  }

  SUBCASE("motion-gated mode on time-constant input equals the plain attention mode") {
    Tensor x({n, c});
    for (int cl = 0; cl < layout.clips; ++cl) {
      for (int t = 0; t < layout.frames; ++t) {
        for (int j = 0; j < layout.joints; ++j) {
          for (int b = 0; b < c; ++b) {
            x.at({flat_pos(layout, cl, t, j), b}) = 0.07 * cl - 0.02 * j + 0.01 * b;
          }
        }
      }
    }
    const Tensor gated = run_mode(DistillMode::dnla_mu_emb, x);
    const Tensor plain = run_mode(DistillMode::nla_emb, x);
    REQUIRE(gated.numel() == plain.numel());
    for (std::int64_t i = 0; i < gated.numel(); ++i) CHECK(gated[i] == plain[i]);
  }

  SUBCASE("all six modes produce vectors of the same length") {
    const Tensor x = random_tensor({n, c}, rng);
    const int expected_len = distill_output_length(c, cfg);
    for (DistillMode mode :
         {DistillMode::vfd, DistillMode::nla_emb, DistillMode::nla_cat, DistillMode::dnla_mu_emb,
          DistillMode::dnla_mu_cat, DistillMode::dnla_delta_emb}) {
      const Tensor out = run_mode(mode, x);
      CHECK(out.shape() == std::vector<int>{expected_len});
    }
  }

  SUBCASE("unknown mode names are rejected") {
    CHECK_THROWS_AS(parse_distill_mode("nla"), ConfigError);
    CHECK(parse_distill_mode("dnla_delta_emb") == DistillMode::dnla_delta_emb);
    CHECK(distill_mode_name(DistillMode::dnla_mu_cat) == "dnla_mu_cat");
  }
}
