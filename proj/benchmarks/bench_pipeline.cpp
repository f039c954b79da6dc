#include <benchmark/benchmark.h>

#include "aqa/heads.hpp"
#include "aqa/model.hpp"

using namespace aqa;

namespace {

Tensor random_tensor(const std::vector<int>& shape, SeededRng& rng) {
  Tensor t(shape);
  for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(-1.0, 1.0);
  return t;
}

ModelConfig bench_model_config(DistillMode mode) {
  ModelConfig cfg;
  cfg.mode = mode;
  cfg.clip_len = 16;
  cfg.jfe = {2, 16, 16, 32, 9};
  cfg.embed_dim = 16;
  cfg.vfd_kernel = 200;
  cfg.vfd_stride = 100;
  cfg.mlp_hidden = 32;
  return cfg;
}

void BM_matmul(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  SeededRng rng(1);
  const Tensor a = random_tensor({n, n}, rng);
  const Tensor b = random_tensor({n, n}, rng);
  for (auto _ : state) {
    Graph g;
    benchmark::DoNotOptimize(g.matmul(g.input(a), g.input(b)));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n) * n * n);
}
BENCHMARK(BM_matmul)->Arg(64)->Arg(128)->Arg(256);

void BM_nla_forward(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const int c = 32, ce = 16;
  SeededRng rng(2);
  const Tensor x = random_tensor({n, c}, rng);
  NlaParams p = make_nla_params(c, ce, Pairwise::embedded_gaussian);
  for (Tensor* t : {&p.w_theta, &p.w_phi, &p.w_g, &p.w_out}) {
    for (std::int64_t i = 0; i < t->numel(); ++i) (*t)[i] = rng.uniform(-0.3, 0.3);
  }
  for (auto _ : state) {
    Graph g;
    BoundNla b{g.param(p.w_theta), g.param(p.w_phi), g.param(p.w_g), g.param(p.w_out), -1,
               Pairwise::embedded_gaussian};
    benchmark::DoNotOptimize(nla_forward(g, {g.input(x), {1, n, 1, c}}, b).node);
  }
}
BENCHMARK(BM_nla_forward)->Arg(175)->Arg(700)->Arg(1400);

void BM_distill_forward(benchmark::State& state) {
  const DistillMode mode = static_cast<DistillMode>(state.range(0));
  Model model(bench_model_config(mode));
  SeededRng rng(3);
  model.init_uniform(rng, 0.3);
  const Tensor clips = random_tensor({kClipCount, 16, kNumJoints, 2}, rng);
  for (auto _ : state) {
    Graph g;
    Model::Bound b = model.bind(g);
    benchmark::DoNotOptimize(model.forward_features(g, b, clips));
  }
  state.SetLabel(std::string(distill_mode_name(mode)));
}
BENCHMARK(BM_distill_forward)
    ->Arg(static_cast<int>(DistillMode::vfd))
    ->Arg(static_cast<int>(DistillMode::nla_emb))
    ->Arg(static_cast<int>(DistillMode::dnla_mu_emb))
    ->Arg(static_cast<int>(DistillMode::dnla_delta_emb));

void BM_train_step(benchmark::State& state) {
  Model model(bench_model_config(DistillMode::dnla_delta_emb));
  SeededRng rng(4);
  model.init_uniform(rng, 0.3);
  const Tensor clips = random_tensor({kClipCount, 16, kNumJoints, 2}, rng);
  auto refs = model.params();
  std::vector<Tensor*> ptrs;
  for (ParamRef& r : refs) ptrs.push_back(r.tensor);
  AdamState adam;
  adam_init(adam, ptrs);
  const AdamConfig ac;
  for (auto _ : state) {
    Graph g;
    Model::Bound b = model.bind(g);
    PredictionNodes pred = model.forward(g, b, clips);
    NodeId loss = total_loss(g, pred, 0.6, Gender::female, LossWeights{});
    g.backward(loss);
    std::vector<Tensor> grads;
    grads.reserve(b.ids.size());
    for (NodeId id : b.ids) grads.push_back(g.grad(id));
    adam_step(ptrs, grads, adam, ac);
  }
}
BENCHMARK(BM_train_step);

void BM_spearman(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  SeededRng rng(5);
  std::vector<double> a(static_cast<std::size_t>(n)), b(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    a[static_cast<std::size_t>(i)] = rng.uniform(-1.0, 1.0);
    b[static_cast<std::size_t>(i)] = rng.uniform_int(64);  // with ties
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(spearman(a, b));
  }
}
BENCHMARK(BM_spearman)->Arg(100)->Arg(10000);

}  // namespace

BENCHMARK_MAIN();
