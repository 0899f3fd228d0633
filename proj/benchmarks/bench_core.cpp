#include <benchmark/benchmark.h>

#include <random>

#include "wasecom/objectives.hpp"
#include "wasecom/ot.hpp"
#include "wasecom/tensor.hpp"
#include "wasecom/trainer.hpp"

using namespace wasecom;

namespace {

Tensor random_tensor(Shape shape, std::uint64_t seed, bool grad = false) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  std::vector<double> v(n);
  for (auto& e : v) e = g(rng);
  return Tensor::from(shape, std::move(v), grad);
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Tensor a = random_tensor({n, n}, 1), b = random_tensor({n, n}, 2);
  for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b).data().data());
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(16)->Arg(64)->Arg(128);

void BM_PipelineBackward(benchmark::State& state) {
  ModelDims dims;
  const auto bundle = ModelBundle::create(dims, 3);
  const Tensor x = random_tensor({32, dims.input_dim}, 4);
  ChannelConfig ch{ChannelKind::Rayleigh, 10.0, 0};
  Rng rng(5);
  for (auto _ : state) {
    Tensor s = semantic_encode(bundle, x);
    Tensor z = transmit(ch, channel_encode(bundle, s), rng).z;
    Tensor loss = reconstruction_loss(x, semantic_decode(bundle, channel_decode(bundle, z)));
    loss.backward();
    for (auto p : bundle.all_parameters()) p.zero_grad();
  }
}
BENCHMARK(BM_PipelineBackward);

void BM_InnerDualPgd(benchmark::State& state) {
  ModelDims dims;
  const auto bundle = ModelBundle::create(dims, 3);
  const auto batch = make_image_batch(random_tensor({32, dims.input_dim}, 6));
  Rng rng(7);
  const auto real = sample_realization(ChannelConfig{}, 32, dims.signal_dim, 1.0, rng);
  RobustnessConfig rc;
  rc.rho = 0.5;
  PerturbSpec spec{PerturbMethod::PGD};
  for (auto _ : state) benchmark::DoNotOptimize(inner_dual_loss(bundle, batch, real, rc, spec, rng).total.item());
}
BENCHMARK(BM_InnerDualPgd);

void BM_Wasserstein(benchmark::State& state) {
  const auto k = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Point> a(k), b(k);
  for (std::size_t i = 0; i < k; ++i) {
    a[i] = {u(rng), u(rng)};
    b[i] = {u(rng), u(rng)};
  }
  const auto p = DiscreteDistribution::uniform(a), q = DiscreteDistribution::uniform(b);
  for (auto _ : state) benchmark::DoNotOptimize(wasserstein_p(p, q, 2));
}
BENCHMARK(BM_Wasserstein)->Arg(4)->Arg(8)->Arg(12);

void BM_LseSmooth(benchmark::State& state) {
  const Tensor v = random_tensor({16, 256}, 9);
  for (auto _ : state) benchmark::DoNotOptimize(lse_smooth(v, 0.1).data().data());
}
BENCHMARK(BM_LseSmooth);

}  // namespace
BENCHMARK_MAIN();
