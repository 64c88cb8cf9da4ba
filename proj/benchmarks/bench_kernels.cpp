#include <benchmark/benchmark.h>

#include "vebm/energy_model.hpp"
#include "vebm/kernels.hpp"
#include "vebm/langevin.hpp"
#include "vebm/rng.hpp"

using namespace vebm;

namespace {

Tensor random_tensor(Shape shape, std::uint64_t seed) {
  Rng rng(seed);
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = static_cast<float>(rng.normal());
  return t;
}

// First layer of the 32³ synthesis descriptor: 200 filters of 16³, stride 3.
void BM_Conv3dFirstLayer(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Tensor x = random_tensor({n, 1, 32, 32, 32}, 1);
  const Tensor w = random_tensor({200, 1, 16, 16, 16}, 2);
  const Tensor b = random_tensor({200}, 3);
  for (auto _ : state) benchmark::DoNotOptimize(conv3d(x, w, &b, 3));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_Conv3dFirstLayer)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

void BM_Deconv3d(benchmark::State& state) {
  const auto k = static_cast<std::size_t>(state.range(0));
  const Tensor x = random_tensor({4, 64, 8, 8, 8}, 4);
  const Tensor w = random_tensor({64, 32, k, k, k}, 5);
  for (auto _ : state) {
    benchmark::DoNotOptimize(deconv3d(x, w, static_cast<const Tensor*>(nullptr), 2));
  }
}
BENCHMARK(BM_Deconv3d)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);

void BM_LangevinStep(benchmark::State& state) {
  const DescriptorModel model(descriptor_preset(state.range(0) == 16 ? "desk-synthesis-16"
                                                                      : "paper-synthesis-32"),
                              0.5, 1);
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  const Tensor y = random_tensor({8, 1, n, n, n}, 6);
  auto rngs = chain_rngs(7, 8);
  const LangevinConfig cfg{0.01, 1, true};
  for (auto _ : state) benchmark::DoNotOptimize(langevin_step(model, y, cfg, rngs));
  state.SetItemsProcessed(state.iterations() * 8);
}
BENCHMARK(BM_LangevinStep)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
