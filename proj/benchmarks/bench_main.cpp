#include <benchmark/benchmark.h>

#include "imed/ensemble_core.hpp"
#include "imed/shuffle_linear.hpp"

using namespace imed;

namespace {

Matrix draw(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  Rng rng = make_stream(seed, "bench");
  return randn(rows, cols, rng);
}

void BM_ShuffleOwned(benchmark::State& state) {
  const auto h = state.range(0);
  const auto s = ShuffleLinearSpec::make(512, 256, h);
  const Matrix params = draw(1, s.param_count(), 1), x = draw(32, 512, 2);
  const std::span<const double> p(params.data(), static_cast<std::size_t>(params.size()));
  for (auto _ : state) benchmark::DoNotOptimize(shuffle_forward(s, p, x));
}
BENCHMARK(BM_ShuffleOwned)->Arg(1)->Arg(4)->Arg(16);

void BM_ShufflePerInstance(benchmark::State& state) {
  const auto h = state.range(0);
  const auto s = ShuffleLinearSpec::make(512, 256, h);
  const Matrix params = draw(32, s.param_count(), 1), x = draw(32, 512, 2);
  for (auto _ : state) benchmark::DoNotOptimize(shuffle_forward_per_instance(s, params, x));
}
BENCHMARK(BM_ShufflePerInstance)->Arg(4)->Arg(16);

void BM_EnsembleForward(benchmark::State& state) {
  EnsembleConfig cfg;
  cfg.groups = state.range(0);
  cfg.disc_hidden = 256;
  EnsembleModel m(cfg, 0);
  std::vector<Matrix> f{draw(32, 32, 3), draw(32, 32, 4)}, g{draw(32, 2, 5), draw(32, 2, 6)};
  for (auto _ : state) benchmark::DoNotOptimize(m.evaluate(f, g));
}
BENCHMARK(BM_EnsembleForward)->Arg(2)->Arg(4);

}  // namespace
BENCHMARK_MAIN();
