#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "gazeauth/biometrics.hpp"
#include "gazeauth/embedder.hpp"
#include "gazeauth/preprocess.hpp"
#include "gazeauth/trainer.hpp"

using namespace gazeauth;

namespace {

EmbedderConfig bench_config() {
  EmbedderConfig cfg;
  cfg.input_channels = 8;
  cfg.growth = 16;
  return cfg;
}

std::vector<Matrix<float>> random_batch(int batch) {
  std::vector<Matrix<float>> out;
  for (int i = 0; i < batch; ++i) out.push_back(Matrix<float>::Random(kWindowSamples, 8));
  return out;
}

void BM_EmbedderForward(benchmark::State& state) {
  const auto params = init_params<float>(bench_config(), 1);
  const auto batch = random_batch(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(forward(params, batch));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_EmbedderForward)->Arg(1)->Arg(64);

void BM_EmbedderBackward(benchmark::State& state) {
  const auto params = init_params<float>(bench_config(), 1);
  const auto batch = random_batch(static_cast<int>(state.range(0)));
  const auto tape = forward_with_tape(params, batch);
  const Matrix<float> upstream = Matrix<float>::Random(state.range(0), 128);
  for (auto _ : state) benchmark::DoNotOptimize(backward(params, batch, tape, upstream));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_EmbedderBackward)->Arg(64);

void BM_MsLoss(benchmark::State& state) {
  const auto m = static_cast<int>(state.range(0));
  const Eigen::MatrixXd e = Eigen::MatrixXd::Random(m, 128);
  std::vector<int> labels(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) labels[static_cast<std::size_t>(i)] = i / 8;
  for (auto _ : state) benchmark::DoNotOptimize(ms_loss(e, labels, MsLossConfig{}));
}
BENCHMARK(BM_MsLoss)->Arg(64)->Arg(256);

void BM_SgVelocity(benchmark::State& state) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> x(static_cast<std::size_t>(state.range(0)));
  for (auto& v : x) v = normal(rng);
  for (auto _ : state) benchmark::DoNotOptimize(sg_velocity(x));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_SgVelocity)->Arg(2160)->Arg(72 * 600);

void BM_Eer(benchmark::State& state) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> impostor(0.0, 0.3), genuine(0.6, 0.3);
  ScoreSet set;
  const auto n = state.range(0);
  for (std::int64_t i = 0; i < n; ++i) {
    const bool g = i % 20 == 0;
    set.scores.push_back({g ? genuine(rng) : impostor(rng), g, "v", "e"});
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(eer(set));
    benchmark::DoNotOptimize(frr_at_far(set, 2e-5));
  }
}
BENCHMARK(BM_Eer)->Arg(10000)->Arg(1000000);

}  // namespace
BENCHMARK_MAIN();
