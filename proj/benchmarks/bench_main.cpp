#include <benchmark/benchmark.h>

#include <random>

#include "vsdalign/embedding_store.hpp"
#include "vsdalign/fusion.hpp"
#include "vsdalign/prototypes.hpp"
#include "vsdalign/retrieval_eval.hpp"

using namespace vsdalign;

namespace {

Matrix gaussian(Eigen::Index r, Eigen::Index c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n;
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

void BM_Sinkhorn(benchmark::State& state) {
  const auto m = state.range(0);
  const Matrix s = normalize_rows(gaussian(m, 64, 1)) * normalize_rows(gaussian(16, 64, 2)).transpose();
  for (auto _ : state) benchmark::DoNotOptimize(sinkhorn(s, 0.05, 3).plan.data());
}
BENCHMARK(BM_Sinkhorn)->Arg(32)->Arg(256);

void BM_KMeans(benchmark::State& state) {
  const Matrix pts = normalize_rows(gaussian(state.range(0), 64, 3));
  for (auto _ : state) benchmark::DoNotOptimize(kmeans(pts, 16, 0).inertia);
}
BENCHMARK(BM_KMeans)->Arg(256)->Arg(1024)->Unit(benchmark::kMillisecond);

void BM_RecallAtK(benchmark::State& state) {
  const auto n = state.range(0);
  const Matrix sim = gaussian(n, 5 * n, 4);
  std::vector<std::size_t> parent;
  for (Eigen::Index i = 0; i < n; ++i)
    for (int c = 0; c < 5; ++c) parent.push_back(static_cast<std::size_t>(i));
  for (auto _ : state) benchmark::DoNotOptimize(recall_at_k(sim, parent).rsum);
}
BENCHMARK(BM_RecallAtK)->Arg(256)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_GatedFuse(benchmark::State& state) {
  const Matrix p = gaussian(state.range(0), 64, 5), a = gaussian(state.range(0), 64, 6);
  std::mt19937_64 rng(7);
  const auto params = FusionParams::init(64, rng);
  const Matrix g = gaussian(state.range(0), 64, 8);
  for (auto _ : state) {
    const auto fused = gated_fuse(p, a, params.image);
    benchmark::DoNotOptimize(gated_fuse_backward(g, fused).bias);
  }
}
BENCHMARK(BM_GatedFuse)->Arg(32)->Arg(1024);

}  // namespace

BENCHMARK_MAIN();
