// OpenMP kernels against their serial references.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "worldgan/kernels.hpp"

namespace k = worldgan::kernels;
using worldgan::Shape3;

namespace {

std::vector<float> random_vec(std::size_t n) {
  std::mt19937_64 rng(1);
  std::normal_distribution<float> dist;
  std::vector<float> v(n);
  for (auto& x : v) x = dist(rng);
  return v;
}

k::ConvShape conv_shape(const benchmark::State& state) {
  const int c = static_cast<int>(state.range(0));
  const int e = static_cast<int>(state.range(1));
  return {c, c, 3, {e, e, e}};
}

template <auto Fn>
void BM_ConvForward(benchmark::State& state) {
  const auto s = conv_shape(state);
  const auto vol = static_cast<std::size_t>(s.spatial.volume());
  const auto x = random_vec(s.in_channels * vol);
  const auto w = random_vec(static_cast<std::size_t>(s.out_channels) * s.in_channels * 27);
  std::vector<float> y(s.out_channels * vol);
  for (auto _ : state) {
    Fn(x, w, y, s);
    benchmark::DoNotOptimize(y.data());
  }
  state.counters["MAC/s"] = benchmark::Counter(static_cast<double>(vol) * 27 * s.in_channels * s.out_channels,
                                               benchmark::Counter::kIsIterationInvariantRate);
}

template <auto Fn>
void BM_ConvInputGrad(benchmark::State& state) {
  const auto s = conv_shape(state);
  const auto vol = static_cast<std::size_t>(s.spatial.volume());
  const auto gy = random_vec(s.out_channels * vol);
  const auto w = random_vec(static_cast<std::size_t>(s.out_channels) * s.in_channels * 27);
  std::vector<float> gx(s.in_channels * vol);
  for (auto _ : state) {
    Fn(gy, w, gx, s);
    benchmark::DoNotOptimize(gx.data());
  }
}

template <auto Fn>
void BM_ConvWeightGrad(benchmark::State& state) {
  const auto s = conv_shape(state);
  const auto vol = static_cast<std::size_t>(s.spatial.volume());
  const auto x = random_vec(s.in_channels * vol);
  const auto gy = random_vec(s.out_channels * vol);
  std::vector<float> gw(static_cast<std::size_t>(s.out_channels) * s.in_channels * 27);
  for (auto _ : state) {
    Fn(x, gy, gw, s);
    benchmark::DoNotOptimize(gw.data());
  }
}

template <auto Fn>
void BM_Resample(benchmark::State& state) {
  const int e = static_cast<int>(state.range(0));
  const Shape3 from{e, e, e}, to{e * 3 / 4, e * 3 / 4, e * 3 / 4};
  const int c = 32;
  const auto src = random_vec(c * static_cast<std::size_t>(from.volume()));
  std::vector<float> dst(c * static_cast<std::size_t>(to.volume()));
  for (auto _ : state) {
    Fn(src, from, dst, to, c);
    benchmark::DoNotOptimize(dst.data());
  }
}

template <auto Fn>
void BM_NearestRows(benchmark::State& state) {
  const int e = static_cast<int>(state.range(0));
  const int m = 32, rows = 64;
  const std::int64_t spatial = static_cast<std::int64_t>(e) * e * e;
  const auto field = random_vec(static_cast<std::size_t>(m * spatial));
  const auto table = random_vec(static_cast<std::size_t>(rows * m));
  std::vector<worldgan::TokenId> out(static_cast<std::size_t>(spatial));
  for (auto _ : state) {
    Fn(field, spatial, table, rows, m, out);
    benchmark::DoNotOptimize(out.data());
  }
}

const std::vector<std::vector<std::int64_t>> kConvArgs = {{8, 16, 32}, {12, 32}};

}  // namespace

BENCHMARK(BM_ConvForward<k::conv3d_forward>)->Name("conv_forward/omp")->ArgsProduct(kConvArgs);
BENCHMARK(BM_ConvForward<k::reference::conv3d_forward>)->Name("conv_forward/ref")->ArgsProduct(kConvArgs);
BENCHMARK(BM_ConvInputGrad<k::conv3d_input_grad>)->Name("conv_input_grad/omp")->ArgsProduct(kConvArgs);
BENCHMARK(BM_ConvInputGrad<k::reference::conv3d_input_grad>)->Name("conv_input_grad/ref")->ArgsProduct(kConvArgs);
BENCHMARK(BM_ConvWeightGrad<k::conv3d_weight_grad>)->Name("conv_weight_grad/omp")->ArgsProduct(kConvArgs);
BENCHMARK(BM_ConvWeightGrad<k::reference::conv3d_weight_grad>)->Name("conv_weight_grad/ref")->ArgsProduct(kConvArgs);
BENCHMARK(BM_Resample<k::resample_trilinear>)->Name("resample/omp")->Arg(32)->Arg(64);
BENCHMARK(BM_Resample<k::reference::resample_trilinear>)->Name("resample/ref")->Arg(32)->Arg(64);
BENCHMARK(BM_NearestRows<k::nearest_rows>)->Name("nearest_rows/omp")->Arg(32)->Arg(64);
BENCHMARK(BM_NearestRows<k::reference::nearest_rows>)->Name("nearest_rows/ref")->Arg(32)->Arg(64);

BENCHMARK_MAIN();
