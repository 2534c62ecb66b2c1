#include <benchmark/benchmark.h>

#include "mmtlab/fusion/fusion.hpp"

using namespace mmtlab::fusion;

namespace {

void BM_EncoderForward(benchmark::State& state) {
  const auto mode = static_cast<EncoderMode>(state.range(0));
  const Dims dims{64, 8, 96, 16, 49};
  const auto params = EncoderParams::random(dims, 1);
  const auto x = Tensor2::uniform(dims.m, dims.d, 2, -1, 1);
  const auto img = Tensor2::uniform(dims.n, dims.d_img, 3, -1, 1);
  const std::optional<Tensor2> image = mode == EncoderMode::text_only ? std::nullopt : std::optional(img);
  for (auto _ : state) benchmark::DoNotOptimize(encoder_block(x, params, image, mode));
}
BENCHMARK(BM_EncoderForward)->Arg(0)->Arg(1)->Arg(2);

void BM_EncoderBackward(benchmark::State& state) {
  const Dims dims{64, 8, 96, 16, 49};
  const auto params = EncoderParams::random(dims, 1);
  const auto x = Tensor2::uniform(dims.m, dims.d, 2, -1, 1);
  const auto img = Tensor2::uniform(dims.n, dims.d_img, 3, -1, 1);
  const auto upstream = Tensor2::uniform(dims.m, dims.d, 4, -1, 1);
  for (auto _ : state) {
    auto op = record_encoder_block(x, params, img, EncoderMode::selective);
    benchmark::DoNotOptimize(op.backward(upstream));
  }
}
BENCHMARK(BM_EncoderBackward);

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = Tensor2::uniform(n, n, 1), b = Tensor2::uniform(n, n, 2);
  for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
}
BENCHMARK(BM_Matmul)->Arg(32)->Arg(128);

}  // namespace
