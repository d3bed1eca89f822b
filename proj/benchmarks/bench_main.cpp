#include <benchmark/benchmark.h>

#include <random>

#include "support.hpp"
#include "vis2ir/detection.hpp"
#include "vis2ir/losses.hpp"
#include "vis2ir/metrics.hpp"
#include "vis2ir/model.hpp"
#include "vis2ir/ops.hpp"
#include "vis2ir/superres.hpp"

using namespace vis2ir;

namespace {

void BM_Conv3x3(benchmark::State& state) {
  const int c = static_cast<int>(state.range(0));
  const Var x = Var::constant(test::random_tensor({1, c, 64, 64}, 1));
  const Var w = Var::constant(test::random_tensor({c, c, 3, 3}, 2, -0.1, 0.1));
  const Var b = Var::constant(Tensor({1, c, 1, 1}));
  NoGradGuard ng;
  for (auto _ : state) benchmark::DoNotOptimize(ops::conv2d(x, w, b, 1, 1));
  state.SetItemsProcessed(state.iterations() * 64 * 64 * c * c * 9);
}
BENCHMARK(BM_Conv3x3)->Arg(8)->Arg(32);

void BM_Conv3x3Backward(benchmark::State& state) {
  const Tensor xt = test::random_tensor({1, 16, 32, 32}, 1);
  const Var w = Var::leaf(test::random_tensor({16, 16, 3, 3}, 2, -0.1, 0.1));
  const Var b = Var::leaf(Tensor({1, 16, 1, 1}));
  for (auto _ : state) {
    const Var x = Var::leaf(xt);
    backward(ops::sum_all(ops::conv2d(x, w, b, 1, 1)));
  }
}
BENCHMARK(BM_Conv3x3Backward);

model::GeneratorSpec desk_generator() {
  model::GeneratorSpec s;
  s.base_width = 32;
  s.g1_downsamples = 2;
  s.g1_res_blocks = 3;
  s.g2_res_blocks = 2;
  s.enhancer_count = 1;
  return s;
}

void BM_GeneratorForward(benchmark::State& state) {
  const auto g = model::Generator::build(desk_generator(), 1);
  const int h = static_cast<int>(state.range(0));
  const ImageBuf in(test::random_tensor({1, 3, h, 2 * h}, 3), kSignedUnit);
  for (auto _ : state) benchmark::DoNotOptimize(g.forward(in, model::GeneratorMode::full));
}
BENCHMARK(BM_GeneratorForward)->Arg(32)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_SuperresForward(benchmark::State& state) {
  superres::SrSpec spec;
  spec.channels = 1;
  const auto net = superres::SrNetwork::build(spec, 1);
  const ImageBuf in(test::random_tensor({1, 1, 32, 64}, 4, 0, 1), kUnit);
  for (auto _ : state) benchmark::DoNotOptimize(superres::sr_forward(net, in));
}
BENCHMARK(BM_SuperresForward)->Unit(benchmark::kMillisecond);

void BM_Ssim(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const ImageBuf a(test::random_tensor({1, 1, n, n}, 5, 0, 1), kUnit);
  const ImageBuf b(test::random_tensor({1, 1, n, n}, 6, 0, 1), kUnit);
  for (auto _ : state) benchmark::DoNotOptimize(metrics::ssim(a, b));
}
BENCHMARK(BM_Ssim)->Arg(64)->Arg(256);

void BM_MeanAveragePrecision(benchmark::State& state) {
  std::vector<metrics::DetectionRecord> preds, gts;
  for (std::uint64_t i = 0; i < static_cast<std::uint64_t>(state.range(0)); ++i) {
    auto inst = test::random_detection_instance(i);
    for (auto& r : inst.preds) r.image_id += std::to_string(i);
    for (auto& r : inst.gts) r.image_id += std::to_string(i);
    preds.insert(preds.end(), inst.preds.begin(), inst.preds.end());
    gts.insert(gts.end(), inst.gts.begin(), inst.gts.end());
  }
  for (auto _ : state) benchmark::DoNotOptimize(metrics::mean_average_precision(preds, gts));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(preds.size()));
}
BENCHMARK(BM_MeanAveragePrecision)->Arg(100)->Arg(1000);

}  // namespace
BENCHMARK_MAIN();
