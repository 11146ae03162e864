// Microbenchmarks for the hot paths: waveform synthesis, channel simulation,
// split estimation, MMSE equalization, and the NN kernels behind the
// learned pipelines.

#include <benchmark/benchmark.h>

#include <vector>

#include "rfdna/cgan.hpp"
#include "rfdna/channel.hpp"
#include "rfdna/jcaecnn.hpp"
#include "rfdna/mmse.hpp"
#include "rfdna/nmestimator.hpp"
#include "rfdna/nn/train.hpp"
#include "rfdna/waveform.hpp"

namespace {

using namespace rfdna;

ComplexSignal reference_preamble() { return synthesize_preamble(20e6); }

ComplexSignal impaired_preamble(uint64_t seed) {
  return apply_impairments(reference_preamble(), draw_emitter_profile(0, seed));
}

TapDelayLine fixed_tdl(uint64_t seed) {
  ChannelConfig cfg;
  Rng rng(seed);
  return draw_tdl(cfg, rng);
}

void BM_SynthesizePreamble(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(synthesize_preamble(20e6));
}
BENCHMARK(BM_SynthesizePreamble);

void BM_ApplyImpairments(benchmark::State& state) {
  const ComplexSignal x = reference_preamble();
  const EmitterProfile p = draw_emitter_profile(0, 42);
  for (auto _ : state) benchmark::DoNotOptimize(apply_impairments(x, p));
}
BENCHMARK(BM_ApplyImpairments);

void BM_DrawTdl(benchmark::State& state) {
  ChannelConfig cfg;
  Rng rng(7);
  for (auto _ : state) benchmark::DoNotOptimize(draw_tdl(cfg, rng));
}
BENCHMARK(BM_DrawTdl);

void BM_ApplyChannel(benchmark::State& state) {
  const ComplexSignal x = impaired_preamble(3);
  const TapDelayLine h = fixed_tdl(11);
  for (auto _ : state) benchmark::DoNotOptimize(apply_channel(x, h));
}
BENCHMARK(BM_ApplyChannel);

void BM_AddAwgn(benchmark::State& state) {
  const ComplexSignal x = impaired_preamble(3);
  Rng rng(5);
  for (auto _ : state) benchmark::DoNotOptimize(add_awgn(x, 18.0, rng));
}
BENCHMARK(BM_AddAwgn);

void BM_EstimateChannel(benchmark::State& state) {
  const ComplexSignal cand = impaired_preamble(3);
  Rng rng(11);
  const TapDelayLine h = fixed_tdl(11);
  const ComplexSignal r = add_awgn(apply_channel(cand, h), 30.0, rng);
  for (auto _ : state) benchmark::DoNotOptimize(estimate_channel(r, cand, 5, NmOptions{}));
}
BENCHMARK(BM_EstimateChannel)->Unit(benchmark::kMillisecond);

void BM_MmseEqualize(benchmark::State& state) {
  const ComplexSignal x = impaired_preamble(3);
  const TapDelayLine h = fixed_tdl(11);
  const ComplexSignal r = apply_channel(x, h);
  const ConvMatrix a = conv_matrix(h, static_cast<int>(x.samples.size()));
  for (auto _ : state) benchmark::DoNotOptimize(mmse_equalize(r, a, 1000.0));
}
BENCHMARK(BM_MmseEqualize)->Unit(benchmark::kMillisecond);

void BM_ClassifierForward(benchmark::State& state) {
  const int batch = static_cast<int>(state.range(0));
  Classifier<float> c = build_classifier<float>(4, 4, 320);
  c.net.init_params(1);
  nn::Tensor<float> x({batch, 1, 4, 320});
  for (size_t i = 0; i < x.data.size(); ++i) x.data[i] = static_cast<float>(i % 97) / 97.0f;
  auto ws = c.net.make_workspace();
  for (auto _ : state) {
    ws.reset();
    ws.set_input(c.in, x);
    benchmark::DoNotOptimize(c.net.forward(ws, c.prob));
  }
}
BENCHMARK(BM_ClassifierForward)->Arg(1)->Arg(16)->Unit(benchmark::kMillisecond);

void BM_ClassifierTrainStep(benchmark::State& state) {
  Classifier<float> c = build_classifier<float>(4, 4, 320);
  c.net.init_params(1);
  nn::Tensor<float> x({16, 1, 4, 320});
  for (size_t i = 0; i < x.data.size(); ++i) x.data[i] = static_cast<float>(i % 97) / 97.0f;
  std::vector<int> labels(16);
  for (int b = 0; b < 16; ++b) labels[static_cast<size_t>(b)] = b % 4;
  nn::OptimConfig opt;
  opt.lr = 1e-3;
  auto ws = c.net.make_workspace();
  nn::Tensor<float> grad;
  for (auto _ : state) {
    ws.reset();
    ws.set_input(c.in, x);
    const auto& probs = c.net.forward(ws, c.prob);
    nn::cce_with_logit_grad(probs, labels, 1.0, grad);
    c.net.backward(ws, c.net.pre_activation(c.prob), grad);
    c.net.step(opt);
  }
}
BENCHMARK(BM_ClassifierTrainStep)->Unit(benchmark::kMillisecond);

void BM_GeneratorForward(benchmark::State& state) {
  CondNet<float> g = build_generator<float>(4, 4, 320);
  g.net.init_params(2);
  nn::Tensor<float> x({1, 1, 4, 320});
  for (size_t i = 0; i < x.data.size(); ++i) x.data[i] = static_cast<float>(i % 89) / 89.0f;
  auto ws = g.net.make_workspace();
  for (auto _ : state) {
    ws.reset();
    ws.set_input(g.in, x);
    ws.set_labels(g.labels, {2});
    benchmark::DoNotOptimize(g.net.forward(ws, g.out));
  }
}
BENCHMARK(BM_GeneratorForward)->Unit(benchmark::kMillisecond);

void BM_Decompose(benchmark::State& state) {
  JcaecnnModel m;
  m.net = build_jcaecnn<float>(4, 5, 4, 320);
  m.net.net.init_params(3);
  m.weights = o_weights(5);
  m.trained = true;
  IqNlTensor r;
  r.n = 320;
  r.rows.resize(4 * 320);
  for (size_t i = 0; i < r.rows.size(); ++i) r.rows[i] = static_cast<double>(i % 83) / 83.0;
  for (auto _ : state) benchmark::DoNotOptimize(decompose(m, r));
}
BENCHMARK(BM_Decompose)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
