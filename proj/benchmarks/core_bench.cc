// Copyright 2026 The Reinformer-cpp Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "reinformer/envs.h"
#include "reinformer/expectile.h"
#include "reinformer/model.h"
#include "reinformer/ops.h"
#include "reinformer/training.h"

namespace reinformer {
namespace {

Tensor RandomTensor(Shape shape, uint64_t seed, bool grad = false) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n;
  std::vector<double> v(NumElements(shape));
  for (double& x : v) x = n(rng);
  Tensor t = Tensor::FromData(std::move(shape), std::move(v));
  if (grad) t.set_requires_grad(true);
  return t;
}

void BM_MatMul(benchmark::State& state) {
  const int64_t n = state.range(0);
  const Tensor a = RandomTensor({n, n}, 1), b = RandomTensor({n, n}, 2);
  for (auto _ : state) benchmark::DoNotOptimize(MatMul(a, b));
  state.SetItemsProcessed(state.iterations() * 2 * n * n * n);
}
BENCHMARK(BM_MatMul)->RangeMultiplier(2)->Range(16, 256);

void BM_LinearBackward(benchmark::State& state) {
  const int64_t rows = state.range(0);
  Tensor x = RandomTensor({rows, 64}, 1, true);
  Tensor w = RandomTensor({64, 64}, 2, true);
  Tensor b = RandomTensor({64}, 3, true);
  for (auto _ : state) {
    w.ZeroGrad();
    Backward(Sum(Linear(x, w, b)));
  }
}
BENCHMARK(BM_LinearBackward)->Arg(240)->Arg(960);

// batch x 3K tokens, hidden 64, 4 heads.
void BM_CausalSelfAttention(benchmark::State& state) {
  const int64_t batch = state.range(0), seq = 15, d = 64;
  const Tensor x = RandomTensor({batch * seq, d}, 1);
  AttentionParams p{RandomTensor({d, 3 * d}, 2), RandomTensor({3 * d}, 3),
                    RandomTensor({d, d}, 4), RandomTensor({d}, 5)};
  for (auto _ : state) benchmark::DoNotOptimize(CausalSelfAttention(x, p, 4, batch, seq));
}
BENCHMARK(BM_CausalSelfAttention)->Arg(1)->Arg(16)->Arg(64);

ModelConfig MazeModel() {
  ModelConfig c;
  c.state_dim = 25;
  c.action_dim = 4;
  c.action_head = ActionHeadKind::kCategorical;
  return c;
}

void BM_ModelForward(benchmark::State& state) {
  const ModelConfig c = MazeModel();
  ReinformerModel model(c, 0);
  const auto data = ComputeReturnsToGo(NormalizeStates(GenStitchDataset(DefaultMazeLayout(), 2)).first);
  std::vector<TokenWindow> batch;
  for (int64_t i = 0; i < state.range(0); ++i) {
    const auto& t = data[i % data.size()];
    batch.push_back(SampleWindow(t, i % t.trajectory.length(), c.context));
  }
  for (auto _ : state) benchmark::DoNotOptimize(model.Forward(batch));
}
BENCHMARK(BM_ModelForward)->Arg(1)->Arg(64);

// One full optimisation step at the default maze configuration.
void BM_TrainStep(benchmark::State& state) {
  ReinformerModel model(MazeModel(), 0);
  const Dataset data = NormalizeStates(GenStitchDataset(DefaultMazeLayout(), 50)).first;
  TrainConfig config;
  config.steps = 1 << 30;
  Trainer trainer(model, data, config);
  for (auto _ : state) benchmark::DoNotOptimize(trainer.Step());
}
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond);

void BM_ScalarExpectileFit(benchmark::State& state) {
  std::mt19937_64 rng(0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> values(state.range(0));
  for (double& v : values) v = u(rng);
  for (auto _ : state) benchmark::DoNotOptimize(ScalarExpectileFit(values, 0.99, 1e-12));
}
BENCHMARK(BM_ScalarExpectileFit)->Arg(20)->Arg(1000);

}  // namespace
}  // namespace reinformer

BENCHMARK_MAIN();
