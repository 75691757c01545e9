//
// Copyright 2026 The slam Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//
//
// Hot paths: one detection, token encoding and keyed selection.

#include <benchmark/benchmark.h>

#include "slam/detector.h"
#include "slam/log.h"
#include "slam/mining.h"
#include "slam/pipeline.h"
#include "slam/sae.h"
#include "slam/selection.h"
#include "slam/synthetic.h"

namespace slam {
namespace {

struct Fixture {
  SyntheticWorld world{BackendSpec{}};
  GenerationParams params = SyntheticGenerationParams(world.spec());
  WatermarkKey key = DemoKey(7);
  SelectionSpec spec;
  DirectionBank bank;
  NullStats nulls;
  std::vector<BaselineText> texts;
};

const Fixture& F() {
  static const Fixture* f = [] {
    SetWarningsQuiet(true);
    auto* x = new Fixture;
    PairOptions po;
    po.pairs_per_domain = 6;
    x->bank = MineBank(x->world.GeneratePairs(po), x->world.saes(), x->world.backend().layers(),
                       MiningConfig{}, x->world.backend().model_id());
    x->texts = GenerateBaseline(x->world, "base", 40, x->params);
    x->nulls = FitNulls(x->world.backend(), x->texts, x->key, x->bank, x->spec);
    return x;
  }();
  return *f;
}

void BM_Detect(benchmark::State& state) {
  const auto& f = F();
  const auto& t = f.texts[0];
  for (auto _ : state) {
    benchmark::DoNotOptimize(Detect(f.world.backend(), t.tokens, t.prompt_len, f.key, t.doc_id,
                                    f.bank, f.spec, f.nulls));
  }
}
BENCHMARK(BM_Detect);

void BM_MeanPoolEncode(benchmark::State& state) {
  const auto& f = F();
  const auto& t = f.texts[0];
  ForwardOptions opts;
  opts.record_layers = f.world.backend().layers();
  const auto trace = f.world.backend().Forward(t.tokens, opts).trace;
  const LayerId layer = f.world.backend().layers()[0];
  const auto& sae = f.world.sae(layer);
  for (auto _ : state) {
    benchmark::DoNotOptimize(MeanPoolEncode(sae, trace, layer, false));
  }
}
BENCHMARK(BM_MeanPoolEncode);

void BM_SelectFeatures(benchmark::State& state) {
  const auto& f = F();
  std::size_t i = 0;
  for (auto _ : state) {
    const auto seed = HmacSeed(f.key, "doc-" + std::to_string(i++), 0);
    benchmark::DoNotOptimize(SelectFeatures(f.bank, f.spec, seed));
  }
}
BENCHMARK(BM_SelectFeatures);

}  // namespace
}  // namespace slam

BENCHMARK_MAIN();
