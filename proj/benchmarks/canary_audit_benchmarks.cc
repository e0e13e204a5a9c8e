//
// Copyright 2026 The Canary Audit Authors
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

#include <memory>

#include "benchmark/benchmark.h"
#include "canary_audit/corpus.h"
#include "canary_audit/extract.h"
#include "canary_audit/refmodel.h"
#include "canary_audit/seeding.h"

namespace canary_audit {
namespace {

std::shared_ptr<const ModelParams> DeskModel(int vocab_size) {
  return std::make_shared<const ModelParams>(
      InitializeParams({.vocab_size = vocab_size, .num_classes = 10}, 1));
}

void BM_Forward(benchmark::State& state) {
  auto params = DeskModel(1000);
  TokenIds tokens(state.range(0));
  for (std::size_t i = 0; i < tokens.size(); ++i) tokens[i] = static_cast<TokenId>(i * 7 % 1000);
  for (auto _ : state) {
    benchmark::DoNotOptimize(Forward(*params, tokens));
  }
}
BENCHMARK(BM_Forward)->Arg(10)->Arg(64);

void BM_RankSingleToken(benchmark::State& state) {
  const int vocab_size = static_cast<int>(state.range(0));
  ReferenceModelOracle oracle(DeskModel(vocab_size));
  const Vocabulary vocab = MakeSyntheticVocabulary(vocab_size);
  const FrequencyTable freq =
      *FrequencyTable::FromCounts(std::vector<std::int64_t>(vocab_size, 1));
  const TokenIds prefix = {1, 2, 3, 4, 5, 6, 7, 8, 9};
  const ExtractionConfig config{.lambda = 0.01, .beam_size = 50,
                                .workers = static_cast<int>(state.range(1))};
  for (auto _ : state) {
    benchmark::DoNotOptimize(RankSingleToken(oracle, prefix, 9, config, vocab, freq));
  }
  state.SetItemsProcessed(state.iterations() * vocab_size);
}
BENCHMARK(BM_RankSingleToken)->Args({1000, 1})->Args({1000, 4})->UseRealTime();

void BM_ExtractBeamTwoTokens(benchmark::State& state) {
  ReferenceModelOracle oracle(DeskModel(1000));
  const Vocabulary vocab = MakeSyntheticVocabulary(1000);
  const FrequencyTable freq = *FrequencyTable::FromCounts(std::vector<std::int64_t>(1000, 1));
  const TokenIds prefix = {1, 2, 3, 4, 5, 6, 7, 8};
  const ExtractionConfig config{.beam_size = static_cast<int>(state.range(0)), .n_missing = 2};
  for (auto _ : state) {
    benchmark::DoNotOptimize(ExtractBeam(oracle, prefix, 9, config, vocab, freq));
  }
}
BENCHMARK(BM_ExtractBeamTwoTokens)->Arg(10)->Unit(benchmark::kMillisecond);

void BM_TrainEpoch(benchmark::State& state) {
  const Vocabulary vocab = MakeSyntheticVocabulary(1000);
  const Dataset data = *SynthesizeCorpus(DeskScaleDatasetSpec(1), vocab);
  const TrainConfig config{.epochs = 1, .patience = 1, .seed = 1};
  for (auto _ : state) {
    benchmark::DoNotOptimize(Train(data.train, data.valid, 1000, 10, config));
  }
  state.SetItemsProcessed(state.iterations() * data.train.size());
}
BENCHMARK(BM_TrainEpoch)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace canary_audit

BENCHMARK_MAIN();
