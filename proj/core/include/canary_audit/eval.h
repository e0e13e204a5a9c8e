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

// Seeded train -> inject -> extract trials and experiment grids.
//
// Seeding scheme: trial t of any grid uses
//   trial_seed = DeriveSeed(master_seed, {t})
// and every pipeline stage draws from DeriveSeed(trial_seed, stream). Cells
// that differ only in axis values therefore share datasets and canary tokens
// (paired comparisons), and each cell can be recomputed in isolation.

#ifndef CANARY_AUDIT_EVAL_H_
#define CANARY_AUDIT_EVAL_H_

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "canary_audit/corpus.h"
#include "canary_audit/extract.h"
#include "canary_audit/oracle.h"
#include "canary_audit/refmodel.h"
#include "canary_audit/vocab.h"

namespace canary_audit {

// (k / vocab_size)^n: the chance that k uniform guesses contain an n-token
// secret when each position is guessed independently.
absl::StatusOr<double> RandomGuessRate(int k, std::size_t vocab_size, int n);

struct Judgement {
  bool success = false;
  // 1-based rank within the full ranking, when the truth appears in it.
  std::optional<int> truth_rank;
};

// success <=> the truth tuple is among the first k ranked candidates.
Judgement JudgeSuccess(const ExtractionResult& result,
                       std::span<const TokenId> truth, int k);

// Looser per-position reading: every secret token appears at its position in
// at least one of the first k candidates.
bool JudgePerPosition(const ExtractionResult& result,
                      std::span<const TokenId> truth, int k);

struct ExperimentConfig {
  std::size_t vocab_size = 1000;
  DatasetSpec dataset = DeskScaleDatasetSpec();
  CanarySpec canary;
  TrainConfig train;
  // beam_size and lambda here are the values RunTrial uses.
  ExtractionConfig extraction{.lambda = 0.01, .beam_size = 50};
  // When false the oracle wraps the randomly initialized model.
  bool train_model = true;
};

absl::Status ValidateExperimentConfig(const ExperimentConfig& config);

struct TrialOutcome {
  std::uint64_t seed = 0;
  double lambda = 0.0;
  int beam_size = 0;
  bool failed = false;
  std::string failure;
  bool success = false;
  bool success_per_position = false;
  std::optional<int> truth_rank;
  std::int64_t queries_used = 0;
  int epochs_run = 0;
  int best_epoch = 0;
  double valid_accuracy = 0.0;
};

// Everything a trial has built by the time it needs an oracle.
struct TrialArtifacts {
  const Vocabulary& vocab;
  const Dataset& dataset;
  const CanarySuite& suite;
  std::span<const LabeledExample> train;
  const FrequencyTable& freq;
  std::shared_ptr<const ModelParams> model;
};

using OracleFactory = std::function<absl::StatusOr<std::unique_ptr<Oracle>>(
    const TrialArtifacts&)>;

struct TrialOptions {
  // Defaults to a ReferenceModelOracle over TrialArtifacts::model.
  OracleFactory oracle_factory;
  int extraction_workers = 1;
};

// One seeded pipeline run judged at config.extraction.beam_size. Failures are
// reported in the outcome, never as successes.
TrialOutcome RunTrial(const ExperimentConfig& config, std::uint64_t seed,
                      const TrialOptions& options = {});

// Trains once and extracts for every (lambda, beam size) pair, returned in
// lambda-major order. For single-token secrets the whole vocabulary is
// ranked once per lambda and judged at every beam size.
std::vector<TrialOutcome> RunTrialSweep(const ExperimentConfig& config,
                                        std::uint64_t seed,
                                        std::span<const double> lambdas,
                                        std::span<const int> beam_sizes,
                                        const TrialOptions& options = {});

enum class TableLayout {
  kFlat,
  kLambdaByMissing,   // rows lambda, one column per n_missing
  kOriginalByBeam,    // groups by beam size, rows original repetitions
  kSupportingByBeam,  // groups by supporting repetitions, rows beam size
};

struct GridSpec {
  std::string name = "custom";
  ExperimentConfig base;
  std::vector<double> lambdas;
  std::vector<int> original_repetitions;
  std::vector<int> supporting_repetitions;
  std::vector<int> n_missing;
  std::vector<int> beam_sizes;
  int trials = 10;
  std::uint64_t master_seed = 0;
  int jobs = 1;
  TableLayout layout = TableLayout::kFlat;
};

struct GridCell {
  double lambda = 0.0;
  int original_repetitions = 0;
  int supporting_repetitions = 0;
  int n_missing = 1;
  int beam_size = 1;
  std::vector<TrialOutcome> trials;  // indexed by trial
  int completed = 0;
  int failed = 0;
  double mean_success = 0.0;
  double mean_success_per_position = 0.0;
  double random_guess = 0.0;
};

struct ExperimentGrid {
  std::string name;
  TableLayout layout = TableLayout::kFlat;
  std::size_t vocab_size = 0;
  SupportMode support = SupportMode::kAllOther;
  std::vector<GridCell> cells;
  // False when any cell lost more than half of its trials.
  bool valid = true;
};

// Built-in grids:
//   "table2": lambda {0, 0.01, 0.1, 1, 10} x last 1..3 tokens, beam 100
//   "table3": original repetitions {100, 50, 25, 10} x beam {50, 100, 200}
//   "table4": supporting repetitions {99, 50, 25, 0} (one other class)
//             x beam {50, 100, 200}, lambda 0
absl::StatusOr<GridSpec> PresetGrid(absl::string_view preset,
                                    std::uint64_t master_seed);

// Empty axes fall back to the base config's value.
absl::StatusOr<ExperimentGrid> RunExperiment(const GridSpec& spec,
                                             const TrialOptions& options = {});

// One row per cell.
std::string GridToCsv(const ExperimentGrid& grid);
// Aligned plain-text table following the grid's layout.
std::string GridToText(const ExperimentGrid& grid);

}  // namespace canary_audit

#endif  // CANARY_AUDIT_EVAL_H_
