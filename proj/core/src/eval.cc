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

#include "canary_audit/eval.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <tuple>
#include <utility>

#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "absl/strings/str_join.h"
#include "canary_audit/parallel.h"
#include "canary_audit/seeding.h"
#include "canary_audit/status_macros.h"

namespace canary_audit {

absl::StatusOr<double> RandomGuessRate(int k, std::size_t vocab_size, int n) {
  if (vocab_size == 0 || k < 1 || n < 1) {
    return absl::InvalidArgumentError("need k >= 1, n >= 1 and a vocabulary");
  }
  if (static_cast<std::size_t>(k) > vocab_size) {
    return absl::InvalidArgumentError(absl::StrCat(
        "k=", k, " exceeds the vocabulary size ", vocab_size));
  }
  return std::pow(static_cast<double>(k) / static_cast<double>(vocab_size), n);
}

Judgement JudgeSuccess(const ExtractionResult& result,
                       std::span<const TokenId> truth, int k) {
  Judgement j;
  j.truth_rank = TruthRank(result, truth);
  j.success = j.truth_rank.has_value() && *j.truth_rank <= k;
  return j;
}

bool JudgePerPosition(const ExtractionResult& result,
                      std::span<const TokenId> truth, int k) {
  const std::size_t top =
      std::min(result.ranked.size(), static_cast<std::size_t>(std::max(k, 0)));
  for (std::size_t pos = 0; pos < truth.size(); ++pos) {
    bool found = false;
    for (std::size_t i = 0; i < top && !found; ++i) {
      const TokenIds& t = result.ranked[i].tokens;
      found = pos < t.size() && t[pos] == truth[pos];
    }
    if (!found) return false;
  }
  return !truth.empty();
}

absl::Status ValidateExperimentConfig(const ExperimentConfig& config) {
  if (config.vocab_size < 2) {
    return absl::InvalidArgumentError("vocab_size must be at least 2");
  }
  CA_RETURN_IF_ERROR(ValidateDatasetSpec(config.dataset));
  CA_RETURN_IF_ERROR(ValidateCanarySpec(config.canary));
  CA_RETURN_IF_ERROR(ValidateTrainConfig(config.train));
  if (config.extraction.n_missing != config.canary.n_secret) {
    return absl::InvalidArgumentError(absl::StrCat(
        "extraction n_missing=", config.extraction.n_missing,
        " differs from canary n_secret=", config.canary.n_secret));
  }
  return ValidateExtractionConfig(config.extraction, config.vocab_size);
}

TrialOutcome RunTrial(const ExperimentConfig& config, std::uint64_t seed,
                      const TrialOptions& options) {
  const double lambda = config.extraction.lambda;
  const int beam = config.extraction.beam_size;
  return RunTrialSweep(config, seed, std::span<const double>(&lambda, 1),
                       std::span<const int>(&beam, 1), options)
      .front();
}

namespace {

struct PreparedTrial {
  Vocabulary vocab;
  Dataset dataset;
  CanarySuite suite;
  std::vector<LabeledExample> train;
  FrequencyTable freq;
  std::shared_ptr<const ModelParams> model;
  int epochs_run = 0;
  int best_epoch = 0;
  double valid_accuracy = 0.0;
};

absl::StatusOr<PreparedTrial> PrepareTrial(const ExperimentConfig& config,
                                           std::uint64_t seed) {
  CA_RETURN_IF_ERROR(ValidateExperimentConfig(config));
  PreparedTrial t;
  t.vocab = MakeSyntheticVocabulary(config.vocab_size);

  DatasetSpec ds = config.dataset;
  ds.seed = DeriveSeed(seed, SeedStream::kDataset);
  CA_ASSIGN_OR_RETURN(t.dataset, SynthesizeCorpus(ds, t.vocab));

  CA_ASSIGN_OR_RETURN(
      t.suite, GenerateCanarySuite(config.canary, ds.num_classes,
                                   ds.rarest_class(), config.vocab_size,
                                   DeriveSeed(seed, SeedStream::kCanary)));
  t.suite.seed = DeriveSeed(seed, SeedStream::kInjection);
  CA_ASSIGN_OR_RETURN(t.train,
                      Inject(t.dataset.train, t.suite, config.vocab_size));
  CA_ASSIGN_OR_RETURN(t.freq, ComputeFrequencyTable(TokenSequences(t.train),
                                                    config.vocab_size));

  TrainConfig tc = config.train;
  tc.seed = DeriveSeed(seed, SeedStream::kTraining);
  const int vocab_size = static_cast<int>(config.vocab_size);
  if (config.train_model) {
    CA_ASSIGN_OR_RETURN(TrainResult trained,
                        Train(t.train, t.dataset.valid, vocab_size,
                              ds.num_classes, tc));
    t.epochs_run = trained.epochs_run;
    t.best_epoch = trained.best_epoch;
    t.valid_accuracy = trained.best_valid_accuracy;
    t.model = std::make_shared<const ModelParams>(std::move(trained.params));
  } else {
    ModelParams init = InitialParams(vocab_size, ds.num_classes, tc);
    CA_ASSIGN_OR_RETURN(Evaluation eval, Evaluate(init, t.dataset.valid));
    t.valid_accuracy = eval.accuracy;
    t.model = std::make_shared<const ModelParams>(std::move(init));
  }
  return t;
}

}  // namespace

std::vector<TrialOutcome> RunTrialSweep(const ExperimentConfig& config,
                                        std::uint64_t seed,
                                        std::span<const double> lambdas,
                                        std::span<const int> beam_sizes,
                                        const TrialOptions& options) {
  std::vector<TrialOutcome> out;
  for (double lambda : lambdas) {
    for (int beam : beam_sizes) {
      TrialOutcome o;
      o.seed = seed;
      o.lambda = lambda;
      o.beam_size = beam;
      out.push_back(o);
    }
  }
  auto fail_all = [&out](const absl::Status& status) {
    for (TrialOutcome& o : out) {
      o.failed = true;
      o.success = false;
      o.success_per_position = false;
      o.failure = status.ToString();
    }
    return out;
  };

  auto prepared = PrepareTrial(config, seed);
  if (!prepared.ok()) return fail_all(prepared.status());
  PreparedTrial& t = *prepared;

  std::unique_ptr<Oracle> oracle;
  TrialArtifacts artifacts{t.vocab, t.dataset, t.suite, t.train, t.freq, t.model};
  if (options.oracle_factory) {
    auto made = options.oracle_factory(artifacts);
    if (!made.ok()) return fail_all(made.status());
    oracle = *std::move(made);
  } else {
    oracle = std::make_unique<ReferenceModelOracle>(t.model);
  }

  const TokenIds& prefix = t.suite.original.prefix;
  const TokenIds& truth = t.suite.original.secret;
  const int label = t.suite.original.label;
  const int n = static_cast<int>(truth.size());

  std::size_t index = 0;
  for (double lambda : lambdas) {
    ExtractionConfig ec = config.extraction;
    ec.lambda = lambda;
    ec.n_missing = n;
    ec.workers = std::max(1, options.extraction_workers);
    std::optional<ExtractionResult> full;
    if (n == 1) {
      ec.beam_size = static_cast<int>(config.vocab_size);
      auto ranked = RankSingleToken(*oracle, prefix, label, ec, t.vocab, t.freq);
      if (!ranked.ok()) return fail_all(ranked.status());
      full = *std::move(ranked);
    }
    for (int beam : beam_sizes) {
      TrialOutcome& o = out[index++];
      o.epochs_run = t.epochs_run;
      o.best_epoch = t.best_epoch;
      o.valid_accuracy = t.valid_accuracy;
      if (beam < 1 || static_cast<std::size_t>(beam) > config.vocab_size) {
        return fail_all(absl::InvalidArgumentError(
            absl::StrCat("beam size ", beam, " outside [1, |V|]")));
      }
      ExtractionResult result;
      if (full) {
        result = *full;
      } else {
        ec.beam_size = beam;
        auto searched = ExtractBeam(*oracle, prefix, label, ec, t.vocab, t.freq);
        if (!searched.ok()) return fail_all(searched.status());
        result = *std::move(searched);
      }
      Judgement j = JudgeSuccess(result, truth, beam);
      o.success = j.success;
      o.truth_rank = j.truth_rank;
      o.success_per_position = JudgePerPosition(result, truth, beam);
      o.queries_used = result.queries_used;
    }
  }
  return out;
}

absl::StatusOr<GridSpec> PresetGrid(absl::string_view preset,
                                    std::uint64_t master_seed) {
  GridSpec spec;
  spec.name = std::string(preset);
  spec.master_seed = master_seed;
  spec.trials = 10;
  spec.base = ExperimentConfig{};
  spec.base.canary.original_repetitions = 100;
  if (preset == "table2") {
    spec.base.canary.support = SupportMode::kAllOther;
    spec.base.canary.supporting_repetitions = 1;
    spec.lambdas = {0.0, 0.01, 0.1, 1.0, 10.0};
    spec.n_missing = {1, 2, 3};
    spec.beam_sizes = {100};
    spec.layout = TableLayout::kLambdaByMissing;
  } else if (preset == "table3") {
    spec.base.canary.support = SupportMode::kAllOther;
    spec.base.canary.supporting_repetitions = 1;
    spec.lambdas = {0.01};
    spec.original_repetitions = {100, 50, 25, 10};
    spec.beam_sizes = {50, 100, 200};
    spec.layout = TableLayout::kOriginalByBeam;
  } else if (preset == "table4") {
    spec.base.canary.support = SupportMode::kOneOther;
    spec.lambdas = {0.0};
    spec.supporting_repetitions = {99, 50, 25, 0};
    spec.beam_sizes = {50, 100, 200};
    spec.layout = TableLayout::kSupportingByBeam;
  } else {
    return absl::InvalidArgumentError(absl::StrCat(
        "unknown preset \"", preset, "\" (expected table2, table3 or table4)"));
  }
  return spec;
}

absl::StatusOr<ExperimentGrid> RunExperiment(const GridSpec& spec,
                                             const TrialOptions& options) {
  if (spec.trials < 1) return absl::InvalidArgumentError("trials must be >= 1");
  const ExperimentConfig& base = spec.base;
  auto or_default = []<typename T>(const std::vector<T>& axis, T fallback) {
    return axis.empty() ? std::vector<T>{fallback} : axis;
  };
  const auto lambdas = or_default(spec.lambdas, base.extraction.lambda);
  const auto originals =
      or_default(spec.original_repetitions, base.canary.original_repetitions);
  const auto supports =
      or_default(spec.supporting_repetitions, base.canary.supporting_repetitions);
  const auto missing = or_default(spec.n_missing, base.canary.n_secret);
  const auto beams = or_default(spec.beam_sizes, base.extraction.beam_size);

  // Validate every cell's configuration before running anything.
  struct TrainingKey {
    int original;
    int supporting;
    int n;
  };
  std::vector<TrainingKey> keys;
  for (int o : originals) {
    for (int s : supports) {
      for (int n : missing) keys.push_back({o, s, n});
    }
  }
  auto config_for = [&](const TrainingKey& key) {
    ExperimentConfig c = base;
    c.canary.original_repetitions = key.original;
    c.canary.supporting_repetitions = key.supporting;
    c.canary.n_secret = key.n;
    c.extraction.n_missing = key.n;
    c.extraction.lambda = lambdas.front();
    c.extraction.beam_size = 1;
    return c;
  };
  for (const TrainingKey& key : keys) {
    CA_RETURN_IF_ERROR(ValidateExperimentConfig(config_for(key)));
    for (int beam : beams) {
      CA_RETURN_IF_ERROR(RandomGuessRate(beam, base.vocab_size, key.n).status());
    }
  }
  for (double lambda : lambdas) {
    if (!std::isfinite(lambda) || lambda < 0.0) {
      return absl::InvalidArgumentError("lambda values must be finite and >= 0");
    }
  }

  const std::size_t trials = static_cast<std::size_t>(spec.trials);
  std::vector<std::vector<TrialOutcome>> units(keys.size() * trials);
  ParallelFor(units.size(), spec.jobs, [&](std::size_t u) {
    const TrainingKey& key = keys[u / trials];
    const std::uint64_t seed = DeriveSeed(spec.master_seed, {u % trials});
    units[u] = RunTrialSweep(config_for(key), seed, lambdas, beams, options);
  });

  ExperimentGrid grid;
  grid.name = spec.name;
  grid.layout = spec.layout;
  grid.vocab_size = base.vocab_size;
  grid.support = base.canary.support;
  for (std::size_t li = 0; li < lambdas.size(); ++li) {
    for (std::size_t ki = 0; ki < keys.size(); ++ki) {
      for (std::size_t bi = 0; bi < beams.size(); ++bi) {
        GridCell cell;
        cell.lambda = lambdas[li];
        cell.original_repetitions = keys[ki].original;
        cell.supporting_repetitions = keys[ki].supporting;
        cell.n_missing = keys[ki].n;
        cell.beam_size = beams[bi];
        int successes = 0;
        int per_position = 0;
        for (std::size_t t = 0; t < trials; ++t) {
          const TrialOutcome& o = units[ki * trials + t][li * beams.size() + bi];
          cell.trials.push_back(o);
          if (o.failed) {
            ++cell.failed;
            continue;
          }
          ++cell.completed;
          successes += o.success ? 1 : 0;
          per_position += o.success_per_position ? 1 : 0;
        }
        if (cell.completed > 0) {
          cell.mean_success = static_cast<double>(successes) / cell.completed;
          cell.mean_success_per_position =
              static_cast<double>(per_position) / cell.completed;
        }
        cell.random_guess =
            *RandomGuessRate(cell.beam_size, base.vocab_size, cell.n_missing);
        if (2 * cell.failed > spec.trials) grid.valid = false;
        grid.cells.push_back(std::move(cell));
      }
    }
  }
  return grid;
}

std::string GridToCsv(const ExperimentGrid& grid) {
  std::string out =
      "lambda,original_repetitions,supporting_repetitions,support_mode,"
      "n_missing,beam_size,mean_success,mean_success_per_position,"
      "random_guess,trials,failed\n";
  for (const GridCell& c : grid.cells) {
    absl::StrAppendFormat(&out, "%g,%d,%d,%s,%d,%d,%.4f,%.4f,%.6g,%d,%d\n",
                          c.lambda, c.original_repetitions,
                          c.supporting_repetitions,
                          SupportModeName(grid.support), c.n_missing,
                          c.beam_size, c.mean_success,
                          c.mean_success_per_position, c.random_guess,
                          c.completed + c.failed, c.failed);
  }
  return out;
}

namespace {

// Rows separated into groups by empty vectors.
std::string RenderTable(const std::vector<std::string>& header,
                        const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width(header.size());
  for (std::size_t i = 0; i < header.size(); ++i) width[i] = header[i].size();
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      width[i] = std::max(width[i], row[i].size());
    }
  }
  std::string rule = "+";
  for (std::size_t w : width) absl::StrAppend(&rule, std::string(w + 2, '-'), "+");
  rule += "\n";
  auto line = [&width](const std::vector<std::string>& cells) {
    std::string s = "|";
    for (std::size_t i = 0; i < cells.size(); ++i) {
      absl::StrAppend(&s, " ", cells[i],
                      std::string(width[i] - cells[i].size(), ' '), " |");
    }
    return s + "\n";
  };
  std::string out = rule + line(header) + rule;
  for (const auto& row : rows) out += row.empty() ? rule : line(row);
  if (rows.empty() || !rows.back().empty()) out += rule;
  return out;
}

std::string Rate(double x) { return absl::StrFormat("%.2f", x); }
std::string Baseline(double x) { return absl::StrFormat("%.4g", x); }

template <typename T>
std::vector<T> Distinct(const ExperimentGrid& grid, T GridCell::*field) {
  std::vector<T> out;
  for (const GridCell& c : grid.cells) {
    if (std::find(out.begin(), out.end(), c.*field) == out.end()) {
      out.push_back(c.*field);
    }
  }
  return out;
}

const GridCell* FindCell(const ExperimentGrid& grid, double lambda,
                         int original, int supporting, int n, int beam) {
  for (const GridCell& c : grid.cells) {
    if (c.lambda == lambda && c.original_repetitions == original &&
        c.supporting_repetitions == supporting && c.n_missing == n &&
        c.beam_size == beam) {
      return &c;
    }
  }
  return nullptr;
}

std::string MissingHeader(int n) {
  return n == 1 ? "Last Token" : absl::StrCat("Last ", n, " Tokens");
}

}  // namespace

std::string GridToText(const ExperimentGrid& grid) {
  const auto lambdas = Distinct(grid, &GridCell::lambda);
  const auto originals = Distinct(grid, &GridCell::original_repetitions);
  const auto supports = Distinct(grid, &GridCell::supporting_repetitions);
  const auto missing = Distinct(grid, &GridCell::n_missing);
  const auto beams = Distinct(grid, &GridCell::beam_size);
  const int trials = grid.cells.empty()
                         ? 0
                         : grid.cells.front().completed + grid.cells.front().failed;

  std::string out = absl::StrFormat(
      "%s: success rates over %d seeded trials per cell, |V| = %d, "
      "supporting canaries: %s\n",
      grid.name, trials, grid.vocab_size, SupportModeName(grid.support));
  if (!grid.valid) out += "WARNING: grid invalid, a cell lost more than half of its trials\n";

  TableLayout layout = grid.layout;
  if (layout == TableLayout::kLambdaByMissing &&
      (originals.size() != 1 || supports.size() != 1 || beams.size() != 1)) {
    layout = TableLayout::kFlat;
  }
  if (layout == TableLayout::kOriginalByBeam &&
      (lambdas.size() != 1 || supports.size() != 1 || missing.size() != 1)) {
    layout = TableLayout::kFlat;
  }
  if (layout == TableLayout::kSupportingByBeam &&
      (lambdas.size() != 1 || originals.size() != 1 || missing.size() != 1)) {
    layout = TableLayout::kFlat;
  }

  std::vector<std::vector<std::string>> rows;
  switch (layout) {
    case TableLayout::kLambdaByMissing: {
      std::vector<std::string> header = {"lambda"};
      for (int n : missing) header.push_back(MissingHeader(n));
      for (double lambda : lambdas) {
        std::vector<std::string> row = {absl::StrFormat("%g", lambda)};
        for (int n : missing) {
          const GridCell* c = FindCell(grid, lambda, originals[0], supports[0],
                                       n, beams[0]);
          row.push_back(c ? Rate(c->mean_success) : "-");
        }
        rows.push_back(std::move(row));
      }
      out += RenderTable(header, rows);
      std::vector<std::string> guesses;
      for (int n : missing) {
        const GridCell* c =
            FindCell(grid, lambdas[0], originals[0], supports[0], n, beams[0]);
        if (c) {
          guesses.push_back(absl::StrCat(MissingHeader(n), " ",
                                         Baseline(c->random_guess)));
        }
      }
      absl::StrAppend(&out, "Beam size ", beams[0], ". Random guess: ",
                      absl::StrJoin(guesses, ", "), "\n");
      return out;
    }
    case TableLayout::kOriginalByBeam: {
      for (int beam : beams) {
        if (!rows.empty()) rows.push_back({});
        for (int original : originals) {
          const GridCell* c =
              FindCell(grid, lambdas[0], original, supports[0], missing[0], beam);
          if (!c) continue;
          rows.push_back({absl::StrCat(original), absl::StrCat(beam),
                          Rate(c->mean_success), Baseline(c->random_guess)});
        }
      }
      out += RenderTable({"Original Canary Repetitions", "Beam Size",
                          "Success Rate", "Random Guess"},
                         rows);
      absl::StrAppendFormat(&out, "lambda = %g\n", lambdas[0]);
      return out;
    }
    case TableLayout::kSupportingByBeam: {
      for (int support : supports) {
        if (!rows.empty()) rows.push_back({});
        for (int beam : beams) {
          const GridCell* c =
              FindCell(grid, lambdas[0], originals[0], support, missing[0], beam);
          if (!c) continue;
          rows.push_back({absl::StrCat(support), absl::StrCat(beam),
                          Rate(c->mean_success), Baseline(c->random_guess)});
        }
      }
      out += RenderTable({"Supporting Canary Repetitions", "Beam Size",
                          "Success Rate", "Random Guess"},
                         rows);
      absl::StrAppendFormat(&out, "lambda = %g, original canary repetitions = %d\n",
                            lambdas[0], originals[0]);
      return out;
    }
    case TableLayout::kFlat:
      break;
  }
  for (const GridCell& c : grid.cells) {
    rows.push_back({absl::StrFormat("%g", c.lambda),
                    absl::StrCat(c.original_repetitions),
                    absl::StrCat(c.supporting_repetitions),
                    absl::StrCat(c.n_missing), absl::StrCat(c.beam_size),
                    Rate(c.mean_success), Rate(c.mean_success_per_position),
                    Baseline(c.random_guess),
                    absl::StrCat(c.completed, "/", c.completed + c.failed)});
  }
  out += RenderTable({"lambda", "Original Reps", "Supporting Reps", "Missing",
                      "Beam Size", "Success", "Per-Position", "Random Guess",
                      "Completed"},
                     rows);
  return out;
}

}  // namespace canary_audit
