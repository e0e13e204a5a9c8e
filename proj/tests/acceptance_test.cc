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

// End-to-end acceptance checks. Prints one PASS/FAIL line per check and
// exits non-zero if any check fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "absl/strings/str_format.h"
#include "canary_audit/conformance.h"
#include "canary_audit/eval.h"
#include "canary_audit/extract.h"
#include "canary_audit/oracle_server.h"
#include "canary_audit/parallel.h"
#include "canary_audit/refmodel.h"
#include "canary_audit/seeding.h"
#include "cli/commands.h"
#include "testing/stub_oracles.h"

namespace canary_audit {
namespace {

struct Outcome {
  bool passed;
  std::string detail;
};

int failures = 0;

void Report(const std::string& name, const Outcome& o, double seconds) {
  std::cout << (o.passed ? "PASS " : "FAIL ") << name << ": " << o.detail
            << absl::StrFormat(" [%.1fs]", seconds) << std::endl;
  if (!o.passed) ++failures;
}

template <typename Fn>
void Check(const std::string& name, Fn fn) {
  const auto start = std::chrono::steady_clock::now();
  Outcome o = fn();
  const std::chrono::duration<double> took = std::chrono::steady_clock::now() - start;
  Report(name, o, took.count());
}

Outcome BaselineArithmetic() {
  struct Case {
    int k;
    int n;
    double expected;
  };
  const Case cases[] = {{100, 1, 0.0058}, {50, 1, 0.0029}, {200, 1, 0.0117}, {100, 2, 3.4e-5}};
  std::string detail;
  bool ok = true;
  for (const Case& c : cases) {
    auto rate = RandomGuessRate(c.k, 17000, c.n);
    const double rel = rate.ok() ? std::abs(*rate - c.expected) / c.expected : 1.0;
    ok = ok && rate.ok() && rel <= 0.05;
    detail += absl::StrFormat("(%d/17000)^%d=%.3g vs %.3g rel %.3f; ", c.k, c.n,
                              rate.value_or(NAN), c.expected, rel);
  }
  auto certain = RandomGuessRate(17000, 17000, 1);
  ok = ok && certain.ok() && *certain == 1.0;
  detail += absl::StrFormat("k=|V| -> %g", certain.value_or(NAN));
  return {ok, detail};
}

Outcome GradientCheck() {
  double worst = 0.0;
  int coords_checked = 0;
  for (int config = 0; config < 5; ++config) {
    const ModelShape shape{.vocab_size = 20 + 5 * config, .embed_dim = 3 + config,
                           .hidden_dim = 4 + 3 * config, .num_classes = 2 + 2 * config};
    Rng rng(DeriveSeed(2026, {static_cast<std::uint64_t>(config)}));
    ModelParams p = ModelParams::Zeros(shape);
    std::normal_distribution<double> normal(0.0, 0.5);
    for (auto t : p.tensors()) {
      for (double& x : t) x = normal(rng);
    }
    std::uniform_int_distribution<TokenId> tok(0, shape.vocab_size - 1);
    std::uniform_int_distribution<int> label(0, shape.num_classes - 1), len(1, 8);
    std::vector<LabeledExample> batch(8);
    for (auto& ex : batch) {
      ex.tokens.resize(len(rng));
      for (TokenId& t : ex.tokens) t = tok(rng);
      ex.label = label(rng);
    }
    const double wd = 0.01 * config;
    auto analytic = ComputeLossAndGradient(p, batch, wd);
    if (!analytic.ok()) return {false, std::string(analytic.status().message())};
    auto tensors = p.tensors();
    auto grads = std::as_const(analytic->gradient).tensors();
    std::uniform_int_distribution<std::size_t> pick_tensor(0, tensors.size() - 1);
    for (int n = 0; n < 120; ++n) {
      const std::size_t t = pick_tensor(rng);
      const std::size_t i =
          std::uniform_int_distribution<std::size_t>(0, tensors[t].size() - 1)(rng);
      double& x = tensors[t][i];
      const double saved = x;
      x = saved + 1e-5;
      const double up = ComputeLossAndGradient(p, batch, wd)->loss;
      x = saved - 1e-5;
      const double down = ComputeLossAndGradient(p, batch, wd)->loss;
      x = saved;
      const double numeric = (up - down) / 2e-5;
      const double denom =
          std::max({std::abs(numeric), std::abs(grads[t][i]), 1e-6});
      worst = std::max(worst, std::abs(numeric - grads[t][i]) / denom);
      ++coords_checked;
    }
  }
  return {worst <= 1e-4,
          absl::StrFormat("max relative error %.3g over %d coordinates in 5 configurations",
                          worst, coords_checked)};
}

std::uint64_t Fnv1a(const TokenIds& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (TokenId t : s) h = (h ^ static_cast<std::uint32_t>(t)) * 1099511628211ull;
  return h;
}

std::unique_ptr<testing::FunctionOracle> HashOracle(int classes, std::uint64_t salt) {
  return std::make_unique<testing::FunctionOracle>(classes, [=](const TokenIds& s) {
    Rng rng(DeriveSeed(salt, {Fnv1a(s)}));
    std::uniform_real_distribution<double> u(0.01, 1.0);
    std::vector<double> p(classes);
    double sum = 0.0;
    for (double& x : p) sum += (x = u(rng));
    for (double& x : p) x /= sum;
    return p;
  });
}

Outcome BeamMatchesBruteForce() {
  constexpr int kV = 30;
  const Vocabulary vocab = MakeSyntheticVocabulary(kV);
  Rng rng(7);
  std::vector<std::int64_t> counts(kV);
  for (auto& c : counts) c = std::uniform_int_distribution<std::int64_t>(1, 40)(rng);
  const FrequencyTable freq = *FrequencyTable::FromCounts(counts);
  auto oracle = HashOracle(3, 11);
  const TokenIds prefix = {4, 8, 15, 16, 23};
  const double lambda = 0.2;

  std::vector<Candidate> brute;
  for (TokenId a = 0; a < kV; ++a) {
    for (TokenId b = 0; b < kV; ++b) {
      TokenIds seq = prefix;
      seq.push_back(a);
      seq.push_back(b);
      double penalty = 0.0;
      penalty += freq.weight(a);
      penalty += freq.weight(b);
      brute.push_back({{a, b}, *oracle->LabelLikelihood(seq, 1) - lambda * penalty});
    }
  }
  std::sort(brute.begin(), brute.end(), [](const Candidate& x, const Candidate& y) {
    if (x.score != y.score) return x.score > y.score;
    return x.tokens < y.tokens;
  });
  auto beam = ExtractBeam(*oracle, prefix, 1,
                          {.lambda = lambda, .beam_size = kV * kV, .n_missing = 2}, vocab,
                          freq);
  if (!beam.ok()) return {false, std::string(beam.status().message())};
  const bool equal = beam->ranked == brute;
  return {equal, absl::StrFormat("|V|=%d, n=2, k=%d: %zu candidates, rankings %s", kV,
                                 kV * kV, beam->ranked.size(),
                                 equal ? "identical" : "differ")};
}

Outcome RegularizerExtremes() {
  constexpr int kV = 40;
  const Vocabulary vocab = MakeSyntheticVocabulary(kV);
  Rng rng(8);
  std::vector<std::int64_t> counts(kV);
  for (auto& c : counts) c = std::uniform_int_distribution<std::int64_t>(5, 500)(rng);
  counts[17] = 1;
  const FrequencyTable freq = *FrequencyTable::FromCounts(counts);
  const TokenIds prefix = {1, 2, 3};

  auto uniform = testing::ConstantOracle({0.25, 0.25, 0.25, 0.25});
  auto top = ExtractBeam(*uniform, prefix, 0, {.lambda = 10, .beam_size = 1}, vocab, freq);
  const bool least_frequent = top.ok() && top->ranked[0].tokens == TokenIds{17};

  auto random = HashOracle(4, 12);
  auto pure = ExtractBeam(*random, prefix, 2, {.lambda = 0, .beam_size = kV}, vocab, freq);
  bool likelihood_order = pure.ok();
  if (pure.ok()) {
    std::vector<std::pair<double, TokenId>> order;
    for (TokenId v = 0; v < kV; ++v) {
      TokenIds seq = prefix;
      seq.push_back(v);
      order.push_back({-*random->LabelLikelihood(seq, 2), v});
    }
    std::sort(order.begin(), order.end());
    for (int i = 0; i < kV; ++i) {
      likelihood_order = likelihood_order && pure->ranked[i].tokens[0] == order[i].second &&
                         pure->ranked[i].score == -order[i].first;
    }
  }
  return {least_frequent && likelihood_order,
          absl::StrFormat("lambda=10 argmax is least-frequent token: %s; lambda=0 equals "
                          "likelihood order: %s",
                          least_frequent ? "yes" : "no", likelihood_order ? "yes" : "no")};
}

// Smallest/largest x with P(X <= x) >= alpha/2 and P(X >= x) >= alpha/2.
std::pair<int, int> BinomialInterval(int n, double p, double alpha) {
  std::vector<double> cdf(n + 1);
  double acc = 0.0;
  for (int x = 0; x <= n; ++x) {
    acc += std::exp(std::lgamma(n + 1.0) - std::lgamma(x + 1.0) - std::lgamma(n - x + 1.0) +
                    x * std::log(p) + (n - x) * std::log1p(-p));
    cdf[x] = acc;
  }
  int lo = 0;
  while (lo < n && cdf[lo] < alpha / 2) ++lo;
  int hi = 0;
  while (hi < n && cdf[hi] < 1 - alpha / 2) ++hi;
  return {lo, hi};
}

Outcome NullCalibration() {
  ExperimentConfig config;
  config.vocab_size = 500;
  config.train_model = false;
  config.canary.original_repetitions = 0;
  config.canary.support = SupportMode::kNone;
  config.extraction.beam_size = 25;
  constexpr int kTrials = 200;
  std::vector<TrialOutcome> outcomes(kTrials);
  ParallelFor(kTrials, DefaultParallelism(), [&](std::size_t t) {
    outcomes[t] = RunTrial(config, DeriveSeed(404, {t}));
  });
  int hits = 0;
  for (const TrialOutcome& o : outcomes) {
    if (o.failed) return {false, "trial failed: " + o.failure};
    hits += o.success;
  }
  const auto [lo, hi] = BinomialInterval(kTrials, 25.0 / 500, 0.01);
  return {hits >= lo && hits <= hi,
          absl::StrFormat("%d/%d hits (rate %.3f), 99%% interval for k/|V|=0.05 is [%d, %d]",
                          hits, kTrials, hits / double(kTrials), lo, hi)};
}

struct MemorizationRun {
  absl::StatusOr<ExperimentGrid> grid = absl::UnknownError("not run");
};

const GridCell* FindCell(const ExperimentGrid& grid, int reps, int beam) {
  for (const GridCell& c : grid.cells) {
    if (c.original_repetitions == reps && c.beam_size == beam) return &c;
  }
  return nullptr;
}

MemorizationRun RunMemorizationGrid() {
  GridSpec spec;
  spec.name = "memorization";
  spec.lambdas = {0.01};
  spec.original_repetitions = {100, 10};
  spec.beam_sizes = {50, 100, 200};
  spec.trials = 10;
  spec.master_seed = 2026;
  spec.jobs = DefaultParallelism();
  spec.layout = TableLayout::kOriginalByBeam;
  MemorizationRun run;
  run.grid = RunExperiment(spec);
  if (run.grid.ok()) std::cout << GridToText(*run.grid);
  return run;
}

Outcome Memorization(const MemorizationRun& run) {
  if (!run.grid.ok()) return {false, std::string(run.grid.status().message())};
  const GridCell* cell = FindCell(*run.grid, 100, 50);
  if (cell == nullptr || !run.grid->valid) return {false, "grid incomplete"};
  const double bar = 10 * *RandomGuessRate(50, 1000, 1);
  return {cell->mean_success >= bar && cell->completed == 10,
          absl::StrFormat("100 repetitions, beam 50: mean success %.2f over %d seeds "
                          "(need >= %.2f = 10x random guess); mean valid accuracy %.3f",
                          cell->mean_success, cell->completed, bar, [&] {
                            double s = 0;
                            for (const auto& t : cell->trials) s += t.valid_accuracy;
                            return s / cell->trials.size();
                          }())};
}

Outcome RepetitionTrend(const MemorizationRun& run) {
  if (!run.grid.ok()) return {false, std::string(run.grid.status().message())};
  bool ok = true;
  std::string detail;
  for (int beam : {50, 100, 200}) {
    const GridCell* hi = FindCell(*run.grid, 100, beam);
    const GridCell* lo = FindCell(*run.grid, 10, beam);
    if (hi == nullptr || lo == nullptr) return {false, "missing cell"};
    ok = ok && lo->mean_success <= hi->mean_success && lo->completed == 10 &&
         hi->completed == 10;
    detail += absl::StrFormat("beam %d: %.2f (10x) <= %.2f (100x); ", beam,
                              lo->mean_success, hi->mean_success);
  }
  return {ok, detail};
}

Outcome TopKNesting(const MemorizationRun& run) {
  if (!run.grid.ok()) return {false, std::string(run.grid.status().message())};
  int checked = 0;
  bool ok = true;
  for (int reps : {100, 10}) {
    const GridCell* c50 = FindCell(*run.grid, reps, 50);
    const GridCell* c100 = FindCell(*run.grid, reps, 100);
    const GridCell* c200 = FindCell(*run.grid, reps, 200);
    if (!c50 || !c100 || !c200) return {false, "missing cell"};
    for (std::size_t t = 0; t < c50->trials.size(); ++t) {
      const bool s50 = c50->trials[t].success, s100 = c100->trials[t].success,
                 s200 = c200->trials[t].success;
      ok = ok && (!s50 || s100) && (!s100 || s200) &&
           c50->trials[t].truth_rank == c200->trials[t].truth_rank;
      ++checked;
    }
  }
  return {ok, absl::StrFormat("success@50 => @100 => @200 held in %d of %d trials",
                              ok ? checked : 0, checked)};
}

Outcome ExperimentDeterminism() {
  const std::filesystem::path dir =
      std::filesystem::temp_directory_path() / "canary_audit_acceptance";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  const int many = std::max(4, DefaultParallelism());
  auto run = [&](const std::string& tag, int jobs) -> std::string {
    const std::string csv = (dir / (tag + ".csv")).string();
    std::ostringstream out, err;
    const int code = cli::RunCli({"canary_audit", "experiment", "--preset", "table3",
                                  "--seed", "17", "--jobs", std::to_string(jobs),
                                  "--out-csv", csv},
                                 out, err);
    if (code != 0) return "exit " + std::to_string(code) + ": " + err.str();
    std::ifstream in(csv, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  const std::string a = run("first", 1);
  const std::string b = run("second", 1);
  const std::string c = run("parallel", many);
  const bool ok = !a.empty() && a.rfind("lambda,", 0) == 0 && a == b && a == c;
  return {ok, absl::StrFormat("table3 preset, 10 trials/cell: run1 %s run2, --jobs 1 %s "
                              "--jobs %d (%zu bytes)",
                              a == b ? "==" : "!=", a == c ? "==" : "!=", many, a.size())};
}

Outcome ProtocolConformance() {
  // The in-process server stands in for an external model server.
  const Vocabulary vocab = MakeSyntheticVocabulary(200);
  ReferenceModelOracle model(std::make_shared<const ModelParams>(
      InitializeParams({.vocab_size = 200, .num_classes = 10}, 3)));
  OracleServer server(model, vocab, "in-process-reference");
  auto port = server.Start();
  if (!port.ok()) return {false, std::string(port.status().message())};
  ConformanceOptions options;
  options.probes = {{"t0001", "t0002", "t0003", "t0004"}, {"t0199"}, {"t0050", "t0050"}};
  ConformanceReport report = RunConformance(server.url(), options);
  std::string names;
  for (const auto& c : report.checks) names += (c.passed ? "" : "!") + c.name + " ";
  return {report.all_passed(), "in-process server: " + names};
}

}  // namespace
}  // namespace canary_audit

int main() {
  using namespace canary_audit;
  Check("baseline_arithmetic", BaselineArithmetic);
  Check("gradient_correctness", GradientCheck);
  Check("beam_bruteforce_equivalence", BeamMatchesBruteForce);
  Check("regularizer_extremes", RegularizerExtremes);
  Check("null_extraction_calibration", NullCalibration);

  const auto start = std::chrono::steady_clock::now();
  const MemorizationRun run = RunMemorizationGrid();
  const std::chrono::duration<double> took = std::chrono::steady_clock::now() - start;
  Report("desk_scale_memorization", Memorization(run), took.count());
  Report("repetition_trend", RepetitionTrend(run), 0.0);
  Report("topk_nesting", TopKNesting(run), 0.0);

  Check("experiment_determinism", ExperimentDeterminism);
  Check("protocol_conformance", ProtocolConformance);

  std::cout << (failures == 0 ? "ALL PASS" : absl::StrFormat("%d FAILED", failures))
            << std::endl;
  return failures == 0 ? 0 : 1;
}
