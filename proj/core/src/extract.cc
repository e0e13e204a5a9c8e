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

#include "canary_audit/extract.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <mutex>
#include <utility>

#include "absl/strings/str_cat.h"
#include "canary_audit/parallel.h"
#include "canary_audit/status_macros.h"
#include "json.hpp"

namespace canary_audit {

using json = nlohmann::json;

namespace {

absl::Status CheckQuery(const Oracle& oracle, const TokenIds& prefix, int label,
                        const Vocabulary& vocab, const FrequencyTable& freq) {
  if (vocab.size() < 2) {
    return absl::InvalidArgumentError("search vocabulary needs >= 2 tokens");
  }
  if (freq.size() != vocab.size()) {
    return absl::InvalidArgumentError(
        absl::StrCat("frequency table covers ", freq.size(),
                     " tokens but the vocabulary has ", vocab.size()));
  }
  if (label < 0 || label >= oracle.num_classes()) {
    return absl::OutOfRangeError(absl::StrCat(
        "label ", label, " outside [0, ", oracle.num_classes(), ")"));
  }
  for (TokenId t : prefix) {
    if (!vocab.contains(t)) {
      return absl::OutOfRangeError(
          absl::StrCat("prefix token id ", t, " outside vocabulary"));
    }
  }
  return absl::OkStatus();
}

// Scores `count` sequences, produced on demand by `make(i, out)`, and returns
// P(label | sequence i) in slot i. Batches run concurrently; slot indexing
// makes the result independent of scheduling.
absl::StatusOr<std::vector<double>> SweepLikelihoods(
    Oracle& oracle, std::size_t count, int label, const ExtractionConfig& config,
    const std::function<void(std::size_t, TokenIds&)>& make) {
  const std::size_t batch = static_cast<std::size_t>(config.batch_size);
  const std::size_t num_batches = (count + batch - 1) / batch;
  std::vector<double> out(count, 0.0);
  std::atomic<bool> failed{false};
  std::atomic<std::size_t> scored{0};
  std::mutex error_mu;
  std::size_t error_batch = num_batches;
  absl::Status error;

  ParallelFor(num_batches, config.workers, [&](std::size_t b) {
    if (failed.load()) return;
    const std::size_t begin = b * batch;
    const std::size_t end = std::min(count, begin + batch);
    std::vector<TokenIds> sequences(end - begin);
    for (std::size_t i = begin; i < end; ++i) make(i, sequences[i - begin]);
    auto dists = oracle.ScoreBatch(sequences);
    absl::Status status = dists.status();
    if (status.ok()) {
      for (std::size_t i = begin; i < end; ++i) {
        const auto& probs = (*dists)[i - begin].probs;
        if (static_cast<int>(probs.size()) != oracle.num_classes()) {
          status = absl::DataLossError("oracle returned wrong class count");
          break;
        }
        out[i] = probs[label];
      }
    }
    if (!status.ok()) {
      failed.store(true);
      std::lock_guard<std::mutex> lock(error_mu);
      if (b < error_batch) {
        error_batch = b;
        error = status;
      }
      return;
    }
    scored += end - begin;
  });

  if (failed.load()) {
    return absl::Status(
        error.code(),
        absl::StrCat("extraction aborted after ", scored.load(), " of ", count,
                     " queries: ", error.message()));
  }
  return out;
}

}  // namespace

absl::Status ValidateExtractionConfig(const ExtractionConfig& config,
                                      std::size_t vocab_size) {
  if (!std::isfinite(config.lambda) || config.lambda < 0.0) {
    return absl::InvalidArgumentError("lambda must be finite and >= 0");
  }
  if (config.beam_size < 1 || config.n_missing < 1 || config.batch_size < 1 ||
      config.workers < 1) {
    return absl::InvalidArgumentError(
        "beam_size, n_missing, batch_size and workers must be positive");
  }
  // beam_size <= vocab_size^n_missing without overflowing.
  double space = 1.0;
  for (int i = 0; i < config.n_missing && space < config.beam_size; ++i) {
    space *= static_cast<double>(vocab_size);
  }
  if (space < config.beam_size) {
    return absl::InvalidArgumentError(absl::StrCat(
        "beam size ", config.beam_size, " exceeds the search space of ",
        vocab_size, "^", config.n_missing, " completions"));
  }
  return absl::OkStatus();
}

bool RanksBefore(const Candidate& a, const Candidate& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.tokens < b.tokens;
}

std::optional<int> TruthRank(const ExtractionResult& result,
                             std::span<const TokenId> truth) {
  for (std::size_t i = 0; i < result.ranked.size(); ++i) {
    const TokenIds& t = result.ranked[i].tokens;
    if (std::equal(t.begin(), t.end(), truth.begin(), truth.end())) {
      return static_cast<int>(i + 1);
    }
  }
  return std::nullopt;
}

absl::StatusOr<double> RegularizedScore(Oracle& oracle, const TokenIds& prefix,
                                        TokenId v, int label, double lambda,
                                        const FrequencyTable& freq) {
  if (v < 0 || static_cast<std::size_t>(v) >= freq.size()) {
    return absl::OutOfRangeError(absl::StrCat("token id ", v, " outside vocabulary"));
  }
  TokenIds sequence = prefix;
  sequence.push_back(v);
  CA_ASSIGN_OR_RETURN(double likelihood, oracle.LabelLikelihood(sequence, label));
  double penalty = 0.0;
  penalty += freq.weight(v);
  return likelihood - lambda * penalty;
}

absl::StatusOr<ExtractionResult> RankSingleToken(Oracle& oracle,
                                                 const TokenIds& prefix,
                                                 int label,
                                                 const ExtractionConfig& config,
                                                 const Vocabulary& vocab,
                                                 const FrequencyTable& freq) {
  if (config.n_missing != 1) {
    return absl::InvalidArgumentError("single-token ranking needs n_missing == 1");
  }
  return ExtractBeam(oracle, prefix, label, config, vocab, freq);
}

absl::StatusOr<TokenId> ExtractGreedy(Oracle& oracle, const TokenIds& prefix,
                                      int label, const ExtractionConfig& config,
                                      const Vocabulary& vocab,
                                      const FrequencyTable& freq) {
  ExtractionConfig single = config;
  single.n_missing = 1;
  single.beam_size = 1;
  CA_ASSIGN_OR_RETURN(ExtractionResult result,
                      RankSingleToken(oracle, prefix, label, single, vocab, freq));
  return result.ranked.front().tokens.front();
}

absl::StatusOr<TokenIds> ExtractGreedySequence(Oracle& oracle,
                                               const TokenIds& prefix,
                                               int label,
                                               const ExtractionConfig& config,
                                               const Vocabulary& vocab,
                                               const FrequencyTable& freq) {
  if (config.n_missing < 1) {
    return absl::InvalidArgumentError("n_missing must be positive");
  }
  TokenIds partial = prefix;
  TokenIds chosen;
  for (int i = 0; i < config.n_missing; ++i) {
    CA_ASSIGN_OR_RETURN(TokenId next, ExtractGreedy(oracle, partial, label,
                                                    config, vocab, freq));
    partial.push_back(next);
    chosen.push_back(next);
  }
  return chosen;
}

absl::StatusOr<ExtractionResult> ExtractBeam(Oracle& oracle,
                                             const TokenIds& prefix, int label,
                                             const ExtractionConfig& config,
                                             const Vocabulary& vocab,
                                             const FrequencyTable& freq) {
  CA_RETURN_IF_ERROR(ValidateExtractionConfig(config, vocab.size()));
  CA_RETURN_IF_ERROR(CheckQuery(oracle, prefix, label, vocab, freq));

  struct Partial {
    TokenIds tokens;
    double penalty = 0.0;
  };
  const std::size_t vocab_size = vocab.size();
  std::vector<Partial> survivors(1);
  std::vector<Candidate> ranked;
  ExtractionResult result;

  for (int position = 0; position < config.n_missing; ++position) {
    const std::size_t count = survivors.size() * vocab_size;
    CA_ASSIGN_OR_RETURN(
        std::vector<double> likelihood,
        SweepLikelihoods(oracle, count, label, config,
                         [&](std::size_t i, TokenIds& seq) {
                           const Partial& s = survivors[i / vocab_size];
                           seq.reserve(prefix.size() + s.tokens.size() + 1);
                           seq = prefix;
                           seq.insert(seq.end(), s.tokens.begin(), s.tokens.end());
                           seq.push_back(static_cast<TokenId>(i % vocab_size));
                         }));
    result.queries_used += static_cast<std::int64_t>(count);

    std::vector<Candidate> extensions(count);
    std::vector<double> penalties(count);
    for (std::size_t i = 0; i < count; ++i) {
      const Partial& s = survivors[i / vocab_size];
      const TokenId v = static_cast<TokenId>(i % vocab_size);
      penalties[i] = s.penalty + freq.weight(v);
      extensions[i].tokens = s.tokens;
      extensions[i].tokens.push_back(v);
      extensions[i].score = likelihood[i] - config.lambda * penalties[i];
    }
    std::vector<std::size_t> order(count);
    for (std::size_t i = 0; i < count; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return RanksBefore(extensions[a], extensions[b]);
    });
    // Equal tuples score equally, so duplicates end up adjacent.
    order.erase(std::unique(order.begin(), order.end(),
                            [&](std::size_t a, std::size_t b) {
                              return extensions[a].tokens == extensions[b].tokens;
                            }),
                order.end());
    if (order.size() > static_cast<std::size_t>(config.beam_size)) {
      order.resize(config.beam_size);
    }

    std::vector<Partial> next;
    next.reserve(order.size());
    ranked.clear();
    for (std::size_t i : order) {
      next.push_back(Partial{extensions[i].tokens, penalties[i]});
      ranked.push_back(std::move(extensions[i]));
    }
    survivors = std::move(next);
  }
  result.ranked = std::move(ranked);
  return result;
}

std::string SerializeExtractionReport(const ExtractionReport& report,
                                      const Vocabulary& vocab) {
  json j;
  j["config"] = {
      {"lambda", report.config.lambda},
      {"beam_size", report.config.beam_size},
      {"n_missing", report.config.n_missing},
      {"batch_size", report.config.batch_size},
      {"label", report.label},
      {"prefix", vocab.Decode(report.prefix)},
  };
  j["ranked"] = json::array();
  for (const Candidate& c : report.result.ranked) {
    j["ranked"].push_back({{"tokens", vocab.Decode(c.tokens)}, {"score", c.score}});
  }
  j["queries_used"] = report.result.queries_used;
  j["truth_rank"] = report.truth_rank ? json(*report.truth_rank) : json(nullptr);
  return j.dump(2);
}

absl::StatusOr<ExtractionReport> ParseExtractionReport(absl::string_view text,
                                                       const Vocabulary& vocab) {
  json j = json::parse(text.begin(), text.end(), nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded() || !j.is_object() || !j.contains("config") ||
      !j.contains("ranked") || !j["ranked"].is_array() ||
      !j.contains("queries_used") || !j.contains("truth_rank")) {
    return absl::InvalidArgumentError(
        "extraction report needs config, ranked, queries_used, truth_rank");
  }
  auto tokens = [&vocab](const json& arr) -> absl::StatusOr<TokenIds> {
    if (!arr.is_array()) return absl::InvalidArgumentError("expected token array");
    TokenStrings strings;
    for (const json& t : arr) {
      if (!t.is_string()) return absl::InvalidArgumentError("non-string token");
      strings.push_back(t.get<std::string>());
    }
    return vocab.Encode(strings);
  };
  ExtractionReport report;
  try {
    const json& c = j["config"];
    report.config.lambda = c.at("lambda").get<double>();
    report.config.beam_size = c.at("beam_size").get<int>();
    report.config.n_missing = c.at("n_missing").get<int>();
    report.config.batch_size = c.at("batch_size").get<int>();
    report.label = c.at("label").get<int>();
    CA_ASSIGN_OR_RETURN(report.prefix, tokens(c.at("prefix")));
    for (const json& r : j["ranked"]) {
      Candidate cand;
      CA_ASSIGN_OR_RETURN(cand.tokens, tokens(r.at("tokens")));
      cand.score = r.at("score").get<double>();
      report.result.ranked.push_back(std::move(cand));
    }
    report.result.queries_used = j["queries_used"].get<std::int64_t>();
    if (!j["truth_rank"].is_null()) report.truth_rank = j["truth_rank"].get<int>();
  } catch (const json::exception& e) {
    return absl::InvalidArgumentError(
        absl::StrCat("malformed extraction report: ", e.what()));
  }
  return report;
}

}  // namespace canary_audit
