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

// Recovers hidden trailing tokens of a partially known sequence by searching
// the vocabulary for completions that maximize the model's likelihood of
// the sequence's known label, minus a frequency penalty:
//
//   score(v_1..v_m) = P(y | prefix + v_1..v_m) - lambda * (C(v_1) + ... + C(v_m))
//
// The penalty sum is accumulated left to right starting from 0.0, so any
// recomputation that follows the same order reproduces scores bit-exactly.
// Rankings sort by descending score and break ties by the ascending token-id
// tuple.

#ifndef CANARY_AUDIT_EXTRACT_H_
#define CANARY_AUDIT_EXTRACT_H_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "canary_audit/oracle.h"
#include "canary_audit/vocab.h"

namespace canary_audit {

struct ExtractionConfig {
  double lambda = 0.0;
  int beam_size = 1;
  int n_missing = 1;
  // Sequences per oracle call.
  int batch_size = 256;
  // Oracle calls in flight at once.
  int workers = 1;
};

// lambda finite and >= 0; positive sizes; beam_size <= vocab_size^n_missing.
absl::Status ValidateExtractionConfig(const ExtractionConfig& config,
                                      std::size_t vocab_size);

struct Candidate {
  TokenIds tokens;
  double score = 0.0;

  friend bool operator==(const Candidate&, const Candidate&) = default;
};

// Strict weak order used for every ranking: higher score first, then the
// lexicographically smaller token tuple.
bool RanksBefore(const Candidate& a, const Candidate& b);

struct ExtractionResult {
  std::vector<Candidate> ranked;
  std::int64_t queries_used = 0;

  friend bool operator==(const ExtractionResult&,
                         const ExtractionResult&) = default;
};

// 1-based position of `truth` in the ranking, if present.
std::optional<int> TruthRank(const ExtractionResult& result,
                             std::span<const TokenId> truth);

// P(label | prefix + v) - lambda * C(v), one oracle query.
absl::StatusOr<double> RegularizedScore(Oracle& oracle, const TokenIds& prefix,
                                        TokenId v, int label, double lambda,
                                        const FrequencyTable& freq);

// Scores every vocabulary token as the next token and returns the top
// beam_size. Requires n_missing == 1. Uses exactly |V| queries.
absl::StatusOr<ExtractionResult> RankSingleToken(Oracle& oracle,
                                                 const TokenIds& prefix,
                                                 int label,
                                                 const ExtractionConfig& config,
                                                 const Vocabulary& vocab,
                                                 const FrequencyTable& freq);

// Top-ranked next token.
absl::StatusOr<TokenId> ExtractGreedy(Oracle& oracle, const TokenIds& prefix,
                                      int label, const ExtractionConfig& config,
                                      const Vocabulary& vocab,
                                      const FrequencyTable& freq);

// Applies ExtractGreedy config.n_missing times, appending each choice to the
// prefix before choosing the next. Can miss jointly optimal tuples.
absl::StatusOr<TokenIds> ExtractGreedySequence(Oracle& oracle,
                                               const TokenIds& prefix,
                                               int label,
                                               const ExtractionConfig& config,
                                               const Vocabulary& vocab,
                                               const FrequencyTable& freq);

// Position-by-position beam search. Each surviving partial completion is
// extended by every vocabulary token, extensions are scored with the
// cumulative objective above, and the best beam_size survive. Returns
// min(beam_size, |V|^n_missing) candidates using at most
// n_missing * beam_size * |V| queries. With n_missing == 1 this is
// RankSingleToken.
absl::StatusOr<ExtractionResult> ExtractBeam(Oracle& oracle,
                                             const TokenIds& prefix, int label,
                                             const ExtractionConfig& config,
                                             const Vocabulary& vocab,
                                             const FrequencyTable& freq);

// {"config": {...}, "ranked": [{"tokens": [...], "score": real}...],
//  "queries_used": int, "truth_rank": int or null}
struct ExtractionReport {
  ExtractionConfig config;
  TokenIds prefix;
  int label = 0;
  ExtractionResult result;
  std::optional<int> truth_rank;
};

std::string SerializeExtractionReport(const ExtractionReport& report,
                                      const Vocabulary& vocab);
absl::StatusOr<ExtractionReport> ParseExtractionReport(absl::string_view json,
                                                       const Vocabulary& vocab);

}  // namespace canary_audit

#endif  // CANARY_AUDIT_EXTRACT_H_
