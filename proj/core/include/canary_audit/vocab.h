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

// Token universe and corpus token-frequency statistics.

#ifndef CANARY_AUDIT_VOCAB_H_
#define CANARY_AUDIT_VOCAB_H_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include "absl/strings/string_view.h"
#include <vector>

#include "absl/container/flat_hash_map.h"
#include "absl/status/status.h"
#include "absl/status/statusor.h"

namespace canary_audit {

using TokenId = std::int32_t;
using TokenIds = std::vector<TokenId>;
using TokenStrings = std::vector<std::string>;

// An ordered list of distinct, non-empty token strings. A token's id is its
// 0-based position. Immutable once built.
class Vocabulary {
 public:
  Vocabulary() = default;

  // Fails if any token is empty, contains a line break, or repeats.
  static absl::StatusOr<Vocabulary> FromTokens(std::vector<std::string> tokens);

  std::size_t size() const { return tokens_.size(); }
  bool empty() const { return tokens_.empty(); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  const std::string& token(TokenId id) const { return tokens_[id]; }
  bool contains(TokenId id) const {
    return id >= 0 && static_cast<std::size_t>(id) < tokens_.size();
  }

  std::optional<TokenId> Find(absl::string_view token) const;

  // Maps strings to ids; the error names the first out-of-vocabulary token.
  absl::StatusOr<TokenIds> Encode(std::span<const std::string> tokens) const;
  TokenStrings Decode(std::span<const TokenId> ids) const;

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.tokens_ == b.tokens_;
  }

 private:
  std::vector<std::string> tokens_;
  absl::flat_hash_map<std::string, TokenId> index_;
};

struct VocabularyOptions {
  // Tokens starting with this marker are treated as subword continuations
  // and dropped. Empty disables the filter.
  std::string continuation_prefix = "##";
};

// Distinct tokens in first-occurrence order.
absl::StatusOr<Vocabulary> BuildVocabulary(
    std::span<const TokenStrings> corpus, const VocabularyOptions& options = {});

// Synthetic vocabulary "t0000", "t0001", ...
Vocabulary MakeSyntheticVocabulary(std::size_t size);

// One token per line, UTF-8, line order defines ids.
absl::Status WriteVocabularyFile(const Vocabulary& vocab, const std::string& path);
absl::StatusOr<Vocabulary> ReadVocabularyFile(const std::string& path);

// Normalized occurrence count C(v) of every vocabulary token.
class FrequencyTable {
 public:
  FrequencyTable() = default;

  // weight(v) = counts[v] / sum(counts). An all-zero count vector yields an
  // all-zero table with total_tokens() == 0.
  static absl::StatusOr<FrequencyTable> FromCounts(
      std::span<const std::int64_t> counts);

  // Used when deserializing. Weights must be finite, non-negative, and sum
  // to 1 within 1e-9 whenever total_tokens > 0.
  static absl::StatusOr<FrequencyTable> FromWeights(std::int64_t total_tokens,
                                                    std::vector<double> weights);

  std::size_t size() const { return weights_.size(); }
  double weight(TokenId id) const { return weights_[id]; }
  std::span<const double> weights() const { return weights_; }
  std::int64_t total_tokens() const { return total_tokens_; }

  friend bool operator==(const FrequencyTable& a, const FrequencyTable& b) {
    return a.total_tokens_ == b.total_tokens_ && a.weights_ == b.weights_;
  }

 private:
  std::int64_t total_tokens_ = 0;
  std::vector<double> weights_;
};

// Raw occurrence counts of ids in [0, vocab_size). Fails on ids out of range.
absl::StatusOr<std::vector<std::int64_t>> CountTokens(
    std::span<const TokenIds> corpus, std::size_t vocab_size);

absl::StatusOr<FrequencyTable> ComputeFrequencyTable(
    std::span<const TokenIds> corpus, std::size_t vocab_size);
absl::StatusOr<FrequencyTable> ComputeFrequencyTable(
    std::span<const TokenStrings> corpus, const Vocabulary& vocab);

// JSON object {"total_tokens": int, "weights": [real per id]}.
std::string SerializeFrequencyTable(const FrequencyTable& table);
absl::StatusOr<FrequencyTable> ParseFrequencyTable(absl::string_view json);
absl::Status WriteFrequencyTableFile(const FrequencyTable& table,
                                     const std::string& path);
absl::StatusOr<FrequencyTable> ReadFrequencyTableFile(const std::string& path);

}  // namespace canary_audit

#endif  // CANARY_AUDIT_VOCAB_H_
