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

#include "canary_audit/vocab.h"

#include <cmath>
#include <numeric>
#include <utility>

#include "absl/strings/match.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "absl/strings/str_split.h"
#include "canary_audit/status_macros.h"
#include "file_util.h"
#include "json.hpp"

namespace canary_audit {

using json = nlohmann::json;

absl::StatusOr<Vocabulary> Vocabulary::FromTokens(
    std::vector<std::string> tokens) {
  Vocabulary vocab;
  vocab.index_.reserve(tokens.size());
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const std::string& token = tokens[i];
    if (token.empty()) {
      return absl::InvalidArgumentError(
          absl::StrCat("empty token at id ", i));
    }
    if (token.find_first_of("\r\n") != std::string::npos) {
      return absl::InvalidArgumentError(
          absl::StrCat("token at id ", i, " contains a line break"));
    }
    if (!vocab.index_.emplace(token, static_cast<TokenId>(i)).second) {
      return absl::InvalidArgumentError(
          absl::StrCat("duplicate token \"", token, "\" at id ", i));
    }
  }
  vocab.tokens_ = std::move(tokens);
  return vocab;
}

std::optional<TokenId> Vocabulary::Find(absl::string_view token) const {
  auto it = index_.find(token);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

absl::StatusOr<TokenIds> Vocabulary::Encode(
    std::span<const std::string> tokens) const {
  TokenIds ids;
  ids.reserve(tokens.size());
  for (const std::string& token : tokens) {
    auto id = Find(token);
    if (!id) {
      return absl::NotFoundError(
          absl::StrCat("out-of-vocabulary token \"", token, "\""));
    }
    ids.push_back(*id);
  }
  return ids;
}

TokenStrings Vocabulary::Decode(std::span<const TokenId> ids) const {
  TokenStrings out;
  out.reserve(ids.size());
  for (TokenId id : ids) out.push_back(tokens_.at(id));
  return out;
}

absl::StatusOr<Vocabulary> BuildVocabulary(std::span<const TokenStrings> corpus,
                                           const VocabularyOptions& options) {
  std::vector<std::string> tokens;
  absl::flat_hash_map<std::string, bool> seen;
  bool any = false;
  for (const TokenStrings& sequence : corpus) {
    for (const std::string& token : sequence) {
      any = true;
      if (!options.continuation_prefix.empty() &&
          absl::StartsWith(token, options.continuation_prefix)) {
        continue;
      }
      if (seen.emplace(token, true).second) tokens.push_back(token);
    }
  }
  if (!any) return absl::InvalidArgumentError("empty corpus");
  if (tokens.empty()) {
    return absl::InvalidArgumentError(
        "corpus contains only continuation tokens");
  }
  return Vocabulary::FromTokens(std::move(tokens));
}

Vocabulary MakeSyntheticVocabulary(std::size_t size) {
  std::vector<std::string> tokens;
  tokens.reserve(size);
  for (std::size_t i = 0; i < size; ++i) {
    tokens.push_back(absl::StrFormat("t%04d", i));
  }
  return *Vocabulary::FromTokens(std::move(tokens));
}

absl::Status WriteVocabularyFile(const Vocabulary& vocab,
                                 const std::string& path) {
  std::string contents;
  for (const std::string& token : vocab.tokens()) {
    absl::StrAppend(&contents, token, "\n");
  }
  return internal::WriteFileAtomically(path, contents);
}

absl::StatusOr<Vocabulary> ReadVocabularyFile(const std::string& path) {
  CA_ASSIGN_OR_RETURN(std::string contents, internal::ReadFile(path));
  if (contents.empty()) {
    return absl::InvalidArgumentError(absl::StrCat("empty vocabulary: ", path));
  }
  if (contents.back() != '\n') {
    return absl::DataLossError(
        absl::StrCat("vocabulary file does not end with a newline: ", path));
  }
  contents.pop_back();
  std::vector<std::string> tokens = absl::StrSplit(contents, '\n');
  auto vocab = Vocabulary::FromTokens(std::move(tokens));
  if (!vocab.ok()) {
    return absl::InvalidArgumentError(
        absl::StrCat(path, ": ", vocab.status().message()));
  }
  return vocab;
}

absl::StatusOr<FrequencyTable> FrequencyTable::FromCounts(
    std::span<const std::int64_t> counts) {
  FrequencyTable table;
  std::int64_t total = 0;
  for (std::int64_t c : counts) {
    if (c < 0) return absl::InvalidArgumentError("negative token count");
    total += c;
  }
  table.total_tokens_ = total;
  table.weights_.assign(counts.size(), 0.0);
  if (total > 0) {
    const double denom = static_cast<double>(total);
    for (std::size_t i = 0; i < counts.size(); ++i) {
      table.weights_[i] = static_cast<double>(counts[i]) / denom;
    }
  }
  return table;
}

absl::StatusOr<FrequencyTable> FrequencyTable::FromWeights(
    std::int64_t total_tokens, std::vector<double> weights) {
  if (total_tokens < 0) {
    return absl::InvalidArgumentError("total_tokens must be non-negative");
  }
  double sum = 0.0;
  for (double w : weights) {
    if (!std::isfinite(w) || w < 0.0 || w > 1.0) {
      return absl::InvalidArgumentError(
          absl::StrCat("frequency weight out of [0,1]: ", w));
    }
    sum += w;
  }
  if (total_tokens > 0 && std::abs(sum - 1.0) > 1e-9) {
    return absl::InvalidArgumentError(
        absl::StrFormat("frequency weights sum to %.17g, expected 1", sum));
  }
  FrequencyTable table;
  table.total_tokens_ = total_tokens;
  table.weights_ = std::move(weights);
  return table;
}

absl::StatusOr<std::vector<std::int64_t>> CountTokens(
    std::span<const TokenIds> corpus, std::size_t vocab_size) {
  std::vector<std::int64_t> counts(vocab_size, 0);
  for (const TokenIds& sequence : corpus) {
    for (TokenId id : sequence) {
      if (id < 0 || static_cast<std::size_t>(id) >= vocab_size) {
        return absl::OutOfRangeError(
            absl::StrCat("token id ", id, " outside vocabulary of size ",
                         vocab_size));
      }
      ++counts[id];
    }
  }
  return counts;
}

absl::StatusOr<FrequencyTable> ComputeFrequencyTable(
    std::span<const TokenIds> corpus, std::size_t vocab_size) {
  CA_ASSIGN_OR_RETURN(std::vector<std::int64_t> counts,
                      CountTokens(corpus, vocab_size));
  if (std::accumulate(counts.begin(), counts.end(), std::int64_t{0}) == 0) {
    return absl::InvalidArgumentError("empty corpus");
  }
  return FrequencyTable::FromCounts(counts);
}

absl::StatusOr<FrequencyTable> ComputeFrequencyTable(
    std::span<const TokenStrings> corpus, const Vocabulary& vocab) {
  std::vector<TokenIds> encoded;
  encoded.reserve(corpus.size());
  for (const TokenStrings& sequence : corpus) {
    CA_ASSIGN_OR_RETURN(TokenIds ids, vocab.Encode(sequence));
    encoded.push_back(std::move(ids));
  }
  return ComputeFrequencyTable(encoded, vocab.size());
}

std::string SerializeFrequencyTable(const FrequencyTable& table) {
  json j;
  j["total_tokens"] = table.total_tokens();
  j["weights"] = std::vector<double>(table.weights().begin(),
                                     table.weights().end());
  return j.dump();
}

absl::StatusOr<FrequencyTable> ParseFrequencyTable(absl::string_view text) {
  json j = json::parse(text.begin(), text.end(), nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded() || !j.is_object()) {
    return absl::InvalidArgumentError("frequency table is not a JSON object");
  }
  for (const auto& [key, value] : j.items()) {
    if (key != "total_tokens" && key != "weights") {
      return absl::InvalidArgumentError(
          absl::StrCat("unknown frequency table key \"", key, "\""));
    }
  }
  if (!j.contains("total_tokens") || !j["total_tokens"].is_number_integer() ||
      !j.contains("weights") || !j["weights"].is_array()) {
    return absl::InvalidArgumentError(
        "frequency table needs integer \"total_tokens\" and array \"weights\"");
  }
  std::vector<double> weights;
  weights.reserve(j["weights"].size());
  for (const json& w : j["weights"]) {
    if (!w.is_number()) {
      return absl::InvalidArgumentError("non-numeric frequency weight");
    }
    weights.push_back(w.get<double>());
  }
  return FrequencyTable::FromWeights(j["total_tokens"].get<std::int64_t>(),
                                     std::move(weights));
}

absl::Status WriteFrequencyTableFile(const FrequencyTable& table,
                                     const std::string& path) {
  return internal::WriteFileAtomically(path,
                                       SerializeFrequencyTable(table) + "\n");
}

absl::StatusOr<FrequencyTable> ReadFrequencyTableFile(const std::string& path) {
  CA_ASSIGN_OR_RETURN(std::string contents, internal::ReadFile(path));
  return ParseFrequencyTable(contents);
}

}  // namespace canary_audit
