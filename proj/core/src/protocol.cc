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

#include "canary_audit/protocol.h"

#include "absl/strings/str_cat.h"
#include "canary_audit/status_macros.h"
#include "json.hpp"

namespace canary_audit {

using json = nlohmann::json;

std::string EncodeMeta(const ModelMeta& meta) {
  json j{{"num_classes", meta.num_classes}, {"model_id", meta.model_id}};
  if (!meta.token_join.empty()) j["token_join"] = meta.token_join;
  return j.dump();
}

absl::StatusOr<ModelMeta> DecodeMeta(absl::string_view body) {
  json j = json::parse(body.begin(), body.end(), nullptr, false);
  if (j.is_discarded() || !j.is_object() || !j.contains("num_classes") ||
      !j["num_classes"].is_number_integer() || !j.contains("model_id") ||
      !j["model_id"].is_string()) {
    return absl::DataLossError(
        "meta response needs integer num_classes and string model_id");
  }
  ModelMeta meta{j["num_classes"].get<int>(), j["model_id"].get<std::string>(),
                 ""};
  if (j.contains("token_join") && j["token_join"].is_string()) {
    meta.token_join = j["token_join"].get<std::string>();
  }
  if (meta.num_classes < 2) {
    return absl::DataLossError(
        absl::StrCat("meta reports ", meta.num_classes, " classes"));
  }
  return meta;
}

std::string EncodeScoreRequest(std::span<const TokenStrings> sequences) {
  json seqs = json::array();
  for (const TokenStrings& s : sequences) seqs.push_back(s);
  return json{{"sequences", std::move(seqs)}}.dump();
}

absl::StatusOr<std::vector<TokenStrings>> DecodeScoreRequest(
    absl::string_view body) {
  json j = json::parse(body.begin(), body.end(), nullptr, false);
  if (j.is_discarded()) return absl::InvalidArgumentError("body is not JSON");
  if (!j.is_object() || !j.contains("sequences") || !j["sequences"].is_array()) {
    return absl::InvalidArgumentError("body needs a \"sequences\" array");
  }
  if (j["sequences"].empty()) {
    return absl::InvalidArgumentError("\"sequences\" is empty");
  }
  std::vector<TokenStrings> out;
  out.reserve(j["sequences"].size());
  for (const json& seq : j["sequences"]) {
    if (!seq.is_array() || seq.empty()) {
      return absl::InvalidArgumentError(
          "every sequence must be a non-empty array of strings");
    }
    TokenStrings tokens;
    tokens.reserve(seq.size());
    for (const json& t : seq) {
      if (!t.is_string()) {
        return absl::InvalidArgumentError("tokens must be strings");
      }
      tokens.push_back(t.get<std::string>());
    }
    out.push_back(std::move(tokens));
  }
  return out;
}

std::string EncodeScoreResponse(std::span<const LabelDistribution> dists) {
  json probs = json::array();
  for (const LabelDistribution& d : dists) probs.push_back(d.probs);
  return json{{"probs", std::move(probs)}}.dump();
}

absl::StatusOr<std::vector<LabelDistribution>> DecodeScoreResponse(
    absl::string_view body, int num_classes, std::size_t expected_count) {
  json j = json::parse(body.begin(), body.end(), nullptr, false);
  if (j.is_discarded() || !j.is_object() || !j.contains("probs") ||
      !j["probs"].is_array()) {
    return absl::DataLossError("score response needs a \"probs\" array");
  }
  if (j["probs"].size() != expected_count) {
    return absl::DataLossError(absl::StrCat(
        "score response has ", j["probs"].size(), " rows for ",
        expected_count, " sequences"));
  }
  std::vector<LabelDistribution> out;
  out.reserve(expected_count);
  for (const json& row : j["probs"]) {
    if (!row.is_array()) return absl::DataLossError("probability row is not an array");
    LabelDistribution d;
    d.probs.reserve(row.size());
    for (const json& p : row) {
      if (!p.is_number()) return absl::DataLossError("non-numeric probability");
      d.probs.push_back(p.get<double>());
    }
    CA_RETURN_IF_ERROR(ValidateDistribution(d, num_classes));
    out.push_back(std::move(d));
  }
  return out;
}

}  // namespace canary_audit
