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

// JSON-over-HTTP oracle wire protocol.
//
//   GET  /v1/meta   -> {"num_classes": int, "model_id": string}
//   POST /v1/score  body {"sequences": [[string, ...], ...]}
//                   -> {"probs": [[real, ...], ...]}
//
// /v1/score answers 400 for a malformed body and 422 when a token cannot be
// represented by the model.

#ifndef CANARY_AUDIT_PROTOCOL_H_
#define CANARY_AUDIT_PROTOCOL_H_

#include <span>
#include <string>
#include <vector>

#include "absl/status/statusor.h"
#include "absl/strings/string_view.h"
#include "canary_audit/oracle.h"
#include "canary_audit/vocab.h"

namespace canary_audit {

inline constexpr char kMetaPath[] = "/v1/meta";
inline constexpr char kScorePath[] = "/v1/score";
inline constexpr int kHttpBadRequest = 400;
inline constexpr int kHttpUnprocessable = 422;

struct ModelMeta {
  int num_classes = 0;
  std::string model_id;
  // How token lists become model input: "identity" when the server scores
  // the toolkit's token ids directly, "space" when it joins with spaces and
  // re-tokenizes. Optional on the wire.
  std::string token_join;
};

std::string EncodeMeta(const ModelMeta& meta);
// Extra keys are ignored; servers may advertise more than the two required.
absl::StatusOr<ModelMeta> DecodeMeta(absl::string_view body);

std::string EncodeScoreRequest(std::span<const TokenStrings> sequences);
// InvalidArgument for anything other than a non-empty list of non-empty
// string lists.
absl::StatusOr<std::vector<TokenStrings>> DecodeScoreRequest(
    absl::string_view body);

std::string EncodeScoreResponse(std::span<const LabelDistribution> dists);
// DataLoss unless the body holds exactly `expected_count` normalized
// distributions of `num_classes` entries.
absl::StatusOr<std::vector<LabelDistribution>> DecodeScoreResponse(
    absl::string_view body, int num_classes, std::size_t expected_count);

}  // namespace canary_audit

#endif  // CANARY_AUDIT_PROTOCOL_H_
