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

#include "canary_audit/oracle.h"

#include <cmath>

#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "canary_audit/status_macros.h"

namespace canary_audit {

absl::Status ValidateDistribution(const LabelDistribution& dist,
                                  int num_classes, double tolerance) {
  if (static_cast<int>(dist.probs.size()) != num_classes) {
    return absl::DataLossError(absl::StrCat("distribution has ",
                                            dist.probs.size(), " entries for ",
                                            num_classes, " classes"));
  }
  double sum = 0.0;
  for (double p : dist.probs) {
    if (!std::isfinite(p) || p < 0.0 || p > 1.0) {
      return absl::DataLossError(absl::StrCat("probability out of [0,1]: ", p));
    }
    sum += p;
  }
  if (std::abs(sum - 1.0) > tolerance) {
    return absl::DataLossError(
        absl::StrFormat("probabilities sum to %.12g", sum));
  }
  return absl::OkStatus();
}

absl::StatusOr<std::vector<LabelDistribution>> Oracle::ScoreBatch(
    std::span<const TokenIds> sequences) {
  if (sequences.empty()) {
    return absl::InvalidArgumentError("score batch is empty");
  }
  CA_ASSIGN_OR_RETURN(std::vector<LabelDistribution> out,
                      ScoreBatchImpl(sequences));
  if (out.size() != sequences.size()) {
    return absl::DataLossError(absl::StrCat("oracle returned ", out.size(),
                                            " distributions for ",
                                            sequences.size(), " sequences"));
  }
  query_count_.fetch_add(static_cast<std::int64_t>(sequences.size()),
                         std::memory_order_relaxed);
  return out;
}

absl::StatusOr<double> Oracle::LabelLikelihood(const TokenIds& sequence,
                                               int label) {
  if (label < 0 || label >= num_classes()) {
    return absl::OutOfRangeError(absl::StrCat(
        "label ", label, " outside [0, ", num_classes(), ")"));
  }
  CA_ASSIGN_OR_RETURN(auto dists,
                      ScoreBatch(std::span<const TokenIds>(&sequence, 1)));
  if (static_cast<int>(dists[0].probs.size()) != num_classes()) {
    return absl::DataLossError("distribution has the wrong class count");
  }
  return dists[0].probs[label];
}

}  // namespace canary_audit
