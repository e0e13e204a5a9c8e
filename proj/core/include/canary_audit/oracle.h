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

// Black-box scoring interface shared by the in-process reference model and
// the remote wire-protocol client.

#ifndef CANARY_AUDIT_ORACLE_H_
#define CANARY_AUDIT_ORACLE_H_

#include <atomic>
#include <cstdint>
#include <span>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "canary_audit/vocab.h"

namespace canary_audit {

// P(. | x) over the classes, one probability per class.
struct LabelDistribution {
  std::vector<double> probs;

  friend bool operator==(const LabelDistribution&,
                         const LabelDistribution&) = default;
};

// Checks the class count, that every entry lies in [0,1], and that the
// entries sum to 1 within `tolerance`.
absl::Status ValidateDistribution(const LabelDistribution& dist,
                                  int num_classes, double tolerance = 1e-6);

// Exposes label probabilities only. Implementations must tolerate concurrent
// ScoreBatch calls.
class Oracle {
 public:
  virtual ~Oracle() = default;

  Oracle(const Oracle&) = delete;
  Oracle& operator=(const Oracle&) = delete;

  virtual int num_classes() const = 0;

  // One distribution per input, order-aligned. On success the query counter
  // grows by sequences.size().
  absl::StatusOr<std::vector<LabelDistribution>> ScoreBatch(
      std::span<const TokenIds> sequences);

  // ScoreBatch({sequence})[0].probs[label].
  absl::StatusOr<double> LabelLikelihood(const TokenIds& sequence, int label);

  // Total number of sequences scored so far; the audit's query meter.
  std::int64_t query_count() const {
    return query_count_.load(std::memory_order_relaxed);
  }

 protected:
  Oracle() = default;

  virtual absl::StatusOr<std::vector<LabelDistribution>> ScoreBatchImpl(
      std::span<const TokenIds> sequences) = 0;

 private:
  std::atomic<std::int64_t> query_count_{0};
};

}  // namespace canary_audit

#endif  // CANARY_AUDIT_ORACLE_H_
