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

#ifndef CANARY_AUDIT_REMOTE_ORACLE_H_
#define CANARY_AUDIT_REMOTE_ORACLE_H_

#include <chrono>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "canary_audit/oracle.h"
#include "canary_audit/protocol.h"
#include "canary_audit/vocab.h"

namespace canary_audit {

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{100};
  double backoff_multiplier = 2.0;
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

// Calls `attempt` until it succeeds, returns a non-retryable error, or
// max_attempts is reached, sleeping initial_backoff * multiplier^i between
// tries. Only kUnavailable is retryable. The final error carries the number
// of attempts made; see AttemptCount.
absl::Status RetryWithBackoff(const RetryPolicy& policy,
                              const std::function<absl::Status()>& attempt,
                              const Sleeper& sleep = {});

// Attempts recorded on an error returned by RetryWithBackoff, or 0.
int AttemptCount(const absl::Status& status);

// Client for a model served over the oracle wire protocol. Token ids are
// translated to strings through the audit vocabulary. Each call opens its
// own connection, so concurrent ScoreBatch calls are safe.
class RemoteOracle : public Oracle {
 public:
  // Performs the /v1/meta handshake (with retries).
  static absl::StatusOr<std::unique_ptr<RemoteOracle>> Connect(
      const std::string& url, Vocabulary vocab, RetryPolicy retry = {},
      std::chrono::seconds timeout = std::chrono::seconds(60));

  int num_classes() const override { return meta_.num_classes; }
  const std::string& model_id() const { return meta_.model_id; }
  const std::string& token_join() const { return meta_.token_join; }
  const std::string& url() const { return url_; }

 protected:
  absl::StatusOr<std::vector<LabelDistribution>> ScoreBatchImpl(
      std::span<const TokenIds> sequences) override;

 private:
  RemoteOracle(std::string url, Vocabulary vocab, RetryPolicy retry,
               std::chrono::seconds timeout, ModelMeta meta);

  std::string url_;
  Vocabulary vocab_;
  RetryPolicy retry_;
  std::chrono::seconds timeout_;
  ModelMeta meta_;
};

}  // namespace canary_audit

#endif  // CANARY_AUDIT_REMOTE_ORACLE_H_
