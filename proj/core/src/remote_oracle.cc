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

#include "canary_audit/remote_oracle.h"

#include <thread>
#include <utility>

#include "absl/strings/cord.h"
#include "absl/strings/match.h"
#include "absl/strings/numbers.h"
#include "absl/strings/str_cat.h"
#include "canary_audit/status_macros.h"
#include "httplib.h"

namespace canary_audit {
namespace {

constexpr char kAttemptsPayload[] = "canary_audit/attempts";

// Maps one HTTP exchange onto a status. Transport failures and 5xx are
// retryable (kUnavailable); 400 and 422 are not.
absl::Status HttpStatus(const httplib::Result& res, absl::string_view what) {
  if (!res) {
    return absl::UnavailableError(absl::StrCat(
        what, ": transport error: ", httplib::to_string(res.error())));
  }
  const int code = res->status;
  if (code == 200) return absl::OkStatus();
  const std::string detail = absl::StrCat(what, ": HTTP ", code, " ", res->body);
  if (code >= 500) return absl::UnavailableError(detail);
  if (code == kHttpUnprocessable) return absl::FailedPreconditionError(detail);
  if (code == kHttpBadRequest) return absl::InvalidArgumentError(detail);
  return absl::UnknownError(detail);
}

std::unique_ptr<httplib::Client> MakeClient(const std::string& url,
                                            std::chrono::seconds timeout) {
  auto client = std::make_unique<httplib::Client>(url);
  client->set_connection_timeout(timeout);
  client->set_read_timeout(timeout);
  client->set_write_timeout(timeout);
  return client;
}

}  // namespace

absl::Status RetryWithBackoff(const RetryPolicy& policy,
                              const std::function<absl::Status()>& attempt,
                              const Sleeper& sleep) {
  auto backoff = policy.initial_backoff;
  absl::Status status;
  int tries = 0;
  while (true) {
    status = attempt();
    ++tries;
    if (status.ok()) return status;
    if (status.code() != absl::StatusCode::kUnavailable ||
        tries >= policy.max_attempts) {
      break;
    }
    if (sleep) {
      sleep(backoff);
    } else {
      std::this_thread::sleep_for(backoff);
    }
    backoff = std::chrono::milliseconds(static_cast<std::int64_t>(
        static_cast<double>(backoff.count()) * policy.backoff_multiplier));
  }
  absl::Status out(status.code(),
                   absl::StrCat(status.message(), " (after ", tries,
                                tries == 1 ? " attempt)" : " attempts)"));
  out.SetPayload(kAttemptsPayload, absl::Cord(absl::StrCat(tries)));
  return out;
}

int AttemptCount(const absl::Status& status) {
  auto payload = status.GetPayload(kAttemptsPayload);
  int n = 0;
  if (!payload || !absl::SimpleAtoi(std::string(*payload), &n)) return 0;
  return n;
}

RemoteOracle::RemoteOracle(std::string url, Vocabulary vocab, RetryPolicy retry,
                           std::chrono::seconds timeout, ModelMeta meta)
    : url_(std::move(url)),
      vocab_(std::move(vocab)),
      retry_(retry),
      timeout_(timeout),
      meta_(std::move(meta)) {}

absl::StatusOr<std::unique_ptr<RemoteOracle>> RemoteOracle::Connect(
    const std::string& url, Vocabulary vocab, RetryPolicy retry,
    std::chrono::seconds timeout) {
  if (!absl::StartsWith(url, "http://")) {
    return absl::InvalidArgumentError(
        absl::StrCat("oracle URL must start with http://: ", url));
  }
  ModelMeta meta;
  CA_RETURN_IF_ERROR(RetryWithBackoff(retry, [&]() -> absl::Status {
    auto client = MakeClient(url, timeout);
    auto res = client->Get(kMetaPath);
    CA_RETURN_IF_ERROR(HttpStatus(res, "GET /v1/meta"));
    CA_ASSIGN_OR_RETURN(meta, DecodeMeta(res->body));
    return absl::OkStatus();
  }));
  return std::unique_ptr<RemoteOracle>(new RemoteOracle(
      url, std::move(vocab), retry, timeout, std::move(meta)));
}

absl::StatusOr<std::vector<LabelDistribution>> RemoteOracle::ScoreBatchImpl(
    std::span<const TokenIds> sequences) {
  std::vector<TokenStrings> strings;
  strings.reserve(sequences.size());
  for (const TokenIds& seq : sequences) {
    for (TokenId t : seq) {
      if (!vocab_.contains(t)) {
        return absl::OutOfRangeError(
            absl::StrCat("token id ", t, " outside the audit vocabulary"));
      }
    }
    strings.push_back(vocab_.Decode(seq));
  }
  const std::string body = EncodeScoreRequest(strings);
  std::vector<LabelDistribution> out;
  CA_RETURN_IF_ERROR(RetryWithBackoff(retry_, [&]() -> absl::Status {
    auto client = MakeClient(url_, timeout_);
    auto res = client->Post(kScorePath, body, "application/json");
    CA_RETURN_IF_ERROR(HttpStatus(res, "POST /v1/score"));
    CA_ASSIGN_OR_RETURN(out, DecodeScoreResponse(res->body, meta_.num_classes,
                                                 sequences.size()));
    return absl::OkStatus();
  }));
  return out;
}

}  // namespace canary_audit
