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

#include "canary_audit/conformance.h"

#include <algorithm>
#include <cmath>
#include <optional>

#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "canary_audit/protocol.h"
#include "httplib.h"

namespace canary_audit {
namespace {

struct Exchange {
  int status = 0;  // 0 on transport failure
  std::string body;
};

Exchange Post(const std::string& url, const std::string& body) {
  httplib::Client client(url);
  client.set_read_timeout(std::chrono::seconds(60));
  auto res = client.Post(kScorePath, body, "application/json");
  if (!res) return {};
  return {res->status, res->body};
}

double MaxAbsDiff(const std::vector<LabelDistribution>& a,
                  const std::vector<LabelDistribution>& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t k = 0; k < a[i].probs.size(); ++k) {
      worst = std::max(worst, std::abs(a[i].probs[k] - b[i].probs[k]));
    }
  }
  return worst;
}

}  // namespace

bool ConformanceReport::all_passed() const {
  return !checks.empty() &&
         std::all_of(checks.begin(), checks.end(),
                     [](const ConformanceCheck& c) { return c.passed; });
}

std::string ConformanceReport::ToString() const {
  std::string out;
  for (const ConformanceCheck& c : checks) {
    absl::StrAppend(&out, c.passed ? "PASS " : "FAIL ", c.name, ": ", c.detail,
                    "\n");
  }
  return out;
}

ConformanceReport RunConformance(const std::string& url,
                                 const ConformanceOptions& options) {
  ConformanceReport report;
  auto add = [&report](std::string name, bool passed, std::string detail) {
    report.checks.push_back({std::move(name), passed, std::move(detail)});
  };

  // Meta handshake.
  std::optional<ModelMeta> meta;
  {
    httplib::Client client(url);
    auto res = client.Get(kMetaPath);
    if (!res) {
      add("meta", false, "transport error: " + httplib::to_string(res.error()));
      return report;
    }
    if (res->status != 200) {
      add("meta", false, absl::StrCat("HTTP ", res->status));
      return report;
    }
    auto decoded = DecodeMeta(res->body);
    if (!decoded.ok()) {
      add("meta", false, std::string(decoded.status().message()));
      return report;
    }
    meta = *decoded;
    add("meta", true,
        absl::StrCat("num_classes=", meta->num_classes, " model_id=",
                     meta->model_id));
  }
  if (options.probes.size() < 2) {
    add("probes", false, "need at least two probe sequences");
    return report;
  }
  const std::size_t n = options.probes.size();

  auto score = [&](std::span<const TokenStrings> seqs,
                   double tolerance) -> absl::StatusOr<std::vector<LabelDistribution>> {
    Exchange ex = Post(url, EncodeScoreRequest(seqs));
    if (ex.status != 200) {
      return absl::UnavailableError(absl::StrCat("HTTP ", ex.status, " ", ex.body));
    }
    auto dists = DecodeScoreResponse(ex.body, meta->num_classes, seqs.size());
    if (!dists.ok()) return dists.status();
    for (const LabelDistribution& d : *dists) {
      absl::Status st = ValidateDistribution(d, meta->num_classes, tolerance);
      if (!st.ok()) return st;
    }
    return dists;
  };

  // Normalization of a batch response.
  auto batch = score(options.probes, options.normalization_tolerance);
  if (!batch.ok()) {
    add("normalization", false, std::string(batch.status().message()));
    return report;
  }
  add("normalization", true,
      absl::StrFormat("%d rows sum to 1 within %g", n,
                      options.normalization_tolerance));

  // Alignment: a reversed batch must come back reversed.
  {
    std::vector<TokenStrings> reversed(options.probes.rbegin(),
                                       options.probes.rend());
    auto rev = score(reversed, options.normalization_tolerance);
    if (!rev.ok()) {
      add("alignment", false, std::string(rev.status().message()));
    } else {
      std::reverse(rev->begin(), rev->end());
      const double diff = MaxAbsDiff(*batch, *rev);
      add("alignment", diff <= options.consistency_tolerance,
          absl::StrFormat("max |diff| after un-permuting = %.3g", diff));
    }
  }

  // Batch vs singleton agreement.
  {
    std::vector<LabelDistribution> singles;
    absl::Status status;
    for (const TokenStrings& probe : options.probes) {
      auto one = score(std::span<const TokenStrings>(&probe, 1),
                       options.normalization_tolerance);
      if (!one.ok()) {
        status = one.status();
        break;
      }
      singles.push_back((*one)[0]);
    }
    if (!status.ok()) {
      add("batch_vs_singleton", false, std::string(status.message()));
    } else {
      const double diff = MaxAbsDiff(*batch, singles);
      add("batch_vs_singleton", diff <= options.consistency_tolerance,
          absl::StrFormat("max |diff| = %.3g", diff));
    }
  }

  // Determinism of a repeated request.
  {
    auto again = score(options.probes, options.normalization_tolerance);
    if (!again.ok()) {
      add("determinism", false, std::string(again.status().message()));
    } else {
      const double diff = MaxAbsDiff(*batch, *again);
      add("determinism", diff <= options.consistency_tolerance,
          absl::StrFormat("max |diff| = %.3g", diff));
    }
  }

  // Error statuses.
  auto expect_status = [&](std::string name, const std::string& body, int want) {
    Exchange ex = Post(url, body);
    add(std::move(name), ex.status == want,
        absl::StrCat("HTTP ", ex.status, ", expected ", want));
  };
  expect_status("malformed_json_400", "{\"sequences\": [[", kHttpBadRequest);
  expect_status("missing_sequences_400", "{\"seqs\": []}", kHttpBadRequest);
  expect_status("non_string_token_400", "{\"sequences\": [[1, 2]]}",
                kHttpBadRequest);
  {
    std::vector<TokenStrings> bad = {options.probes[0]};
    bad[0].push_back("");
    expect_status("unrepresentable_token_422", EncodeScoreRequest(bad),
                  kHttpUnprocessable);
  }
  return report;
}

}  // namespace canary_audit
