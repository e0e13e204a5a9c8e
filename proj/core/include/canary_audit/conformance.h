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

// Protocol conformance fixture for oracle servers. Runs a fixed battery of
// requests against a live endpoint and reports one line per check.

#ifndef CANARY_AUDIT_CONFORMANCE_H_
#define CANARY_AUDIT_CONFORMANCE_H_

#include <string>
#include <vector>

#include "canary_audit/vocab.h"

namespace canary_audit {

struct ConformanceOptions {
  // Sequences the server can represent. At least two are needed for the
  // alignment check.
  std::vector<TokenStrings> probes;
  double normalization_tolerance = 1e-6;
  // Batch vs singleton and repeat-request agreement.
  double consistency_tolerance = 1e-5;
};

struct ConformanceCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct ConformanceReport {
  std::vector<ConformanceCheck> checks;

  bool all_passed() const;
  // "PASS name: detail" / "FAIL name: detail", one per line.
  std::string ToString() const;
};

// Checks: meta handshake, normalization, batch alignment under permutation,
// batch vs singleton agreement, repeat determinism, 400 for malformed bodies,
// 422 for an unrepresentable (empty-string) token.
ConformanceReport RunConformance(const std::string& url,
                                 const ConformanceOptions& options);

}  // namespace canary_audit

#endif  // CANARY_AUDIT_CONFORMANCE_H_
