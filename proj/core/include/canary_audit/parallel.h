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

#ifndef CANARY_AUDIT_PARALLEL_H_
#define CANARY_AUDIT_PARALLEL_H_

#include <cstddef>
#include <functional>

namespace canary_audit {

// Runs body(i) for every i in [0, count) on up to `workers` threads. Indices
// are handed out dynamically; callers write results into slot i so the
// outcome does not depend on scheduling. workers <= 1 runs inline.
void ParallelFor(std::size_t count, int workers,
                 const std::function<void(std::size_t)>& body);

// Number of hardware threads, at least 1.
int DefaultParallelism();

}  // namespace canary_audit

#endif  // CANARY_AUDIT_PARALLEL_H_
