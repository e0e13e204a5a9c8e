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

#ifndef CANARY_AUDIT_STATUS_MACROS_H_
#define CANARY_AUDIT_STATUS_MACROS_H_

#include <utility>

#include "absl/status/status.h"
#include "absl/status/statusor.h"

#define CA_STATUS_CONCAT_INNER_(x, y) x##y
#define CA_STATUS_CONCAT_(x, y) CA_STATUS_CONCAT_INNER_(x, y)

// Returns early from the enclosing function if `expr` is not OK.
#define CA_RETURN_IF_ERROR(expr)                  \
  do {                                            \
    const ::absl::Status _ca_status = (expr);     \
    if (!_ca_status.ok()) return _ca_status;      \
  } while (false)

// `CA_ASSIGN_OR_RETURN(auto x, MaybeX());` unwraps a StatusOr or returns its
// error.
#define CA_ASSIGN_OR_RETURN(lhs, rexpr) \
  CA_ASSIGN_OR_RETURN_IMPL_(CA_STATUS_CONCAT_(_ca_statusor_, __LINE__), lhs, rexpr)

#define CA_ASSIGN_OR_RETURN_IMPL_(statusor, lhs, rexpr) \
  auto statusor = (rexpr);                              \
  if (!statusor.ok()) return statusor.status();         \
  lhs = std::move(statusor).value()

#endif  // CANARY_AUDIT_STATUS_MACROS_H_
