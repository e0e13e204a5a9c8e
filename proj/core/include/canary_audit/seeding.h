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

#ifndef CANARY_AUDIT_SEEDING_H_
#define CANARY_AUDIT_SEEDING_H_

#include <cstdint>
#include <initializer_list>
#include <random>

namespace canary_audit {

// The single pseudo-random engine used throughout. mt19937_64 has a fixed,
// standardized output sequence for a given seed.
using Rng = std::mt19937_64;

// Derives an independent child seed from a parent seed and a path of
// counters, e.g. DeriveSeed(master, {cell, trial}). Each step mixes the
// running state with one counter through SplitMix64, so the result depends on
// every counter and on their order.
std::uint64_t DeriveSeed(std::uint64_t parent,
                         std::initializer_list<std::uint64_t> path);

// Stream identifiers for per-trial sub-seeds.
enum class SeedStream : std::uint64_t {
  kDataset = 1,
  kCanary = 2,
  kInjection = 3,
  kTraining = 4,
  kModelInit = 5,
};

inline std::uint64_t DeriveSeed(std::uint64_t parent, SeedStream stream) {
  return DeriveSeed(parent, {static_cast<std::uint64_t>(stream)});
}

}  // namespace canary_audit

#endif  // CANARY_AUDIT_SEEDING_H_
