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

// Synthetic labeled corpora and canary construction/injection.

#ifndef CANARY_AUDIT_CORPUS_H_
#define CANARY_AUDIT_CORPUS_H_

#include <cstdint>
#include <span>
#include <string>
#include "absl/strings/string_view.h"
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "canary_audit/seeding.h"
#include "canary_audit/vocab.h"

namespace canary_audit {

enum class Origin { kNatural, kCanaryOriginal, kCanarySupporting };

absl::string_view OriginName(Origin origin);
absl::StatusOr<Origin> ParseOrigin(absl::string_view name);

struct LabeledExample {
  TokenIds tokens;
  int label = 0;
  Origin origin = Origin::kNatural;

  friend bool operator==(const LabeledExample&, const LabeledExample&) = default;
  friend auto operator<=>(const LabeledExample&, const LabeledExample&) = default;
};

// A random sequence split into a known prefix and the secret tail to be
// recovered. `repetitions` is how many copies go into the training set; 0
// means the canary is generated but not injected.
struct Canary {
  TokenIds prefix;
  TokenIds secret;
  int label = 0;
  int repetitions = 1;

  TokenIds Sequence() const;
  std::size_t length() const { return prefix.size() + secret.size(); }

  friend bool operator==(const Canary&, const Canary&) = default;
};

// The canary under audit plus canaries that share its prefix but carry other
// labels and secrets. The supporting copies make the secret decisive for the
// original label.
struct CanarySuite {
  Canary original;
  std::vector<Canary> supporting;
  std::uint64_t seed = 0;

  friend bool operator==(const CanarySuite&, const CanarySuite&) = default;
};

// Checks the suite's structural invariants: non-empty prefix and secret,
// shared prefix, distinct labels, supporting secrets differ from the
// original's.
absl::Status ValidateCanarySuite(const CanarySuite& suite);

struct DatasetSpec {
  int num_classes = 10;
  // Natural training examples per class. Exactly one class has the minimum.
  std::vector<int> train_counts;
  // Validation examples per class are ceil(count * valid_fraction), min 1.
  double valid_fraction = 0.25;
  int min_length = 8;
  int max_length = 16;
  // Tokens reserved as each class's topical signature.
  int signature_size = 10;
  // Probability that a position draws from the class signature instead of
  // the uniform background.
  double signal_ratio = 0.5;
  std::uint64_t seed = 0;

  int rarest_class() const;
};

absl::Status ValidateDatasetSpec(const DatasetSpec& spec);

// Ten classes, 2000 natural training examples, the last class rarest with 40.
DatasetSpec DeskScaleDatasetSpec(std::uint64_t seed = 0);

struct Dataset {
  std::vector<LabeledExample> train;
  std::vector<LabeledExample> valid;
  // Signature token ids per class.
  std::vector<TokenIds> signatures;
};

// Deterministic in (spec, vocab size). Each position of a class-c example is
// a uniform draw from c's signature with probability signal_ratio and a
// uniform vocabulary draw otherwise.
absl::StatusOr<Dataset> SynthesizeCorpus(const DatasetSpec& spec,
                                         const Vocabulary& vocab);

// Every token i.i.d. uniform over the vocabulary; the last `n_secret` tokens
// form the secret.
absl::StatusOr<Canary> GenerateCanary(std::size_t vocab_size, int length,
                                      int n_secret, int label, int repetitions,
                                      Rng& rng);

// One canary per label with the original's prefix and a freshly drawn
// secret; draws equal to the original secret are rejected and redrawn.
absl::StatusOr<std::vector<Canary>> MakeSupportingCanaries(
    const Canary& original, std::span<const int> labels, int repetitions,
    std::size_t vocab_size, Rng& rng);

enum class SupportMode { kAllOther, kOneOther, kNone };

absl::string_view SupportModeName(SupportMode mode);
absl::StatusOr<SupportMode> ParseSupportMode(absl::string_view name);

// Experiment-level canary geometry.
struct CanarySpec {
  int length = 10;
  int n_secret = 1;
  int original_repetitions = 100;
  SupportMode support = SupportMode::kAllOther;
  int supporting_repetitions = 1;
};

absl::Status ValidateCanarySpec(const CanarySpec& spec);

// Original canary labeled `original_label`; supporting canaries per the
// spec's mode (for kOneOther the other class is drawn uniformly).
absl::StatusOr<CanarySuite> GenerateCanarySuite(const CanarySpec& spec,
                                                int num_classes,
                                                int original_label,
                                                std::size_t vocab_size,
                                                std::uint64_t seed);

// Natural examples plus `repetitions` copies of each canary, tagged by
// origin and shuffled deterministically by suite.seed.
absl::StatusOr<std::vector<LabeledExample>> Inject(
    std::span<const LabeledExample> train, const CanarySuite& suite,
    std::size_t vocab_size);

// Token sequences of a dataset, in order.
std::vector<TokenIds> TokenSequences(std::span<const LabeledExample> examples);

// JSONL, one {"tokens": [string...], "label": int, "origin": string} per line.
absl::Status WriteDatasetFile(std::span<const LabeledExample> examples,
                              const Vocabulary& vocab, const std::string& path);
absl::StatusOr<std::vector<LabeledExample>> ReadDatasetFile(
    const std::string& path, const Vocabulary& vocab);

std::string SerializeCanarySuite(const CanarySuite& suite,
                                 const Vocabulary& vocab);
absl::StatusOr<CanarySuite> ParseCanarySuite(absl::string_view json,
                                             const Vocabulary& vocab);
absl::Status WriteCanarySuiteFile(const CanarySuite& suite,
                                  const Vocabulary& vocab,
                                  const std::string& path);
absl::StatusOr<CanarySuite> ReadCanarySuiteFile(const std::string& path,
                                                const Vocabulary& vocab);

}  // namespace canary_audit

#endif  // CANARY_AUDIT_CORPUS_H_
