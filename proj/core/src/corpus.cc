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

#include "canary_audit/corpus.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <utility>

#include "absl/strings/str_cat.h"
#include "absl/strings/str_split.h"
#include "canary_audit/status_macros.h"
#include "file_util.h"
#include "json.hpp"

namespace canary_audit {

using json = nlohmann::json;

namespace {

TokenId UniformToken(std::size_t vocab_size, Rng& rng) {
  std::uniform_int_distribution<TokenId> dist(
      0, static_cast<TokenId>(vocab_size) - 1);
  return dist(rng);
}

TokenIds UniformTokens(std::size_t vocab_size, int count, Rng& rng) {
  TokenIds out(count);
  for (TokenId& t : out) t = UniformToken(vocab_size, rng);
  return out;
}

absl::Status CheckTokens(const TokenIds& tokens, std::size_t vocab_size,
                         absl::string_view what) {
  for (TokenId t : tokens) {
    if (t < 0 || static_cast<std::size_t>(t) >= vocab_size) {
      return absl::OutOfRangeError(absl::StrCat(
          what, " token id ", t, " outside vocabulary of size ", vocab_size));
    }
  }
  return absl::OkStatus();
}

absl::Status CheckCanaryShape(const Canary& canary, absl::string_view what) {
  if (canary.prefix.empty() || canary.secret.empty()) {
    return absl::InvalidArgumentError(
        absl::StrCat(what, " canary needs a non-empty prefix and secret"));
  }
  if (canary.repetitions < 0) {
    return absl::InvalidArgumentError(
        absl::StrCat(what, " canary has negative repetitions"));
  }
  if (canary.label < 0) {
    return absl::InvalidArgumentError(
        absl::StrCat(what, " canary has negative label"));
  }
  return absl::OkStatus();
}

}  // namespace

absl::string_view OriginName(Origin origin) {
  switch (origin) {
    case Origin::kNatural:
      return "natural";
    case Origin::kCanaryOriginal:
      return "canary_original";
    case Origin::kCanarySupporting:
      return "canary_supporting";
  }
  return "natural";
}

absl::StatusOr<Origin> ParseOrigin(absl::string_view name) {
  for (Origin o : {Origin::kNatural, Origin::kCanaryOriginal,
                   Origin::kCanarySupporting}) {
    if (OriginName(o) == name) return o;
  }
  return absl::InvalidArgumentError(absl::StrCat("unknown origin \"", name, "\""));
}

TokenIds Canary::Sequence() const {
  TokenIds out = prefix;
  out.insert(out.end(), secret.begin(), secret.end());
  return out;
}

absl::Status ValidateCanarySuite(const CanarySuite& suite) {
  CA_RETURN_IF_ERROR(CheckCanaryShape(suite.original, "original"));
  std::set<int> labels = {suite.original.label};
  for (const Canary& c : suite.supporting) {
    CA_RETURN_IF_ERROR(CheckCanaryShape(c, "supporting"));
    if (c.prefix != suite.original.prefix) {
      return absl::InvalidArgumentError(
          "supporting canary prefix differs from the original's");
    }
    if (c.secret.size() != suite.original.secret.size()) {
      return absl::InvalidArgumentError(
          "supporting canary secret length differs from the original's");
    }
    if (c.secret == suite.original.secret) {
      return absl::InvalidArgumentError(
          "supporting canary repeats the original secret");
    }
    if (!labels.insert(c.label).second) {
      return absl::InvalidArgumentError(
          absl::StrCat("canary label ", c.label, " used more than once"));
    }
  }
  return absl::OkStatus();
}

int DatasetSpec::rarest_class() const {
  if (train_counts.empty()) return 0;
  return static_cast<int>(
      std::min_element(train_counts.begin(), train_counts.end()) -
      train_counts.begin());
}

absl::Status ValidateDatasetSpec(const DatasetSpec& spec) {
  if (spec.num_classes < 2) {
    return absl::InvalidArgumentError("need at least 2 classes");
  }
  if (static_cast<int>(spec.train_counts.size()) != spec.num_classes) {
    return absl::InvalidArgumentError(
        absl::StrCat("train_counts has ", spec.train_counts.size(),
                     " entries for ", spec.num_classes, " classes"));
  }
  for (int c : spec.train_counts) {
    if (c < 1) return absl::InvalidArgumentError("every class needs >= 1 example");
  }
  const int min_count =
      *std::min_element(spec.train_counts.begin(), spec.train_counts.end());
  if (std::count(spec.train_counts.begin(), spec.train_counts.end(),
                 min_count) != 1) {
    return absl::InvalidArgumentError(
        "exactly one class must have the minimum sample count");
  }
  if (spec.min_length < 1 || spec.max_length < spec.min_length) {
    return absl::InvalidArgumentError("invalid sequence length range");
  }
  if (spec.signature_size < 1) {
    return absl::InvalidArgumentError("signature_size must be positive");
  }
  if (!(spec.signal_ratio >= 0.0 && spec.signal_ratio <= 1.0)) {
    return absl::InvalidArgumentError("signal_ratio must lie in [0,1]");
  }
  if (!(spec.valid_fraction > 0.0 && spec.valid_fraction <= 1.0)) {
    return absl::InvalidArgumentError("valid_fraction must lie in (0,1]");
  }
  return absl::OkStatus();
}

DatasetSpec DeskScaleDatasetSpec(std::uint64_t seed) {
  DatasetSpec spec;
  spec.num_classes = 10;
  spec.train_counts = {218, 218, 218, 218, 218, 218, 218, 217, 217, 40};
  spec.seed = seed;
  return spec;
}

absl::StatusOr<Dataset> SynthesizeCorpus(const DatasetSpec& spec,
                                         const Vocabulary& vocab) {
  CA_RETURN_IF_ERROR(ValidateDatasetSpec(spec));
  const std::size_t needed =
      static_cast<std::size_t>(spec.num_classes) * spec.signature_size;
  if (needed > vocab.size()) {
    return absl::InvalidArgumentError(absl::StrCat(
        spec.num_classes, " classes x ", spec.signature_size,
        " signature tokens do not fit a vocabulary of ", vocab.size()));
  }
  Rng rng(spec.seed);

  TokenIds permutation(vocab.size());
  std::iota(permutation.begin(), permutation.end(), 0);
  std::shuffle(permutation.begin(), permutation.end(), rng);

  Dataset data;
  data.signatures.resize(spec.num_classes);
  for (int c = 0; c < spec.num_classes; ++c) {
    auto first = permutation.begin() + c * spec.signature_size;
    data.signatures[c].assign(first, first + spec.signature_size);
  }

  std::uniform_int_distribution<int> length_dist(spec.min_length,
                                                 spec.max_length);
  std::uniform_int_distribution<int> signature_dist(0, spec.signature_size - 1);
  std::bernoulli_distribution signal(spec.signal_ratio);
  auto sample = [&](int label) {
    LabeledExample ex;
    ex.label = label;
    ex.tokens.resize(length_dist(rng));
    for (TokenId& t : ex.tokens) {
      t = signal(rng) ? data.signatures[label][signature_dist(rng)]
                      : UniformToken(vocab.size(), rng);
    }
    return ex;
  };

  for (int c = 0; c < spec.num_classes; ++c) {
    for (int i = 0; i < spec.train_counts[c]; ++i) data.train.push_back(sample(c));
  }
  for (int c = 0; c < spec.num_classes; ++c) {
    const int valid = std::max(
        1, static_cast<int>(std::ceil(spec.train_counts[c] * spec.valid_fraction)));
    for (int i = 0; i < valid; ++i) data.valid.push_back(sample(c));
  }
  std::shuffle(data.train.begin(), data.train.end(), rng);
  std::shuffle(data.valid.begin(), data.valid.end(), rng);
  return data;
}

absl::StatusOr<Canary> GenerateCanary(std::size_t vocab_size, int length,
                                      int n_secret, int label, int repetitions,
                                      Rng& rng) {
  if (vocab_size < 1) return absl::InvalidArgumentError("empty vocabulary");
  if (n_secret < 1 || n_secret >= length) {
    return absl::InvalidArgumentError(absl::StrCat(
        "need 1 <= n_secret < length, got n_secret=", n_secret,
        " length=", length));
  }
  if (repetitions < 0) {
    return absl::InvalidArgumentError("repetitions must be non-negative");
  }
  Canary canary;
  canary.label = label;
  canary.repetitions = repetitions;
  TokenIds tokens = UniformTokens(vocab_size, length, rng);
  canary.prefix.assign(tokens.begin(), tokens.end() - n_secret);
  canary.secret.assign(tokens.end() - n_secret, tokens.end());
  return canary;
}

absl::StatusOr<std::vector<Canary>> MakeSupportingCanaries(
    const Canary& original, std::span<const int> labels, int repetitions,
    std::size_t vocab_size, Rng& rng) {
  if (repetitions < 0) {
    return absl::InvalidArgumentError("repetitions must be non-negative");
  }
  std::set<int> seen;
  for (int label : labels) {
    if (label == original.label) {
      return absl::InvalidArgumentError(absl::StrCat(
          "supporting labels include the original label ", label));
    }
    if (!seen.insert(label).second) {
      return absl::InvalidArgumentError(
          absl::StrCat("duplicate supporting label ", label));
    }
  }
  // With a single-token vocabulary every draw collides.
  if (vocab_size < 2) {
    return absl::InvalidArgumentError(
        "supporting canaries need a vocabulary of at least 2 tokens");
  }
  std::vector<Canary> out;
  out.reserve(labels.size());
  const int n_secret = static_cast<int>(original.secret.size());
  for (int label : labels) {
    Canary c;
    c.prefix = original.prefix;
    c.label = label;
    c.repetitions = repetitions;
    do {
      c.secret = UniformTokens(vocab_size, n_secret, rng);
    } while (c.secret == original.secret);
    out.push_back(std::move(c));
  }
  return out;
}

absl::string_view SupportModeName(SupportMode mode) {
  switch (mode) {
    case SupportMode::kAllOther:
      return "all-other";
    case SupportMode::kOneOther:
      return "one-other";
    case SupportMode::kNone:
      return "none";
  }
  return "none";
}

absl::StatusOr<SupportMode> ParseSupportMode(absl::string_view name) {
  for (SupportMode m :
       {SupportMode::kAllOther, SupportMode::kOneOther, SupportMode::kNone}) {
    if (SupportModeName(m) == name) return m;
  }
  return absl::InvalidArgumentError(
      absl::StrCat("unknown support mode \"", name,
                   "\" (expected all-other, one-other or none)"));
}

absl::Status ValidateCanarySpec(const CanarySpec& spec) {
  if (spec.n_secret < 1 || spec.n_secret >= spec.length) {
    return absl::InvalidArgumentError("need 1 <= n_secret < canary length");
  }
  if (spec.original_repetitions < 0 || spec.supporting_repetitions < 0) {
    return absl::InvalidArgumentError("repetitions must be non-negative");
  }
  return absl::OkStatus();
}

absl::StatusOr<CanarySuite> GenerateCanarySuite(const CanarySpec& spec,
                                                int num_classes,
                                                int original_label,
                                                std::size_t vocab_size,
                                                std::uint64_t seed) {
  CA_RETURN_IF_ERROR(ValidateCanarySpec(spec));
  if (original_label < 0 || original_label >= num_classes) {
    return absl::InvalidArgumentError("original label out of range");
  }
  Rng rng(seed);
  CanarySuite suite;
  suite.seed = seed;
  CA_ASSIGN_OR_RETURN(suite.original,
                      GenerateCanary(vocab_size, spec.length, spec.n_secret,
                                     original_label, spec.original_repetitions,
                                     rng));
  std::vector<int> others;
  for (int c = 0; c < num_classes; ++c) {
    if (c != original_label) others.push_back(c);
  }
  std::vector<int> labels;
  switch (spec.support) {
    case SupportMode::kAllOther:
      labels = others;
      break;
    case SupportMode::kOneOther: {
      std::uniform_int_distribution<std::size_t> pick(0, others.size() - 1);
      labels = {others[pick(rng)]};
      break;
    }
    case SupportMode::kNone:
      break;
  }
  CA_ASSIGN_OR_RETURN(suite.supporting,
                      MakeSupportingCanaries(suite.original, labels,
                                             spec.supporting_repetitions,
                                             vocab_size, rng));
  return suite;
}

absl::StatusOr<std::vector<LabeledExample>> Inject(
    std::span<const LabeledExample> train, const CanarySuite& suite,
    std::size_t vocab_size) {
  CA_RETURN_IF_ERROR(ValidateCanarySuite(suite));
  CA_RETURN_IF_ERROR(
      CheckTokens(suite.original.Sequence(), vocab_size, "original canary"));
  for (const Canary& c : suite.supporting) {
    CA_RETURN_IF_ERROR(CheckTokens(c.Sequence(), vocab_size, "supporting canary"));
  }
  std::vector<LabeledExample> out(train.begin(), train.end());
  auto add = [&out](const Canary& c, Origin origin) {
    LabeledExample ex{c.Sequence(), c.label, origin};
    for (int i = 0; i < c.repetitions; ++i) out.push_back(ex);
  };
  add(suite.original, Origin::kCanaryOriginal);
  for (const Canary& c : suite.supporting) add(c, Origin::kCanarySupporting);
  Rng rng(suite.seed);
  std::shuffle(out.begin(), out.end(), rng);
  return out;
}

std::vector<TokenIds> TokenSequences(std::span<const LabeledExample> examples) {
  std::vector<TokenIds> out;
  out.reserve(examples.size());
  for (const LabeledExample& ex : examples) out.push_back(ex.tokens);
  return out;
}

absl::Status WriteDatasetFile(std::span<const LabeledExample> examples,
                              const Vocabulary& vocab, const std::string& path) {
  std::string contents;
  for (const LabeledExample& ex : examples) {
    CA_RETURN_IF_ERROR(CheckTokens(ex.tokens, vocab.size(), "dataset"));
    json line;
    line["tokens"] = vocab.Decode(ex.tokens);
    line["label"] = ex.label;
    line["origin"] = std::string(OriginName(ex.origin));
    absl::StrAppend(&contents, line.dump(), "\n");
  }
  return internal::WriteFileAtomically(path, contents);
}

absl::StatusOr<std::vector<LabeledExample>> ReadDatasetFile(
    const std::string& path, const Vocabulary& vocab) {
  CA_ASSIGN_OR_RETURN(std::string contents, internal::ReadFile(path));
  std::vector<LabeledExample> out;
  int line_no = 0;
  for (absl::string_view line : absl::StrSplit(contents, '\n')) {
    ++line_no;
    if (line.empty()) continue;
    auto fail = [&](absl::string_view why) {
      return absl::InvalidArgumentError(
          absl::StrCat(path, ":", line_no, ": ", why));
    };
    json j = json::parse(line.begin(), line.end(), nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded() || !j.is_object()) return fail("not a JSON object");
    if (!j.contains("tokens") || !j["tokens"].is_array() ||
        !j.contains("label") || !j["label"].is_number_integer()) {
      return fail("expected \"tokens\" array and integer \"label\"");
    }
    LabeledExample ex;
    ex.label = j["label"].get<int>();
    if (ex.label < 0) return fail("negative label");
    TokenStrings tokens;
    for (const json& t : j["tokens"]) {
      if (!t.is_string()) return fail("non-string token");
      tokens.push_back(t.get<std::string>());
    }
    if (tokens.empty()) return fail("empty token list");
    auto ids = vocab.Encode(tokens);
    if (!ids.ok()) return fail(ids.status().message());
    ex.tokens = *std::move(ids);
    if (j.contains("origin")) {
      if (!j["origin"].is_string()) return fail("non-string origin");
      auto origin = ParseOrigin(j["origin"].get<std::string>());
      if (!origin.ok()) return fail(origin.status().message());
      ex.origin = *origin;
    }
    out.push_back(std::move(ex));
  }
  return out;
}

namespace {

json CanaryToJson(const Canary& c, const Vocabulary& vocab) {
  json j;
  j["prefix"] = vocab.Decode(c.prefix);
  j["secret"] = vocab.Decode(c.secret);
  j["label"] = c.label;
  j["repetitions"] = c.repetitions;
  return j;
}

absl::StatusOr<Canary> CanaryFromJson(const json& j, const Vocabulary& vocab) {
  if (!j.is_object() || !j.contains("prefix") || !j.contains("secret") ||
      !j.contains("label") || !j.contains("repetitions")) {
    return absl::InvalidArgumentError(
        "canary needs prefix, secret, label and repetitions");
  }
  auto strings = [](const json& arr) -> absl::StatusOr<TokenStrings> {
    if (!arr.is_array()) return absl::InvalidArgumentError("expected array");
    TokenStrings out;
    for (const json& t : arr) {
      if (!t.is_string()) return absl::InvalidArgumentError("non-string token");
      out.push_back(t.get<std::string>());
    }
    return out;
  };
  Canary c;
  CA_ASSIGN_OR_RETURN(TokenStrings prefix, strings(j["prefix"]));
  CA_ASSIGN_OR_RETURN(TokenStrings secret, strings(j["secret"]));
  CA_ASSIGN_OR_RETURN(c.prefix, vocab.Encode(prefix));
  CA_ASSIGN_OR_RETURN(c.secret, vocab.Encode(secret));
  if (!j["label"].is_number_integer() || !j["repetitions"].is_number_integer()) {
    return absl::InvalidArgumentError("label and repetitions must be integers");
  }
  c.label = j["label"].get<int>();
  c.repetitions = j["repetitions"].get<int>();
  return c;
}

}  // namespace

std::string SerializeCanarySuite(const CanarySuite& suite,
                                 const Vocabulary& vocab) {
  json j;
  j["seed"] = suite.seed;
  j["original"] = CanaryToJson(suite.original, vocab);
  j["supporting"] = json::array();
  for (const Canary& c : suite.supporting) {
    j["supporting"].push_back(CanaryToJson(c, vocab));
  }
  return j.dump(2);
}

absl::StatusOr<CanarySuite> ParseCanarySuite(absl::string_view text,
                                             const Vocabulary& vocab) {
  json j = json::parse(text.begin(), text.end(), nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded() || !j.is_object()) {
    return absl::InvalidArgumentError("canary suite is not a JSON object");
  }
  if (!j.contains("original") || !j.contains("supporting") ||
      !j["supporting"].is_array() || !j.contains("seed") ||
      !j["seed"].is_number_unsigned()) {
    return absl::InvalidArgumentError(
        "canary suite needs original, supporting and seed");
  }
  CanarySuite suite;
  suite.seed = j["seed"].get<std::uint64_t>();
  CA_ASSIGN_OR_RETURN(suite.original, CanaryFromJson(j["original"], vocab));
  for (const json& c : j["supporting"]) {
    CA_ASSIGN_OR_RETURN(Canary canary, CanaryFromJson(c, vocab));
    suite.supporting.push_back(std::move(canary));
  }
  CA_RETURN_IF_ERROR(ValidateCanarySuite(suite));
  return suite;
}

absl::Status WriteCanarySuiteFile(const CanarySuite& suite,
                                  const Vocabulary& vocab,
                                  const std::string& path) {
  return internal::WriteFileAtomically(
      path, SerializeCanarySuite(suite, vocab) + "\n");
}

absl::StatusOr<CanarySuite> ReadCanarySuiteFile(const std::string& path,
                                                const Vocabulary& vocab) {
  CA_ASSIGN_OR_RETURN(std::string contents, internal::ReadFile(path));
  return ParseCanarySuite(contents, vocab);
}

}  // namespace canary_audit
