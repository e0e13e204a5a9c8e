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

#include "canary_audit/extract.h"

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>
#include <tuple>

#include "canary_audit/seeding.h"
#include "gmock/gmock.h"
#include "gtest/gtest.h"
#include "testing/stub_oracles.h"

namespace canary_audit {
namespace {

using ::testing::HasSubstr;
using testing::AddConstantOracle;
using testing::ConstantOracle;
using testing::DeltaOracle;
using testing::FailingOracle;
using testing::FunctionOracle;

std::uint64_t Fnv1a(const TokenIds& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (TokenId t : s) h = (h ^ static_cast<std::uint32_t>(t)) * 1099511628211ull;
  return h;
}

// Pseudo-random but fixed distribution per sequence.
std::unique_ptr<FunctionOracle> HashOracle(int num_classes, std::uint64_t salt) {
  return std::make_unique<FunctionOracle>(num_classes, [=](const TokenIds& s) {
    Rng rng(DeriveSeed(salt, {Fnv1a(s)}));
    std::uniform_real_distribution<double> u(0.01, 1.0);
    std::vector<double> p(num_classes);
    double sum = 0.0;
    for (double& x : p) sum += (x = u(rng));
    for (double& x : p) x /= sum;
    return p;
  });
}

FrequencyTable RandomFrequencies(std::size_t v, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_int_distribution<std::int64_t> count(0, 50);
  std::vector<std::int64_t> counts(v);
  for (auto& c : counts) c = count(rng);
  counts[0] += 1;
  return *FrequencyTable::FromCounts(counts);
}

FrequencyTable UniformFrequencies(std::size_t v) {
  return *FrequencyTable::FromCounts(std::vector<std::int64_t>(v, 1));
}

// Every n-tuple scored one query at a time, sorted by score then tuple.
std::vector<Candidate> BruteForce(Oracle& oracle, const TokenIds& prefix, int label,
                                  double lambda, int n, const FrequencyTable& freq) {
  const int v = static_cast<int>(freq.size());
  std::vector<Candidate> all;
  TokenIds tuple(n, 0);
  while (true) {
    TokenIds seq = prefix;
    seq.insert(seq.end(), tuple.begin(), tuple.end());
    double penalty = 0.0;
    for (TokenId t : tuple) penalty += freq.weight(t);
    all.push_back({tuple, *oracle.LabelLikelihood(seq, label) - lambda * penalty});
    int pos = n - 1;
    while (pos >= 0 && ++tuple[pos] == v) tuple[pos--] = 0;
    if (pos < 0) break;
  }
  std::sort(all.begin(), all.end(), [](const Candidate& a, const Candidate& b) {
    return std::tie(b.score, a.tokens) < std::tie(a.score, b.tokens);
  });
  return all;
}

const TokenIds kPrefix = {3, 1, 2, 1, 0};

TEST(ExtractionConfigTest, Validation) {
  EXPECT_TRUE(ValidateExtractionConfig({.beam_size = 25, .n_missing = 2}, 5).ok());
  EXPECT_FALSE(ValidateExtractionConfig({.beam_size = 26, .n_missing = 2}, 5).ok());
  EXPECT_FALSE(ValidateExtractionConfig({.lambda = -1}, 5).ok());
  EXPECT_FALSE(ValidateExtractionConfig({.lambda = std::nan("")}, 5).ok());
  EXPECT_FALSE(ValidateExtractionConfig({.beam_size = 0}, 5).ok());
  EXPECT_FALSE(ValidateExtractionConfig({.batch_size = 0}, 5).ok());
  // No overflow for large exponents.
  EXPECT_TRUE(ValidateExtractionConfig({.beam_size = 1 << 30, .n_missing = 40}, 1000).ok());
}

TEST(RegularizedScoreTest, LambdaZeroIsLikelihood) {
  auto oracle = HashOracle(3, 1);
  const FrequencyTable freq = RandomFrequencies(20, 1);
  for (TokenId v = 0; v < 20; ++v) {
    TokenIds seq = kPrefix;
    seq.push_back(v);
    EXPECT_EQ(*RegularizedScore(*oracle, kPrefix, v, 2, 0.0, freq),
              *oracle->LabelLikelihood(seq, 2));
  }
}

TEST(RegularizedScoreTest, PenaltyArithmetic) {
  auto oracle = ConstantOracle({0.3, 0.7});
  auto freq = FrequencyTable::FromCounts(std::vector<std::int64_t>{9, 1});
  ASSERT_TRUE(freq.ok());
  const double a = *RegularizedScore(*oracle, kPrefix, 0, 1, 1.0, *freq);
  const double b = *RegularizedScore(*oracle, kPrefix, 1, 1, 1.0, *freq);
  EXPECT_NEAR(b - a, 0.8, 1e-15);
}

TEST(RegularizedScoreTest, MatchesHandComputation) {
  auto oracle = HashOracle(4, 2);
  const FrequencyTable freq = RandomFrequencies(20, 2);
  for (TokenId v = 0; v < 20; ++v) {
    TokenIds seq = kPrefix;
    seq.push_back(v);
    const double want = *oracle->LabelLikelihood(seq, 1) - 0.37 * freq.weight(v);
    EXPECT_EQ(*RegularizedScore(*oracle, kPrefix, v, 1, 0.37, freq), want);
  }
  EXPECT_FALSE(RegularizedScore(*oracle, kPrefix, 20, 1, 0.37, freq).ok());
}

TEST(RankSingleTokenTest, DeltaOracle) {
  const Vocabulary vocab = MakeSyntheticVocabulary(40);
  auto oracle = DeltaOracle(3, 2, {17}, 1.0);
  auto result = RankSingleToken(*oracle, kPrefix, 2, {.beam_size = 5}, vocab,
                                UniformFrequencies(40));
  ASSERT_TRUE(result.ok());
  EXPECT_EQ(result->ranked.front().tokens, TokenIds{17});
  EXPECT_EQ(result->ranked.size(), 5u);
  EXPECT_EQ(result->queries_used, 40);
  EXPECT_EQ(*ExtractGreedy(*oracle, kPrefix, 2, {}, vocab, UniformFrequencies(40)), 17);
}

TEST(RankSingleTokenTest, UniformOracleLeastFrequentWins) {
  const Vocabulary vocab = MakeSyntheticVocabulary(6);
  auto freq = FrequencyTable::FromCounts(std::vector<std::int64_t>{5, 1, 3, 1, 9, 2});
  auto oracle = ConstantOracle({0.5, 0.5});
  auto result = RankSingleToken(*oracle, kPrefix, 0, {.lambda = 0.5, .beam_size = 6},
                                vocab, *freq);
  ASSERT_TRUE(result.ok());
  std::vector<TokenId> order;
  for (const Candidate& c : result->ranked) order.push_back(c.tokens[0]);
  EXPECT_EQ(order, (std::vector<TokenId>{1, 3, 5, 2, 0, 4}));
}

TEST(RankSingleTokenTest, MatchesExhaustiveSort) {
  const Vocabulary vocab = MakeSyntheticVocabulary(50);
  for (std::uint64_t salt = 0; salt < 10; ++salt) {
    auto oracle = HashOracle(5, salt);
    const FrequencyTable freq = RandomFrequencies(50, salt);
    const double lambda = 0.1 * salt;
    auto result = RankSingleToken(*oracle, kPrefix, 3,
                                  {.lambda = lambda, .beam_size = 50, .batch_size = 7},
                                  vocab, freq);
    ASSERT_TRUE(result.ok());
    EXPECT_EQ(result->ranked, BruteForce(*oracle, kPrefix, 3, lambda, 1, freq));
  }
}

TEST(RankSingleTokenTest, RejectsMultiToken) {
  auto oracle = ConstantOracle({0.5, 0.5});
  EXPECT_FALSE(RankSingleToken(*oracle, kPrefix, 0, {.n_missing = 2},
                               MakeSyntheticVocabulary(5), UniformFrequencies(5))
                   .ok());
}

TEST(ExtractGreedyTest, JointOptimumCanBeMissed) {
  // Three tokens, two positions. One token alone looks best for token 0,
  // but the pair (1, 1) is far better than anything starting with 0.
  const TokenIds prefix = {2, 1, 0, 2};
  const std::size_t p = prefix.size();
  auto oracle = std::make_unique<FunctionOracle>(2, [p](const TokenIds& s) {
    double q = 0.2;
    if (s.size() == p + 1) {
      q = std::vector<double>{0.6, 0.5, 0.1}[s[p]];
    } else if (s[p] == 0) {
      q = 0.4;
    } else if (s[p] == 1 && s[p + 1] == 1) {
      q = 0.99;
    }
    return std::vector<double>{q, 1.0 - q};
  });
  const Vocabulary vocab = MakeSyntheticVocabulary(3);
  const FrequencyTable freq = UniformFrequencies(3);

  auto greedy = ExtractGreedySequence(*oracle, prefix, 0, {.n_missing = 2}, vocab, freq);
  ASSERT_TRUE(greedy.ok());
  EXPECT_EQ(*greedy, (TokenIds{0, 0}));

  const auto brute = BruteForce(*oracle, prefix, 0, 0.0, 2, freq);
  EXPECT_EQ(brute.front().tokens, (TokenIds{1, 1}));
  auto beam = ExtractBeam(*oracle, prefix, 0, {.beam_size = 3, .n_missing = 2}, vocab, freq);
  ASSERT_TRUE(beam.ok());
  EXPECT_EQ(beam->ranked.front().tokens, (TokenIds{1, 1}));
}

TEST(ExtractGreedyTest, LambdaSweepMovesArgmax) {
  const TokenIds prefix = {2, 2};
  const std::size_t p = prefix.size();
  auto oracle = std::make_unique<FunctionOracle>(2, [p](const TokenIds& s) {
    const double q = std::vector<double>{0.9, 0.8, 0.5}[s[p]];
    return std::vector<double>{q, 1.0 - q};
  });
  auto freq = FrequencyTable::FromCounts(std::vector<std::int64_t>{6, 3, 1});
  const Vocabulary vocab = MakeSyntheticVocabulary(3);
  std::vector<TokenId> picks;
  for (double lambda : {0.0, 0.01, 0.1, 1.0, 10.0}) {
    picks.push_back(*ExtractGreedy(*oracle, prefix, 0, {.lambda = lambda}, vocab, *freq));
  }
  EXPECT_EQ(picks, (std::vector<TokenId>{0, 0, 0, 1, 2}));
}

TEST(ExtractBeamTest, SingleTokenBeamIsRanking) {
  const Vocabulary vocab = MakeSyntheticVocabulary(30);
  auto oracle = HashOracle(3, 5);
  const FrequencyTable freq = RandomFrequencies(30, 5);
  const ExtractionConfig config{.lambda = 0.2, .beam_size = 12};
  EXPECT_EQ(*ExtractBeam(*oracle, kPrefix, 1, config, vocab, freq),
            *RankSingleToken(*oracle, kPrefix, 1, config, vocab, freq));
}

TEST(ExtractBeamTest, ExhaustiveBeamEqualsEnumeration) {
  for (auto [v, n] : std::vector<std::pair<int, int>>{{5, 2}, {30, 2}, {6, 3}}) {
    const Vocabulary vocab = MakeSyntheticVocabulary(v);
    auto oracle = HashOracle(4, v);
    const FrequencyTable freq = RandomFrequencies(v, v);
    int space = 1;
    for (int i = 0; i < n; ++i) space *= v;
    auto result = ExtractBeam(*oracle, kPrefix, 2,
                              {.lambda = 0.3, .beam_size = space, .n_missing = n},
                              vocab, freq);
    ASSERT_TRUE(result.ok());
    EXPECT_EQ(result->ranked, BruteForce(*oracle, kPrefix, 2, 0.3, n, freq))
        << v << "^" << n;
  }
}

TEST(ExtractBeamTest, TiesBreakByTuple) {
  const Vocabulary vocab = MakeSyntheticVocabulary(4);
  auto oracle = ConstantOracle({0.5, 0.5});
  auto result = ExtractBeam(*oracle, kPrefix, 0, {.beam_size = 16, .n_missing = 2}, vocab,
                            UniformFrequencies(4));
  ASSERT_TRUE(result.ok());
  ASSERT_EQ(result->ranked.size(), 16u);
  for (std::size_t i = 0; i < 16; ++i) {
    EXPECT_EQ(result->ranked[i].tokens,
              (TokenIds{static_cast<TokenId>(i / 4), static_cast<TokenId>(i % 4)}));
  }
}

TEST(ExtractBeamTest, SmallBeamIsConsistentWithLargerBeam) {
  const Vocabulary vocab = MakeSyntheticVocabulary(30);
  const FrequencyTable freq = RandomFrequencies(30, 6);
  for (std::uint64_t salt = 0; salt < 5; ++salt) {
    auto oracle = HashOracle(3, 100 + salt);
    auto small = ExtractBeam(*oracle, kPrefix, 0, {.lambda = 0.1, .beam_size = 5, .n_missing = 2},
                             vocab, freq);
    auto large = ExtractBeam(*oracle, kPrefix, 0, {.lambda = 0.1, .beam_size = 10, .n_missing = 2},
                             vocab, freq);
    auto first = ExtractBeam(*oracle, kPrefix, 0, {.lambda = 0.1, .beam_size = 5}, vocab, freq);
    ASSERT_TRUE(small.ok() && large.ok() && first.ok());
    std::set<TokenId> survivors;
    for (const Candidate& c : first->ranked) survivors.insert(c.tokens[0]);
    std::vector<Candidate> shared;
    for (const Candidate& c : large->ranked) {
      if (survivors.count(c.tokens[0]) > 0) shared.push_back(c);
    }
    if (shared.size() > 5) shared.resize(5);
    ASSERT_LE(shared.size(), small->ranked.size());
    EXPECT_TRUE(std::equal(shared.begin(), shared.end(), small->ranked.begin())) << salt;
    EXPECT_LE(small->queries_used, 2 * 5 * 30);
    EXPECT_LE(large->queries_used, 2 * 10 * 30);
  }
}

TEST(ExtractBeamTest, InvariantToConstantShift) {
  const Vocabulary vocab = MakeSyntheticVocabulary(20);
  const FrequencyTable freq = RandomFrequencies(20, 7);
  auto inner = HashOracle(3, 7);
  AddConstantOracle shifted(*inner, 0.5);
  const ExtractionConfig config{.lambda = 0.25, .beam_size = 15, .n_missing = 2};
  auto a = ExtractBeam(*inner, kPrefix, 1, config, vocab, freq);
  auto b = ExtractBeam(shifted, kPrefix, 1, config, vocab, freq);
  ASSERT_TRUE(a.ok() && b.ok());
  ASSERT_EQ(a->ranked.size(), b->ranked.size());
  for (std::size_t i = 0; i < a->ranked.size(); ++i) {
    EXPECT_EQ(a->ranked[i].tokens, b->ranked[i].tokens) << i;
  }
}

TEST(ExtractBeamTest, LambdaZeroIsLikelihoodOrder) {
  const Vocabulary vocab = MakeSyntheticVocabulary(25);
  auto oracle = HashOracle(2, 8);
  auto result = ExtractBeam(*oracle, kPrefix, 0, {.beam_size = 25}, vocab, RandomFrequencies(25, 8));
  ASSERT_TRUE(result.ok());
  for (const Candidate& c : result->ranked) {
    TokenIds seq = kPrefix;
    seq.push_back(c.tokens[0]);
    EXPECT_EQ(c.score, *oracle->LabelLikelihood(seq, 0));
  }
  EXPECT_TRUE(std::is_sorted(result->ranked.begin(), result->ranked.end(), RanksBefore));
}

TEST(ExtractBeamTest, IndependentOfBatchingAndWorkers) {
  const Vocabulary vocab = MakeSyntheticVocabulary(40);
  const FrequencyTable freq = RandomFrequencies(40, 9);
  auto oracle = HashOracle(3, 9);
  ExtractionConfig base{.lambda = 0.05, .beam_size = 8, .n_missing = 2};
  auto reference = ExtractBeam(*oracle, kPrefix, 2, base, vocab, freq);
  ASSERT_TRUE(reference.ok());
  for (int batch : {1, 3, 40, 1000}) {
    for (int workers : {1, 4}) {
      ExtractionConfig c = base;
      c.batch_size = batch;
      c.workers = workers;
      auto r = ExtractBeam(*oracle, kPrefix, 2, c, vocab, freq);
      ASSERT_TRUE(r.ok());
      EXPECT_EQ(*r, *reference) << batch << " " << workers;
    }
  }
}

TEST(ExtractBeamTest, OracleFailureReportsProgress) {
  const Vocabulary vocab = MakeSyntheticVocabulary(50);
  auto inner = HashOracle(2, 10);
  FailingOracle failing(*inner, 3);
  auto result = ExtractBeam(failing, kPrefix, 0, {.beam_size = 5, .batch_size = 10}, vocab,
                            UniformFrequencies(50));
  ASSERT_FALSE(result.ok());
  EXPECT_THAT(result.status().message(), HasSubstr("after 30 of 50"));
  EXPECT_THAT(result.status().message(), HasSubstr("oracle went away"));
}

TEST(ExtractBeamTest, InputErrors) {
  const Vocabulary vocab = MakeSyntheticVocabulary(10);
  auto oracle = ConstantOracle({0.5, 0.5});
  const FrequencyTable freq = UniformFrequencies(10);
  EXPECT_FALSE(ExtractBeam(*oracle, kPrefix, 2, {}, vocab, freq).ok());
  EXPECT_FALSE(ExtractBeam(*oracle, {42}, 0, {}, vocab, freq).ok());
  EXPECT_FALSE(ExtractBeam(*oracle, kPrefix, 0, {}, vocab, UniformFrequencies(9)).ok());
  EXPECT_FALSE(ExtractBeam(*oracle, kPrefix, 0, {.beam_size = 11}, vocab, freq).ok());
}

TEST(TruthRankTest, FindsPosition) {
  ExtractionResult r{.ranked = {{{4}, 0.9}, {{2}, 0.5}, {{7}, 0.1}}};
  EXPECT_EQ(TruthRank(r, TokenIds{2}), 2);
  EXPECT_EQ(TruthRank(r, TokenIds{8}), std::nullopt);
}

TEST(ExtractionReportTest, RoundTrip) {
  const Vocabulary vocab = MakeSyntheticVocabulary(10);
  ExtractionReport report;
  report.config = {.lambda = 0.01, .beam_size = 2, .n_missing = 2, .batch_size = 64};
  report.prefix = {1, 2, 3};
  report.label = 4;
  report.result = {.ranked = {{{1, 9}, 0.123456789012345678}, {{0, 0}, -1e-300}},
                   .queries_used = 40};
  report.truth_rank = 2;
  auto back = ParseExtractionReport(SerializeExtractionReport(report, vocab), vocab);
  ASSERT_TRUE(back.ok()) << back.status();
  EXPECT_EQ(back->result, report.result);
  EXPECT_EQ(back->prefix, report.prefix);
  EXPECT_EQ(back->label, 4);
  EXPECT_EQ(back->truth_rank, 2);
  EXPECT_EQ(back->config.lambda, 0.01);
  EXPECT_EQ(back->config.n_missing, 2);

  report.truth_rank.reset();
  auto none = ParseExtractionReport(SerializeExtractionReport(report, vocab), vocab);
  ASSERT_TRUE(none.ok());
  EXPECT_EQ(none->truth_rank, std::nullopt);
  EXPECT_FALSE(ParseExtractionReport("{}", vocab).ok());
}

}  // namespace
}  // namespace canary_audit
