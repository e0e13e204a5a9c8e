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

#include "canary_audit/oracle.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <thread>

#include "canary_audit/refmodel.h"
#include "canary_audit/seeding.h"
#include "gtest/gtest.h"
#include "testing/stub_oracles.h"

namespace canary_audit {
namespace {

using testing::ConstantOracle;
using testing::FunctionOracle;

std::shared_ptr<const ModelParams> Model() {
  return std::make_shared<const ModelParams>(
      InitializeParams({.vocab_size = 50, .embed_dim = 8, .hidden_dim = 8, .num_classes = 4}, 3));
}

std::vector<TokenIds> RandomSequences(int n, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_int_distribution<TokenId> tok(0, 49);
  std::uniform_int_distribution<int> len(1, 12);
  std::vector<TokenIds> out(n);
  for (TokenIds& s : out) {
    s.resize(len(rng));
    for (TokenId& t : s) t = tok(rng);
  }
  return out;
}

TEST(ValidateDistributionTest, Checks) {
  EXPECT_TRUE(ValidateDistribution({{0.25, 0.75}}, 2).ok());
  EXPECT_FALSE(ValidateDistribution({{0.25, 0.75}}, 3).ok());
  EXPECT_FALSE(ValidateDistribution({{0.5, 0.6}}, 2).ok());
  EXPECT_FALSE(ValidateDistribution({{-0.1, 1.1}}, 2).ok());
  EXPECT_FALSE(ValidateDistribution({{std::nan(""), 1.0}}, 2).ok());
}

TEST(OracleTest, ConstantOracleLikelihood) {
  auto oracle = ConstantOracle({0.1, 0.2, 0.7});
  EXPECT_EQ(oracle->LabelLikelihood({1, 2, 3}, 2).value(), 0.7);
  EXPECT_EQ(oracle->LabelLikelihood({9}, 0).value(), 0.1);
  EXPECT_FALSE(oracle->LabelLikelihood({9}, 3).ok());
  EXPECT_FALSE(oracle->LabelLikelihood({9}, -1).ok());
}

TEST(OracleTest, BatchMatchesOneByOne) {
  ReferenceModelOracle oracle(Model());
  const auto seqs = RandomSequences(40, 1);
  auto batch = oracle.ScoreBatch(seqs);
  ASSERT_TRUE(batch.ok());
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    auto single = oracle.ScoreBatch(std::span(&seqs[i], 1));
    ASSERT_TRUE(single.ok());
    for (int k = 0; k < 4; ++k) {
      EXPECT_NEAR((*batch)[i].probs[k], (*single)[0].probs[k], 1e-9);
    }
  }
}

TEST(OracleTest, PermutationKeepsAlignment) {
  ReferenceModelOracle oracle(Model());
  auto seqs = RandomSequences(30, 2);
  auto original = oracle.ScoreBatch(seqs);
  std::vector<std::size_t> order(seqs.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(2);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<TokenIds> permuted;
  for (std::size_t i : order) permuted.push_back(seqs[i]);
  auto shuffled = oracle.ScoreBatch(permuted);
  ASSERT_TRUE(original.ok() && shuffled.ok());
  for (std::size_t j = 0; j < order.size(); ++j) {
    EXPECT_EQ((*shuffled)[j], (*original)[order[j]]);
  }
}

TEST(OracleTest, CountsQueries) {
  ReferenceModelOracle oracle(Model());
  EXPECT_EQ(oracle.query_count(), 0);
  ASSERT_TRUE(oracle.ScoreBatch(RandomSequences(7, 3)).ok());
  ASSERT_TRUE(oracle.LabelLikelihood({1}, 0).ok());
  EXPECT_EQ(oracle.query_count(), 8);
  EXPECT_FALSE(oracle.ScoreBatch({}).ok());
  std::vector<TokenIds> bad = {{1}, {99}};
  EXPECT_FALSE(oracle.ScoreBatch(bad).ok());
  EXPECT_EQ(oracle.query_count(), 8);
}

TEST(OracleTest, MisalignedImplementationIsCaught) {
  FunctionOracle good(2, [](const TokenIds&) { return std::vector<double>{0.5, 0.5}; });
  class Short : public Oracle {
   public:
    int num_classes() const override { return 2; }

   protected:
    absl::StatusOr<std::vector<LabelDistribution>> ScoreBatchImpl(
        std::span<const TokenIds>) override {
      return std::vector<LabelDistribution>{{{0.5, 0.5}}};
    }
  } short_oracle;
  std::vector<TokenIds> two = {{1}, {2}};
  EXPECT_TRUE(good.ScoreBatch(two).ok());
  EXPECT_FALSE(short_oracle.ScoreBatch(two).ok());
}

TEST(OracleTest, ConcurrentCallsAgreeWithSerial) {
  ReferenceModelOracle oracle(Model());
  const auto seqs = RandomSequences(64, 4);
  auto serial = oracle.ScoreBatch(seqs);
  ASSERT_TRUE(serial.ok());
  std::vector<std::vector<LabelDistribution>> results(8);
  {
    std::vector<std::jthread> threads;
    for (int w = 0; w < 8; ++w) {
      threads.emplace_back([&, w] { results[w] = *oracle.ScoreBatch(seqs); });
    }
  }
  for (const auto& r : results) EXPECT_EQ(r, *serial);
  EXPECT_EQ(oracle.query_count(), 64 * 9);
}

}  // namespace
}  // namespace canary_audit
