// Copyright 2026 the tus authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <numeric>
#include <random>

#include "tus/pruning.hpp"

namespace tus {
namespace {

struct Instance {
  std::vector<SetId> ids;
  std::vector<double> score;
  std::vector<BoundPair> bounds;
};

// Scores on a coarse grid so ties are common; bounds widen by random slack.
Instance random_instance(std::size_t n, double slack, std::mt19937_64& rng) {
  Instance in;
  std::uniform_int_distribution<int> grid(0, 20);
  std::uniform_real_distribution<double> u(0.0, slack);
  for (SetId s = 0; s < n; ++s) {
    in.ids.push_back(s);
    const double sc = grid(rng) / 4.0;
    in.score.push_back(sc);
    in.bounds.push_back({sc - u(rng), sc + u(rng)});
  }
  std::shuffle(in.ids.begin(), in.ids.end(), rng);
  return in;
}

std::vector<ScoredSet> sort_oracle(const Instance& in, std::size_t m) {
  std::vector<ScoredSet> all;
  for (SetId s = 0; s < in.score.size(); ++s) all.push_back({s, in.score[s]});
  std::sort(all.begin(), all.end(), [](const ScoredSet& a, const ScoredSet& b) {
    return a.score != b.score ? a.score > b.score : a.set_id < b.set_id;
  });
  all.resize(std::min(m, all.size()));
  return all;
}

void expect_same(const std::vector<ScoredSet>& a, const std::vector<ScoredSet>& b) {
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].set_id, b[i].set_id) << "rank " << i;
    EXPECT_EQ(a[i].score, b[i].score) << "rank " << i;
  }
}

TEST(Prune, ParseAndPrint) {
  EXPECT_EQ(parse_pruner("bf"), PrunerKind::brute_force);
  EXPECT_EQ(parse_pruner("enhanced"), PrunerKind::enhanced);
  EXPECT_EQ(to_string(PrunerKind::base), "base");
  EXPECT_THROW(parse_pruner("fast"), UsageError);
}

TEST(Prune, AllStrategiesAgreeWithSortOracle) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<std::size_t> n_dist(0, 60), m_dist(1, 10);
  std::uniform_real_distribution<double> slack_dist(0.0, 2.0);
  for (int trial = 0; trial < 500; ++trial) {
    const auto in = random_instance(n_dist(rng), slack_dist(rng), rng);
    const std::size_t m = m_dist(rng);
    auto bound = [&](SetId s) { return in.bounds[s]; };
    auto score = [&](SetId s) { return in.score[s]; };
    const auto want = sort_oracle(in, m);
    SCOPED_TRACE("trial " + std::to_string(trial));
    for (auto kind : {PrunerKind::brute_force, PrunerKind::base, PrunerKind::enhanced}) {
      const auto r = prune(kind, in.ids, m, bound, score);
      expect_same(r.top, want);
      EXPECT_EQ(r.stats.score_calls + r.stats.discarded, in.ids.size());
    }
  }
}

TEST(Prune, EnhancedScoresExactlyMOnDisjointIntervals) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 40;
    std::vector<SetId> ids(n);
    std::iota(ids.begin(), ids.end(), 0);
    std::shuffle(ids.begin(), ids.end(), rng);
    // Set s has score s inside [s - 0.4, s + 0.4].
    auto bound = [](SetId s) { return BoundPair{s - 0.4, s + 0.4}; };
    auto score = [](SetId s) { return double(s); };
    const std::size_t m = 1 + trial % 8;
    const auto r = enhanced_prune(std::span<const SetId>(ids), m, bound, score);
    EXPECT_EQ(r.stats.score_calls, m) << "trial " << trial;
    ASSERT_EQ(r.top.size(), m);
    EXPECT_EQ(r.top.front().set_id, n - 1);
  }
}

TEST(Prune, DiscardsCarryMDominatingWitnesses) {
  std::mt19937_64 rng(13);
  std::size_t seen = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const auto in = random_instance(50, 0.3, rng);
    const std::size_t m = 1 + trial % 6;
    std::vector<DiscardWitness> w;
    enhanced_prune(std::span<const SetId>(in.ids), m, [&](SetId s) { return in.bounds[s]; },
                   [&](SetId s) { return in.score[s]; }, &w);
    for (const auto& x : w) {
      EXPECT_GE(x.dominating, m) << "trial " << trial << " set " << x.set_id;
      EXPECT_EQ(x.ub, in.bounds[x.set_id].ub);
    }
    seen += w.size();
  }
  EXPECT_GT(seen, 0u);
}

TEST(Prune, EnhancedScoresNoMoreThanBaseOnAverage) {
  std::mt19937_64 rng(14);
  double base_calls = 0, enh_calls = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const auto in = random_instance(200, 0.5, rng);
    auto bound = [&](SetId s) { return in.bounds[s]; };
    auto score = [&](SetId s) { return in.score[s]; };
    base_calls += double(base_prune(std::span<const SetId>(in.ids), 10, bound, score).stats.score_calls);
    enh_calls += double(enhanced_prune(std::span<const SetId>(in.ids), 10, bound, score).stats.score_calls);
  }
  EXPECT_LE(enh_calls, base_calls);
}

TEST(Prune, RejectsZeroM) {
  const std::vector<SetId> ids{0};
  auto f = [](SetId) { return BoundPair{}; };
  auto g = [](SetId) { return 0.0; };
  EXPECT_THROW(base_prune(std::span<const SetId>(ids), 0, f, g), UsageError);
  EXPECT_THROW(enhanced_prune(std::span<const SetId>(ids), 0, f, g), UsageError);
}

}  // namespace
}  // namespace tus
