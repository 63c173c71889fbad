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

#include <map>
#include <tuple>

#include "support.hpp"
#include "tus/refinement.hpp"

namespace tus {
namespace {

using Postings = std::vector<std::vector<SetPosting>>;

// Per-set replay of the acceptance rule over the globally sorted pair list.
std::map<SetId, double> replay(const VectorMatrix& q, const Codebook& cb, const Postings& postings,
                               std::size_t phi_c) {
  std::vector<std::tuple<double, CentroidId, std::uint32_t>> pairs;
  for (std::uint32_t i = 0; i < q.rows(); ++i) {
    std::vector<std::pair<double, CentroidId>> all;
    for (CentroidId c = 0; c < cb.size(); ++c) all.emplace_back(similarity(q.row(i), cb.centroid(c)), c);
    std::sort(all.begin(), all.end(), [](auto& a, auto& b) {
      return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    for (std::size_t j = 0; j < std::min(phi_c, all.size()); ++j) {
      pairs.emplace_back(all[j].first, all[j].second, i);
    }
  }
  std::sort(pairs.begin(), pairs.end(), [](auto& a, auto& b) {
    if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) > std::get<0>(b);
    if (std::get<1>(a) != std::get<1>(b)) return std::get<1>(a) < std::get<1>(b);
    return std::get<2>(a) < std::get<2>(b);
  });
  std::map<SetId, std::map<CentroidId, std::uint32_t>> cap;
  for (CentroidId c = 0; c < postings.size(); ++c) {
    for (const auto& p : postings[c]) cap[p.set_id][c] = p.count;
  }
  std::map<SetId, double> out;
  for (const auto& [s, caps] : cap) {
    std::vector<char> seen(q.rows(), 0);
    std::map<CentroidId, std::uint32_t> used;
    bool touched = false;
    for (const auto& [sim, c, i] : pairs) {
      auto it = caps.find(c);
      if (it == caps.end()) continue;
      touched = true;
      if (seen[i]) continue;
      seen[i] = 1;
      if (used[c] < it->second) {
        ++used[c];
        out[s] += sim;
      }
    }
    if (touched) out.try_emplace(s, 0.0);
  }
  return out;
}

struct Fixture {
  Codebook cb;
  Postings postings;
};

Fixture random_fixture(std::size_t n_c, std::size_t n_sets, std::size_t dim, std::mt19937_64& rng) {
  Fixture f{Codebook{testing::random_unit_matrix(n_c, dim, rng), 0}, Postings(n_c)};
  std::uniform_int_distribution<std::size_t> pick(0, n_c - 1), width(1, 4);
  std::uniform_int_distribution<std::uint32_t> cnt(1, 3);
  for (SetId s = 0; s < n_sets; ++s) {
    std::map<CentroidId, std::uint32_t> m;
    for (std::size_t k = width(rng); k > 0; --k) m[static_cast<CentroidId>(pick(rng))] += cnt(rng);
    for (const auto& [c, n] : m) f.postings[c].push_back({s, n});
  }
  return f;
}

TEST(Refine, CapacityGuardBlocksSecondQueryVector) {
  const Codebook cb{VectorMatrix(2, {1, 0, 0, 1}), 0};
  const Postings postings{{{0, 1}}, {{0, 1}}};
  // Both query vectors prefer centroid 0, which holds one vector of set 0.
  const VectorMatrix q(2, {1, 0, 0.8f, 0.6f});
  RefinementParams p;
  p.phi_c = 2;
  RefinementTrace trace;
  const auto out = refine(q, cb, nullptr, postings, p, &trace);
  ASSERT_EQ(out.ranked.size(), 1u);
  // 1.0 from q0 on c0; q1 is blocked on c0 and so never reaches c1.
  EXPECT_DOUBLE_EQ(out.ranked[0].score, 1.0);
  EXPECT_EQ(out.heap_pairs, 4u);
  std::size_t blocked = 0;
  for (const auto& e : trace.events) blocked += e.blocked;
  EXPECT_EQ(blocked, 1u);

  p.mark_visited_on_block = false;
  const auto relaxed = refine(q, cb, nullptr, postings, p);
  EXPECT_NEAR(relaxed.ranked[0].score, 1.0 + 0.6f, 1e-7);
}

TEST(Refine, DrainOrderIsNonIncreasing) {
  std::mt19937_64 rng(1);
  const auto f = random_fixture(40, 30, 8, rng);
  const auto q = testing::random_unit_matrix(6, 8, rng);
  RefinementParams p;
  p.phi_c = 10;
  RefinementTrace trace;
  const auto out = refine(q, f.cb, nullptr, f.postings, p, &trace);
  EXPECT_EQ(out.heap_pairs, 60u);
  EXPECT_EQ(trace.drain_order.size(), 60u);
  EXPECT_TRUE(std::is_sorted(trace.drain_order.rbegin(), trace.drain_order.rend()));
}

TEST(Refine, MatchesPerSetReplay) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 60; ++trial) {
    const auto f = random_fixture(25, 40, 6, rng);
    const auto q = testing::random_unit_matrix(1 + trial % 7, 6, rng);
    RefinementParams p;
    p.phi_c = 1 + trial % 25;
    p.phi_ref = 1000;
    const auto out = refine(q, f.cb, nullptr, f.postings, p);
    const auto want = replay(q, f.cb, f.postings, p.phi_c);
    ASSERT_EQ(out.ranked.size(), want.size()) << "trial " << trial;
    EXPECT_EQ(out.touched_sets, want.size());
    for (const auto& c : out.ranked) EXPECT_NEAR(c.score, want.at(c.set_id), 1e-12);
    for (std::size_t i = 1; i < out.ranked.size(); ++i) {
      const auto& a = out.ranked[i - 1];
      const auto& b = out.ranked[i];
      EXPECT_TRUE(a.score > b.score || (a.score == b.score && a.set_id < b.set_id));
    }
  }
}

TEST(Refine, ScoreBoundedByPerQueryMaxima) {
  std::mt19937_64 rng(3);
  const auto f = random_fixture(30, 50, 5, rng);
  const auto q = testing::random_unit_matrix(5, 5, rng);
  RefinementParams p;
  p.phi_c = 30;
  p.phi_ref = 50;
  double bound = 0;
  for (std::size_t i = 0; i < q.rows(); ++i) {
    double m = -1;
    for (CentroidId c = 0; c < 30; ++c) m = std::max(m, similarity(q.row(i), f.cb.centroid(c)));
    bound += std::max(m, 0.0);
  }
  for (const auto& c : refine(q, f.cb, nullptr, f.postings, p).ranked) EXPECT_LE(c.score, bound + 1e-12);
}

TEST(Refine, TruncatesToPhiRefAndRejectsZero) {
  std::mt19937_64 rng(4);
  const auto f = random_fixture(10, 30, 4, rng);
  const auto q = testing::random_unit_matrix(3, 4, rng);
  RefinementParams p;
  p.phi_c = 10;
  p.phi_ref = 1000;
  const auto full = refine(q, f.cb, nullptr, f.postings, p);
  p.phi_ref = 5;
  const auto cut = refine(q, f.cb, nullptr, f.postings, p);
  ASSERT_EQ(cut.ranked.size(), 5u);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(cut.ranked[i].set_id, full.ranked[i].set_id);
  p.phi_ref = 0;
  EXPECT_THROW(refine(q, f.cb, nullptr, f.postings, p), UsageError);
}

}  // namespace
}  // namespace tus
