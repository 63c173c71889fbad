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

#include <set>

#include "support.hpp"
#include "tus/pipeline.hpp"

namespace tus {
namespace {

VectorMatrix rows_of(const VectorMatrix& m, const std::vector<std::uint32_t>& idx) {
  std::vector<float> v;
  for (auto i : idx) v.insert(v.end(), m.row(i).begin(), m.row(i).end());
  return VectorMatrix(m.dim(), std::move(v));
}

// Partition-respecting score assembled from whole-matrix unionability.
double partitioned_oracle(const TusIndex& idx, const VectorMatrix& q, SetId s, double tau) {
  const auto& part = idx.partitions.sets[s];
  const auto split =
      query_split(q, part, idx.codebook, mwmto_exact(partition_sims(q, part, idx.codebook, tau)));
  double total = 0;
  for (std::uint32_t g = 0; g < part.groups.size(); ++g) {
    std::vector<std::uint32_t> qs;
    for (std::uint32_t i = 0; i < split.size(); ++i) {
      if (split[i] == g) qs.push_back(i);
    }
    if (qs.empty()) continue;
    total += unionability(rows_of(q, qs), rows_of(idx.repo.set(s).vectors, part.groups[g].members), tau)
                 .weight;
  }
  return total;
}

std::vector<ScoredSet> ranked(std::vector<ScoredSet> v, std::size_t k) {
  std::sort(v.begin(), v.end(), outranks);
  v.resize(std::min(k, v.size()));
  return v;
}

struct Workload {
  TusIndex index;
  std::vector<QueryTable> queries;
};

Workload workload(std::size_t n_sets, PartitionMode mode = PartitionMode::adaptive) {
  SyntheticParams p;
  p.n_sets = n_sets;
  p.n_topics = 40;
  p.noise = 0.6;
  auto corpus = generate_synthetic(p);
  auto queries = generate_queries(corpus, 8, 0.6, 3);
  BuildParams b;
  b.partition_mode = mode;
  return {build_index(std::move(corpus.repo), b), std::move(queries)};
}

SearchParams exhaustive_params(const TusIndex& idx, std::size_t k, double tau) {
  SearchParams sp;
  sp.k = k;
  sp.tau = tau;
  sp.phi_c = idx.codebook.size();
  sp.phi_ref = idx.repo.size();
  sp.phi_r = idx.repo.size();
  sp.ann_mode = AnnMode::exact;
  return sp;
}

TEST(Resolve, DefaultsAndOrdering) {
  SearchParams p;
  const auto r = resolve(p);
  EXPECT_EQ(r.phi_ref, 50u);
  EXPECT_EQ(r.phi_r, 30u);
  EXPECT_EQ(r.ef_search, 64u);
  p.phi_ref = 20;
  EXPECT_EQ(resolve(p).phi_r, 20u);
  p.phi_r = 25;
  EXPECT_THROW(resolve(p), UsageError);
  p.phi_r = 5;
  EXPECT_THROW(resolve(p), UsageError);
  p = SearchParams{};
  p.tau = 0;
  EXPECT_THROW(resolve(p), UsageError);
}

TEST(ClusteredBounds, SandwichTheClusteredScore) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<ThresholdGraph> gs;
    for (int k = 0; k < 1 + trial % 4; ++k) gs.push_back(testing::random_graph(1 + k, 2 + trial % 5, 0.5, 0.6, rng));
    const auto s = clustered_score(gs);
    const auto b = clustered_bounds(gs);
    EXPECT_LE(b.lb, s.score + 1e-9);
    EXPECT_GE(b.ub, s.score - 1e-9);
  }
}

TEST(QuerySplit, UnmatchedVectorsGoToNearestGroup) {
  const Codebook cb{VectorMatrix(2, {1, 0, 0, 1}), 0};
  PartitionSet part;
  part.cascade_centroids = VectorMatrix(2, {});
  part.groups = {PartitionGroup{{0}, false, {0}}, PartitionGroup{{1}, false, {1}}};
  const VectorMatrix q(2, {1, 0, 0.6f, 0.8f, -1, 0});
  MwmtoResult m;
  m.group_of_query = {1, kUnmatched, kUnmatched};
  const auto split = query_split(q, part, cb, m);
  // Vector 0 keeps its assigned group even though group 0 is closer.
  EXPECT_EQ(split, (std::vector<std::uint32_t>{1, 1, 1}));
}

TEST(Search, StagesAreNestedAndSized) {
  const auto w = workload(150);
  SearchParams sp;
  sp.k = 5;
  for (const auto& q : w.queries) {
    const auto r = search(w.index, q, sp);
    EXPECT_EQ(r.refined_ids.size(), 25u);
    EXPECT_EQ(r.filtered_ids.size(), 15u);
    EXPECT_EQ(r.hits.size(), 5u);
    const std::set<SetId> refined(r.refined_ids.begin(), r.refined_ids.end());
    const std::set<SetId> filtered(r.filtered_ids.begin(), r.filtered_ids.end());
    for (auto id : filtered) EXPECT_TRUE(refined.count(id));
    for (const auto& h : r.hits) EXPECT_TRUE(filtered.count(h.set_id));
    EXPECT_NE(r.diagnostics.to_record().find("exact_match_calls="), std::string::npos);
  }
}

TEST(Search, FullBudgetEqualsPartitionedBruteForce) {
  const auto w = workload(120);
  const double tau = 0.6;
  for (const auto& q : w.queries) {
    std::vector<ScoredSet> all;
    for (SetId s = 0; s < w.index.repo.size(); ++s) {
      all.push_back({s, partitioned_oracle(w.index, q.vectors, s, tau)});
    }
    const auto want = ranked(all, 10);
    const auto r = search(w.index, q, exhaustive_params(w.index, 10, tau));
    ASSERT_EQ(r.hits.size(), want.size());
    std::vector<ScoredSet> got;
    for (const auto& h : r.hits) got.push_back({h.set_id, h.score});
    got = ranked(got, 10);
    for (std::size_t i = 0; i < want.size(); ++i) {
      EXPECT_EQ(got[i].set_id, want[i].set_id);
      EXPECT_NEAR(got[i].score, want[i].score, 1e-9);
    }
  }
}

TEST(Search, SinglePartitionIsExact) {
  const auto w = workload(100, PartitionMode::single);
  const double tau = 0.5;
  for (const auto& q : w.queries) {
    std::vector<ScoredSet> all;
    for (SetId s = 0; s < w.index.repo.size(); ++s) {
      all.push_back({s, unionability(q.vectors, w.index.repo.set(s).vectors, tau).weight});
    }
    const auto want = ranked(all, 10);
    const auto r = search(w.index, q, exhaustive_params(w.index, 10, tau));
    std::set<SetId> got_ids, want_ids;
    for (const auto& h : r.hits) got_ids.insert(h.set_id);
    for (const auto& s : want) want_ids.insert(s.set_id);
    EXPECT_EQ(got_ids, want_ids);
  }
}

TEST(Search, PrunersReturnIdenticalHits) {
  const auto w = workload(200);
  for (const auto& q : w.queries) {
    SearchParams sp;
    sp.pruner = PrunerKind::brute_force;
    const auto bf = search(w.index, q, sp);
    for (auto kind : {PrunerKind::base, PrunerKind::enhanced}) {
      sp.pruner = kind;
      const auto r = search(w.index, q, sp);
      ASSERT_EQ(r.hits.size(), bf.hits.size());
      EXPECT_EQ(r.filtered_ids, bf.filtered_ids);
      for (std::size_t i = 0; i < r.hits.size(); ++i) {
        EXPECT_EQ(r.hits[i].set_id, bf.hits[i].set_id);
        EXPECT_EQ(r.hits[i].score, bf.hits[i].score);
      }
      EXPECT_LE(r.diagnostics.score_calls(), bf.diagnostics.score_calls());
    }
  }
}

TEST(Search, SelfRetrieval) {
  const auto w = workload(150);
  for (SetId s : {0u, 17u, 99u}) {
    const QueryTable q{w.index.repo.set(s).vectors};
    const auto r = search(w.index, q, exhaustive_params(w.index, 3, 0.7));
    ASSERT_FALSE(r.hits.empty());
    EXPECT_EQ(r.hits[0].set_id, s);
    EXPECT_NEAR(r.hits[0].score, double(q.size()), 1e-5);
  }
}

TEST(Search, RejectsBadQueries) {
  const auto w = workload(30);
  EXPECT_THROW(search(w.index, QueryTable{VectorMatrix(5, {1, 0, 0, 0, 0})}, SearchParams{}), DataError);
  EXPECT_THROW(search(w.index, QueryTable{VectorMatrix(32, {})}, SearchParams{}), DataError);
}

}  // namespace
}  // namespace tus
