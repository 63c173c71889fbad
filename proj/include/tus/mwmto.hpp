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

// Maximum weight many-to-one t-matching (MWMTO) between query vectors and the
// partitions of one candidate set. A query vector matches at most one group,
// a group (G, S) at most |S| query vectors, and the similarity of a query
// vector to a group is its best inner product against the group's centroids.

#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "tus/common.hpp"
#include "tus/exact_matching.hpp"
#include "tus/partition_index.hpp"
#include "tus/quantizer.hpp"

namespace tus {

struct GroupSim {
  std::uint32_t group = 0;
  double sim = 0.0;
};

/// rows[q]: thresholded (group, sim) entries of query vector q, in group order.
struct PartitionSimTable {
  std::vector<std::vector<GroupSim>> rows;
  std::vector<std::size_t> capacities;  // |S_k| per group
};

inline PartitionSimTable partition_sims(const VectorMatrix& query, const PartitionSet& part,
                                        const Codebook& cb, double tau) {
  check_threshold(tau);
  PartitionSimTable t;
  t.rows.resize(query.rows());
  t.capacities.reserve(part.groups.size());
  for (const auto& g : part.groups) t.capacities.push_back(g.capacity());
  for (std::size_t q = 0; q < query.rows(); ++q) {
    for (std::uint32_t k = 0; k < part.groups.size(); ++k) {
      const auto& g = part.groups[k];
      double best = -std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < g.centroids.size(); ++i) {
        best = std::max(best, similarity(query.row(q), part.centroid(cb, g, i)));
      }
      if (best >= tau) t.rows[q].push_back(GroupSim{k, best});
    }
  }
  return t;
}

inline constexpr std::int32_t kUnmatched = -1;

struct MwmtoResult {
  double score = 0.0;
  std::size_t cardinality = 0;
  std::vector<std::int32_t> group_of_query;  // kUnmatched when not matched
};

namespace detail {

// Right side of the capacitated problem: every group expanded into
// min(|S_k|, |Q|) identical copies.
struct ExpandedGraph {
  ThresholdGraph graph;
  std::vector<std::uint32_t> group_of_copy;
  std::vector<std::uint32_t> first_copy;  // per group
};

inline ExpandedGraph expand(const PartitionSimTable& t) {
  ExpandedGraph e;
  const std::size_t nq = t.rows.size();
  for (std::uint32_t k = 0; k < t.capacities.size(); ++k) {
    e.first_copy.push_back(static_cast<std::uint32_t>(e.group_of_copy.size()));
    const std::size_t copies = std::min(t.capacities[k], nq);
    for (std::size_t c = 0; c < copies; ++c) e.group_of_copy.push_back(k);
  }
  e.graph.left_size = nq;
  e.graph.right_size = e.group_of_copy.size();
  for (std::uint32_t q = 0; q < nq; ++q) {
    for (const auto& gs : t.rows[q]) {
      const std::size_t copies = std::min(t.capacities[gs.group], nq);
      for (std::size_t c = 0; c < copies; ++c) {
        e.graph.edges.push_back({q, static_cast<std::uint32_t>(e.first_copy[gs.group] + c), gs.sim});
      }
    }
  }
  return e;
}

inline MwmtoResult collapse(const ExpandedGraph& e, const MatchingResult& m) {
  MwmtoResult r;
  r.group_of_query.assign(e.graph.left_size, kUnmatched);
  for (const auto& p : m.pairs) {
    r.group_of_query[p.left] = static_cast<std::int32_t>(e.group_of_copy[p.right]);
  }
  r.score = m.weight;
  r.cardinality = m.cardinality;
  return r;
}

}  // namespace detail

/// Exact MWMTO: maximum cardinality first, then maximum total similarity.
inline MwmtoResult mwmto_exact(const PartitionSimTable& t) {
  const auto e = detail::expand(t);
  return detail::collapse(e, max_cardinality_max_weight(e.graph));
}

inline MwmtoResult mwmto_exact(const VectorMatrix& query, const PartitionSet& part,
                               const Codebook& cb, double tau) {
  return mwmto_exact(partition_sims(query, part, cb, tau));
}

struct MwmtoBounds {
  BoundPair bounds;
  MwmtoResult lower_assignment;  // the feasible assignment achieving bounds.lb
};

/// Bounds for MWMTO.
///
/// LB: query vectors in order each take their most similar group that still
/// has capacity (ties to the lower group id). That assignment is then
/// augmented to maximum cardinality, since the exact score ranks cardinality
/// first and a short greedy assignment can otherwise outweigh it.
/// UB: every thresholded (query, group) entry pooled, the top
/// min(|Q|, |V_i|) similarities summed, ignoring all capacity constraints.
inline MwmtoBounds bounds_for_mwmto(const PartitionSimTable& t, std::size_t set_size) {
  MwmtoBounds out;
  const auto e = detail::expand(t);
  std::vector<std::size_t> used(t.capacities.size(), 0);
  std::vector<std::int64_t> match_left(t.rows.size(), -1);
  std::vector<double> pool;
  for (std::size_t q = 0; q < t.rows.size(); ++q) {
    auto row = t.rows[q];
    std::stable_sort(row.begin(), row.end(),
                     [](const GroupSim& a, const GroupSim& b) { return a.sim > b.sim; });
    for (const auto& gs : row) pool.push_back(gs.sim);
    for (const auto& gs : row) {
      const std::size_t copies = std::min(t.capacities[gs.group], t.rows.size());
      if (used[gs.group] < copies) {
        match_left[q] = e.first_copy[gs.group] + used[gs.group];
        ++used[gs.group];
        break;
      }
    }
  }
  out.lower_assignment = detail::collapse(e, augment_to_maximum(e.graph, std::move(match_left)));
  out.bounds.lb = out.lower_assignment.score;

  const std::size_t take = std::min({t.rows.size(), set_size, pool.size()});
  std::partial_sort(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(take), pool.end(),
                    std::greater<>());
  for (std::size_t i = 0; i < take; ++i) out.bounds.ub += pool[i];
  return out;
}

}  // namespace tus
