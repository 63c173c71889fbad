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

// End-to-end top-k table union search:
//   1. refinement over the centroid space          -> phi_ref candidates
//   2. MWMTO filtering with bound-based pruning     -> phi_r candidates
//   3. clustered exact scoring with the same pruner -> k results

#pragma once

#include <algorithm>
#include <chrono>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "tus/centroid_ann.hpp"
#include "tus/common.hpp"
#include "tus/exact_matching.hpp"
#include "tus/mwmto.hpp"
#include "tus/partition_index.hpp"
#include "tus/pruning.hpp"
#include "tus/quantizer.hpp"
#include "tus/refinement.hpp"
#include "tus/repository.hpp"

namespace tus {

struct BuildParams {
  std::size_t n_centroids = 0;  // 0 selects ceil(sqrt(total vectors))
  double rho_low = 0.2;
  double rho_high = 0.8;
  PartitionMode partition_mode = PartitionMode::adaptive;
  std::size_t graph_degree = kDefaultGraphDegree;
  std::size_t ef_construction = kDefaultEfConstruction;
  bool build_graph = true;
  std::uint64_t seed = 42;
  std::size_t kmeans_iters = 25;
  std::size_t max_points_per_centroid = 256;
  unsigned threads = 1;
};

struct TusIndex {
  Repository repo;
  BuildParams params;
  Codebook codebook;
  ClusterAssignment assignment;
  FlatIndexes flat;
  PartitionInvertedIndex partitions;
  std::optional<CentroidGraphIndex> graph;
  std::vector<std::vector<SetPosting>> postings;  // derived from flat.ivf

  const CentroidGraphIndex* graph_ptr() const { return graph ? &*graph : nullptr; }
};

inline PartitionParams partition_params(const BuildParams& p) {
  PartitionParams pp;
  pp.rho_low = p.rho_low;
  pp.rho_high = p.rho_high;
  pp.mode = p.partition_mode;
  pp.seed = p.seed + 1;
  pp.kmeans_iters = p.kmeans_iters;
  return pp;
}

inline TusIndex build_index(Repository repo, BuildParams params) {
  if (repo.size() == 0) throw DataError("empty_repository", "repository has no sets");
  validate(partition_params(params));
  if (params.n_centroids == 0) params.n_centroids = default_centroid_count(repo.total_vectors());
  if (params.n_centroids > repo.total_vectors()) {
    throw UsageError("invalid_parameter", "n_c exceeds the number of vectors");
  }
  TusIndex idx;
  KMeansOptions km;
  km.max_iters = params.kmeans_iters;
  km.max_points_per_centroid = params.max_points_per_centroid;
  km.threads = params.threads;
  idx.codebook = train_kmeans(stack_vectors(repo), params.n_centroids, params.seed, km).codebook;
  idx.assignment = assign_all(repo, idx.codebook, params.threads);
  idx.flat = build_indexes(repo, idx.assignment, idx.codebook.size());
  idx.partitions = build_partition_index(repo, idx.codebook, idx.assignment,
                                         partition_params(params), params.threads);
  if (params.build_graph) {
    idx.graph = build_centroid_index(idx.codebook, params.graph_degree, params.ef_construction,
                                     params.seed + 2);
  }
  idx.postings = build_set_postings(idx.flat.ivf);
  idx.repo = std::move(repo);
  idx.params = params;
  return idx;
}

struct SearchParams {
  std::size_t k = 10;
  double tau = 0.7;
  std::size_t phi_c = 32;
  std::size_t phi_ref = 0;  // 0 selects 5k
  std::size_t phi_r = 0;    // 0 selects 3k, capped at phi_ref
  PrunerKind pruner = PrunerKind::enhanced;
  AnnMode ann_mode = AnnMode::automatic;
  std::size_t ef_search = 0;  // 0 selects max(64, 2 phi_c)
  bool mark_visited_on_block = true;
};

/// Fills defaults and checks k <= phi_r <= phi_ref and tau > 0.
inline SearchParams resolve(SearchParams p) {
  if (p.k < 1) throw UsageError("invalid_parameter", "k must be >= 1");
  if (p.phi_c < 1) throw UsageError("invalid_parameter", "phi_c must be >= 1");
  check_threshold(p.tau);
  if (p.phi_ref == 0) p.phi_ref = 5 * p.k;
  if (p.phi_r == 0) p.phi_r = std::min(3 * p.k, p.phi_ref);
  if (!(p.k <= p.phi_r && p.phi_r <= p.phi_ref)) {
    throw UsageError("invalid_parameter", "need k <= phi_r <= phi_ref (k=" + std::to_string(p.k) +
                                              ", phi_r=" + std::to_string(p.phi_r) +
                                              ", phi_ref=" + std::to_string(p.phi_ref) + ")");
  }
  if (p.ef_search == 0) p.ef_search = default_ef_search(p.phi_c);
  return p;
}

struct SearchHit {
  SetId set_id = 0;
  double score = 0.0;
  std::size_t cardinality = 0;
};

struct SearchDiagnostics {
  std::size_t refined = 0;
  std::size_t filtered = 0;
  std::size_t returned = 0;
  PruneStats filter_stats;
  PruneStats score_stats;
  double refine_ms = 0.0;
  double filter_ms = 0.0;
  double score_ms = 0.0;

  std::size_t score_calls() const { return filter_stats.score_calls + score_stats.score_calls; }

  /// One line of space-separated key=value pairs.
  std::string to_record() const {
    std::ostringstream os;
    os << "refined=" << refined << " filtered=" << filtered << " returned=" << returned
       << " filter_score_calls=" << filter_stats.score_calls
       << " filter_bound_calls=" << filter_stats.bound_calls
       << " filter_discarded=" << filter_stats.discarded
       << " exact_match_calls=" << score_stats.score_calls
       << " score_bound_calls=" << score_stats.bound_calls
       << " score_discarded=" << score_stats.discarded
       << " heap_ops=" << filter_stats.heap_ops + score_stats.heap_ops
       << " refine_ms=" << refine_ms << " filter_ms=" << filter_ms << " score_ms=" << score_ms;
    return os.str();
  }
};

struct SearchResult {
  std::vector<SearchHit> hits;  // score desc, then cardinality desc, then set id asc
  std::vector<SetId> refined_ids;
  std::vector<SetId> filtered_ids;
  SearchDiagnostics diagnostics;
};

/// Assigns every query vector to one partition of a candidate set. Vectors
/// matched by the MWMTO assignment keep their group; the rest go to the
/// group with the highest centroid similarity (ties to the lower group),
/// ignoring threshold and capacity.
inline std::vector<std::uint32_t> query_split(const VectorMatrix& query, const PartitionSet& part,
                                              const Codebook& cb, const MwmtoResult& mwmto) {
  std::vector<std::uint32_t> split(query.rows(), 0);
  for (std::size_t q = 0; q < query.rows(); ++q) {
    if (mwmto.group_of_query[q] != kUnmatched) {
      split[q] = static_cast<std::uint32_t>(mwmto.group_of_query[q]);
      continue;
    }
    double best = -std::numeric_limits<double>::infinity();
    for (std::uint32_t k = 0; k < part.groups.size(); ++k) {
      const auto& g = part.groups[k];
      for (std::size_t i = 0; i < g.centroids.size(); ++i) {
        const double s = similarity(query.row(q), part.centroid(cb, g, i));
        if (s > best) {
          best = s;
          split[q] = k;
        }
      }
    }
  }
  return split;
}

/// Per-partition threshold graphs between V_Q^k and S_k.
inline std::vector<ThresholdGraph> partition_graphs(const VectorMatrix& query, const VectorSet& set,
                                                    const PartitionSet& part,
                                                    std::span<const std::uint32_t> split,
                                                    double tau) {
  std::vector<ThresholdGraph> graphs(part.groups.size());
  std::vector<std::vector<std::uint32_t>> queries(part.groups.size());
  for (std::uint32_t q = 0; q < split.size(); ++q) queries[split[q]].push_back(q);
  for (std::size_t k = 0; k < part.groups.size(); ++k) {
    const auto& members = part.groups[k].members;
    auto& g = graphs[k];
    g.left_size = queries[k].size();
    g.right_size = members.size();
    for (std::uint32_t a = 0; a < queries[k].size(); ++a) {
      for (std::uint32_t b = 0; b < members.size(); ++b) {
        const double s = similarity(query.row(queries[k][a]), set.vectors.row(members[b]));
        if (s >= tau) g.edges.push_back({a, b, s});
      }
    }
  }
  return graphs;
}

struct ClusteredScore {
  double score = 0.0;
  std::size_t cardinality = 0;
};

inline ClusteredScore clustered_score(const std::vector<ThresholdGraph>& graphs) {
  ClusteredScore out;
  for (const auto& g : graphs) {
    const auto m = max_cardinality_max_weight(g);
    out.score += m.weight;
    out.cardinality += m.cardinality;
  }
  return out;
}

/// LB: per partition a greedy matching (augmented to maximum cardinality);
/// UB: per partition the heaviest min(|V_Q^k|, |S_k|) edges.
inline BoundPair clustered_bounds(const std::vector<ThresholdGraph>& graphs) {
  BoundPair b;
  for (const auto& g : graphs) {
    b.lb += greedy_matching(g).weight;
    b.ub += greedy_edge_upper_bound(g);
  }
  return b;
}

/// Runs the three stages for one query.
inline SearchResult search(const TusIndex& index, const QueryTable& query, SearchParams params) {
  params = resolve(params);
  if (index.repo.size() == 0) throw DataError("empty_index", "index holds no sets");
  if (query.size() == 0) throw DataError("empty_set", "query table has no columns");
  if (query.dim() != index.repo.dim()) {
    throw DataError("dimension_mismatch", "query dimension " + std::to_string(query.dim()) +
                                              " vs index " + std::to_string(index.repo.dim()));
  }
  using clock = std::chrono::steady_clock;
  auto ms_since = [](clock::time_point t) {
    return std::chrono::duration<double, std::milli>(clock::now() - t).count();
  };
  const VectorMatrix& q = query.vectors;
  SearchResult out;

  // Stage 1.
  auto t0 = clock::now();
  RefinementParams rp;
  rp.phi_c = params.phi_c;
  rp.phi_ref = params.phi_ref;
  rp.ef_search = params.ef_search;
  rp.ann_mode = params.ann_mode;
  rp.mark_visited_on_block = params.mark_visited_on_block;
  const auto refined = refine(q, index.codebook, index.graph_ptr(), index.postings, rp);
  for (const auto& c : refined.ranked) out.refined_ids.push_back(c.set_id);
  out.diagnostics.refined = out.refined_ids.size();
  out.diagnostics.refine_ms = ms_since(t0);

  // Stage 2.
  t0 = clock::now();
  std::unordered_map<SetId, PartitionSimTable> sims;
  std::unordered_map<SetId, MwmtoResult> assignments;
  auto sim_table = [&](SetId id) -> const PartitionSimTable& {
    auto it = sims.find(id);
    if (it == sims.end()) {
      it = sims.emplace(id, partition_sims(q, index.partitions.sets[id], index.codebook, params.tau))
               .first;
    }
    return it->second;
  };
  auto mwmto_of = [&](SetId id) -> const MwmtoResult& {
    auto it = assignments.find(id);
    if (it == assignments.end()) it = assignments.emplace(id, mwmto_exact(sim_table(id))).first;
    return it->second;
  };
  const auto filter = prune(
      params.pruner, out.refined_ids, params.phi_r,
      [&](SetId id) { return bounds_for_mwmto(sim_table(id), index.repo.set(id).size()).bounds; },
      [&](SetId id) { return mwmto_of(id).score; });
  for (const auto& s : filter.top) out.filtered_ids.push_back(s.set_id);
  out.diagnostics.filter_stats = filter.stats;
  out.diagnostics.filtered = out.filtered_ids.size();
  out.diagnostics.filter_ms = ms_since(t0);

  // Stage 3.
  t0 = clock::now();
  std::unordered_map<SetId, std::vector<ThresholdGraph>> graphs;
  std::unordered_map<SetId, std::size_t> cardinality;
  auto graphs_of = [&](SetId id) -> const std::vector<ThresholdGraph>& {
    auto it = graphs.find(id);
    if (it == graphs.end()) {
      const auto& part = index.partitions.sets[id];
      const auto split = query_split(q, part, index.codebook, mwmto_of(id));
      it = graphs.emplace(id, partition_graphs(q, index.repo.set(id), part, split, params.tau))
               .first;
    }
    return it->second;
  };
  const auto final_stage = prune(
      params.pruner, out.filtered_ids, params.k,
      [&](SetId id) { return clustered_bounds(graphs_of(id)); },
      [&](SetId id) {
        const auto cs = clustered_score(graphs_of(id));
        cardinality[id] = cs.cardinality;
        return cs.score;
      });
  for (const auto& s : final_stage.top) out.hits.push_back({s.set_id, s.score, cardinality[s.set_id]});
  std::sort(out.hits.begin(), out.hits.end(), [](const SearchHit& a, const SearchHit& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.cardinality != b.cardinality) return a.cardinality > b.cardinality;
    return a.set_id < b.set_id;
  });
  out.diagnostics.score_stats = final_stage.stats;
  out.diagnostics.returned = out.hits.size();
  out.diagnostics.score_ms = ms_since(t0);
  return out;
}

}  // namespace tus
