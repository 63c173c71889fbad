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

// Nearest-centroid retrieval by inner product: an exact flat scan and a
// layered navigable small-world graph (HNSW-style) over the codebook.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <queue>
#include <random>
#include <span>
#include <unordered_set>
#include <vector>

#include "tus/common.hpp"
#include "tus/quantizer.hpp"

namespace tus {

inline constexpr std::size_t kDefaultGraphDegree = 16;
inline constexpr std::size_t kDefaultEfConstruction = 200;
inline constexpr std::size_t kExactScanLimit = 4096;

struct ScoredCentroid {
  CentroidId id = 0;
  double sim = 0.0;
};

// Descending similarity, ties to the lower id.
inline bool ranks_before(const ScoredCentroid& a, const ScoredCentroid& b) {
  if (a.sim != b.sim) return a.sim > b.sim;
  return a.id < b.id;
}

struct CentroidGraphIndex {
  std::size_t degree = kDefaultGraphDegree;  // M
  std::size_t ef_construction = kDefaultEfConstruction;
  std::uint64_t seed = 0;
  CentroidId entry_point = 0;
  std::size_t max_level = 0;
  // links[node][level]: out-neighbors; a node has levels 0..its own level.
  std::vector<std::vector<std::vector<CentroidId>>> links;

  std::size_t size() const { return links.size(); }
  std::size_t level_of(CentroidId n) const { return links[n].size() - 1; }
  std::size_t max_links(std::size_t level) const { return level == 0 ? 2 * degree : degree; }

  friend bool operator==(const CentroidGraphIndex&, const CentroidGraphIndex&) = default;
};

namespace detail {

struct WorseFirst {
  bool operator()(const ScoredCentroid& a, const ScoredCentroid& b) const {
    return ranks_before(a, b);
  }
};
struct BetterFirst {
  bool operator()(const ScoredCentroid& a, const ScoredCentroid& b) const {
    return ranks_before(b, a);
  }
};

// Beam search restricted to one level. Returns up to `ef` nodes, best first.
inline std::vector<ScoredCentroid> search_level(const CentroidGraphIndex& g, const Codebook& cb,
                                                std::span<const float> q,
                                                const std::vector<ScoredCentroid>& entries,
                                                std::size_t ef, std::size_t level) {
  std::unordered_set<CentroidId> visited;
  std::priority_queue<ScoredCentroid, std::vector<ScoredCentroid>, BetterFirst> frontier;
  std::priority_queue<ScoredCentroid, std::vector<ScoredCentroid>, WorseFirst> best;
  for (const auto& e : entries) {
    if (!visited.insert(e.id).second) continue;
    frontier.push(e);
    best.push(e);
    if (best.size() > ef) best.pop();
  }
  while (!frontier.empty()) {
    const ScoredCentroid cur = frontier.top();
    if (best.size() >= ef && ranks_before(best.top(), cur)) break;
    frontier.pop();
    for (CentroidId n : g.links[cur.id][level]) {
      if (!visited.insert(n).second) continue;
      const ScoredCentroid cand{n, similarity(q, cb.centroid(n))};
      if (best.size() < ef || ranks_before(cand, best.top())) {
        frontier.push(cand);
        best.push(cand);
        if (best.size() > ef) best.pop();
      }
    }
  }
  std::vector<ScoredCentroid> out;
  out.reserve(best.size());
  while (!best.empty()) {
    out.push_back(best.top());
    best.pop();
  }
  std::reverse(out.begin(), out.end());
  return out;
}

inline void shrink_links(CentroidGraphIndex& g, const Codebook& cb, CentroidId node,
                         std::size_t level) {
  auto& list = g.links[node][level];
  const std::size_t cap = g.max_links(level);
  if (list.size() <= cap) return;
  std::vector<ScoredCentroid> scored;
  scored.reserve(list.size());
  for (CentroidId n : list) scored.push_back({n, similarity(cb.centroid(node), cb.centroid(n))});
  std::sort(scored.begin(), scored.end(), ranks_before);
  list.clear();
  for (std::size_t i = 0; i < cap; ++i) list.push_back(scored[i].id);
}

// Links every node unreachable from the entry point at level 0 to its most
// similar reachable node that still has a free slot.
inline void repair_connectivity(CentroidGraphIndex& g, const Codebook& cb) {
  const std::size_t n = g.size();
  std::vector<char> reached(n, 0);
  std::vector<CentroidId> stack{g.entry_point};
  reached[g.entry_point] = 1;
  auto flood = [&] {
    while (!stack.empty()) {
      const CentroidId cur = stack.back();
      stack.pop_back();
      for (CentroidId nb : g.links[cur][0]) {
        if (!reached[nb]) {
          reached[nb] = 1;
          stack.push_back(nb);
        }
      }
    }
  };
  flood();
  for (CentroidId u = 0; u < n; ++u) {
    if (reached[u]) continue;
    CentroidId best = g.entry_point;
    double best_sim = -std::numeric_limits<double>::infinity();
    bool found = false;
    for (CentroidId r = 0; r < n; ++r) {
      if (!reached[r] || g.links[r][0].size() >= g.max_links(0)) continue;
      const double s = similarity(cb.centroid(u), cb.centroid(r));
      if (!found || s > best_sim) {
        best = r;
        best_sim = s;
        found = true;
      }
    }
    // Every reachable node full: overflow the entry point by one link.
    g.links[best][0].push_back(u);
    if (g.links[u][0].size() < g.max_links(0)) g.links[u][0].push_back(best);
    reached[u] = 1;
    stack.push_back(u);
    flood();
  }
}

}  // namespace detail

inline CentroidGraphIndex build_centroid_index(const Codebook& cb,
                                               std::size_t degree = kDefaultGraphDegree,
                                               std::size_t ef_construction = kDefaultEfConstruction,
                                               std::uint64_t seed = 0) {
  if (cb.size() == 0) throw UsageError("empty_codebook", "cannot index an empty codebook");
  if (degree < 2) throw UsageError("invalid_parameter", "graph degree M must be >= 2");
  CentroidGraphIndex g;
  g.degree = degree;
  g.ef_construction = std::max<std::size_t>(ef_construction, 1);
  g.seed = seed;
  g.links.resize(cb.size());

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double level_mult = 1.0 / std::log(static_cast<double>(degree));

  for (CentroidId node = 0; node < cb.size(); ++node) {
    const double r = 1.0 - unif(rng);  // (0, 1]
    const auto level = static_cast<std::size_t>(std::floor(-std::log(r) * level_mult));
    g.links[node].resize(level + 1);
    if (node == 0) {
      g.entry_point = 0;
      g.max_level = level;
      continue;
    }
    const auto q = cb.centroid(node);
    std::vector<ScoredCentroid> entries{{g.entry_point, similarity(q, cb.centroid(g.entry_point))}};
    for (std::size_t lev = g.max_level; lev > level; --lev) {
      entries = detail::search_level(g, cb, q, entries, 1, lev);
    }
    for (std::size_t lev = std::min(level, g.max_level) + 1; lev-- > 0;) {
      auto found = detail::search_level(g, cb, q, entries, g.ef_construction, lev);
      const std::size_t take = std::min(found.size(), g.degree);
      for (std::size_t i = 0; i < take; ++i) {
        const CentroidId nb = found[i].id;
        g.links[node][lev].push_back(nb);
        g.links[nb][lev].push_back(node);
        detail::shrink_links(g, cb, nb, lev);
      }
      entries = std::move(found);
    }
    if (level > g.max_level) {
      g.max_level = level;
      g.entry_point = node;
    }
  }
  detail::repair_connectivity(g, cb);
  return g;
}

/// Beam search over the graph; `ef` is raised to at least `k`.
inline std::vector<ScoredCentroid> graph_search(const CentroidGraphIndex& g, const Codebook& cb,
                                                std::span<const float> q, std::size_t k,
                                                std::size_t ef) {
  if (g.size() == 0) return {};
  std::vector<ScoredCentroid> entries{{g.entry_point, similarity(q, cb.centroid(g.entry_point))}};
  for (std::size_t lev = g.max_level; lev > 0; --lev) {
    entries = detail::search_level(g, cb, q, entries, 1, lev);
  }
  auto found = detail::search_level(g, cb, q, entries, std::max(ef, k), 0);
  if (found.size() > k) found.resize(k);
  return found;
}

inline std::vector<ScoredCentroid> exact_top_centroids(const Codebook& cb,
                                                       std::span<const float> q, std::size_t k) {
  std::vector<ScoredCentroid> all(cb.size());
  for (CentroidId c = 0; c < cb.size(); ++c) all[c] = {c, similarity(q, cb.centroid(c))};
  k = std::min(k, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end(),
                    ranks_before);
  all.resize(k);
  return all;
}

enum class AnnMode : std::uint8_t { automatic = 0, exact = 1, graph = 2 };

inline std::size_t default_ef_search(std::size_t phi_c) {
  return std::max<std::size_t>(64, 2 * phi_c);
}

/// Top-phi_c centroids by inner product, best first. phi_c > n_c returns all.
/// Automatic mode scans exactly up to kExactScanLimit centroids or when no
/// graph is available.
inline std::vector<ScoredCentroid> top_centroids(const Codebook& cb, const CentroidGraphIndex* graph,
                                                 std::span<const float> q, std::size_t phi_c,
                                                 std::size_t ef_search, AnnMode mode) {
  if (phi_c < 1) throw UsageError("invalid_parameter", "phi_c must be >= 1");
  bool use_graph = mode == AnnMode::graph;
  if (mode == AnnMode::automatic) use_graph = graph != nullptr && cb.size() > kExactScanLimit;
  if (use_graph) {
    if (graph == nullptr) throw UsageError("missing_graph", "graph mode needs a centroid graph");
    return graph_search(*graph, cb, q, phi_c, ef_search);
  }
  return exact_top_centroids(cb, q, phi_c);
}

}  // namespace tus
