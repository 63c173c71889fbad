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

// Thresholded bipartite matching. Table unionability is the largest total
// similarity among the matchings of maximum cardinality whose pairs all
// reach the threshold tau.

#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "tus/common.hpp"
#include "tus/repository.hpp"

namespace tus {

struct WeightedEdge {
  std::uint32_t left = 0;
  std::uint32_t right = 0;
  double weight = 0.0;
};

/// Edges of weight >= tau only; pairs below the threshold are never stored.
struct ThresholdGraph {
  std::size_t left_size = 0;
  std::size_t right_size = 0;
  std::vector<WeightedEdge> edges;
};

struct MatchedPair {
  std::uint32_t left = 0;
  std::uint32_t right = 0;
  friend bool operator==(const MatchedPair&, const MatchedPair&) = default;
};

struct MatchingResult {
  std::size_t cardinality = 0;
  double weight = 0.0;
  std::vector<MatchedPair> pairs;  // sorted by left
};

inline void check_threshold(double tau) {
  if (!(tau > 0.0)) {
    throw UsageError("invalid_threshold", "similarity threshold tau must be > 0");
  }
}

inline ThresholdGraph build_threshold_graph(const VectorMatrix& left, const VectorMatrix& right,
                                            double tau) {
  check_threshold(tau);
  if (!left.empty() && !right.empty() && left.dim() != right.dim()) {
    throw DataError("dimension_mismatch", "dimension mismatch: " + std::to_string(left.dim()) +
                                              " vs " + std::to_string(right.dim()));
  }
  ThresholdGraph g{left.rows(), right.rows(), {}};
  for (std::uint32_t i = 0; i < left.rows(); ++i) {
    for (std::uint32_t j = 0; j < right.rows(); ++j) {
      const double s = similarity(left.row(i), right.row(j));
      if (s >= tau) g.edges.push_back({i, j, s});
    }
  }
  return g;
}

/// Dense rectangular assignment (rows <= cols) maximizing the total of
/// `weight(row, col)`. Returns the column of every row. Shortest augmenting
/// path Hungarian method with row/column potentials, O(rows^2 * cols).
inline std::vector<std::uint32_t> max_weight_assignment(std::span<const double> weight,
                                                        std::size_t rows, std::size_t cols) {
  if (rows > cols) throw InvariantError("assignment_shape", "assignment needs rows <= cols");
  constexpr double inf = std::numeric_limits<double>::infinity();
  auto cost = [&](std::size_t i, std::size_t j) { return -weight[(i - 1) * cols + (j - 1)]; };
  std::vector<double> u(rows + 1, 0.0), v(cols + 1, 0.0);
  std::vector<std::size_t> p(cols + 1, 0), way(cols + 1, 0);
  for (std::size_t i = 1; i <= rows; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(cols + 1, inf);
    std::vector<char> used(cols + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= cols; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0, j) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= cols; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::uint32_t> col_of_row(rows, 0);
  for (std::size_t j = 1; j <= cols; ++j) {
    if (p[j] != 0) col_of_row[p[j] - 1] = static_cast<std::uint32_t>(j - 1);
  }
  return col_of_row;
}

/// Maximum cardinality first, then maximum weight among those matchings.
///
/// Every edge weight is shifted by W = 1 + (sum of all edge weights) and a
/// plain maximum-weight matching is solved. A matching with t + 1 edges then
/// weighs more than (t + 1) W > t W + sum(w), which bounds every t-edge
/// matching, so cardinality dominates; among matchings of equal cardinality t
/// the shifted total is t W + weight, so the weight decides. Non-edges enter
/// the dense assignment with weight 0 and are dropped from the result.
inline MatchingResult max_cardinality_max_weight(const ThresholdGraph& g) {
  MatchingResult out;
  if (g.edges.empty()) return out;
  const bool transpose = g.left_size > g.right_size;
  const std::size_t rows = transpose ? g.right_size : g.left_size;
  const std::size_t cols = transpose ? g.left_size : g.right_size;
  double shift = 1.0;
  for (const auto& e : g.edges) shift += e.weight;

  std::vector<double> dense(rows * cols, 0.0);
  std::vector<double> original(rows * cols, -1.0);
  for (const auto& e : g.edges) {
    const std::size_t r = transpose ? e.right : e.left;
    const std::size_t c = transpose ? e.left : e.right;
    if (original[r * cols + c] < e.weight) {
      original[r * cols + c] = e.weight;
      dense[r * cols + c] = shift + e.weight;
    }
  }
  const auto col_of_row = max_weight_assignment(dense, rows, cols);
  for (std::uint32_t r = 0; r < rows; ++r) {
    const std::uint32_t c = col_of_row[r];
    const double w = original[r * cols + c];
    if (w < 0.0) continue;
    out.pairs.push_back(transpose ? MatchedPair{c, r} : MatchedPair{r, c});
  }
  std::sort(out.pairs.begin(), out.pairs.end(),
            [](const MatchedPair& a, const MatchedPair& b) { return a.left < b.left; });
  out.cardinality = out.pairs.size();
  for (const auto& pr : out.pairs) {
    const std::size_t r = transpose ? pr.right : pr.left;
    const std::size_t c = transpose ? pr.left : pr.right;
    out.weight += original[r * cols + c];
  }
  return out;
}

/// Table unionability U(Q, V, tau).
inline MatchingResult unionability(const VectorMatrix& query, const VectorMatrix& set,
                                   double tau) {
  return max_cardinality_max_weight(build_threshold_graph(query, set, tau));
}

inline constexpr std::size_t kBruteForceGuard = 8;

/// Exhaustive search over all injective partial mappings along graph edges.
/// Returns the (cardinality, weight)-lexicographic maximum.
inline MatchingResult brute_force_matching(const ThresholdGraph& g) {
  if (std::min(g.left_size, g.right_size) > kBruteForceGuard) {
    throw UsageError("size_guard", "brute-force matching limited to min side <= " +
                                       std::to_string(kBruteForceGuard));
  }
  const bool transpose = g.left_size > g.right_size;
  const std::size_t rows = transpose ? g.right_size : g.left_size;
  std::vector<std::vector<std::pair<std::uint32_t, double>>> adj(rows);
  for (const auto& e : g.edges) {
    if (transpose) {
      adj[e.right].push_back({e.left, e.weight});
    } else {
      adj[e.left].push_back({e.right, e.weight});
    }
  }
  std::vector<char> used(transpose ? g.left_size : g.right_size, 0);
  std::vector<std::int64_t> current(rows, -1), best_pick(rows, -1);
  std::size_t best_card = 0;
  double best_weight = 0.0;

  auto recurse = [&](auto&& self, std::size_t r, std::size_t card, double weight) -> void {
    if (r == rows) {
      if (card > best_card || (card == best_card && weight > best_weight)) {
        best_card = card;
        best_weight = weight;
        best_pick = current;
      }
      return;
    }
    current[r] = -1;
    self(self, r + 1, card, weight);
    for (const auto& [c, w] : adj[r]) {
      if (used[c]) continue;
      used[c] = 1;
      current[r] = c;
      self(self, r + 1, card + 1, weight + w);
      used[c] = 0;
      current[r] = -1;
    }
  };
  recurse(recurse, 0, 0, 0.0);

  MatchingResult out;
  out.cardinality = best_card;
  out.weight = best_weight;
  for (std::uint32_t r = 0; r < rows; ++r) {
    if (best_pick[r] < 0) continue;
    const auto c = static_cast<std::uint32_t>(best_pick[r]);
    out.pairs.push_back(transpose ? MatchedPair{c, r} : MatchedPair{r, c});
  }
  std::sort(out.pairs.begin(), out.pairs.end(),
            [](const MatchedPair& a, const MatchedPair& b) { return a.left < b.left; });
  return out;
}

inline MatchingResult brute_force_unionability(const VectorMatrix& query,
                                               const VectorMatrix& set, double tau) {
  return brute_force_matching(build_threshold_graph(query, set, tau));
}

namespace detail {

// Kuhn-style augmentation from the current matching. match_right[r] is the
// left vertex matched to r or -1.
inline bool try_augment(std::uint32_t l, const std::vector<std::vector<std::uint32_t>>& adj,
                        std::vector<std::int64_t>& match_left,
                        std::vector<std::int64_t>& match_right, std::vector<char>& seen) {
  for (std::uint32_t r : adj[l]) {
    if (seen[r]) continue;
    seen[r] = 1;
    if (match_right[r] < 0 ||
        try_augment(static_cast<std::uint32_t>(match_right[r]), adj, match_left, match_right,
                    seen)) {
      match_right[r] = l;
      match_left[l] = r;
      return true;
    }
  }
  return false;
}

}  // namespace detail

/// Size of a maximum matching, by Hopcroft-Karp. Ignores weights.
inline std::size_t maximum_cardinality(const ThresholdGraph& g) {
  const std::size_t nl = g.left_size, nr = g.right_size;
  std::vector<std::vector<std::uint32_t>> adj(nl);
  for (const auto& e : g.edges) adj[e.left].push_back(e.right);
  constexpr std::size_t none = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> match_l(nl, none), match_r(nr, none), dist(nl, 0);
  std::size_t matched = 0;

  auto bfs = [&]() {
    std::vector<std::size_t> queue;
    bool found = false;
    for (std::size_t l = 0; l < nl; ++l) {
      if (match_l[l] == none) {
        dist[l] = 0;
        queue.push_back(l);
      } else {
        dist[l] = none;
      }
    }
    for (std::size_t head = 0; head < queue.size(); ++head) {
      const std::size_t l = queue[head];
      for (auto r : adj[l]) {
        const std::size_t next = match_r[r];
        if (next == none) {
          found = true;
        } else if (dist[next] == none) {
          dist[next] = dist[l] + 1;
          queue.push_back(next);
        }
      }
    }
    return found;
  };
  auto dfs = [&](auto&& self, std::size_t l) -> bool {
    for (auto r : adj[l]) {
      const std::size_t next = match_r[r];
      if (next == none || (dist[next] == dist[l] + 1 && self(self, next))) {
        match_l[l] = r;
        match_r[r] = l;
        return true;
      }
    }
    dist[l] = none;
    return false;
  };
  while (bfs()) {
    for (std::size_t l = 0; l < nl; ++l) {
      if (match_l[l] == none && dfs(dfs, l)) ++matched;
    }
  }
  return matched;
}

/// Extends a partial matching to maximum cardinality along augmenting
/// paths. `match_left[l]` is the right vertex of l or -1. Matched vertices
/// stay matched, so a feasible start yields a feasible maximum matching.
inline MatchingResult augment_to_maximum(const ThresholdGraph& g,
                                         std::vector<std::int64_t> match_left) {
  std::vector<std::int64_t> match_right(g.right_size, -1);
  for (std::uint32_t l = 0; l < g.left_size; ++l) {
    if (match_left[l] >= 0) match_right[static_cast<std::size_t>(match_left[l])] = l;
  }
  // Adjacency in descending weight so augmenting paths prefer heavy edges.
  std::vector<WeightedEdge> edges = g.edges;
  std::stable_sort(edges.begin(), edges.end(), [](const WeightedEdge& a, const WeightedEdge& b) {
    return a.weight > b.weight;
  });
  std::vector<std::vector<std::uint32_t>> adj(g.left_size);
  for (const auto& e : edges) adj[e.left].push_back(e.right);
  for (std::uint32_t l = 0; l < g.left_size; ++l) {
    if (match_left[l] >= 0 || adj[l].empty()) continue;
    std::vector<char> seen(g.right_size, 0);
    detail::try_augment(l, adj, match_left, match_right, seen);
  }
  std::vector<double> w(g.left_size * g.right_size, 0.0);
  for (const auto& e : g.edges) {
    auto& slot = w[e.left * g.right_size + e.right];
    slot = std::max(slot, e.weight);
  }
  MatchingResult out;
  for (std::uint32_t l = 0; l < g.left_size; ++l) {
    if (match_left[l] < 0) continue;
    const auto r = static_cast<std::uint32_t>(match_left[l]);
    out.pairs.push_back({l, r});
    out.weight += w[l * g.right_size + r];
  }
  out.cardinality = out.pairs.size();
  return out;
}

/// Greedy matching by descending weight, then augmented to maximum
/// cardinality. Feasible, so its weight never exceeds the exact
/// cardinality-first optimum.
inline MatchingResult greedy_matching(const ThresholdGraph& g) {
  std::vector<WeightedEdge> edges = g.edges;
  std::sort(edges.begin(), edges.end(), [](const WeightedEdge& a, const WeightedEdge& b) {
    if (a.weight != b.weight) return a.weight > b.weight;
    if (a.left != b.left) return a.left < b.left;
    return a.right < b.right;
  });
  std::vector<std::int64_t> match_left(g.left_size, -1);
  std::vector<char> right_used(g.right_size, 0);
  for (const auto& e : edges) {
    if (match_left[e.left] < 0 && !right_used[e.right]) {
      match_left[e.left] = e.right;
      right_used[e.right] = 1;
    }
  }
  return augment_to_maximum(g, std::move(match_left));
}

/// Sum of the min(|left|, |right|) heaviest edges, ignoring the one-to-one
/// constraint. Never below the weight of any matching.
inline double greedy_edge_upper_bound(const ThresholdGraph& g) {
  std::vector<double> weights;
  weights.reserve(g.edges.size());
  for (const auto& e : g.edges) weights.push_back(e.weight);
  const std::size_t take = std::min({g.left_size, g.right_size, weights.size()});
  std::partial_sort(weights.begin(), weights.begin() + static_cast<std::ptrdiff_t>(take),
                    weights.end(), std::greater<>());
  double ub = 0.0;
  for (std::size_t i = 0; i < take; ++i) ub += weights[i];
  return ub;
}

}  // namespace tus
