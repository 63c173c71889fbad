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

// Per-set partitions (I_p). Each set starts from one group per owning
// centroid. Its dispersion rho = |distinct owning centroids| / |set| picks
// the branch:
//   rho >= rho_high  merge the most similar group pair until rho < rho_high
//   rho <= rho_low   replace the groups by a local k-means ("cascade") split
//   otherwise        keep the singleton groups

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "tus/common.hpp"
#include "tus/quantizer.hpp"
#include "tus/repository.hpp"

namespace tus {

struct PartitionGroup {
  std::vector<CentroidId> centroids;   // sorted; global ids, or cascade ids if `cascade`
  bool cascade = false;
  std::vector<std::uint32_t> members;  // indices within the set, sorted

  std::size_t capacity() const { return members.size(); }
  friend bool operator==(const PartitionGroup&, const PartitionGroup&) = default;
};

enum class PartitionBranch : std::uint8_t { middle = 0, merged = 1, cascade = 2, single = 3 };

struct PartitionSet {
  SetId set_id = 0;
  PartitionBranch branch = PartitionBranch::middle;
  double dispersion = 0.0;             // of the global assignment, before partitioning
  std::vector<PartitionGroup> groups;
  VectorMatrix cascade_centroids;      // set-local; empty unless branch == cascade

  std::size_t size() const {
    std::size_t n = 0;
    for (const auto& g : groups) n += g.capacity();
    return n;
  }

  /// Vector of the i-th centroid referenced by `group`.
  std::span<const float> centroid(const Codebook& cb, const PartitionGroup& group,
                                  std::size_t i) const {
    return group.cascade ? cascade_centroids.row(group.centroids[i])
                         : cb.centroid(group.centroids[i]);
  }

  friend bool operator==(const PartitionSet&, const PartitionSet&) = default;
};

struct PartitionInvertedIndex {
  std::vector<PartitionSet> sets;
  friend bool operator==(const PartitionInvertedIndex&, const PartitionInvertedIndex&) = default;
};

enum class PartitionMode : std::uint8_t { adaptive = 0, single = 1 };

struct PartitionParams {
  double rho_low = 0.2;
  double rho_high = 0.8;
  PartitionMode mode = PartitionMode::adaptive;
  // Number of cascade centroids for a low-dispersion set of the given size.
  // Empty selects min(n, max(2, ceil(n * (rho_low + rho_high) / 2))).
  std::function<std::size_t(std::size_t)> cascade_k;
  std::uint64_t seed = 0;
  std::size_t kmeans_iters = 25;
};

inline void validate(const PartitionParams& p) {
  if (!(p.rho_low > 0.0 && p.rho_low < p.rho_high && p.rho_high <= 1.0)) {
    throw UsageError("invalid_thresholds", "dispersion thresholds need 0 < rho_l < rho_h <= 1");
  }
}

inline std::size_t default_cascade_k(std::size_t set_size, double rho_low, double rho_high) {
  const double target = (rho_low + rho_high) / 2.0;
  const auto k = static_cast<std::size_t>(std::ceil(target * static_cast<double>(set_size)));
  return std::min(set_size, std::max<std::size_t>(2, k));
}

/// rho = number of distinct owning centroids / set size.
inline double dispersion(std::span<const CentroidId> owners) {
  if (owners.empty()) return 0.0;
  std::vector<CentroidId> distinct(owners.begin(), owners.end());
  std::sort(distinct.begin(), distinct.end());
  const auto n = std::unique(distinct.begin(), distinct.end()) - distinct.begin();
  return static_cast<double>(n) / static_cast<double>(owners.size());
}

/// gsim(a, b): best inner product between a centroid of `a` and one of `b`.
inline double group_similarity(const PartitionGroup& a, const PartitionGroup& b,
                               const PartitionSet& owner, const Codebook& cb) {
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < a.centroids.size(); ++i) {
    for (std::size_t j = 0; j < b.centroids.size(); ++j) {
      best = std::max(best, similarity(owner.centroid(cb, a, i), owner.centroid(cb, b, j)));
    }
  }
  return best;
}

namespace detail {

inline std::vector<PartitionGroup> singleton_groups(std::span<const CentroidId> owners) {
  std::vector<PartitionGroup> groups;
  std::vector<std::uint32_t> order(owners.size());
  for (std::uint32_t j = 0; j < owners.size(); ++j) order[j] = j;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::uint32_t a, std::uint32_t b) { return owners[a] < owners[b]; });
  for (std::uint32_t j : order) {
    if (groups.empty() || groups.back().centroids.front() != owners[j]) {
      groups.push_back(PartitionGroup{{owners[j]}, false, {}});
    }
    groups.back().members.push_back(j);
  }
  return groups;
}

// Merges the gsim-maximal pair while |groups| / set_size >= rho_high. Ties go
// to the lowest (id, id) pair; the merged group keeps the lower id.
inline std::vector<PartitionGroup> merge_groups(std::vector<PartitionGroup> groups,
                                                std::size_t set_size, double rho_high,
                                                const Codebook& cb) {
  const std::size_t n = groups.size();
  std::vector<double> sim(n * n, 0.0);
  for (std::size_t p = 0; p < n; ++p) {
    for (std::size_t q = p + 1; q < n; ++q) {
      sim[p * n + q] = sim[q * n + p] =
          similarity(cb.centroid(groups[p].centroids.front()), cb.centroid(groups[q].centroids.front()));
    }
  }
  std::vector<char> alive(n, 1);
  std::size_t live = n;
  while (live > 1 &&
         static_cast<double>(live) / static_cast<double>(set_size) >= rho_high) {
    std::size_t bp = n, bq = n;
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t p = 0; p < n; ++p) {
      if (!alive[p]) continue;
      for (std::size_t q = p + 1; q < n; ++q) {
        if (alive[q] && sim[p * n + q] > best) {
          best = sim[p * n + q];
          bp = p;
          bq = q;
        }
      }
    }
    auto& target = groups[bp];
    auto& source = groups[bq];
    target.centroids.insert(target.centroids.end(), source.centroids.begin(), source.centroids.end());
    std::sort(target.centroids.begin(), target.centroids.end());
    target.members.insert(target.members.end(), source.members.begin(), source.members.end());
    std::sort(target.members.begin(), target.members.end());
    for (std::size_t r = 0; r < n; ++r) {
      sim[bp * n + r] = sim[r * n + bp] = std::max(sim[bp * n + r], sim[bq * n + r]);
    }
    alive[bq] = 0;
    --live;
  }
  std::vector<PartitionGroup> out;
  for (std::size_t p = 0; p < n; ++p) {
    if (alive[p]) out.push_back(std::move(groups[p]));
  }
  return out;
}

inline void cascade_split(const VectorSet& set, std::size_t k, std::uint64_t seed,
                          std::size_t iters, PartitionSet& out) {
  KMeansOptions opts;
  opts.max_iters = iters;
  opts.max_points_per_centroid = 0;
  auto km = train_kmeans(set.vectors, k, seed, opts);
  const auto& local = km.codebook.centroids;
  std::vector<std::vector<std::uint32_t>> members(local.rows());
  for (std::uint32_t j = 0; j < set.size(); ++j) {
    members[nearest_centroid(local, set.vectors.row(j))].push_back(j);
  }
  std::vector<float> kept;
  for (std::size_t c = 0; c < local.rows(); ++c) {
    if (members[c].empty()) continue;
    const auto row = local.row(c);
    const auto id = static_cast<CentroidId>(kept.size() / local.dim());
    kept.insert(kept.end(), row.begin(), row.end());
    out.groups.push_back(PartitionGroup{{id}, true, std::move(members[c])});
  }
  out.cascade_centroids = VectorMatrix(local.dim(), std::move(kept));
}

}  // namespace detail

/// Partitions one set.
inline PartitionSet partition_set(const VectorSet& set, std::span<const CentroidId> owners,
                                  const Codebook& cb, const PartitionParams& params) {
  PartitionSet out;
  out.set_id = set.id;
  out.dispersion = dispersion(owners);
  out.cascade_centroids = VectorMatrix(cb.dim(), {});
  if (params.mode == PartitionMode::single) {
    PartitionGroup all;
    for (auto& g : detail::singleton_groups(owners)) {
      all.centroids.push_back(g.centroids.front());
      all.members.insert(all.members.end(), g.members.begin(), g.members.end());
    }
    std::sort(all.members.begin(), all.members.end());
    out.branch = PartitionBranch::single;
    out.groups.push_back(std::move(all));
    return out;
  }
  const double rho = out.dispersion;
  if (rho <= params.rho_low) {
    const std::size_t k = params.cascade_k
                              ? params.cascade_k(set.size())
                              : default_cascade_k(set.size(), params.rho_low, params.rho_high);
    if (k < 1 || k > set.size()) {
      throw UsageError("invalid_cascade_k", "cascade k must lie in [1, |set|]");
    }
    out.branch = PartitionBranch::cascade;
    const std::uint64_t seed = params.seed ^ (0x9E3779B97F4A7C15ull * (set.id + 1ull));
    detail::cascade_split(set, k, seed, params.kmeans_iters, out);
    return out;
  }
  auto groups = detail::singleton_groups(owners);
  if (rho >= params.rho_high) {
    out.branch = PartitionBranch::merged;
    out.groups = detail::merge_groups(std::move(groups), set.size(), params.rho_high, cb);
  } else {
    out.branch = PartitionBranch::middle;
    out.groups = std::move(groups);
  }
  return out;
}

inline PartitionInvertedIndex build_partition_index(const Repository& repo, const Codebook& cb,
                                                    const ClusterAssignment& assignment,
                                                    const PartitionParams& params,
                                                    unsigned threads = 1) {
  validate(params);
  PartitionInvertedIndex index;
  index.sets.resize(repo.size());
  parallel_for(repo.size(), threads, [&](std::size_t s) {
    const auto& set = repo.set(static_cast<SetId>(s));
    index.sets[s] = partition_set(set, assignment.owner[s], cb, params);
  });
  return index;
}

/// True when the groups of `p` are disjoint, non-empty, and cover [0, set_size).
inline bool partitions_cover(const PartitionSet& p, std::size_t set_size) {
  std::vector<char> seen(set_size, 0);
  std::size_t count = 0;
  for (const auto& g : p.groups) {
    if (g.members.empty() || g.centroids.empty()) return false;
    for (auto m : g.members) {
      if (m >= set_size || seen[m]) return false;
      seen[m] = 1;
      ++count;
    }
  }
  return count == set_size;
}

}  // namespace tus
