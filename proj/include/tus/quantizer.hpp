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

// k-means codebook over every column vector of the repository, plus the two
// flat inverted indexes built from the nearest-centroid assignment:
//   I_v: centroid -> member vector handles
//   I_w: set -> (centroid, count) occupancy

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <vector>

#include "tus/common.hpp"
#include "tus/repository.hpp"

namespace tus {

struct Codebook {
  VectorMatrix centroids;  // not renormalized; norms are <= 1 for unit inputs
  std::uint64_t train_seed = 0;

  std::size_t size() const { return centroids.rows(); }
  std::size_t dim() const { return centroids.dim(); }
  std::span<const float> centroid(CentroidId c) const { return centroids.row(c); }

  friend bool operator==(const Codebook&, const Codebook&) = default;
};

struct KMeansOptions {
  std::size_t max_iters = 25;
  // Training subsample cap, in points per centroid.
  std::size_t max_points_per_centroid = 256;
  unsigned threads = 1;
};

struct KMeansResult {
  Codebook codebook;
  std::vector<double> inertia;  // after each assignment step
  std::size_t iterations = 0;
  std::size_t training_points = 0;
};

/// Nearest centroid by Euclidean distance; ties go to the lowest id.
inline CentroidId nearest_centroid(const VectorMatrix& centroids, std::span<const float> v,
                                   double* distance_sq = nullptr) {
  CentroidId best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centroids.rows(); ++c) {
    const double d = squared_l2(centroids.row(c), v);
    if (d < best_d) {
      best_d = d;
      best = static_cast<CentroidId>(c);
    }
  }
  if (distance_sq) *distance_sq = best_d;
  return best;
}

/// Lloyd's algorithm with k-means++ seeding. Deterministic in
/// (points, k, options.max_iters, seed); the thread count does not change
/// the result.
inline KMeansResult train_kmeans(const VectorMatrix& points, std::size_t k, std::uint64_t seed,
                                 const KMeansOptions& options = {}) {
  if (k < 1) throw UsageError("invalid_parameter", "k-means needs k >= 1");
  if (points.rows() == 0) throw UsageError("invalid_parameter", "k-means needs points");
  if (k > points.rows()) {
    throw UsageError("invalid_parameter", "k-means k=" + std::to_string(k) + " exceeds " +
                                              std::to_string(points.rows()) + " points");
  }
  const std::size_t dim = points.dim();
  std::mt19937_64 rng(seed);

  // Uniform subsample without replacement when the input is large.
  std::vector<std::size_t> sample(points.rows());
  std::iota(sample.begin(), sample.end(), std::size_t{0});
  const std::size_t cap = std::max<std::size_t>(k, k * options.max_points_per_centroid);
  if (options.max_points_per_centroid > 0 && sample.size() > cap) {
    for (std::size_t i = 0; i < cap; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, sample.size() - 1);
      std::swap(sample[i], sample[pick(rng)]);
    }
    sample.resize(cap);
    std::sort(sample.begin(), sample.end());
  }
  const std::size_t n = sample.size();
  auto point = [&](std::size_t i) { return points.row(sample[i]); };

  // k-means++ seeding.
  std::vector<float> cvals;
  cvals.reserve(k * dim);
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  {
    std::uniform_int_distribution<std::size_t> first(0, n - 1);
    std::size_t chosen = first(rng);
    for (std::size_t c = 0; c < k; ++c) {
      const auto p = point(chosen);
      cvals.insert(cvals.end(), p.begin(), p.end());
      if (c + 1 == k) break;
      double total = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        d2[i] = std::min(d2[i], squared_l2(p, point(i)));
        total += d2[i];
      }
      if (total > 0.0) {
        std::uniform_real_distribution<double> u(0.0, total);
        const double r = u(rng);
        double acc = 0.0;
        std::size_t last = 0;
        chosen = n;
        for (std::size_t i = 0; i < n; ++i) {
          if (d2[i] <= 0.0) continue;
          acc += d2[i];
          last = i;
          if (acc > r) {
            chosen = i;
            break;
          }
        }
        if (chosen == n) chosen = last;
      } else {
        // Every remaining point coincides with a chosen centroid.
        chosen = first(rng);
      }
    }
  }
  VectorMatrix centroids(dim, std::move(cvals));

  KMeansResult result;
  result.training_points = n;
  std::vector<CentroidId> assign(n, std::numeric_limits<CentroidId>::max());
  std::vector<double> dist(n, 0.0);
  for (std::size_t iter = 0; iter < std::max<std::size_t>(1, options.max_iters); ++iter) {
    std::vector<CentroidId> next(n);
    parallel_for(n, options.threads,
                 [&](std::size_t i) { next[i] = nearest_centroid(centroids, point(i), &dist[i]); });
    const bool changed = next != assign;
    assign = std::move(next);
    result.inertia.push_back(std::accumulate(dist.begin(), dist.end(), 0.0));
    result.iterations = iter + 1;
    if (!changed) break;

    std::vector<double> sums(k * dim, 0.0);
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto p = point(i);
      double* s = sums.data() + assign[i] * dim;
      for (std::size_t j = 0; j < dim; ++j) s[j] += p[j];
      ++counts[assign[i]];
    }
    for (std::size_t c = 0; c < k; ++c) {
      auto row = centroids.row(c);
      if (counts[c] > 0) {
        for (std::size_t j = 0; j < dim; ++j) {
          row[j] = static_cast<float>(sums[c * dim + j] / static_cast<double>(counts[c]));
        }
        continue;
      }
      // Empty cluster: re-seed with the point farthest from its centroid.
      std::size_t far = 0;
      for (std::size_t i = 1; i < n; ++i) {
        if (dist[i] > dist[far]) far = i;
      }
      const auto p = point(far);
      std::copy(p.begin(), p.end(), row.begin());
      dist[far] = 0.0;
    }
  }
  result.codebook = Codebook{std::move(centroids), seed};
  return result;
}

/// owner[set][index] = nearest global centroid of that column vector.
struct ClusterAssignment {
  std::vector<std::vector<CentroidId>> owner;

  CentroidId of(Handle h) const { return owner[h.set_id][h.index]; }
  std::size_t total() const {
    std::size_t t = 0;
    for (const auto& o : owner) t += o.size();
    return t;
  }
  friend bool operator==(const ClusterAssignment&, const ClusterAssignment&) = default;
};

inline ClusterAssignment assign_all(const Repository& repo, const Codebook& cb,
                                    unsigned threads = 1) {
  if (repo.dim() != cb.dim()) {
    throw DataError("dimension_mismatch", "codebook dimension " + std::to_string(cb.dim()) +
                                              " vs repository " + std::to_string(repo.dim()));
  }
  ClusterAssignment a;
  a.owner.resize(repo.size());
  parallel_for(repo.size(), threads, [&](std::size_t s) {
    const auto& set = repo.set(static_cast<SetId>(s));
    auto& o = a.owner[s];
    o.resize(set.size());
    for (std::size_t j = 0; j < set.size(); ++j) o[j] = nearest_centroid(cb.centroids, set.vectors.row(j));
  });
  return a;
}

/// I_v: per centroid, member handles sorted by (set_id, index).
struct VectorInvertedIndex {
  std::vector<std::vector<Handle>> lists;
  friend bool operator==(const VectorInvertedIndex&, const VectorInvertedIndex&) = default;
};

struct CentroidCount {
  CentroidId centroid = 0;
  std::uint32_t count = 0;
  friend bool operator==(const CentroidCount&, const CentroidCount&) = default;
};

/// I_w: per set, its non-zero centroid occupancy sorted by centroid id.
struct SetWeightIndex {
  std::vector<std::vector<CentroidCount>> weights;

  std::uint32_t weight(SetId set, CentroidId c) const {
    const auto& w = weights[set];
    auto it = std::lower_bound(w.begin(), w.end(), c,
                               [](const CentroidCount& e, CentroidId id) { return e.centroid < id; });
    return (it != w.end() && it->centroid == c) ? it->count : 0;
  }
  friend bool operator==(const SetWeightIndex&, const SetWeightIndex&) = default;
};

struct FlatIndexes {
  VectorInvertedIndex ivf;
  SetWeightIndex set_weights;
};

inline FlatIndexes build_indexes(const Repository& repo, const ClusterAssignment& a,
                                 std::size_t n_centroids) {
  FlatIndexes out;
  out.ivf.lists.resize(n_centroids);
  out.set_weights.weights.resize(repo.size());
  for (SetId s = 0; s < repo.size(); ++s) {
    if (a.owner.at(s).size() != repo.set(s).size()) {
      throw InvariantError("assignment_incomplete",
                           "assignment does not cover set " + std::to_string(s));
    }
    std::vector<std::uint32_t> counts;
    for (std::uint32_t j = 0; j < a.owner[s].size(); ++j) {
      const CentroidId c = a.owner[s][j];
      if (c >= n_centroids) {
        throw InvariantError("bad_centroid", "centroid id out of range in assignment");
      }
      out.ivf.lists[c].push_back(Handle{s, j});
    }
    auto owners = a.owner[s];
    std::sort(owners.begin(), owners.end());
    auto& w = out.set_weights.weights[s];
    for (std::size_t i = 0; i < owners.size();) {
      std::size_t j = i;
      while (j < owners.size() && owners[j] == owners[i]) ++j;
      w.push_back(CentroidCount{owners[i], static_cast<std::uint32_t>(j - i)});
      i = j;
    }
  }
  return out;
}

/// Distinct sets per centroid with multiplicities: I_v with its handles
/// collapsed by set. Equal to the transposed I_w.
struct SetPosting {
  SetId set_id = 0;
  std::uint32_t count = 0;
};

inline std::vector<std::vector<SetPosting>> build_set_postings(const VectorInvertedIndex& ivf) {
  std::vector<std::vector<SetPosting>> out(ivf.lists.size());
  for (std::size_t c = 0; c < ivf.lists.size(); ++c) {
    for (const Handle& h : ivf.lists[c]) {
      auto& list = out[c];
      if (!list.empty() && list.back().set_id == h.set_id) {
        ++list.back().count;
      } else {
        list.push_back(SetPosting{h.set_id, 1});
      }
    }
  }
  return out;
}

/// n_c default: ceil(sqrt(total vectors)).
inline std::size_t default_centroid_count(std::size_t total_vectors) {
  return std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(total_vectors)))));
}

/// Stacks all repository vectors in (set_id, index) order.
inline VectorMatrix stack_vectors(const Repository& repo) {
  std::vector<float> values;
  values.reserve(repo.total_vectors() * repo.dim());
  for (const auto& s : repo.sets()) {
    values.insert(values.end(), s.vectors.values().begin(), s.vectors.values().end());
  }
  return VectorMatrix(repo.dim(), std::move(values));
}

}  // namespace tus
