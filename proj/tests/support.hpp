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

// Random instance generators and independent reference oracles shared by the
// unit tests and the acceptance runner. Nothing here calls the code under
// test except to build inputs.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "tus/exact_matching.hpp"
#include "tus/mwmto.hpp"
#include "tus/repository.hpp"

namespace tus::testing {

inline VectorMatrix random_unit_matrix(std::size_t rows, std::size_t dim, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<float> v;
  v.reserve(rows * dim);
  for (std::size_t r = 0; r < rows; ++r) {
    double norm = 0.0;
    std::vector<double> tmp(dim);
    for (auto& x : tmp) {
      x = g(rng);
      norm += x * x;
    }
    norm = std::sqrt(norm);
    for (auto x : tmp) v.push_back(static_cast<float>(x / norm));
  }
  return VectorMatrix(dim, std::move(v));
}

/// Graph with each pair present with probability `density`, weights U[tau, 1].
inline ThresholdGraph random_graph(std::size_t nl, std::size_t nr, double tau, double density,
                                   std::mt19937_64& rng) {
  std::uniform_real_distribution<double> w(tau, 1.0), coin(0.0, 1.0);
  ThresholdGraph g{nl, nr, {}};
  for (std::uint32_t i = 0; i < nl; ++i) {
    for (std::uint32_t j = 0; j < nr; ++j) {
      if (coin(rng) < density) g.edges.push_back({i, j, w(rng)});
    }
  }
  return g;
}

struct CardWeight {
  std::size_t cardinality = 0;
  double weight = 0.0;
};

/// Lexicographic (cardinality, weight) optimum by bitmask DP over the right
/// side. Needs right_size <= 20.
inline CardWeight dp_matching(const ThresholdGraph& g) {
  const std::size_t nr = g.right_size;
  std::vector<std::vector<double>> w(g.left_size, std::vector<double>(nr, -1.0));
  for (const auto& e : g.edges) w[e.left][e.right] = std::max(w[e.left][e.right], e.weight);
  const std::size_t states = std::size_t{1} << nr;
  std::vector<CardWeight> cur(states), next(states);
  std::vector<char> reach(states, 0), reach_next(states, 0);
  reach[0] = 1;
  auto better = [](const CardWeight& a, const CardWeight& b) {
    return a.cardinality != b.cardinality ? a.cardinality > b.cardinality : a.weight > b.weight;
  };
  for (std::size_t l = 0; l < g.left_size; ++l) {
    std::fill(reach_next.begin(), reach_next.end(), 0);
    for (std::size_t mask = 0; mask < states; ++mask) {
      if (!reach[mask]) continue;
      auto relax = [&](std::size_t m, CardWeight v) {
        if (!reach_next[m] || better(v, next[m])) {
          next[m] = v;
          reach_next[m] = 1;
        }
      };
      relax(mask, cur[mask]);
      for (std::size_t r = 0; r < nr; ++r) {
        if ((mask >> r) & 1 || w[l][r] < 0.0) continue;
        relax(mask | (std::size_t{1} << r),
              CardWeight{cur[mask].cardinality + 1, cur[mask].weight + w[l][r]});
      }
    }
    std::swap(cur, next);
    std::swap(reach, reach_next);
  }
  CardWeight best;
  for (std::size_t mask = 0; mask < states; ++mask) {
    if (reach[mask] && better(cur[mask], best)) best = cur[mask];
  }
  return best;
}

/// Random capacitated instance: rows of thresholded (group, sim) entries.
inline PartitionSimTable random_sim_table(std::size_t nq, std::size_t ngroups,
                                          std::size_t max_cap, double tau, double density,
                                          std::mt19937_64& rng) {
  std::uniform_real_distribution<double> w(tau, 1.0), coin(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> cap(1, max_cap);
  PartitionSimTable t;
  t.rows.resize(nq);
  for (std::size_t k = 0; k < ngroups; ++k) t.capacities.push_back(cap(rng));
  for (auto& row : t.rows) {
    for (std::uint32_t k = 0; k < ngroups; ++k) {
      if (coin(rng) < density) row.push_back(GroupSim{k, w(rng)});
    }
  }
  return t;
}

/// Enumerates every capacity-respecting many-to-one assignment.
inline CardWeight exhaustive_mwmto(const PartitionSimTable& t) {
  std::vector<std::size_t> left = t.capacities;
  CardWeight best;
  auto rec = [&](auto&& self, std::size_t q, std::size_t card, double weight) -> void {
    if (q == t.rows.size()) {
      if (card > best.cardinality || (card == best.cardinality && weight > best.weight)) {
        best = {card, weight};
      }
      return;
    }
    self(self, q + 1, card, weight);
    for (const auto& gs : t.rows[q]) {
      if (left[gs.group] == 0) continue;
      --left[gs.group];
      self(self, q + 1, card + 1, weight + gs.sim);
      ++left[gs.group];
    }
  };
  rec(rec, 0, 0, 0.0);
  return best;
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("tus_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace tus::testing
