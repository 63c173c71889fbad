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

#pragma once

#include <algorithm>
#include <cstdint>
#include <queue>
#include <unordered_map>
#include <vector>

#include "tus/centroid_ann.hpp"
#include "tus/common.hpp"
#include "tus/quantizer.hpp"

namespace tus {

struct RefinementParams {
  std::size_t phi_c = 32;
  std::size_t phi_ref = 50;
  std::size_t ef_search = 0;  // 0 selects default_ef_search(phi_c)
  AnnMode ann_mode = AnnMode::automatic;
  // A query vector whose event is blocked by the capacity guard still counts
  // as having visited the set.
  bool mark_visited_on_block = true;
};

struct RefinedCandidate {
  SetId set_id = 0;
  double score = 0.0;
};

/// One (set, drained pair) decision, recorded when tracing.
struct RefinementEvent {
  CentroidId centroid = 0;
  std::uint32_t query = 0;
  double sim = 0.0;
  SetId set_id = 0;
  bool accepted = false;
  bool blocked = false;       // capacity exhausted
  bool was_visited = false;   // query vector had already spent its chance
};

struct RefinementTrace {
  std::vector<double> drain_order;  // pair similarity of every drained heap entry
  std::vector<RefinementEvent> events;
};

struct RefinementOutput {
  std::vector<RefinedCandidate> ranked;  // top-phi_ref, score desc, ties to lower id
  std::size_t touched_sets = 0;
  std::size_t heap_pairs = 0;
};

/// Candidate generation over the centroid space.
///
/// Every query vector contributes its top-phi_c centroids as (centroid,
/// query) pairs to one max-heap keyed by their inner product. Pairs drain in
/// descending order; each drained pair visits every set that owns vectors in
/// that centroid. An unvisited (set, query vector) adds the pair similarity
/// to the set's score while the set's per-centroid usage stays below its
/// occupancy in I_w.
inline RefinementOutput refine(const VectorMatrix& query, const Codebook& cb,
                               const CentroidGraphIndex* graph,
                               const std::vector<std::vector<SetPosting>>& postings,
                               const RefinementParams& params, RefinementTrace* trace = nullptr) {
  if (params.phi_c < 1 || params.phi_ref < 1) {
    throw UsageError("invalid_parameter", "phi_c and phi_ref must be >= 1");
  }
  struct Pair {
    double sim;
    CentroidId centroid;
    std::uint32_t query;
  };
  auto lower_priority = [](const Pair& a, const Pair& b) {
    if (a.sim != b.sim) return a.sim < b.sim;
    if (a.centroid != b.centroid) return a.centroid > b.centroid;
    return a.query > b.query;
  };
  std::priority_queue<Pair, std::vector<Pair>, decltype(lower_priority)> heap(lower_priority);
  const std::size_t ef =
      params.ef_search == 0 ? default_ef_search(params.phi_c) : params.ef_search;
  for (std::uint32_t q = 0; q < query.rows(); ++q) {
    for (const auto& c : top_centroids(cb, graph, query.row(q), params.phi_c, ef, params.ann_mode)) {
      heap.push(Pair{c.sim, c.id, q});
    }
  }
  RefinementOutput out;
  out.heap_pairs = heap.size();

  struct SetState {
    std::vector<char> visited;
    double score = 0.0;
  };
  std::unordered_map<SetId, SetState> state;
  std::unordered_map<std::uint64_t, std::uint32_t> used;
  std::vector<SetId> touch_order;

  while (!heap.empty()) {
    const Pair top = heap.top();
    heap.pop();
    if (trace) trace->drain_order.push_back(top.sim);
    for (const SetPosting& post : postings[top.centroid]) {
      auto [it, fresh] = state.try_emplace(post.set_id);
      SetState& st = it->second;
      if (fresh) {
        st.visited.assign(query.rows(), 0);
        touch_order.push_back(post.set_id);
      }
      RefinementEvent ev{top.centroid, top.query, top.sim, post.set_id, false, false, false};
      if (st.visited[top.query]) {
        ev.was_visited = true;
      } else {
        auto& u = used[(static_cast<std::uint64_t>(post.set_id) << 32) | top.centroid];
        if (u < post.count) {
          ++u;
          st.score += top.sim;
          ev.accepted = true;
        } else {
          ev.blocked = true;
        }
        if (ev.accepted || params.mark_visited_on_block) st.visited[top.query] = 1;
      }
      if (trace) trace->events.push_back(ev);
    }
  }

  out.touched_sets = touch_order.size();
  out.ranked.reserve(touch_order.size());
  for (SetId s : touch_order) out.ranked.push_back({s, state[s].score});
  auto better = [](const RefinedCandidate& a, const RefinedCandidate& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.set_id < b.set_id;
  };
  const std::size_t keep = std::min(params.phi_ref, out.ranked.size());
  std::partial_sort(out.ranked.begin(), out.ranked.begin() + static_cast<std::ptrdiff_t>(keep),
                    out.ranked.end(), better);
  out.ranked.resize(keep);
  return out;
}

}  // namespace tus
