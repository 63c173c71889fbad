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

// Top-m selection over candidates that offer cheap (lb, ub) bounds and an
// expensive exact score. All strategies rank by score descending with ties
// to the lower set id, and return the same top-m whenever every bound pair
// sandwiches its score.

#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tus/common.hpp"
#include "tus/depq.hpp"

namespace tus {

struct ScoredSet {
  SetId set_id = 0;
  double score = 0.0;
};

/// Strict ranking: higher score, then lower id.
inline bool outranks(const ScoredSet& a, const ScoredSet& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.set_id < b.set_id;
}

enum class PrunerKind : std::uint8_t { brute_force = 0, base = 1, enhanced = 2 };

inline std::string to_string(PrunerKind k) {
  switch (k) {
    case PrunerKind::brute_force: return "bf";
    case PrunerKind::base: return "base";
    case PrunerKind::enhanced: return "enhanced";
  }
  return "?";
}

inline PrunerKind parse_pruner(const std::string& s) {
  if (s == "bf" || s == "brute_force") return PrunerKind::brute_force;
  if (s == "base") return PrunerKind::base;
  if (s == "enhanced") return PrunerKind::enhanced;
  throw UsageError("invalid_pruner", "unknown pruner '" + s + "' (bf|base|enhanced)");
}

struct PruneStats {
  std::size_t score_calls = 0;
  std::size_t bound_calls = 0;
  std::size_t discarded = 0;    // dropped without an exact score
  std::size_t heap_ops = 0;
};

struct PruneResult {
  std::vector<ScoredSet> top;  // best first
  PruneStats stats;
};

namespace detail {

// Bounded min-heap of the best m resolved scores; front() is the weakest.
class TopM {
 public:
  explicit TopM(std::size_t m) : m_(m) {}

  bool full() const { return heap_.size() >= m_; }
  std::size_t size() const { return heap_.size(); }
  const ScoredSet& weakest() const { return heap_.front(); }

  // Adds `s` if there is room or it outranks the weakest entry.
  void offer(const ScoredSet& s, PruneStats& stats) {
    ++stats.heap_ops;
    if (!full()) {
      heap_.push_back(s);
      std::push_heap(heap_.begin(), heap_.end(), outranks);
    } else if (outranks(s, heap_.front())) {
      std::pop_heap(heap_.begin(), heap_.end(), outranks);
      heap_.back() = s;
      std::push_heap(heap_.begin(), heap_.end(), outranks);
    }
  }

  // True when a candidate with this upper bound cannot enter the top-m.
  bool excludes(double ub) const { return full() && ub < heap_.front().score; }

  std::vector<ScoredSet> sorted() const {
    auto out = heap_;
    std::sort(out.begin(), out.end(), outranks);
    return out;
  }

 private:
  std::size_t m_;
  std::vector<ScoredSet> heap_;
};

inline void check_m(std::size_t m) {
  if (m < 1) throw UsageError("invalid_parameter", "result size must be >= 1");
}

}  // namespace detail

/// Scores every candidate.
template <typename ScoreFn>
PruneResult exhaustive_top(std::span<const SetId> candidates, std::size_t m, ScoreFn&& score_fn) {
  detail::check_m(m);
  PruneResult r;
  detail::TopM top(m);
  for (SetId id : candidates) {
    ++r.stats.score_calls;
    top.offer(ScoredSet{id, score_fn(id)}, r.stats);
  }
  r.top = top.sorted();
  return r;
}

/// Bound-based pruning in arrival order. The first m candidates are scored
/// outright; afterwards a candidate is scored when its lower bound beats the
/// weakest kept score or its upper bound reaches it, and skipped otherwise.
/// A scored candidate replaces the weakest entry only if it outranks it,
/// which with valid bounds always holds on the lower-bound path.
template <typename BoundFn, typename ScoreFn>
PruneResult base_prune(std::span<const SetId> candidates, std::size_t m, BoundFn&& bound_fn,
                       ScoreFn&& score_fn) {
  detail::check_m(m);
  PruneResult r;
  detail::TopM top(m);
  for (SetId id : candidates) {
    if (!top.full()) {
      ++r.stats.score_calls;
      top.offer(ScoredSet{id, score_fn(id)}, r.stats);
      continue;
    }
    ++r.stats.bound_calls;
    const BoundPair b = bound_fn(id);
    const double floor = top.weakest().score;
    if (b.lb > floor || b.ub >= floor) {
      ++r.stats.score_calls;
      top.offer(ScoredSet{id, score_fn(id)}, r.stats);
    } else {
      ++r.stats.discarded;
    }
  }
  r.top = top.sorted();
  return r;
}

/// Reports every candidate discarded from the enhanced pruner's arrival
/// loop, with the number of other known candidates whose lower bound (or
/// exact score) is at least its upper bound at that moment.
struct DiscardWitness {
  SetId set_id = 0;
  double ub = 0.0;
  std::size_t dominating = 0;
};

/// Pool-based pruning.
///
/// A pool of at most m unresolved candidates is kept in a DEPQ. For each
/// arrival, with the pool full:
///   (a) discard it when its upper bound falls below the pool's minimum upper
///       bound and m known candidates provably beat it;
///   (b) if its lower bound beats the pool's minimum lower bound, evict the
///       pool member with the weakest upper bound and admit the newcomer;
///       evicted members are parked and resolved at the end unless dominated;
///   (c) otherwise resolve pool members in descending upper bound until the
///       newcomer is separable, then admit it unless it is dominated.
/// Pool remainders and parked members are finally resolved in descending
/// upper bound, stopping once the next upper bound cannot enter the top-m.
template <typename BoundFn, typename ScoreFn>
PruneResult enhanced_prune(std::span<const SetId> candidates, std::size_t m, BoundFn&& bound_fn,
                           ScoreFn&& score_fn,
                           std::vector<DiscardWitness>* witnesses = nullptr) {
  detail::check_m(m);
  PruneResult r;
  detail::TopM top(m);
  BoundDepq pool;
  std::vector<BoundedCandidate> parked;

  auto resolve = [&](const BoundedCandidate& c) {
    if (top.excludes(c.bounds.ub)) {
      ++r.stats.discarded;
      return;
    }
    ++r.stats.score_calls;
    top.offer(ScoredSet{c.set_id, score_fn(c.set_id)}, r.stats);
  };
  // m candidates with lower bounds strictly above `ub` are known.
  auto dominated = [&](double ub) {
    if (top.excludes(ub)) return true;
    if (pool.size() >= m) {
      const auto low = pool.min_lb();
      return low && ub < low->bounds.lb;
    }
    return false;
  };
  auto witness = [&](SetId id, double ub) {
    if (!witnesses) return;
    DiscardWitness w{id, ub, 0};
    pool.for_each([&](const BoundedCandidate& c) {
      if (c.bounds.lb >= ub) ++w.dominating;
    });
    for (const auto& s : top.sorted()) {
      if (s.score >= ub) ++w.dominating;
    }
    witnesses->push_back(w);
  };
  auto discard = [&](SetId id, double ub) {
    witness(id, ub);
    ++r.stats.discarded;
  };

  for (SetId id : candidates) {
    ++r.stats.bound_calls;
    const BoundedCandidate c{id, bound_fn(id), std::nullopt};
    if (pool.size() < m) {
      pool.insert(c);
      continue;
    }
    auto mlb = *pool.min_lb();
    auto mub = *pool.min_ub();
    if (c.bounds.ub < mub.bounds.ub && dominated(c.bounds.ub)) {
      discard(id, c.bounds.ub);  // (a)
    } else if (c.bounds.lb > mlb.bounds.lb) {
      pool.remove(mub.set_id);  // (b)
      if (dominated(mub.bounds.ub)) {
        discard(mub.set_id, mub.bounds.ub);
      } else {
        parked.push_back(mub);
      }
      pool.insert(c);
    } else if (dominated(c.bounds.ub)) {
      discard(id, c.bounds.ub);
    } else {
      bool separated = false;  // (c)
      while (!pool.empty() && c.bounds.ub >= mlb.bounds.lb && c.bounds.lb <= mub.bounds.ub) {
        resolve(*pool.extract_max_ub());
        if (top.full() && c.bounds.ub <= top.weakest().score) {
          separated = true;
          break;
        }
        if (pool.empty()) break;
        mlb = *pool.min_lb();
        mub = *pool.min_ub();
      }
      if (separated && top.excludes(c.bounds.ub)) {
        discard(id, c.bounds.ub);
      } else {
        pool.insert(c);
      }
    }
  }

  std::vector<BoundedCandidate> rest = std::move(parked);
  pool.for_each([&](const BoundedCandidate& c) { rest.push_back(c); });
  std::sort(rest.begin(), rest.end(), [](const BoundedCandidate& a, const BoundedCandidate& b) {
    if (a.bounds.ub != b.bounds.ub) return a.bounds.ub > b.bounds.ub;
    return a.set_id < b.set_id;
  });
  for (std::size_t i = 0; i < rest.size(); ++i) {
    if (top.excludes(rest[i].bounds.ub)) {
      r.stats.discarded += rest.size() - i;
      break;
    }
    resolve(rest[i]);
  }
  r.stats.heap_ops += pool.counters().operations;
  r.top = top.sorted();
  return r;
}

/// Dispatches to the selected strategy.
template <typename BoundFn, typename ScoreFn>
PruneResult prune(PrunerKind kind, std::span<const SetId> candidates, std::size_t m,
                  BoundFn&& bound_fn, ScoreFn&& score_fn) {
  switch (kind) {
    case PrunerKind::brute_force: return exhaustive_top(candidates, m, score_fn);
    case PrunerKind::base: return base_prune(candidates, m, bound_fn, score_fn);
    case PrunerKind::enhanced: return enhanced_prune(candidates, m, bound_fn, score_fn);
  }
  throw InvariantError("bad_pruner", "unknown pruner kind");
}

}  // namespace tus
