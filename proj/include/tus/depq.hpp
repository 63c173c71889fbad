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

// Double-ended priority queue over bound-equipped candidates.
//
// The max-ub view is an indexed binary heap with a position map, so any
// element can be removed from it in O(log n). The min-lb and min-ub views are
// plain binary heaps with lazy deletion: removing an element only tombstones
// its entries there, and a tombstone is purged once it surfaces at a root.
// Each insertion carries a sequence number, so an id can be re-inserted while
// older tombstones of it are still buried.

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <unordered_map>
#include <utility>
#include <vector>

#include "tus/common.hpp"

namespace tus {

struct BoundedCandidate {
  SetId set_id = 0;
  BoundPair bounds;
  std::optional<double> resolved_score;
};

class BoundDepq {
 public:
  struct Counters {
    std::size_t operations = 0;  // public calls that may touch a heap
    std::size_t sift_steps = 0;  // comparisons made while sifting
    std::size_t purged = 0;      // tombstones dropped at a root
    std::size_t compactions = 0;
  };

  std::size_t size() const { return live_.size(); }
  bool empty() const { return live_.empty(); }
  bool contains(SetId id) const { return live_.count(id) != 0; }
  const Counters& counters() const { return counters_; }

  /// Entries physically stored in the lazy views, tombstones included.
  std::size_t stored_entries() const { return min_lb_.size() + min_ub_.size(); }

  void insert(const BoundedCandidate& c) {
    ++counters_.operations;
    if (live_.count(c.set_id)) {
      throw UsageError("duplicate_id", "set " + std::to_string(c.set_id) + " already queued");
    }
    const std::uint64_t seq = next_seq_++;
    live_.emplace(c.set_id, Live{c, seq, max_ub_.size()});
    lazy_push(min_lb_, Entry{c.bounds.lb, c.set_id, seq}, lb_less);
    lazy_push(min_ub_, Entry{c.bounds.ub, c.set_id, seq}, ub_less);
    max_ub_.push_back(c.set_id);
    sift_up_indexed(max_ub_.size() - 1);
  }

  std::optional<BoundedCandidate> min_lb() {
    ++counters_.operations;
    purge(min_lb_, lb_less);
    if (min_lb_.empty()) return std::nullopt;
    return live_.at(min_lb_.front().id).candidate;
  }

  std::optional<BoundedCandidate> min_ub() {
    ++counters_.operations;
    purge(min_ub_, ub_less);
    if (min_ub_.empty()) return std::nullopt;
    return live_.at(min_ub_.front().id).candidate;
  }

  std::optional<BoundedCandidate> max_ub() const {
    if (max_ub_.empty()) return std::nullopt;
    return live_.at(max_ub_.front()).candidate;
  }

  /// Removes and returns the element with the largest upper bound.
  std::optional<BoundedCandidate> extract_max_ub() {
    ++counters_.operations;
    if (max_ub_.empty()) return std::nullopt;
    const SetId id = max_ub_.front();
    BoundedCandidate c = live_.at(id).candidate;
    erase_indexed(0);
    live_.erase(id);
    maybe_compact();
    return c;
  }

  void remove(SetId id) {
    ++counters_.operations;
    auto it = live_.find(id);
    if (it == live_.end()) {
      throw UsageError("unknown_id", "set " + std::to_string(id) + " is not queued");
    }
    erase_indexed(it->second.max_pos);
    live_.erase(id);
    maybe_compact();
  }

  template <typename F>
  void for_each(F&& f) const {
    for (SetId id : max_ub_) f(live_.at(id).candidate);
  }

 private:
  struct Entry {
    double key;
    SetId id;
    std::uint64_t seq;
  };
  struct Live {
    BoundedCandidate candidate;
    std::uint64_t seq;
    std::size_t max_pos;
  };
  using Less = bool (*)(const Entry&, const Entry&);

  static bool lb_less(const Entry& a, const Entry& b) {
    if (a.key != b.key) return a.key < b.key;
    return a.id < b.id;
  }
  static bool ub_less(const Entry& a, const Entry& b) { return lb_less(a, b); }

  bool is_dead(const Entry& e) const {
    auto it = live_.find(e.id);
    return it == live_.end() || it->second.seq != e.seq;
  }

  // Binary min-heap helpers for the lazy views.
  void lazy_push(std::vector<Entry>& h, Entry e, Less less) {
    h.push_back(e);
    std::size_t i = h.size() - 1;
    while (i > 0) {
      const std::size_t parent = (i - 1) / 2;
      ++counters_.sift_steps;
      if (!less(h[i], h[parent])) break;
      std::swap(h[i], h[parent]);
      i = parent;
    }
  }

  void lazy_pop(std::vector<Entry>& h, Less less) {
    h.front() = h.back();
    h.pop_back();
    std::size_t i = 0;
    for (;;) {
      const std::size_t l = 2 * i + 1, r = l + 1;
      std::size_t best = i;
      if (l < h.size()) {
        ++counters_.sift_steps;
        if (less(h[l], h[best])) best = l;
      }
      if (r < h.size()) {
        ++counters_.sift_steps;
        if (less(h[r], h[best])) best = r;
      }
      if (best == i) break;
      std::swap(h[i], h[best]);
      i = best;
    }
  }

  void purge(std::vector<Entry>& h, Less less) {
    while (!h.empty() && is_dead(h.front())) {
      lazy_pop(h, less);
      ++counters_.purged;
    }
  }

  // Rebuilds the lazy views once tombstones outnumber live entries.
  void maybe_compact() {
    const std::size_t live = live_.size();
    if (min_lb_.size() <= 2 * live + 16) return;
    ++counters_.compactions;
    auto rebuild = [&](std::vector<Entry>& h, Less less) {
      std::vector<Entry> kept;
      kept.reserve(live);
      for (const auto& e : h) {
        if (!is_dead(e)) kept.push_back(e);
      }
      h.clear();
      for (const auto& e : kept) lazy_push(h, e, less);
    };
    rebuild(min_lb_, lb_less);
    rebuild(min_ub_, ub_less);
  }

  // Indexed max-heap on (ub desc, id asc).
  bool max_before(SetId a, SetId b) const {
    const double ua = live_.at(a).candidate.bounds.ub;
    const double ub = live_.at(b).candidate.bounds.ub;
    if (ua != ub) return ua > ub;
    return a < b;
  }

  void place(std::size_t i) { live_.at(max_ub_[i]).max_pos = i; }

  void sift_up_indexed(std::size_t i) {
    while (i > 0) {
      const std::size_t parent = (i - 1) / 2;
      ++counters_.sift_steps;
      if (!max_before(max_ub_[i], max_ub_[parent])) break;
      std::swap(max_ub_[i], max_ub_[parent]);
      place(i);
      i = parent;
    }
    place(i);
  }

  void sift_down_indexed(std::size_t i) {
    for (;;) {
      const std::size_t l = 2 * i + 1, r = l + 1;
      std::size_t best = i;
      if (l < max_ub_.size()) {
        ++counters_.sift_steps;
        if (max_before(max_ub_[l], max_ub_[best])) best = l;
      }
      if (r < max_ub_.size()) {
        ++counters_.sift_steps;
        if (max_before(max_ub_[r], max_ub_[best])) best = r;
      }
      if (best == i) break;
      std::swap(max_ub_[i], max_ub_[best]);
      place(i);
      i = best;
    }
    place(i);
  }

  void erase_indexed(std::size_t pos) {
    const std::size_t last = max_ub_.size() - 1;
    if (pos != last) {
      std::swap(max_ub_[pos], max_ub_[last]);
      max_ub_.pop_back();
      place(pos);
      sift_down_indexed(pos);
      sift_up_indexed(pos);
    } else {
      max_ub_.pop_back();
    }
  }

  std::unordered_map<SetId, Live> live_;
  std::vector<Entry> min_lb_;
  std::vector<Entry> min_ub_;
  std::vector<SetId> max_ub_;
  std::uint64_t next_seq_ = 0;
  Counters counters_;
};

}  // namespace tus
