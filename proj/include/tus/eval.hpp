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

// Ground truth, recall and the parameter-sweep benchmark harness.

#pragma once

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "tus/binary_io.hpp"
#include "tus/common.hpp"
#include "tus/exact_matching.hpp"
#include "tus/pipeline.hpp"
#include "tus/pruning.hpp"
#include "tus/repository.hpp"

namespace tus {

struct TruthEntry {
  SetId set_id = 0;
  double score = 0.0;
  std::size_t cardinality = 0;
};

/// Per query, every set ranked by exact unionability (score desc, id asc).
using GroundTruth = std::vector<std::vector<TruthEntry>>;

/// Exact unionability against every set. Returns the top-k (all sets when
/// k >= n).
inline std::vector<TruthEntry> oracle_topk(const QueryTable& query, const Repository& repo,
                                           double tau, std::size_t k, unsigned threads = 1) {
  check_threshold(tau);
  if (query.dim() != repo.dim()) {
    throw DataError("dimension_mismatch", "query dimension " + std::to_string(query.dim()) +
                                              " vs repository " + std::to_string(repo.dim()));
  }
  std::vector<TruthEntry> all(repo.size());
  parallel_for(repo.size(), threads, [&](std::size_t s) {
    const auto m = unionability(query.vectors, repo.set(static_cast<SetId>(s)).vectors, tau);
    all[s] = TruthEntry{static_cast<SetId>(s), m.weight, m.cardinality};
  });
  std::sort(all.begin(), all.end(), [](const TruthEntry& a, const TruthEntry& b) {
    return outranks(ScoredSet{a.set_id, a.score}, ScoredSet{b.set_id, b.score});
  });
  all.resize(std::min(k, all.size()));
  return all;
}

inline GroundTruth compute_ground_truth(const std::vector<QueryTable>& queries,
                                        const Repository& repo, double tau, unsigned threads = 1) {
  GroundTruth gt;
  gt.reserve(queries.size());
  for (const auto& q : queries) gt.push_back(oracle_topk(q, repo, tau, repo.size(), threads));
  return gt;
}

/// |retrieved ∩ truth| / |truth|.
inline double recall(std::span<const SetId> retrieved, std::span<const SetId> truth) {
  if (truth.empty()) throw UsageError("empty_truth", "recall needs a non-empty truth set");
  const std::unordered_set<SetId> want(truth.begin(), truth.end());
  std::unordered_set<SetId> seen;
  for (SetId id : retrieved) {
    if (want.count(id)) seen.insert(id);
  }
  return static_cast<double>(seen.size()) / static_cast<double>(want.size());
}

inline std::vector<SetId> truth_ids(const std::vector<TruthEntry>& truth, std::size_t k) {
  std::vector<SetId> ids;
  for (std::size_t i = 0; i < std::min(k, truth.size()); ++i) ids.push_back(truth[i].set_id);
  return ids;
}

// ---------------------------------------------------------------------------
// Ground truth persistence

inline std::uint32_t repository_hash(const Repository& repo) {
  io::Writer w;
  w.put<std::uint64_t>(repo.dim());
  w.put<std::uint64_t>(repo.size());
  for (const auto& s : repo.sets()) {
    w.put<std::uint64_t>(s.size());
    w.put_span<float>(s.vectors.values());
  }
  return io::crc32(w.bytes());
}

inline std::uint32_t queries_hash(const std::vector<QueryTable>& queries) {
  io::Writer w;
  w.put<std::uint64_t>(queries.size());
  for (const auto& q : queries) {
    w.put<std::uint64_t>(q.size());
    w.put_span<float>(q.vectors.values());
  }
  return io::crc32(w.bytes());
}

/// File name for ground truth keyed by repository contents and tau.
inline std::string truth_file_name(std::uint32_t repo_hash, double tau) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "truth-%08x-tau%.6g.tsv", repo_hash, tau);
  return buf;
}

inline void save_ground_truth(const GroundTruth& gt, const std::filesystem::path& path,
                              std::uint32_t repo_hash, std::uint32_t query_hash, double tau) {
  std::ofstream out(path);
  if (!out) throw DataError("io_error", "cannot write " + path.string());
  char head[128];
  std::snprintf(head, sizeof(head), "TUSTRUTH v1\trepo=%08x\tqueries=%08x\ttau=%.17g\tn=%zu",
                repo_hash, query_hash, tau, gt.size());
  out << head << "\n";
  out.precision(17);
  for (std::size_t q = 0; q < gt.size(); ++q) {
    for (const auto& e : gt[q]) {
      out << q << '\t' << e.set_id << '\t' << e.score << '\t' << e.cardinality << '\n';
    }
  }
}

/// Returns nullopt when the file is absent or was computed for other inputs.
inline std::optional<GroundTruth> load_ground_truth(const std::filesystem::path& path,
                                                    std::uint32_t repo_hash,
                                                    std::uint32_t query_hash, double tau) {
  std::ifstream in(path);
  if (!in) return std::nullopt;
  std::string line;
  std::getline(in, line);
  char expect[128];
  GroundTruth gt;
  {
    unsigned r = 0, qh = 0;
    double t = 0.0;
    std::size_t n = 0;
    if (std::sscanf(line.c_str(), "TUSTRUTH v1\trepo=%x\tqueries=%x\ttau=%lf\tn=%zu", &r, &qh, &t,
                    &n) != 4) {
      throw DataError("malformed_truth", "bad ground truth header in " + path.string());
    }
    std::snprintf(expect, sizeof(expect), "%.17g", tau);
    if (r != repo_hash || qh != query_hash || std::stod(expect) != t) return std::nullopt;
    gt.resize(n);
  }
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::size_t q = 0;
    TruthEntry e;
    if (!(ls >> q >> e.set_id >> e.score >> e.cardinality) || q >= gt.size()) {
      throw DataError("malformed_truth", "bad ground truth line in " + path.string());
    }
    gt[q].push_back(e);
  }
  return gt;
}

// ---------------------------------------------------------------------------
// Benchmark harness

struct BenchConfig {
  std::size_t k = 10;
  double tau = 0.7;
  std::vector<std::size_t> phi_c = {1, 2, 4, 8, 16, 32, 64};
  std::vector<std::size_t> phi_ref_multiples = {1, 2, 3, 5, 10};
  std::size_t phi_r = 0;  // 0 selects min(3k, phi_ref)
  std::vector<PrunerKind> pruners = {PrunerKind::brute_force, PrunerKind::base,
                                     PrunerKind::enhanced};
  AnnMode ann_mode = AnnMode::automatic;
  std::size_t warmup = 1;
  std::size_t repetitions = 3;

  void validate() const {
    if (k < 1) throw UsageError("invalid_config", "k must be >= 1");
    if (phi_c.empty() || phi_ref_multiples.empty() || pruners.empty()) {
      throw UsageError("invalid_config", "parameter grids must be non-empty");
    }
    for (auto c : phi_c) {
      if (c < 1) throw UsageError("invalid_config", "phi_c values must be >= 1");
    }
    for (auto m : phi_ref_multiples) {
      if (m < 1) throw UsageError("invalid_config", "phi_ref multiples must be >= 1");
    }
    if (repetitions < 3) throw UsageError("invalid_config", "need at least 3 repetitions");
    check_threshold(tau);
  }
};

inline std::string to_string(AnnMode m) {
  switch (m) {
    case AnnMode::automatic: return "auto";
    case AnnMode::exact: return "exact";
    case AnnMode::graph: return "graph";
  }
  return "?";
}

inline AnnMode parse_ann_mode(const std::string& s) {
  if (s == "auto") return AnnMode::automatic;
  if (s == "exact") return AnnMode::exact;
  if (s == "graph") return AnnMode::graph;
  throw UsageError("invalid_parameter", "unknown ann mode '" + s + "' (auto|exact|graph)");
}

inline nlohmann::json to_json(const BenchConfig& c) {
  nlohmann::json pruners = nlohmann::json::array();
  for (auto p : c.pruners) pruners.push_back(to_string(p));
  return {{"k", c.k},
          {"tau", c.tau},
          {"phi_c", c.phi_c},
          {"phi_ref_multiples", c.phi_ref_multiples},
          {"phi_r", c.phi_r},
          {"pruners", pruners},
          {"ann", to_string(c.ann_mode)},
          {"warmup", c.warmup},
          {"repetitions", c.repetitions}};
}

/// Missing keys keep their defaults; unknown keys are rejected.
inline BenchConfig bench_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw UsageError("invalid_config", "bench config must be a JSON object");
  BenchConfig c;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "k") c.k = value.get<std::size_t>();
      else if (key == "tau") c.tau = value.get<double>();
      else if (key == "phi_c") c.phi_c = value.get<std::vector<std::size_t>>();
      else if (key == "phi_ref_multiples") c.phi_ref_multiples = value.get<std::vector<std::size_t>>();
      else if (key == "phi_r") c.phi_r = value.get<std::size_t>();
      else if (key == "ann") c.ann_mode = parse_ann_mode(value.get<std::string>());
      else if (key == "warmup") c.warmup = value.get<std::size_t>();
      else if (key == "repetitions") c.repetitions = value.get<std::size_t>();
      else if (key == "pruners") {
        c.pruners.clear();
        for (const auto& p : value) c.pruners.push_back(parse_pruner(p.get<std::string>()));
      } else {
        throw UsageError("invalid_config", "unknown bench config key '" + key + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw UsageError("invalid_config", e.what());
  }
  c.validate();
  return c;
}

inline std::string serialize(const BenchConfig& c) { return to_json(c).dump(2); }

inline BenchConfig parse_bench_config(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw UsageError("invalid_config", e.what());
  }
  return bench_config_from_json(j);
}

struct BenchRow {
  std::string method;
  std::size_t phi_c = 0;
  std::size_t phi_ref = 0;
  std::size_t phi_r = 0;
  double recall = 0.0;
  double p50_ms = 0.0;
  double p95_ms = 0.0;
  double score_calls = 0.0;  // mean per query, both pruning stages
  std::uint64_t index_bytes = 0;
};

struct BenchReport {
  std::vector<BenchRow> rows;

  std::string to_jsonl() const {
    std::string out;
    for (const auto& r : rows) {
      nlohmann::json j = {{"method", r.method},   {"phi_c", r.phi_c},   {"phi_ref", r.phi_ref},
                          {"phi_r", r.phi_r},     {"recall", r.recall}, {"p50_ms", r.p50_ms},
                          {"p95_ms", r.p95_ms},   {"score_calls", r.score_calls},
                          {"index_bytes", r.index_bytes}};
      out += j.dump() + "\n";
    }
    return out;
  }

  std::string to_table() const {
    std::ostringstream os;
    os << "method\tphi_c\tphi_ref\tphi_r\trecall\tp50_ms\tp95_ms\tscore_calls\n";
    for (const auto& r : rows) {
      os << r.method << '\t' << r.phi_c << '\t' << r.phi_ref << '\t' << r.phi_r << '\t' << r.recall
         << '\t' << r.p50_ms << '\t' << r.p95_ms << '\t' << r.score_calls << '\n';
    }
    return os.str();
  }
};

/// Nearest-rank quantile of an unsorted sample.
inline double quantile(std::vector<double> v, double p) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const auto rank = static_cast<std::size_t>(std::ceil(p * static_cast<double>(v.size())));
  return v[std::clamp<std::size_t>(rank, 1, v.size()) - 1];
}

/// Sweeps phi_c x phi_ref x pruner. Each query is timed on its own
/// repetitions after warm-up; a point's latency quantiles are taken over
/// per-query medians. Recall and score calls come from the first timed run.
inline BenchReport run_bench(const TusIndex& index, const std::vector<QueryTable>& queries,
                             const GroundTruth& truth, const BenchConfig& config,
                             std::uint64_t index_bytes = 0) {
  config.validate();
  if (queries.empty()) throw UsageError("invalid_config", "bench needs at least one query");
  if (truth.size() != queries.size()) {
    throw DataError("truth_mismatch", "ground truth covers " + std::to_string(truth.size()) +
                                          " queries, expected " + std::to_string(queries.size()));
  }
  using clock = std::chrono::steady_clock;
  BenchReport report;
  for (auto phi_c : config.phi_c) {
    for (auto mult : config.phi_ref_multiples) {
      for (auto pruner : config.pruners) {
        SearchParams sp;
        sp.k = config.k;
        sp.tau = config.tau;
        sp.phi_c = phi_c;
        sp.phi_ref = mult * config.k;
        sp.phi_r = config.phi_r == 0 ? std::min(3 * config.k, sp.phi_ref)
                                     : std::min(config.phi_r, sp.phi_ref);
        sp.pruner = pruner;
        sp.ann_mode = config.ann_mode;
        sp = resolve(sp);
        BenchRow row{to_string(pruner), phi_c, sp.phi_ref, sp.phi_r};
        row.index_bytes = index_bytes;
        std::vector<double> medians;
        double recall_sum = 0.0, calls = 0.0;
        for (std::size_t q = 0; q < queries.size(); ++q) {
          for (std::size_t w = 0; w < config.warmup; ++w) search(index, queries[q], sp);
          std::vector<double> times;
          for (std::size_t r = 0; r < config.repetitions; ++r) {
            const auto t0 = clock::now();
            const auto res = search(index, queries[q], sp);
            times.push_back(std::chrono::duration<double, std::milli>(clock::now() - t0).count());
            if (r == 0) {
              std::vector<SetId> got;
              for (const auto& h : res.hits) got.push_back(h.set_id);
              recall_sum += recall(got, truth_ids(truth[q], config.k));
              calls += static_cast<double>(res.diagnostics.score_calls());
            }
          }
          medians.push_back(quantile(times, 0.5));
        }
        const auto n = static_cast<double>(queries.size());
        row.recall = recall_sum / n;
        row.score_calls = calls / n;
        row.p50_ms = quantile(medians, 0.5);
        row.p95_ms = quantile(medians, 0.95);
        report.rows.push_back(row);
      }
    }
  }
  return report;
}

}  // namespace tus
