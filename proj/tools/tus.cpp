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

// Command-line front end: build, search, eval, bench, inspect, generate.
//
// Exit codes: 0 success, 2 usage error, 3 data error, 4 internal error.
// Failures print one line to stderr:
//   error code=<code> kind=<usage|data|internal> msg="<text>"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include "tus/bundle.hpp"
#include "tus/eval.hpp"

namespace {

using namespace tus;

struct SearchFlags {
  std::size_t k = 10;
  double tau = 0.7;
  std::size_t phi_c = 32;
  std::size_t phi_ref = 0;
  std::size_t phi_r = 0;
  std::string pruner = "enhanced";
  std::string ann = "auto";
  std::size_t ef_search = 0;

  void add_to(CLI::App* cmd) {
    cmd->add_option("-k,--k", k, "results per query")->capture_default_str();
    cmd->add_option("--tau", tau, "similarity threshold (free parameter)")->capture_default_str();
    cmd->add_option("--phi-c", phi_c, "centroids probed per query vector")->capture_default_str();
    cmd->add_option("--phi-ref", phi_ref, "refinement pool size (default 5k)");
    cmd->add_option("--phi-r", phi_r, "filter pool size (default 3k)");
    cmd->add_option("--pruner", pruner, "bf|base|enhanced")->capture_default_str();
    cmd->add_option("--ann", ann, "auto|exact|graph")->capture_default_str();
    cmd->add_option("--ef-search", ef_search, "graph search beam (default max(64, 2 phi_c))");
  }

  // Clamps k to the repository size, widening the centroid probe so every
  // set is reachable.
  SearchParams to_params(const TusIndex& idx) const {
    SearchParams sp;
    sp.k = k;
    sp.tau = tau;
    sp.phi_c = phi_c;
    sp.phi_ref = phi_ref;
    sp.phi_r = phi_r;
    sp.pruner = parse_pruner(pruner);
    sp.ann_mode = parse_ann_mode(ann);
    sp.ef_search = ef_search;
    const std::size_t n = idx.repo.size();
    if (k > n) {
      std::cerr << "warning: k=" << k << " exceeds the repository size " << n
                << "; returning all sets\n";
      sp.k = n;
      sp.phi_c = idx.codebook.size();
      sp.ann_mode = AnnMode::exact;
      if (sp.phi_ref != 0) sp.phi_ref = std::max(sp.phi_ref, n);
      if (sp.phi_r != 0) sp.phi_r = std::max(sp.phi_r, n);
    }
    return resolve(sp);
  }
};

const char* kind_name(ErrorKind k) {
  switch (k) {
    case ErrorKind::usage: return "usage";
    case ErrorKind::data: return "data";
    case ErrorKind::internal: return "internal";
  }
  return "internal";
}

int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::usage: return 2;
    case ErrorKind::data: return 3;
    case ErrorKind::internal: return 4;
  }
  return 4;
}

int report(const std::string& code, ErrorKind kind, const std::string& msg) {
  std::string flat;
  for (char c : msg) {
    if (c == '\n' || c == '\r') flat += ' ';
    else if (c == '"' || c == '\\') flat += std::string("\\") + c;
    else flat += c;
  }
  std::cerr << "error code=" << code << " kind=" << kind_name(kind) << " msg=\"" << flat << "\"\n";
  return exit_code(kind);
}

double elapsed_ms(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

void print_hits(std::size_t q, const SearchResult& r, bool explain) {
  for (std::size_t i = 0; i < r.hits.size(); ++i) {
    const auto& h = r.hits[i];
    std::printf("query=%zu rank=%zu set=%u score=%.6f cardinality=%zu\n", q, i + 1, h.set_id, h.score,
                h.cardinality);
  }
  if (explain) std::printf("query=%zu %s\n", q, r.diagnostics.to_record().c_str());
}

// Loads a truth file, reuses a cached one, or runs the oracle.
GroundTruth obtain_truth(const TusIndex& idx, const std::vector<QueryTable>& queries, double tau,
                         const std::string& truth_file, const std::string& truth_dir,
                         unsigned threads) {
  const auto rh = repository_hash(idx.repo);
  const auto qh = queries_hash(queries);
  if (!truth_file.empty()) {
    if (!std::filesystem::exists(truth_file)) {
      throw DataError("missing_file", "no truth file at " + truth_file);
    }
    auto gt = load_ground_truth(truth_file, rh, qh, tau);
    if (!gt) throw DataError("truth_mismatch", truth_file + " was computed for other inputs");
    return std::move(*gt);
  }
  if (!truth_dir.empty()) {
    const auto path = std::filesystem::path(truth_dir) / truth_file_name(rh, tau);
    if (auto gt = load_ground_truth(path, rh, qh, tau)) return std::move(*gt);
    auto gt = compute_ground_truth(queries, idx.repo, tau, threads);
    std::filesystem::create_directories(truth_dir);
    save_ground_truth(gt, path, rh, qh, tau);
    return gt;
  }
  return compute_ground_truth(queries, idx.repo, tau, threads);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw DataError("io_error", "cannot write " + path);
  out << text;
}

int run(int argc, char** argv) {
  CLI::App app{"Table union search over vector sets"};
  app.require_subcommand(1);
  unsigned threads = 1;
  app.add_option("--threads", threads, "worker cap")->capture_default_str();

  // build
  auto* build = app.add_subcommand("build", "build an index bundle from a repository manifest");
  std::string repo_path, out_dir, partition_mode = "adaptive";
  BuildParams bp;
  bool no_graph = false;
  build->add_option("--repo", repo_path, "repository manifest")->required();
  build->add_option("--out", out_dir, "bundle directory")->required();
  build->add_option("--n-c", bp.n_centroids, "centroids (default ceil(sqrt(N)))");
  build->add_option("--rho-low", bp.rho_low, "cascade threshold")->capture_default_str();
  build->add_option("--rho-high", bp.rho_high, "merge threshold")->capture_default_str();
  build->add_option("--partition-mode", partition_mode, "adaptive|single")->capture_default_str();
  build->add_option("--M", bp.graph_degree, "graph degree")->capture_default_str();
  build->add_option("--ef-construction", bp.ef_construction, "graph build beam")
      ->capture_default_str();
  build->add_option("--seed", bp.seed, "seed for every stochastic step")->capture_default_str();
  build->add_option("--kmeans-iters", bp.kmeans_iters, "Lloyd iterations")->capture_default_str();
  build->add_flag("--no-graph", no_graph, "skip the centroid graph");

  // search
  auto* search_cmd = app.add_subcommand("search", "rank repository sets for each query");
  std::string index_dir, query_path;
  SearchFlags sf;
  bool explain = false;
  search_cmd->add_option("--index", index_dir, "bundle directory")->required();
  search_cmd->add_option("--query", query_path, "query manifest (one record per query)")
      ->required();
  search_cmd->add_flag("--explain", explain, "append stage diagnostics");
  sf.add_to(search_cmd);

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "recall against exact unionability");
  std::string truth_file, truth_dir;
  eval_cmd->add_option("--index", index_dir, "bundle directory")->required();
  eval_cmd->add_option("--queries", query_path, "query manifest")->required();
  auto* tf = eval_cmd->add_option("--truth", truth_file, "ground truth file");
  eval_cmd->add_option("--truth-dir", truth_dir, "ground truth cache directory")->excludes(tf);
  sf.add_to(eval_cmd);

  // bench
  auto* bench_cmd = app.add_subcommand("bench", "sweep parameter grids");
  std::string config_path, jsonl_path, table_path;
  bench_cmd->add_option("--index", index_dir, "bundle directory")->required();
  bench_cmd->add_option("--queries", query_path, "query manifest")->required();
  bench_cmd->add_option("--config", config_path, "bench config JSON");
  bench_cmd->add_option("--truth-dir", truth_dir, "ground truth cache directory");
  bench_cmd->add_option("--jsonl", jsonl_path, "write JSON lines here");
  bench_cmd->add_option("--table", table_path, "write the flat table here instead of stdout");

  // inspect
  auto* inspect = app.add_subcommand("inspect", "print index statistics");
  inspect->add_option("--index", index_dir, "bundle directory")->required();

  // generate
  auto* gen = app.add_subcommand("generate", "write a synthetic repository and queries");
  SyntheticParams gp;
  std::size_t n_queries = 50;
  double query_noise = -1;
  gen->add_option("--out", out_dir, "output directory")->required();
  gen->add_option("--n-sets", gp.n_sets, "sets")->capture_default_str();
  gen->add_option("--dim", gp.dim, "dimension")->capture_default_str();
  gen->add_option("--topics", gp.n_topics, "topic directions")->capture_default_str();
  gen->add_option("--cols-min", gp.cols_min, "min columns per set")->capture_default_str();
  gen->add_option("--cols-max", gp.cols_max, "max columns per set")->capture_default_str();
  gen->add_option("--noise", gp.noise, "noise norm")->capture_default_str();
  gen->add_option("--seed", gp.seed, "seed")->capture_default_str();
  gen->add_option("--queries", n_queries, "query tables")->capture_default_str();
  gen->add_option("--query-noise", query_noise, "query noise (default: --noise)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report("bad_arguments", ErrorKind::usage, e.what());
  }

  if (*build) {
    bp.threads = threads;
    bp.build_graph = !no_graph;
    bp.partition_mode = detail::parse_partition_mode(partition_mode);
    const auto t0 = std::chrono::steady_clock::now();
    auto idx = build_index(ingest_repository(repo_path), bp);
    const double build_ms = elapsed_ms(t0);
    const auto sizes = save_bundle(idx, out_dir);
    std::printf("build_ms=%.3f\n", build_ms);
    std::printf("n_sets=%zu total_vectors=%zu n_c=%zu\n", idx.repo.size(), idx.repo.total_vectors(),
                idx.codebook.size());
    for (const auto& [name, bytes] : sizes.bytes) {
      std::printf("component=%s bytes=%llu\n", name.c_str(), static_cast<unsigned long long>(bytes));
    }
    std::printf("quantized_bytes=%llu raw_vector_bytes=%llu ratio=%.4f\n",
                static_cast<unsigned long long>(sizes.quantized()),
                static_cast<unsigned long long>(sizes.raw_vectors()),
                sizes.raw_vectors() ? double(sizes.quantized()) / double(sizes.raw_vectors()) : 0.0);
    return 0;
  }

  if (*search_cmd) {
    const auto idx = load_bundle(index_dir);
    const auto queries = ingest_queries(query_path, idx.repo.dim());
    const auto sp = sf.to_params(idx);
    for (std::size_t q = 0; q < queries.size(); ++q) print_hits(q, search(idx, queries[q], sp), explain);
    return 0;
  }

  if (*eval_cmd) {
    const auto idx = load_bundle(index_dir);
    const auto queries = ingest_queries(query_path, idx.repo.dim());
    const auto sp = sf.to_params(idx);
    const auto gt = obtain_truth(idx, queries, sp.tau, truth_file, truth_dir, threads);
    if (gt.size() != queries.size()) {
      throw DataError("truth_mismatch", "ground truth does not cover every query");
    }
    double total = 0;
    for (std::size_t q = 0; q < queries.size(); ++q) {
      const auto r = search(idx, queries[q], sp);
      std::vector<SetId> got;
      for (const auto& h : r.hits) got.push_back(h.set_id);
      const double rc = recall(got, truth_ids(gt[q], sp.k));
      total += rc;
      std::printf("query=%zu recall=%.6f\n", q, rc);
    }
    std::printf("mean_recall=%.6f queries=%zu k=%zu tau=%g\n", total / double(queries.size()),
                queries.size(), sp.k, sp.tau);
    return 0;
  }

  if (*bench_cmd) {
    BenchConfig cfg;
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw DataError("missing_file", "no bench config at " + config_path);
      cfg = parse_bench_config(std::string(std::istreambuf_iterator<char>(in), {}));
    }
    const auto idx = load_bundle(index_dir);
    const auto queries = ingest_queries(query_path, idx.repo.dim());
    const auto gt = obtain_truth(idx, queries, cfg.tau, "", truth_dir, threads);
    std::uint64_t index_bytes = 0;
    for (const auto& e : std::filesystem::directory_iterator(index_dir)) {
      if (e.is_regular_file()) index_bytes += e.file_size();
    }
    const auto rep = run_bench(idx, queries, gt, cfg, index_bytes);
    if (!jsonl_path.empty()) write_text(jsonl_path, rep.to_jsonl());
    if (!table_path.empty()) {
      write_text(table_path, rep.to_table());
    } else {
      std::fputs(rep.to_table().c_str(), stdout);
    }
    return 0;
  }

  if (*inspect) {
    const auto idx = load_bundle(index_dir);
    const auto st = index_stats(idx);
    std::printf("n_sets=%zu\ntotal_vectors=%zu\nn_c=%zu\ncapacity_sum=%zu\ngraph=%d\n", st.n_sets,
                st.total_vectors, st.n_centroids, st.capacity_sum, idx.graph ? 1 : 0);
    for (std::size_t b = 0; b < st.dispersion_histogram.size(); ++b) {
      std::printf("dispersion=(%.1f,%.1f] sets=%zu\n", b / 10.0, (b + 1) / 10.0,
                  st.dispersion_histogram[b]);
    }
    for (const auto& [g, n] : st.partition_histogram) std::printf("partitions=%zu sets=%zu\n", g, n);
    for (const auto& [name, n] : st.branches) std::printf("branch=%s sets=%zu\n", name.c_str(), n);
    std::printf("setw_density=%.6f setw_sparsity=%.6f\n", st.setw_density, 1.0 - st.setw_density);
    return 0;
  }

  if (*gen) {
    const auto corpus = generate_synthetic(gp);
    const auto queries =
        generate_queries(corpus, n_queries, query_noise < 0 ? gp.noise : query_noise, gp.seed + 1);
    const std::filesystem::path dir(out_dir);
    export_repository(corpus.repo, dir / "repo.manifest", "repo.f32");
    export_queries(queries, gp.dim, dir / "queries.manifest", "queries.f32");
    std::printf("repo=%s sets=%zu vectors=%zu\nqueries=%s count=%zu\n",
                (dir / "repo.manifest").c_str(), corpus.repo.size(), corpus.repo.total_vectors(),
                (dir / "queries.manifest").c_str(), queries.size());
    return 0;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const tus::Error& e) {
    return report(e.code(), e.kind(), e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return report("io_error", tus::ErrorKind::data, e.what());
  } catch (const std::exception& e) {
    return report("internal", tus::ErrorKind::internal, e.what());
  }
}
