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

// Index bundle: a directory holding every built component.
//
//   bundle.meta       text; version line, build parameters, and one
//                     "file=<name> bytes=<n> crc32=<hex>" line per component
//   vectors.manifest  normalized repository (manifest + vectors.f32)
//   codebook.bin      centroid matrix, float32
//   ivf.bin           I_v: per-centroid offsets + (set, index) handles
//   setw.bin          I_w: CSR set offsets, centroid ids, counts
//   partitions.bin    I_p: groups per set plus cascade centroid matrices
//   graph.bin         centroid graph adjacency (optional)
//
// All integers and floats are little-endian. No timestamps are stored, so a
// build is byte-identical for identical inputs and seeds.

#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "tus/binary_io.hpp"
#include "tus/pipeline.hpp"

namespace tus {

inline constexpr std::string_view kBundleVersion = "TUSBUNDLE v1";

struct ComponentSizes {
  std::map<std::string, std::uint64_t> bytes;  // per file

  std::uint64_t quantized() const {
    std::uint64_t total = 0;
    for (const char* f : {"codebook.bin", "ivf.bin", "setw.bin", "partitions.bin", "graph.bin"}) {
      auto it = bytes.find(f);
      if (it != bytes.end()) total += it->second;
    }
    return total;
  }
  std::uint64_t raw_vectors() const {
    auto it = bytes.find("vectors.f32");
    return it == bytes.end() ? 0 : it->second;
  }
};

namespace detail {

inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string to_string(PartitionMode m) {
  return m == PartitionMode::single ? "single" : "adaptive";
}

inline PartitionMode parse_partition_mode(const std::string& s) {
  if (s == "single") return PartitionMode::single;
  if (s == "adaptive") return PartitionMode::adaptive;
  throw UsageError("invalid_parameter", "unknown partition mode '" + s + "'");
}

inline void put_magic(io::Writer& w, std::string_view magic) { w.put_bytes(magic); }

inline void expect_magic(io::Reader& r, std::string_view magic, const std::string& file) {
  if (r.get_bytes(magic.size()) != magic) {
    throw DataError("bad_component", file + " has an unexpected header");
  }
}

inline io::Writer encode_codebook(const Codebook& cb) {
  io::Writer w;
  put_magic(w, "TUSCB1");
  w.put<std::uint64_t>(cb.size());
  w.put<std::uint64_t>(cb.dim());
  w.put<std::uint64_t>(cb.train_seed);
  w.put_span<float>(cb.centroids.values());
  return w;
}

inline Codebook decode_codebook(io::Reader r) {
  expect_magic(r, "TUSCB1", "codebook.bin");
  const auto n = r.get<std::uint64_t>();
  const auto d = r.get<std::uint64_t>();
  Codebook cb;
  cb.train_seed = r.get<std::uint64_t>();
  cb.centroids = VectorMatrix(d, r.get_vector<float>(n * d));
  return cb;
}

inline io::Writer encode_ivf(const VectorInvertedIndex& ivf) {
  io::Writer w;
  put_magic(w, "TUSIV1");
  w.put<std::uint64_t>(ivf.lists.size());
  std::uint64_t offset = 0;
  w.put<std::uint64_t>(0);
  for (const auto& l : ivf.lists) {
    offset += l.size();
    w.put<std::uint64_t>(offset);
  }
  for (const auto& l : ivf.lists) {
    for (const auto& h : l) {
      w.put<std::uint32_t>(h.set_id);
      w.put<std::uint32_t>(h.index);
    }
  }
  return w;
}

inline VectorInvertedIndex decode_ivf(io::Reader r) {
  expect_magic(r, "TUSIV1", "ivf.bin");
  const auto n = r.get<std::uint64_t>();
  const auto offsets = r.get_vector<std::uint64_t>(n + 1);
  VectorInvertedIndex ivf;
  ivf.lists.resize(n);
  for (std::size_t c = 0; c < n; ++c) {
    if (offsets[c + 1] < offsets[c]) throw DataError("bad_component", "ivf.bin offsets");
    for (auto i = offsets[c]; i < offsets[c + 1]; ++i) {
      const auto set = r.get<std::uint32_t>();
      const auto idx = r.get<std::uint32_t>();
      ivf.lists[c].push_back(Handle{set, idx});
    }
  }
  return ivf;
}

inline io::Writer encode_setw(const SetWeightIndex& sw) {
  io::Writer w;
  put_magic(w, "TUSSW1");
  w.put<std::uint64_t>(sw.weights.size());
  std::uint64_t offset = 0;
  w.put<std::uint64_t>(0);
  for (const auto& l : sw.weights) {
    offset += l.size();
    w.put<std::uint64_t>(offset);
  }
  for (const auto& l : sw.weights) {
    for (const auto& e : l) w.put<std::uint32_t>(e.centroid);
  }
  for (const auto& l : sw.weights) {
    for (const auto& e : l) w.put<std::uint32_t>(e.count);
  }
  return w;
}

inline SetWeightIndex decode_setw(io::Reader r) {
  expect_magic(r, "TUSSW1", "setw.bin");
  const auto n = r.get<std::uint64_t>();
  const auto offsets = r.get_vector<std::uint64_t>(n + 1);
  const auto total = offsets.back();
  const auto ids = r.get_vector<std::uint32_t>(total);
  const auto counts = r.get_vector<std::uint32_t>(total);
  SetWeightIndex sw;
  sw.weights.resize(n);
  for (std::size_t s = 0; s < n; ++s) {
    if (offsets[s + 1] < offsets[s] || offsets[s + 1] > total) {
      throw DataError("bad_component", "setw.bin offsets");
    }
    for (auto i = offsets[s]; i < offsets[s + 1]; ++i) sw.weights[s].push_back({ids[i], counts[i]});
  }
  return sw;
}

inline io::Writer encode_partitions(const PartitionInvertedIndex& ip, std::size_t dim) {
  io::Writer w;
  put_magic(w, "TUSPI1");
  w.put<std::uint64_t>(ip.sets.size());
  w.put<std::uint64_t>(dim);
  for (const auto& p : ip.sets) {
    w.put<std::uint32_t>(p.set_id);
    w.put<std::uint8_t>(static_cast<std::uint8_t>(p.branch));
    w.put<double>(p.dispersion);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(p.groups.size()));
    for (const auto& g : p.groups) {
      w.put<std::uint8_t>(g.cascade ? 1 : 0);
      w.put<std::uint32_t>(static_cast<std::uint32_t>(g.centroids.size()));
      w.put_span<std::uint32_t>(g.centroids);
      w.put<std::uint32_t>(static_cast<std::uint32_t>(g.members.size()));
      w.put_span<std::uint32_t>(g.members);
    }
    w.put<std::uint32_t>(static_cast<std::uint32_t>(p.cascade_centroids.rows()));
    w.put_span<float>(p.cascade_centroids.values());
  }
  return w;
}

inline PartitionInvertedIndex decode_partitions(io::Reader r) {
  expect_magic(r, "TUSPI1", "partitions.bin");
  const auto n = r.get<std::uint64_t>();
  const auto dim = r.get<std::uint64_t>();
  PartitionInvertedIndex ip;
  ip.sets.resize(n);
  for (auto& p : ip.sets) {
    p.set_id = r.get<std::uint32_t>();
    const auto branch = r.get<std::uint8_t>();
    if (branch > 3) throw DataError("bad_component", "partitions.bin branch tag");
    p.branch = static_cast<PartitionBranch>(branch);
    p.dispersion = r.get<double>();
    p.groups.resize(r.get<std::uint32_t>());
    for (auto& g : p.groups) {
      g.cascade = r.get<std::uint8_t>() != 0;
      g.centroids = r.get_vector<std::uint32_t>(r.get<std::uint32_t>());
      g.members = r.get_vector<std::uint32_t>(r.get<std::uint32_t>());
    }
    const auto rows = r.get<std::uint32_t>();
    p.cascade_centroids = VectorMatrix(dim, r.get_vector<float>(rows * dim));
  }
  return ip;
}

inline io::Writer encode_graph(const CentroidGraphIndex& g) {
  io::Writer w;
  put_magic(w, "TUSGR1");
  w.put<std::uint64_t>(g.size());
  w.put<std::uint64_t>(g.degree);
  w.put<std::uint64_t>(g.ef_construction);
  w.put<std::uint64_t>(g.seed);
  w.put<std::uint32_t>(g.entry_point);
  w.put<std::uint64_t>(g.max_level);
  for (const auto& levels : g.links) {
    w.put<std::uint32_t>(static_cast<std::uint32_t>(levels.size()));
    for (const auto& l : levels) {
      w.put<std::uint32_t>(static_cast<std::uint32_t>(l.size()));
      w.put_span<std::uint32_t>(l);
    }
  }
  return w;
}

inline CentroidGraphIndex decode_graph(io::Reader r) {
  expect_magic(r, "TUSGR1", "graph.bin");
  CentroidGraphIndex g;
  const auto n = r.get<std::uint64_t>();
  g.degree = r.get<std::uint64_t>();
  g.ef_construction = r.get<std::uint64_t>();
  g.seed = r.get<std::uint64_t>();
  g.entry_point = r.get<std::uint32_t>();
  g.max_level = r.get<std::uint64_t>();
  g.links.resize(n);
  for (auto& levels : g.links) {
    levels.resize(r.get<std::uint32_t>());
    for (auto& l : levels) l = r.get_vector<std::uint32_t>(r.get<std::uint32_t>());
  }
  return g;
}

inline std::map<std::string, std::string> read_meta(const std::filesystem::path& dir,
                                                    std::vector<std::string>& file_lines) {
  std::ifstream in(dir / "bundle.meta");
  if (!in) throw DataError("missing_file", "no bundle.meta in " + dir.string());
  std::string line;
  std::getline(in, line);
  if (line != kBundleVersion) {
    throw DataError("version_mismatch", "bundle version '" + line + "' is not '" +
                                            std::string(kBundleVersion) + "'");
  }
  std::map<std::string, std::string> kv;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line.rfind("file=", 0) == 0) {
      file_lines.push_back(line);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw DataError("bad_component", "bad meta line: " + line);
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

}  // namespace detail

/// Writes the index into `dir` (created if needed) and returns file sizes.
inline ComponentSizes save_bundle(const TusIndex& index, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  export_repository(index.repo, dir / "vectors.manifest", "vectors.f32");
  std::vector<std::pair<std::string, io::Writer>> parts;
  parts.emplace_back("codebook.bin", detail::encode_codebook(index.codebook));
  parts.emplace_back("ivf.bin", detail::encode_ivf(index.flat.ivf));
  parts.emplace_back("setw.bin", detail::encode_setw(index.flat.set_weights));
  parts.emplace_back("partitions.bin", detail::encode_partitions(index.partitions, index.repo.dim()));
  if (index.graph) parts.emplace_back("graph.bin", detail::encode_graph(*index.graph));
  std::filesystem::remove(dir / "graph.bin");
  for (const auto& [name, w] : parts) io::write_file(dir / name, w.bytes());

  const auto& p = index.params;
  std::ostringstream meta;
  meta << kBundleVersion << "\n"
       << "dim=" << index.repo.dim() << "\n"
       << "n_sets=" << index.repo.size() << "\n"
       << "total_vectors=" << index.repo.total_vectors() << "\n"
       << "n_c=" << index.codebook.size() << "\n"
       << "rho_low=" << detail::format_double(p.rho_low) << "\n"
       << "rho_high=" << detail::format_double(p.rho_high) << "\n"
       << "partition_mode=" << detail::to_string(p.partition_mode) << "\n"
       << "graph=" << (index.graph ? 1 : 0) << "\n"
       << "graph_degree=" << p.graph_degree << "\n"
       << "ef_construction=" << p.ef_construction << "\n"
       << "seed=" << p.seed << "\n"
       << "kmeans_iters=" << p.kmeans_iters << "\n"
       << "max_points_per_centroid=" << p.max_points_per_centroid << "\n";
  ComponentSizes sizes;
  std::vector<std::string> names{"vectors.manifest", "vectors.f32"};
  for (const auto& [name, w] : parts) names.push_back(name);
  for (const auto& name : names) {
    const auto bytes = io::read_file(dir / name);
    char crc[16];
    std::snprintf(crc, sizeof(crc), "%08x", io::crc32(bytes));
    meta << "file=" << name << " bytes=" << bytes.size() << " crc32=" << crc << "\n";
    sizes.bytes[name] = bytes.size();
  }
  const std::string text = meta.str();
  io::write_file(dir / "bundle.meta",
                 std::span(reinterpret_cast<const unsigned char*>(text.data()), text.size()));
  return sizes;
}

/// Loads a bundle. The version line is checked first; every component's
/// size and checksum is verified before it is decoded.
inline TusIndex load_bundle(const std::filesystem::path& dir) {
  std::vector<std::string> files;
  const auto kv = detail::read_meta(dir, files);
  std::map<std::string, std::vector<unsigned char>> blobs;
  for (const auto& line : files) {
    std::istringstream ls(line);
    std::string f, b, c;
    ls >> f >> b >> c;
    const std::string name = f.substr(5);
    const auto expect_bytes = std::stoull(b.substr(6));
    const auto expect_crc = static_cast<std::uint32_t>(std::stoul(c.substr(6), nullptr, 16));
    auto bytes = io::read_file(dir / name);
    if (bytes.size() != expect_bytes || io::crc32(bytes) != expect_crc) {
      throw DataError("checksum_mismatch", "component " + name + " failed checksum verification");
    }
    blobs.emplace(name, std::move(bytes));
  }
  auto need = [&](const std::string& name) -> const std::vector<unsigned char>& {
    auto it = blobs.find(name);
    if (it == blobs.end()) throw DataError("missing_file", "bundle lacks " + name);
    return it->second;
  };
  auto get = [&](const std::string& key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) throw DataError("bad_component", "bundle.meta lacks " + key);
    return it->second;
  };
  need("vectors.manifest");
  need("vectors.f32");

  TusIndex idx;
  idx.repo = ingest_repository(dir / "vectors.manifest", /*normalize=*/false);
  idx.params.rho_low = std::stod(get("rho_low"));
  idx.params.rho_high = std::stod(get("rho_high"));
  idx.params.partition_mode = detail::parse_partition_mode(get("partition_mode"));
  idx.params.graph_degree = std::stoull(get("graph_degree"));
  idx.params.ef_construction = std::stoull(get("ef_construction"));
  idx.params.build_graph = get("graph") == "1";
  idx.params.seed = std::stoull(get("seed"));
  idx.params.kmeans_iters = std::stoull(get("kmeans_iters"));
  idx.params.max_points_per_centroid = std::stoull(get("max_points_per_centroid"));
  idx.params.n_centroids = std::stoull(get("n_c"));

  auto reader = [&](const std::string& name) { return io::Reader(need(name), name); };
  idx.codebook = detail::decode_codebook(reader("codebook.bin"));
  idx.flat.ivf = detail::decode_ivf(reader("ivf.bin"));
  idx.flat.set_weights = detail::decode_setw(reader("setw.bin"));
  idx.partitions = detail::decode_partitions(reader("partitions.bin"));
  if (idx.params.build_graph) idx.graph = detail::decode_graph(reader("graph.bin"));

  if (idx.codebook.dim() != idx.repo.dim() || idx.flat.ivf.lists.size() != idx.codebook.size() ||
      idx.flat.set_weights.weights.size() != idx.repo.size() ||
      idx.partitions.sets.size() != idx.repo.size()) {
    throw DataError("bad_component", "bundle components disagree on shape");
  }
  idx.assignment.owner.resize(idx.repo.size());
  for (SetId s = 0; s < idx.repo.size(); ++s) idx.assignment.owner[s].resize(idx.repo.set(s).size());
  for (CentroidId c = 0; c < idx.flat.ivf.lists.size(); ++c) {
    for (const auto& h : idx.flat.ivf.lists[c]) {
      if (h.set_id >= idx.repo.size() || h.index >= idx.repo.set(h.set_id).size()) {
        throw DataError("bad_component", "ivf.bin handle out of range");
      }
      idx.assignment.owner[h.set_id][h.index] = c;
    }
  }
  idx.postings = build_set_postings(idx.flat.ivf);
  return idx;
}

struct IndexStats {
  std::size_t n_sets = 0;
  std::size_t total_vectors = 0;
  std::size_t n_centroids = 0;
  std::size_t capacity_sum = 0;
  std::vector<std::size_t> dispersion_histogram;  // 10 bins over (0, 1]
  std::map<std::size_t, std::size_t> partition_histogram;  // groups per set -> sets
  std::map<std::string, std::size_t> branches;
  double setw_density = 0.0;  // mean non-zero I_w entries per set / n_c
};

inline IndexStats index_stats(const TusIndex& idx) {
  IndexStats st;
  st.n_sets = idx.repo.size();
  st.total_vectors = idx.repo.total_vectors();
  st.n_centroids = idx.codebook.size();
  st.dispersion_histogram.assign(10, 0);
  std::size_t nnz = 0;
  for (SetId s = 0; s < idx.repo.size(); ++s) {
    const auto& p = idx.partitions.sets[s];
    st.capacity_sum += p.size();
    const auto bin = std::min<std::size_t>(9, static_cast<std::size_t>(p.dispersion * 10.0 - 1e-12));
    ++st.dispersion_histogram[bin];
    ++st.partition_histogram[p.groups.size()];
    static const char* names[] = {"middle", "merged", "cascade", "single"};
    ++st.branches[names[static_cast<int>(p.branch)]];
    nnz += idx.flat.set_weights.weights[s].size();
  }
  if (st.n_sets > 0 && st.n_centroids > 0) {
    st.setw_density = static_cast<double>(nnz) / static_cast<double>(st.n_sets) /
                      static_cast<double>(st.n_centroids);
  }
  return st;
}

}  // namespace tus
