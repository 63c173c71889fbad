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

// Vector-set repositories: every table is a set of unit-norm column
// embeddings. Vectors are normalized at ingest so that the inner product is
// the cosine similarity and thresholds live in [0, 1].

#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "tus/binary_io.hpp"
#include "tus/common.hpp"

namespace tus {

inline constexpr double kUnitNormTolerance = 1e-6;
inline constexpr double kZeroNorm = 1e-12;

/// Inner product of two vectors, accumulated in double in index order. The
/// reduction order is the same for (u, v) and (v, u), so the result is
/// exactly symmetric.
inline double similarity(std::span<const float> u, std::span<const float> v) {
  if (u.size() != v.size()) {
    throw DataError("dimension_mismatch",
                    "dimension mismatch: " + std::to_string(u.size()) + " vs " +
                        std::to_string(v.size()));
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    acc += static_cast<double>(u[i]) * static_cast<double>(v[i]);
  }
  return acc;
}

inline double squared_l2(std::span<const float> u, std::span<const float> v) {
  double acc = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double diff = static_cast<double>(u[i]) - static_cast<double>(v[i]);
    acc += diff * diff;
  }
  return acc;
}

/// Dense row-major matrix of float32 vectors sharing one dimension.
class VectorMatrix {
 public:
  VectorMatrix() = default;
  VectorMatrix(std::size_t dim, std::vector<float> values)
      : dim_(dim), values_(std::move(values)) {
    if (dim_ == 0) throw DataError("dimension_invalid", "dimension must be >= 1");
    if (values_.size() % dim_ != 0) {
      throw DataError("dimension_mismatch",
                      "value count " + std::to_string(values_.size()) +
                          " is not a multiple of dimension " + std::to_string(dim_));
    }
  }

  std::size_t dim() const { return dim_; }
  std::size_t rows() const { return dim_ == 0 ? 0 : values_.size() / dim_; }
  bool empty() const { return values_.empty(); }

  std::span<const float> row(std::size_t i) const {
    return {values_.data() + i * dim_, dim_};
  }
  std::span<float> row(std::size_t i) { return {values_.data() + i * dim_, dim_}; }

  const std::vector<float>& values() const { return values_; }

  void append(std::span<const float> v) {
    if (v.size() != dim_) {
      throw DataError("dimension_mismatch",
                      "dimension mismatch: " + std::to_string(v.size()) + " vs " +
                          std::to_string(dim_));
    }
    values_.insert(values_.end(), v.begin(), v.end());
  }

  friend bool operator==(const VectorMatrix&, const VectorMatrix&) = default;

 private:
  std::size_t dim_ = 0;
  std::vector<float> values_;
};

/// A table as the ordered list of its column embeddings.
struct VectorSet {
  SetId id = 0;
  VectorMatrix vectors;

  std::size_t size() const { return vectors.rows(); }
  friend bool operator==(const VectorSet&, const VectorSet&) = default;
};

/// The query side of a search: one vector per query column.
struct QueryTable {
  VectorMatrix vectors;

  std::size_t size() const { return vectors.rows(); }
  std::size_t dim() const { return vectors.dim(); }
};

class Repository {
 public:
  Repository() = default;

  /// Takes ownership of `sets`; ids must equal their positions.
  Repository(std::size_t dim, std::vector<VectorSet> sets)
      : dim_(dim), sets_(std::move(sets)) {
    if (dim_ == 0) throw DataError("dimension_invalid", "dimension must be >= 1");
    for (std::size_t i = 0; i < sets_.size(); ++i) {
      const auto& s = sets_[i];
      if (s.id != i) {
        throw DataError("set_ids_not_dense",
                        "set ids must be unique and dense in [0, n); found " +
                            std::to_string(s.id) + " at position " + std::to_string(i));
      }
      if (s.size() == 0) {
        throw DataError("empty_set", "empty set " + std::to_string(s.id));
      }
      if (s.vectors.dim() != dim_) {
        throw DataError("dimension_mismatch",
                        "dimension mismatch in set " + std::to_string(s.id) + ": " +
                            std::to_string(s.vectors.dim()) + " vs " + std::to_string(dim_));
      }
      total_vectors_ += s.size();
    }
  }

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return sets_.size(); }
  std::size_t total_vectors() const { return total_vectors_; }
  const VectorSet& set(SetId id) const { return sets_.at(id); }
  const std::vector<VectorSet>& sets() const { return sets_; }

  std::span<const float> vector(Handle h) const { return sets_[h.set_id].vectors.row(h.index); }

  friend bool operator==(const Repository&, const Repository&) = default;

 private:
  std::size_t dim_ = 0;
  std::vector<VectorSet> sets_;
  std::size_t total_vectors_ = 0;
};

/// Scales `v` to unit norm in place. `where` names the vector in errors.
inline void normalize_in_place(std::span<float> v, const std::string& where) {
  double norm_sq = 0.0;
  for (float x : v) {
    if (!std::isfinite(x)) throw DataError("non_finite", "non-finite value at " + where);
    norm_sq += static_cast<double>(x) * static_cast<double>(x);
  }
  const double norm = std::sqrt(norm_sq);
  if (norm < kZeroNorm) throw DataError("zero_vector", "zero vector at " + where);
  for (float& x : v) x = static_cast<float>(static_cast<double>(x) / norm);
}

// ---------------------------------------------------------------------------
// Manifest format
//
//   VSETS v1<TAB>dimension=<d>
//   <set_id><TAB><num_vectors><TAB><payload_path><TAB><byte_offset>
//   ...
//
// Payloads are raw little-endian float32, row-major, num_vectors x d per
// record. Relative payload paths resolve against the manifest's directory.
// ---------------------------------------------------------------------------

struct ManifestRecord {
  SetId set_id = 0;
  std::size_t num_vectors = 0;
  std::string payload;
  std::uint64_t byte_offset = 0;
};

struct Manifest {
  std::size_t dim = 0;
  std::vector<ManifestRecord> records;
};

inline constexpr std::string_view kManifestMagic = "VSETS v1";

inline Manifest parse_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("missing_file", "cannot open manifest " + path.string());
  Manifest m;
  std::string line;
  if (!std::getline(in, line)) {
    throw DataError("malformed_manifest", "empty manifest " + path.string());
  }
  const std::string prefix = std::string(kManifestMagic) + "\tdimension=";
  if (line.rfind(prefix, 0) != 0) {
    throw DataError("malformed_manifest", "bad manifest header in " + path.string());
  }
  try {
    m.dim = std::stoul(line.substr(prefix.size()));
  } catch (const std::exception&) {
    throw DataError("malformed_manifest", "bad dimension in " + path.string());
  }
  if (m.dim == 0) throw DataError("dimension_invalid", "dimension must be >= 1");
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, '\t')) fields.push_back(f);
    if (fields.size() != 4) {
      throw DataError("malformed_manifest", path.string() + ":" + std::to_string(line_no) +
                                                ": expected 4 tab-separated fields");
    }
    ManifestRecord r;
    try {
      r.set_id = static_cast<SetId>(std::stoul(fields[0]));
      r.num_vectors = std::stoul(fields[1]);
      r.payload = fields[2];
      r.byte_offset = std::stoull(fields[3]);
    } catch (const std::exception&) {
      throw DataError("malformed_manifest",
                      path.string() + ":" + std::to_string(line_no) + ": bad number");
    }
    m.records.push_back(std::move(r));
  }
  return m;
}

namespace detail {

// Reads the records of a manifest in file order. With `normalize` unset the
// stored values are kept bit-for-bit (used for bundles, which already hold
// normalized vectors); they are still checked for finiteness.
inline std::vector<std::pair<SetId, VectorMatrix>> read_records(
    const std::filesystem::path& manifest_path, const Manifest& m, bool normalize = true) {
  const auto base = manifest_path.parent_path();
  std::map<std::string, std::vector<unsigned char>> payloads;
  std::vector<std::pair<SetId, VectorMatrix>> out;
  out.reserve(m.records.size());
  for (const auto& r : m.records) {
    if (r.num_vectors == 0) {
      throw DataError("empty_set", "empty set " + std::to_string(r.set_id));
    }
    auto it = payloads.find(r.payload);
    if (it == payloads.end()) {
      std::filesystem::path p(r.payload);
      if (p.is_relative()) p = base / p;
      it = payloads.emplace(r.payload, io::read_file(p)).first;
    }
    const auto& bytes = it->second;
    const std::uint64_t need = static_cast<std::uint64_t>(r.num_vectors) * m.dim * sizeof(float);
    if (r.byte_offset > bytes.size() || bytes.size() - r.byte_offset < need) {
      throw DataError("truncated_payload",
                      "payload " + r.payload + " too short for set " + std::to_string(r.set_id));
    }
    io::Reader reader(std::span<const unsigned char>(bytes).subspan(r.byte_offset, need),
                      r.payload);
    VectorMatrix mat(m.dim, reader.get_vector<float>(r.num_vectors * m.dim));
    for (std::size_t j = 0; j < mat.rows(); ++j) {
      const std::string where = "set " + std::to_string(r.set_id) + ", index " + std::to_string(j);
      if (normalize) {
        normalize_in_place(mat.row(j), where);
      } else {
        for (float x : mat.row(j)) {
          if (!std::isfinite(x)) throw DataError("non_finite", "non-finite value at " + where);
        }
      }
    }
    out.emplace_back(r.set_id, std::move(mat));
  }
  return out;
}

}  // namespace detail

/// Loads and normalizes a repository. Set ids must be unique and dense.
inline Repository ingest_repository(const std::filesystem::path& manifest_path,
                                    bool normalize = true) {
  const Manifest m = parse_manifest(manifest_path);
  auto records = detail::read_records(manifest_path, m, normalize);
  std::vector<VectorSet> sets(records.size());
  std::vector<bool> seen(records.size(), false);
  for (auto& [id, mat] : records) {
    if (id >= records.size() || seen[id]) {
      throw DataError("set_ids_not_dense",
                      "set ids must be unique and dense in [0, n); offending id " +
                          std::to_string(id));
    }
    seen[id] = true;
    sets[id] = VectorSet{id, std::move(mat)};
  }
  return Repository(m.dim, std::move(sets));
}

/// Loads every record of a manifest as a query table, in file order.
/// `expected_dim` of 0 accepts any dimension.
inline std::vector<QueryTable> ingest_queries(const std::filesystem::path& manifest_path,
                                              std::size_t expected_dim = 0) {
  const Manifest m = parse_manifest(manifest_path);
  if (expected_dim != 0 && m.dim != expected_dim) {
    throw DataError("dimension_mismatch", "query dimension " + std::to_string(m.dim) +
                                              " does not match repository dimension " +
                                              std::to_string(expected_dim));
  }
  std::vector<QueryTable> out;
  for (auto& [id, mat] : detail::read_records(manifest_path, m)) {
    out.push_back(QueryTable{std::move(mat)});
  }
  return out;
}

inline QueryTable ingest_query(const std::filesystem::path& manifest_path,
                               std::size_t expected_dim = 0) {
  auto all = ingest_queries(manifest_path, expected_dim);
  if (all.size() != 1) {
    throw DataError("malformed_manifest", "query file must hold exactly one record, found " +
                                              std::to_string(all.size()));
  }
  return std::move(all.front());
}

/// Writes matrices as a manifest plus one payload file placed beside it.
inline void export_matrices(const std::filesystem::path& manifest_path,
                            const std::string& payload_name, std::size_t dim,
                            const std::vector<const VectorMatrix*>& matrices) {
  io::Writer payload;
  std::ostringstream manifest;
  manifest << kManifestMagic << "\tdimension=" << dim << "\n";
  std::uint64_t offset = 0;
  for (std::size_t i = 0; i < matrices.size(); ++i) {
    const auto& mat = *matrices[i];
    payload.put_span<float>(mat.values());
    manifest << i << '\t' << mat.rows() << '\t' << payload_name << '\t' << offset << '\n';
    offset += mat.values().size() * sizeof(float);
  }
  const auto dir = manifest_path.parent_path();
  if (!dir.empty()) std::filesystem::create_directories(dir);
  io::write_file(dir / payload_name, payload.bytes());
  const std::string text = manifest.str();
  io::write_file(manifest_path,
                 std::span(reinterpret_cast<const unsigned char*>(text.data()), text.size()));
}

inline void export_repository(const Repository& repo, const std::filesystem::path& manifest_path,
                              const std::string& payload_name = "vectors.f32") {
  std::vector<const VectorMatrix*> mats;
  for (const auto& s : repo.sets()) mats.push_back(&s.vectors);
  export_matrices(manifest_path, payload_name, repo.dim(), mats);
}

inline void export_queries(const std::vector<QueryTable>& queries, std::size_t dim,
                           const std::filesystem::path& manifest_path,
                           const std::string& payload_name = "queries.f32") {
  std::vector<const VectorMatrix*> mats;
  for (const auto& q : queries) mats.push_back(&q.vectors);
  export_matrices(manifest_path, payload_name, dim, mats);
}

// ---------------------------------------------------------------------------
// Synthetic repositories
// ---------------------------------------------------------------------------

struct SyntheticParams {
  std::size_t n_sets = 100;
  std::size_t cols_min = 5;
  std::size_t cols_max = 15;
  std::size_t dim = 32;
  std::size_t n_topics = 10;
  // Expected norm of the noise added to a unit topic direction before
  // renormalizing; per-coordinate sigma is noise / sqrt(dim).
  double noise = 0.1;
  std::uint64_t seed = 7;
};

struct SyntheticCorpus {
  Repository repo;
  VectorMatrix topics;                               // unit-norm topic directions
  std::vector<std::vector<std::uint32_t>> labels;    // topic of every column, per set
};

namespace detail {

inline void validate(const SyntheticParams& p) {
  if (p.n_sets < 1) throw UsageError("invalid_parameter", "n_sets must be >= 1");
  if (p.dim < 2) throw UsageError("invalid_parameter", "dimension must be >= 2");
  if (p.n_topics < 1) throw UsageError("invalid_parameter", "n_topics must be >= 1");
  if (!(p.noise >= 0.0) || !std::isfinite(p.noise)) {
    throw UsageError("invalid_parameter", "noise must be >= 0");
  }
  if (p.cols_min < 1 || p.cols_min > p.cols_max) {
    throw UsageError("invalid_parameter", "columns range must satisfy 1 <= min <= max");
  }
}

// Topic direction plus isotropic Gaussian noise, renormalized. With zero
// noise the stored topic is copied verbatim.
inline void draw_column(std::span<const float> topic, double noise, std::mt19937_64& rng,
                        std::vector<float>& out) {
  const std::size_t d = topic.size();
  if (noise == 0.0) {
    out.insert(out.end(), topic.begin(), topic.end());
    return;
  }
  std::normal_distribution<double> gauss(0.0, noise / std::sqrt(static_cast<double>(d)));
  const std::size_t start = out.size();
  for (std::size_t i = 0; i < d; ++i) {
    out.push_back(static_cast<float>(topic[i] + gauss(rng)));
  }
  normalize_in_place(std::span(out).subspan(start, d), "synthetic column");
}

}  // namespace detail

inline SyntheticCorpus generate_synthetic(const SyntheticParams& p) {
  detail::validate(p);
  std::mt19937_64 rng(p.seed);
  std::normal_distribution<double> unit(0.0, 1.0);

  std::vector<float> topic_values;
  topic_values.reserve(p.n_topics * p.dim);
  for (std::size_t t = 0; t < p.n_topics; ++t) {
    for (std::size_t i = 0; i < p.dim; ++i) topic_values.push_back(static_cast<float>(unit(rng)));
    normalize_in_place(std::span(topic_values).subspan(t * p.dim, p.dim), "topic");
  }
  VectorMatrix topics(p.dim, std::move(topic_values));

  std::uniform_int_distribution<std::size_t> cols(p.cols_min, p.cols_max);
  std::uniform_int_distribution<std::uint32_t> pick_topic(
      0, static_cast<std::uint32_t>(p.n_topics - 1));
  std::vector<VectorSet> sets;
  std::vector<std::vector<std::uint32_t>> labels;
  sets.reserve(p.n_sets);
  for (std::size_t s = 0; s < p.n_sets; ++s) {
    const std::size_t n = cols(rng);
    std::vector<float> values;
    values.reserve(n * p.dim);
    std::vector<std::uint32_t> set_labels;
    for (std::size_t j = 0; j < n; ++j) {
      const auto t = pick_topic(rng);
      set_labels.push_back(t);
      detail::draw_column(topics.row(t), p.noise, rng, values);
    }
    sets.push_back(VectorSet{static_cast<SetId>(s), VectorMatrix(p.dim, std::move(values))});
    labels.push_back(std::move(set_labels));
  }
  return SyntheticCorpus{Repository(p.dim, std::move(sets)), std::move(topics), std::move(labels)};
}

/// Draws query tables that re-sample the topic mix of randomly chosen
/// repository sets with fresh noise, so every query has unionable partners.
inline std::vector<QueryTable> generate_queries(const SyntheticCorpus& corpus,
                                                std::size_t n_queries, double noise,
                                                std::uint64_t seed) {
  if (corpus.repo.size() == 0) throw UsageError("invalid_parameter", "empty corpus");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick_set(0, corpus.repo.size() - 1);
  std::vector<QueryTable> out;
  out.reserve(n_queries);
  for (std::size_t q = 0; q < n_queries; ++q) {
    const auto& labels = corpus.labels[pick_set(rng)];
    std::vector<float> values;
    for (auto t : labels) detail::draw_column(corpus.topics.row(t), noise, rng, values);
    out.push_back(QueryTable{VectorMatrix(corpus.repo.dim(), std::move(values))});
  }
  return out;
}

}  // namespace tus
