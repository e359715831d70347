// Copyright 2026 The PKRE Authors.
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

// Class-partitioned exact vector indices. For every pattern variant there is
// one index per relation label plus one per no_relation entity-pair split;
// a parallel family over sentence vectors serves the parse-failure
// fallback.

#ifndef PKRE_CLASS_INDEX_HPP_
#define PKRE_CLASS_INDEX_HPP_

#include <compare>
#include <cstddef>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "pkre/corpus.hpp"
#include "pkre/embedding.hpp"
#include "pkre/pattern.hpp"

namespace pkre {

/// Either a relation label or the no_relation split of one entity-pair type.
class Bucket {
 public:
  Bucket() = default;
  static Bucket relation(std::string label);
  static Bucket no_relation(EntityPairType pair);

  bool is_no_relation() const { return no_relation_; }
  /// The predicted label: the relation, or "no_relation".
  std::string label() const;
  const EntityPairType& pair() const { return pair_; }
  /// Display name: "org:org:acquired_by" or "no_relation[ORG-ORG]".
  std::string name() const;

  auto operator<=>(const Bucket&) const = default;

 private:
  bool no_relation_ = false;
  std::string label_;
  EntityPairType pair_;
};

/// Bucket a labeled instance belongs to. With `unordered_pairs`, the
/// no_relation split uses the lexicographically sorted pair.
Bucket bucket_for(const Instance& instance, bool unordered_pairs = false);

struct ClassIndexKey {
  PatternVariant variant = PatternVariant::kSdp;
  Bucket bucket;

  std::string str() const;
  auto operator<=>(const ClassIndexKey&) const = default;
};

struct Neighbor {
  double similarity = 0.0;
  std::string id;

  bool operator==(const Neighbor&) const = default;
};

/// Orders neighbors by descending similarity, then ascending id.
bool neighbor_before(const Neighbor& a, const Neighbor& b);

class ClassIndex {
 public:
  ClassIndex() = default;
  ClassIndex(ClassIndexKey key, std::size_t dimension);

  const ClassIndexKey& key() const { return key_; }
  std::size_t dimension() const { return dimension_; }
  /// Entries, including retired ones.
  std::size_t size() const { return ids_.size(); }
  /// Entries that take part in search.
  std::size_t active_size() const;

  bool contains(std::string_view id) const;
  const std::string& id(std::size_t i) const { return ids_[i]; }
  std::span<const float> vector(std::size_t i) const {
    return {data_.data() + i * dimension_, dimension_};
  }
  bool is_active(std::size_t i) const { return active_[i] != 0; }

  /// Throws kDuplicateId or kDimensionMismatch.
  void add(std::string id, const EmbeddingVector& vector);
  void add_raw(std::string id, std::span<const float> unit_vector);

  /// Retired entries stay stored but are skipped by search.
  void retire(std::string_view id);
  void reactivate(std::string_view id);

  /// Exact top-min(k, active_size) by cosine similarity, descending, ties
  /// by ascending id.
  std::vector<Neighbor> top_k(const EmbeddingVector& query, std::size_t k) const;
  std::vector<Neighbor> top_k(std::span<const float> query, std::size_t k) const;

  bool operator==(const ClassIndex& other) const;

 private:
  ClassIndexKey key_;
  std::size_t dimension_ = 0;
  std::vector<std::string> ids_;
  std::vector<float> data_;
  std::vector<unsigned char> active_;
  std::unordered_map<std::string, std::size_t> position_;
};

struct BuildManifest {
  std::vector<std::string> source_splits;
  std::vector<PatternVariant> variants;  // families present, incl. fallback
  std::size_t instance_count = 0;
  std::size_t parse_failure_count = 0;
  bool unordered_no_relation_pairs = false;
  /// Every label (incl. no_relation) observed with each entity-pair type
  /// in the build data.
  std::map<EntityPairType, std::set<std::string>> pair_labels;
  /// Free-form configuration echo.
  nlohmann::json config = nlohmann::json::object();

  double parse_failure_fraction() const {
    return instance_count == 0
               ? 0.0
               : static_cast<double>(parse_failure_count) / instance_count;
  }
  bool operator==(const BuildManifest&) const = default;
};

class IndexStore {
 public:
  IndexStore() = default;
  explicit IndexStore(std::size_t dimension) : dimension_(dimension) {}

  std::size_t dimension() const { return dimension_; }
  const std::map<ClassIndexKey, ClassIndex>& indices() const { return indices_; }
  const ClassIndex* find(const ClassIndexKey& key) const;
  ClassIndex& ensure(const ClassIndexKey& key);

  /// Adds one entry; creates the index if needed. Throws kDuplicateId or
  /// kDimensionMismatch.
  void insert(const ClassIndexKey& key, std::string id,
              const EmbeddingVector& vector);

  std::size_t family_size(PatternVariant variant) const;
  std::size_t total_entries() const;
  std::set<PatternVariant> variants() const;
  std::vector<ClassIndexKey> keys(PatternVariant variant) const;

  BuildManifest& manifest() { return manifest_; }
  const BuildManifest& manifest() const { return manifest_; }

  /// Copy keeping only entries whose id is in `keep` (all indices kept,
  /// possibly empty).
  IndexStore filtered(const std::set<std::string>& keep) const;

  /// Manifest plus live per-index counts as JSON.
  nlohmann::json describe() const;

  bool operator==(const IndexStore&) const = default;

 private:
  std::size_t dimension_ = 0;
  std::map<ClassIndexKey, ClassIndex> indices_;
  BuildManifest manifest_;
};

struct BuildOptions {
  RenderOptions render;
  bool unordered_no_relation_pairs = false;
  std::size_t embed_chunk = 512;  // texts per embedding request group
};

/// Builds the SDP families listed in `variants` plus the sentence fallback
/// family. Every family receives one index per bucket observed in the data
/// (empty indices included), so all families have the same cardinality.
/// Embedding failures are rethrown naming the offending instance.
IndexStore build_store(std::span<const ParsedInstance> instances,
                       std::span<const PatternVariant> variants,
                       Embedder& embedder, const BuildOptions& options = {});

/// Index file: "PKRE", u32 version, u32 dimension, u32 variant bit set,
/// u32 bucket count; per bucket the key, u64 entry count and entries
/// (u32 id length, id bytes, dimension f32); then u64 length + manifest
/// JSON.
void persist(const IndexStore& store, const std::string& path);
IndexStore load_store(const std::string& path);

}  // namespace pkre

#endif  // PKRE_CLASS_INDEX_HPP_
