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

// Nearest-neighbor relation classifier. A query vector is searched in every
// candidate class index for its entity-pair type; each class scores the mean
// of its top-K cosine similarities and the best class wins.

#ifndef PKRE_CLASSIFIER_HPP_
#define PKRE_CLASSIFIER_HPP_

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "pkre/class_index.hpp"
#include "pkre/corpus.hpp"
#include "pkre/embedding.hpp"
#include "pkre/pattern.hpp"

namespace pkre {

/// Which relation classes are plausible for each entity-pair type, from
/// training co-occurrence.
struct CompatibilityMap {
  std::map<EntityPairType, std::set<std::string>> relations;  // excl. no_relation
  std::set<EntityPairType> seen_pairs;
  std::set<Bucket> all_buckets;
  bool unordered_no_relation_pairs = false;

  static CompatibilityMap from_instances(std::span<const Instance> instances,
                                         bool unordered_no_relation_pairs = false);
  static CompatibilityMap from_manifest(const BuildManifest& manifest);
};

/// Compatible relation buckets plus NoRel(pair); every bucket of the
/// variant's family when the pair was never seen.
std::vector<ClassIndexKey> candidate_keys(const EntityPairType& pair,
                                          const CompatibilityMap& cmap,
                                          PatternVariant variant);

/// Mean of the first min(k, n) similarities of a descending list;
/// nullopt when the list is empty or k == 0.
std::optional<double> mean_of_top(std::span<const Neighbor> neighbors, std::size_t k);

/// Mean of the top-min(k, |index|) similarities; nullopt for an empty index.
std::optional<double> score_class(const ClassIndex& index,
                                  const EmbeddingVector& query, std::size_t k);

struct BucketEvidence {
  Bucket bucket;
  std::vector<Neighbor> neighbors;  // descending

  bool operator==(const BucketEvidence&) const = default;
};

struct Prediction {
  std::string instance_id;
  std::string label;
  Bucket bucket;                                // winning bucket
  std::map<std::string, double> class_scores;   // bucket name -> mean top-K
  bool used_fallback = false;
  PatternVariant family = PatternVariant::kSdp;  // index family searched
  std::vector<BucketEvidence> neighbors;        // per candidate, top-K
  std::size_t k_used = 0;

  bool operator==(const Prediction&) const = default;
};

struct ClassifierConfig {
  PatternVariant variant = PatternVariant::kSdpDepNer;
  std::size_t k = 14;
  RenderOptions render;
};

/// A rendered and embedded query, reusable across K values.
struct Query {
  std::string instance_id;
  EntityPairType pair;
  PatternVariant family = PatternVariant::kSdp;
  bool used_fallback = false;
  std::string text;
  EmbeddingVector vector;
};

/// Pattern text for the configured variant, or the sentence when the
/// instance has no dependency path.
Query render_query(const ParsedInstance& pi, PatternVariant variant,
                   const RenderOptions& render);

/// Renders and embeds all queries with one batched embedding call.
std::vector<Query> make_queries(std::span<const ParsedInstance> instances,
                                PatternVariant variant, Embedder& embedder,
                                const RenderOptions& render = {});

/// Top-max_k evidence from every candidate bucket. When no candidate has
/// any entry, every bucket of the family is searched instead.
std::vector<BucketEvidence> gather_evidence(const Query& query,
                                            const IndexStore& store,
                                            const CompatibilityMap& cmap,
                                            std::size_t max_k);

/// Scores each bucket by the mean of its first k neighbors and picks the
/// winner: highest mean, then highest single similarity, then smallest
/// bucket name. Buckets without neighbors never win. With no evidence at
/// all, predicts NoRel(pair).
Prediction decide(const Query& query, std::span<const BucketEvidence> evidence,
                  std::size_t k);

Prediction classify(const ParsedInstance& pi, const IndexStore& store,
                    const CompatibilityMap& cmap, const ClassifierConfig& cfg,
                    Embedder& embedder);

/// Evidence for many queries; output order follows input order for any
/// thread count. threads == 0 means hardware concurrency.
std::vector<std::vector<BucketEvidence>> gather_evidence_batch(
    std::span<const Query> queries, const IndexStore& store,
    const CompatibilityMap& cmap, std::size_t max_k, std::size_t threads);

std::vector<Prediction> classify_batch(std::span<const ParsedInstance> instances,
                                       const IndexStore& store,
                                       const CompatibilityMap& cmap,
                                       const ClassifierConfig& cfg,
                                       Embedder& embedder, std::size_t threads);

/// One line of the prediction dump.
nlohmann::json prediction_to_json(const Prediction& p);

/// Runs fn(i) for i in [0, n) on up to `threads` workers.
void parallel_for(std::size_t n, std::size_t threads,
                  const std::function<void(std::size_t)>& fn);

}  // namespace pkre

#endif  // PKRE_CLASSIFIER_HPP_
