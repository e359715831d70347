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

#include "pkre/classifier.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

#include "pkre/error.hpp"

namespace pkre {

namespace {

EntityPairType canonical_no_relation_pair(EntityPairType pair, bool unordered) {
  if (unordered && pair.second < pair.first) std::swap(pair.first, pair.second);
  return pair;
}

}  // namespace

CompatibilityMap CompatibilityMap::from_instances(std::span<const Instance> instances,
                                                  bool unordered_no_relation_pairs) {
  CompatibilityMap cmap;
  cmap.unordered_no_relation_pairs = unordered_no_relation_pairs;
  for (const auto& inst : instances) {
    const EntityPairType pair = entity_pair_type(inst);
    cmap.seen_pairs.insert(pair);
    if (!inst.is_no_relation()) cmap.relations[pair].insert(inst.relation);
    cmap.all_buckets.insert(bucket_for(inst, unordered_no_relation_pairs));
  }
  return cmap;
}

CompatibilityMap CompatibilityMap::from_manifest(const BuildManifest& manifest) {
  CompatibilityMap cmap;
  cmap.unordered_no_relation_pairs = manifest.unordered_no_relation_pairs;
  for (const auto& [pair, labels] : manifest.pair_labels) {
    cmap.seen_pairs.insert(pair);
    for (const auto& label : labels) {
      if (label == kNoRelation) {
        cmap.all_buckets.insert(Bucket::no_relation(
            canonical_no_relation_pair(pair, cmap.unordered_no_relation_pairs)));
      } else {
        cmap.relations[pair].insert(label);
        cmap.all_buckets.insert(Bucket::relation(label));
      }
    }
  }
  return cmap;
}

std::vector<ClassIndexKey> candidate_keys(const EntityPairType& pair,
                                          const CompatibilityMap& cmap,
                                          PatternVariant variant) {
  std::vector<ClassIndexKey> keys;
  if (!cmap.seen_pairs.contains(pair)) {
    for (const auto& b : cmap.all_buckets) keys.push_back({variant, b});
    return keys;
  }
  if (auto it = cmap.relations.find(pair); it != cmap.relations.end()) {
    for (const auto& label : it->second) keys.push_back({variant, Bucket::relation(label)});
  }
  keys.push_back({variant, Bucket::no_relation(canonical_no_relation_pair(
                               pair, cmap.unordered_no_relation_pairs))});
  return keys;
}

std::optional<double> mean_of_top(std::span<const Neighbor> neighbors, std::size_t k) {
  const std::size_t n = std::min(k, neighbors.size());
  if (n == 0) return std::nullopt;
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += neighbors[i].similarity;
  return sum / static_cast<double>(n);
}

std::optional<double> score_class(const ClassIndex& index,
                                  const EmbeddingVector& query, std::size_t k) {
  const auto top = index.top_k(query, k);
  return mean_of_top(top, k);
}

Query render_query(const ParsedInstance& pi, PatternVariant variant,
                   const RenderOptions& render) {
  Query q;
  q.instance_id = pi.instance.id;
  q.pair = entity_pair_type(pi.instance);
  if (variant != PatternVariant::kSentenceFallback && has_dependency_path(pi)) {
    q.family = variant;
    q.text = render_pattern(pi, variant, render).text;
  } else {
    q.family = PatternVariant::kSentenceFallback;
    q.used_fallback = variant != PatternVariant::kSentenceFallback;
    q.text = render_pattern(pi, PatternVariant::kSentenceFallback, render).text;
  }
  return q;
}

std::vector<Query> make_queries(std::span<const ParsedInstance> instances,
                                PatternVariant variant, Embedder& embedder,
                                const RenderOptions& render) {
  std::vector<Query> queries;
  queries.reserve(instances.size());
  std::vector<std::string> texts;
  texts.reserve(instances.size());
  for (const auto& pi : instances) {
    queries.push_back(render_query(pi, variant, render));
    texts.push_back(queries.back().text);
  }
  auto vectors = embedder.embed_batch(texts);
  for (std::size_t i = 0; i < queries.size(); ++i) queries[i].vector = std::move(vectors[i]);
  return queries;
}

std::vector<BucketEvidence> gather_evidence(const Query& query,
                                            const IndexStore& store,
                                            const CompatibilityMap& cmap,
                                            std::size_t max_k) {
  auto collect = [&](const std::vector<ClassIndexKey>& keys) {
    std::vector<BucketEvidence> out;
    for (const auto& key : keys) {
      const ClassIndex* index = store.find(key);
      if (index == nullptr) continue;
      out.push_back({key.bucket, index->top_k(query.vector, max_k)});
    }
    return out;
  };
  auto evidence = collect(candidate_keys(query.pair, cmap, query.family));
  const bool any = std::any_of(evidence.begin(), evidence.end(),
                               [](const auto& e) { return !e.neighbors.empty(); });
  if (!any && max_k > 0) evidence = collect(store.keys(query.family));
  return evidence;
}

Prediction decide(const Query& query, std::span<const BucketEvidence> evidence,
                  std::size_t k) {
  Prediction p;
  p.instance_id = query.instance_id;
  p.used_fallback = query.used_fallback;
  p.family = query.family;
  p.k_used = k;

  const BucketEvidence* best = nullptr;
  double best_mean = 0.0;
  for (const auto& e : evidence) {
    BucketEvidence shown{e.bucket, {}};
    const std::size_t n = std::min(k, e.neighbors.size());
    shown.neighbors.assign(e.neighbors.begin(), e.neighbors.begin() + static_cast<long>(n));
    p.neighbors.push_back(std::move(shown));

    const auto mean = mean_of_top(e.neighbors, k);
    if (!mean) continue;
    p.class_scores[e.bucket.name()] = *mean;
    bool wins = best == nullptr;
    if (!wins) {
      const double top = e.neighbors.front().similarity;
      const double best_top = best->neighbors.front().similarity;
      if (*mean != best_mean) {
        wins = *mean > best_mean;
      } else if (top != best_top) {
        wins = top > best_top;
      } else {
        wins = e.bucket.name() < best->bucket.name();
      }
    }
    if (wins) {
      best = &e;
      best_mean = *mean;
    }
  }
  p.bucket = best != nullptr ? best->bucket : Bucket::no_relation(query.pair);
  p.label = p.bucket.label();
  return p;
}

Prediction classify(const ParsedInstance& pi, const IndexStore& store,
                    const CompatibilityMap& cmap, const ClassifierConfig& cfg,
                    Embedder& embedder) {
  Query q = render_query(pi, cfg.variant, cfg.render);
  q.vector = embedder.embed(q.text);
  const auto evidence = gather_evidence(q, store, cmap, cfg.k);
  return decide(q, evidence, cfg.k);
}

void parallel_for(std::size_t n, std::size_t threads,
                  const std::function<void(std::size_t)>& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, std::max<std::size_t>(n, 1));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  std::vector<std::thread> workers;
  workers.reserve(threads);
  for (std::size_t t = 0; t < threads; ++t) {
    workers.emplace_back([&] {
      while (true) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mu);
          if (!failure) failure = std::current_exception();
          next.store(n);
          return;
        }
      }
    });
  }
  for (auto& w : workers) w.join();
  if (failure) std::rethrow_exception(failure);
}

std::vector<std::vector<BucketEvidence>> gather_evidence_batch(
    std::span<const Query> queries, const IndexStore& store,
    const CompatibilityMap& cmap, std::size_t max_k, std::size_t threads) {
  std::vector<std::vector<BucketEvidence>> out(queries.size());
  parallel_for(queries.size(), threads, [&](std::size_t i) {
    out[i] = gather_evidence(queries[i], store, cmap, max_k);
  });
  return out;
}

std::vector<Prediction> classify_batch(std::span<const ParsedInstance> instances,
                                       const IndexStore& store,
                                       const CompatibilityMap& cmap,
                                       const ClassifierConfig& cfg,
                                       Embedder& embedder, std::size_t threads) {
  const auto queries = make_queries(instances, cfg.variant, embedder, cfg.render);
  std::vector<Prediction> out(queries.size());
  parallel_for(queries.size(), threads, [&](std::size_t i) {
    const auto evidence = gather_evidence(queries[i], store, cmap, cfg.k);
    out[i] = decide(queries[i], evidence, cfg.k);
  });
  return out;
}

nlohmann::json prediction_to_json(const Prediction& p) {
  nlohmann::json scores = nlohmann::json::object();
  for (const auto& [name, score] : p.class_scores) scores[name] = score;
  nlohmann::json neighbors = nlohmann::json::object();
  for (const auto& e : p.neighbors) {
    nlohmann::json list = nlohmann::json::array();
    for (const auto& n : e.neighbors) list.push_back({{"id", n.id}, {"similarity", n.similarity}});
    neighbors[e.bucket.name()] = list;
  }
  return {{"id", p.instance_id},
          {"label", p.label},
          {"bucket", p.bucket.name()},
          {"used_fallback", p.used_fallback},
          {"family", variant_name(p.family)},
          {"k", p.k_used},
          {"scores", scores},
          {"neighbors", neighbors}};
}

}  // namespace pkre
