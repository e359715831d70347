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

#include "pkre/class_index.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <fstream>
#include <numeric>

#include "binary_io.hpp"
#include "pkre/error.hpp"

namespace pkre {

using nlohmann::json;

Bucket Bucket::relation(std::string label) {
  if (label == kNoRelation) {
    throw Error(ErrorCode::kInternal, "no_relation needs an entity-pair split");
  }
  Bucket b;
  b.label_ = std::move(label);
  return b;
}

Bucket Bucket::no_relation(EntityPairType pair) {
  Bucket b;
  b.no_relation_ = true;
  b.pair_ = std::move(pair);
  return b;
}

std::string Bucket::label() const {
  return no_relation_ ? std::string(kNoRelation) : label_;
}

std::string Bucket::name() const {
  if (!no_relation_) return label_;
  return std::string(kNoRelation) + "[" + pair_.str() + "]";
}

Bucket bucket_for(const Instance& instance, bool unordered_pairs) {
  if (!instance.is_no_relation()) return Bucket::relation(instance.relation);
  EntityPairType pair = entity_pair_type(instance);
  if (unordered_pairs && pair.second < pair.first) std::swap(pair.first, pair.second);
  return Bucket::no_relation(std::move(pair));
}

std::string ClassIndexKey::str() const {
  return std::string(variant_name(variant)) + "/" + bucket.name();
}

bool neighbor_before(const Neighbor& a, const Neighbor& b) {
  if (a.similarity != b.similarity) return a.similarity > b.similarity;
  return a.id < b.id;
}

ClassIndex::ClassIndex(ClassIndexKey key, std::size_t dimension)
    : key_(std::move(key)), dimension_(dimension) {}

std::size_t ClassIndex::active_size() const {
  return static_cast<std::size_t>(std::count(active_.begin(), active_.end(), 1));
}

bool ClassIndex::contains(std::string_view id) const {
  return position_.contains(std::string(id));
}

void ClassIndex::add(std::string id, const EmbeddingVector& vector) {
  add_raw(std::move(id), vector.values());
}

void ClassIndex::add_raw(std::string id, std::span<const float> unit_vector) {
  if (unit_vector.size() != dimension_) {
    throw Error(ErrorCode::kDimensionMismatch,
                "vector of dimension " + std::to_string(unit_vector.size()) +
                    " for index " + key_.str() + " of dimension " +
                    std::to_string(dimension_));
  }
  if (position_.contains(id)) {
    throw Error(ErrorCode::kDuplicateId, "id " + id + " already in " + key_.str());
  }
  position_.emplace(id, ids_.size());
  ids_.push_back(std::move(id));
  data_.insert(data_.end(), unit_vector.begin(), unit_vector.end());
  active_.push_back(1);
}

void ClassIndex::retire(std::string_view id) {
  auto it = position_.find(std::string(id));
  if (it == position_.end()) {
    throw Error(ErrorCode::kUnknownId, std::string(id) + " not in " + key_.str());
  }
  active_[it->second] = 0;
}

void ClassIndex::reactivate(std::string_view id) {
  auto it = position_.find(std::string(id));
  if (it == position_.end()) {
    throw Error(ErrorCode::kUnknownId, std::string(id) + " not in " + key_.str());
  }
  active_[it->second] = 1;
}

std::vector<Neighbor> ClassIndex::top_k(const EmbeddingVector& query,
                                        std::size_t k) const {
  return top_k(query.values(), k);
}

std::vector<Neighbor> ClassIndex::top_k(std::span<const float> query,
                                        std::size_t k) const {
  if (query.size() != dimension_) {
    throw Error(ErrorCode::kDimensionMismatch,
                "query of dimension " + std::to_string(query.size()) +
                    " against index of dimension " + std::to_string(dimension_));
  }
  struct Scored {
    double sim;
    std::size_t pos;
  };
  std::vector<Scored> scored;
  scored.reserve(ids_.size());
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    if (!active_[i]) continue;
    scored.push_back({dot(query, vector(i)), i});
  }
  const std::size_t n = std::min(k, scored.size());
  auto before = [this](const Scored& a, const Scored& b) {
    if (a.sim != b.sim) return a.sim > b.sim;
    return ids_[a.pos] < ids_[b.pos];
  };
  std::partial_sort(scored.begin(), scored.begin() + static_cast<long>(n),
                    scored.end(), before);
  std::vector<Neighbor> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back({scored[i].sim, ids_[scored[i].pos]});
  }
  return out;
}

bool ClassIndex::operator==(const ClassIndex& other) const {
  return key_ == other.key_ && dimension_ == other.dimension_ &&
         ids_ == other.ids_ && active_ == other.active_ &&
         data_.size() == other.data_.size() &&
         std::equal(data_.begin(), data_.end(), other.data_.begin(),
                    [](float a, float b) {
                      return std::bit_cast<std::uint32_t>(a) ==
                             std::bit_cast<std::uint32_t>(b);
                    });
}

const ClassIndex* IndexStore::find(const ClassIndexKey& key) const {
  auto it = indices_.find(key);
  return it == indices_.end() ? nullptr : &it->second;
}

ClassIndex& IndexStore::ensure(const ClassIndexKey& key) {
  auto it = indices_.find(key);
  if (it == indices_.end()) {
    it = indices_.emplace(key, ClassIndex(key, dimension_)).first;
  }
  return it->second;
}

void IndexStore::insert(const ClassIndexKey& key, std::string id,
                        const EmbeddingVector& vector) {
  if (vector.dimension() != dimension_) {
    throw Error(ErrorCode::kDimensionMismatch,
                "vector of dimension " + std::to_string(vector.dimension()) +
                    " for a store of dimension " + std::to_string(dimension_));
  }
  ensure(key).add(std::move(id), vector);
}

std::size_t IndexStore::family_size(PatternVariant variant) const {
  std::size_t n = 0;
  for (const auto& [key, index] : indices_) n += key.variant == variant;
  return n;
}

std::size_t IndexStore::total_entries() const {
  std::size_t n = 0;
  for (const auto& [key, index] : indices_) n += index.size();
  return n;
}

std::set<PatternVariant> IndexStore::variants() const {
  std::set<PatternVariant> out;
  for (const auto& [key, index] : indices_) out.insert(key.variant);
  return out;
}

std::vector<ClassIndexKey> IndexStore::keys(PatternVariant variant) const {
  std::vector<ClassIndexKey> out;
  for (const auto& [key, index] : indices_) {
    if (key.variant == variant) out.push_back(key);
  }
  return out;
}

IndexStore IndexStore::filtered(const std::set<std::string>& keep) const {
  IndexStore out(dimension_);
  out.manifest_ = manifest_;
  for (const auto& [key, index] : indices_) {
    ClassIndex& dst = out.ensure(key);
    for (std::size_t i = 0; i < index.size(); ++i) {
      if (!keep.contains(index.id(i))) continue;
      dst.add_raw(index.id(i), index.vector(i));
      if (!index.is_active(i)) dst.retire(index.id(i));
    }
  }
  // Recount over what survived: every instance has a fallback entry, and
  // parse failures are the ones missing from the SDP families.
  std::set<std::string> all_ids;
  std::set<std::string> with_path;
  bool has_sdp_family = false;
  for (const auto& [key, index] : out.indices_) {
    const bool fallback = key.variant == PatternVariant::kSentenceFallback;
    has_sdp_family |= !fallback;
    for (std::size_t i = 0; i < index.size(); ++i) {
      (fallback ? all_ids : with_path).insert(index.id(i));
    }
  }
  out.manifest_.instance_count = all_ids.size();
  out.manifest_.parse_failure_count = 0;
  if (has_sdp_family) {
    for (const auto& id : all_ids) out.manifest_.parse_failure_count += !with_path.contains(id);
  }
  return out;
}

namespace {

json manifest_to_json(const BuildManifest& m) {
  json variants = json::array();
  for (PatternVariant v : m.variants) variants.push_back(variant_name(v));
  json pairs = json::array();
  for (const auto& [pair, labels] : m.pair_labels) {
    pairs.push_back({{"e1_type", pair.first}, {"e2_type", pair.second}, {"labels", labels}});
  }
  return json{{"source_splits", m.source_splits},
              {"variants", variants},
              {"instance_count", m.instance_count},
              {"parse_failure_count", m.parse_failure_count},
              {"unordered_no_relation_pairs", m.unordered_no_relation_pairs},
              {"pair_labels", pairs},
              {"config", m.config}};
}

BuildManifest manifest_from_json(const json& j) {
  BuildManifest m;
  m.source_splits = j.at("source_splits").get<std::vector<std::string>>();
  for (const auto& v : j.at("variants")) m.variants.push_back(parse_variant(v.get<std::string>()));
  m.instance_count = j.at("instance_count").get<std::size_t>();
  m.parse_failure_count = j.at("parse_failure_count").get<std::size_t>();
  m.unordered_no_relation_pairs = j.at("unordered_no_relation_pairs").get<bool>();
  for (const auto& p : j.at("pair_labels")) {
    m.pair_labels[{p.at("e1_type").get<std::string>(), p.at("e2_type").get<std::string>()}] =
        p.at("labels").get<std::set<std::string>>();
  }
  m.config = j.at("config");
  return m;
}

}  // namespace

json IndexStore::describe() const {
  json j = manifest_to_json(manifest_);
  j["dimension"] = dimension_;
  j["index_count"] = indices_.size();
  j["parse_failure_fraction"] = manifest_.parse_failure_fraction();
  json families = json::object();
  for (PatternVariant v : variants()) families[std::string(variant_name(v))] = family_size(v);
  j["indices_per_family"] = families;
  json counts = json::object();
  for (const auto& [key, index] : indices_) counts[key.str()] = index.active_size();
  j["counts"] = counts;
  j["total_entries"] = total_entries();
  return j;
}

IndexStore build_store(std::span<const ParsedInstance> instances,
                       std::span<const PatternVariant> variants,
                       Embedder& embedder, const BuildOptions& options) {
  std::vector<PatternVariant> families;
  for (PatternVariant v : variants) {
    if (v != PatternVariant::kSentenceFallback &&
        std::find(families.begin(), families.end(), v) == families.end()) {
      families.push_back(v);
    }
  }
  std::sort(families.begin(), families.end());
  families.push_back(PatternVariant::kSentenceFallback);

  IndexStore store(embedder.dimension());
  BuildManifest& manifest = store.manifest();
  manifest.variants = families;
  manifest.instance_count = instances.size();
  manifest.unordered_no_relation_pairs = options.unordered_no_relation_pairs;

  std::set<std::string> splits;
  std::set<Bucket> buckets;
  for (const auto& pi : instances) {
    splits.insert(std::string(split_name(pi.instance.split)));
    buckets.insert(bucket_for(pi.instance, options.unordered_no_relation_pairs));
    manifest.pair_labels[entity_pair_type(pi.instance)].insert(pi.instance.relation);
  }
  for (Split s : {Split::kTrain, Split::kDev, Split::kPublicTest}) {
    if (splits.contains(std::string(split_name(s)))) {
      manifest.source_splits.emplace_back(split_name(s));
    }
  }
  for (PatternVariant v : families) {
    for (const auto& b : buckets) store.ensure({v, b});
  }

  // Rendered texts per instance, in family order.
  struct Job {
    std::size_t instance;
    PatternVariant variant;
    std::string text;
  };
  std::vector<Job> jobs;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    const ParsedInstance& pi = instances[i];
    const bool has_path = has_dependency_path(pi);
    if (!has_path) ++manifest.parse_failure_count;
    for (PatternVariant v : families) {
      if (v != PatternVariant::kSentenceFallback && !has_path) continue;
      jobs.push_back({i, v, render_pattern(pi, v, options.render).text});
    }
  }

  const std::size_t chunk = std::max<std::size_t>(1, options.embed_chunk);
  for (std::size_t at = 0; at < jobs.size(); at += chunk) {
    const std::size_t end = std::min(jobs.size(), at + chunk);
    std::vector<std::string> texts;
    for (std::size_t j = at; j < end; ++j) texts.push_back(jobs[j].text);
    std::vector<EmbeddingVector> vectors;
    try {
      vectors = embedder.embed_batch(texts);
    } catch (const Error& e) {
      // Pinpoint the first failing instance in this chunk.
      for (std::size_t j = at; j < end; ++j) {
        try {
          embedder.embed(jobs[j].text);
        } catch (const Error& inner) {
          throw Error(inner.code(), "instance " + instances[jobs[j].instance].instance.id +
                                        " (" + std::string(variant_name(jobs[j].variant)) +
                                        "): " + inner.what());
        }
      }
      throw;
    }
    for (std::size_t j = at; j < end; ++j) {
      const Instance& inst = instances[jobs[j].instance].instance;
      store.insert({jobs[j].variant, bucket_for(inst, options.unordered_no_relation_pairs)},
                   inst.id, vectors[j - at]);
    }
  }
  return store;
}

namespace {

constexpr char kIndexMagic[4] = {'P', 'K', 'R', 'E'};
constexpr std::uint32_t kIndexVersion = 1;

}  // namespace

void persist(const IndexStore& store, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write index file: " + path);
  io::Writer w(out);
  w.bytes(kIndexMagic, 4);
  w.put<std::uint32_t>(kIndexVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(store.dimension()));
  std::uint32_t mask = 0;
  for (PatternVariant v : store.manifest().variants) mask |= 1u << static_cast<unsigned>(v);
  for (PatternVariant v : store.variants()) mask |= 1u << static_cast<unsigned>(v);
  w.put<std::uint32_t>(mask);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(store.indices().size()));

  json retired = json::object();
  for (const auto& [key, index] : store.indices()) {
    w.put<std::uint8_t>(static_cast<std::uint8_t>(key.variant));
    w.put<std::uint8_t>(key.bucket.is_no_relation() ? 1 : 0);
    w.str(key.bucket.is_no_relation() ? std::string() : key.bucket.label());
    w.str(key.bucket.pair().first);
    w.str(key.bucket.pair().second);
    w.put<std::uint64_t>(index.size());
    for (std::size_t i = 0; i < index.size(); ++i) {
      w.str(index.id(i));
      w.floats(index.vector(i));
      if (!index.is_active(i)) retired[key.str()].push_back(index.id(i));
    }
  }
  json trailer = manifest_to_json(store.manifest());
  trailer["retired"] = retired;
  const std::string text = trailer.dump(1);
  w.put<std::uint64_t>(text.size());
  w.bytes(text.data(), text.size());
  if (!out) throw Error(ErrorCode::kIo, "write failed: " + path);
}

IndexStore load_store(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read index file: " + path);
  io::Reader r(in, path);
  char magic[4];
  r.bytes(magic, 4);
  if (!std::equal(magic, magic + 4, kIndexMagic)) {
    throw Error(ErrorCode::kFormat, path + ": not an index file (bad magic)");
  }
  const auto version = r.get<std::uint32_t>();
  if (version != kIndexVersion) {
    throw Error(ErrorCode::kFormat,
                path + ": unsupported index format version " + std::to_string(version));
  }
  IndexStore store(r.get<std::uint32_t>());
  r.get<std::uint32_t>();  // variant mask, informational
  const auto buckets = r.get<std::uint32_t>();
  std::vector<float> scratch(store.dimension());
  for (std::uint32_t b = 0; b < buckets; ++b) {
    const auto variant = r.get<std::uint8_t>();
    if (variant > static_cast<std::uint8_t>(PatternVariant::kSentenceFallback)) {
      throw Error(ErrorCode::kFormat, path + ": bad variant tag");
    }
    const bool norel = r.get<std::uint8_t>() != 0;
    std::string label = r.str();
    EntityPairType pair{r.str(), r.str()};
    ClassIndexKey key{static_cast<PatternVariant>(variant),
                      norel ? Bucket::no_relation(pair) : Bucket::relation(label)};
    ClassIndex& index = store.ensure(key);
    const auto entries = r.get<std::uint64_t>();
    for (std::uint64_t e = 0; e < entries; ++e) {
      std::string id = r.str();
      r.floats(scratch);
      index.add_raw(std::move(id), scratch);
    }
  }
  const auto len = r.get<std::uint64_t>();
  if (len > (1ull << 32)) throw Error(ErrorCode::kFormat, path + ": corrupt manifest length");
  std::string text(len, '\0');
  r.bytes(text.data(), len);
  try {
    json trailer = json::parse(text);
    store.manifest() = manifest_from_json(trailer);
    std::map<std::string, ClassIndexKey> by_name;
    for (const auto& [key, index] : store.indices()) by_name.emplace(key.str(), key);
    for (const auto& [key_str, ids] : trailer.at("retired").items()) {
      auto it = by_name.find(key_str);
      if (it == by_name.end()) {
        throw Error(ErrorCode::kFormat, path + ": retired entry for unknown index " + key_str);
      }
      for (const auto& id : ids) store.ensure(it->second).retire(id.get<std::string>());
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kFormat, path + ": bad manifest: " + e.what());
  }
  return store;
}

}  // namespace pkre
