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

#include <cmath>
#include <random>

#include "doctest.h"
#include "fixtures.hpp"
#include "pkre/classifier.hpp"
#include "pkre/error.hpp"

using namespace pkre;
using pkre::testing::make_instance;

namespace {

// Unit vector in the (e0, e1) plane whose cosine with e0 is `s`.
std::vector<float> at_cosine(double s, std::size_t d = 4) {
  std::vector<float> v(d, 0.0f);
  v[0] = static_cast<float>(s);
  v[1] = static_cast<float>(std::sqrt(1.0 - s * s));
  return v;
}

EmbeddingVector axis(std::size_t d = 4) {
  std::vector<float> v(d, 0.0f);
  v[0] = 1.0f;
  return normalize(v);
}

// Similarity exactly as the index computes it for the stored float vector.
double stored_cosine(double s) {
  const auto v = at_cosine(s);
  return static_cast<double>(v[0]);
}

Query query_for(const EntityPairType& pair, PatternVariant family = PatternVariant::kSdp) {
  Query q;
  q.instance_id = "q";
  q.pair = pair;
  q.family = family;
  q.vector = axis();
  return q;
}

const EntityPairType kOrgOrg{"ORG", "ORG"};

}  // namespace

TEST_SUITE("classifier") {

TEST_CASE("candidate keys follow training co-occurrence") {
  const std::vector<Instance> train = {
      make_instance("1", "a b", {0, 1}, {1, 2}, "ORG", "ORG", "L1"),
      make_instance("2", "a b", {0, 1}, {1, 2}, "ORG", "ORG", "L2"),
      make_instance("3", "a b", {0, 1}, {1, 2}, "ORG", "ORG", "no_relation"),
      make_instance("4", "a b", {0, 1}, {1, 2}, "PERSON", "ORG", "L3"),
      make_instance("5", "a b", {0, 1}, {1, 2}, "ORG", "DATE", "no_relation")};
  const CompatibilityMap cmap = CompatibilityMap::from_instances(train);
  const PatternVariant v = PatternVariant::kSdpDep;

  const auto seen = candidate_keys(kOrgOrg, cmap, v);
  REQUIRE(seen.size() == 3);
  CHECK(seen[0].bucket.name() == "L1");
  CHECK(seen[1].bucket.name() == "L2");
  CHECK(seen[2].bucket.name() == "no_relation[ORG-ORG]");
  for (const auto& k : seen) CHECK(k.variant == v);

  const auto only_nr = candidate_keys({"ORG", "DATE"}, cmap, v);
  REQUIRE(only_nr.size() == 1);
  CHECK(only_nr[0].bucket.is_no_relation());

  // PERSON-ORG never occurred as no_relation, yet NoRel(pair) is still a candidate.
  CHECK(candidate_keys({"PERSON", "ORG"}, cmap, v).size() == 2);

  const auto unseen = candidate_keys({"GPE", "MONEY"}, cmap, v);
  CHECK(unseen.size() == cmap.all_buckets.size());
  CHECK(unseen.size() == 5);
}

TEST_CASE("unseen pair on REFinD-like data searches all 29 buckets") {
  std::vector<Instance> train;
  for (const auto& pi : pkre::testing::synthetic_corpus(200, 2)) train.push_back(pi.instance);
  const CompatibilityMap cmap = CompatibilityMap::from_instances(train);
  CHECK(candidate_keys({"DATE", "DATE"}, cmap, PatternVariant::kSdp).size() == 29);
}

TEST_CASE("compatibility from a manifest matches compatibility from instances") {
  const auto data = pkre::testing::synthetic_corpus(120, 6);
  std::vector<Instance> plain;
  for (const auto& pi : data) plain.push_back(pi.instance);
  auto embedder = pkre::testing::hash_embedder(8);
  const std::vector<PatternVariant> variants{PatternVariant::kSdp};
  const IndexStore store = build_store(data, variants, *embedder);
  const CompatibilityMap a = CompatibilityMap::from_instances(plain);
  const CompatibilityMap b = CompatibilityMap::from_manifest(store.manifest());
  CHECK(a.relations == b.relations);
  CHECK(a.seen_pairs == b.seen_pairs);
  CHECK(a.all_buckets == b.all_buckets);
}

TEST_CASE("score_class arithmetic") {
  ClassIndex one({PatternVariant::kSdp, Bucket::relation("L")}, 4);
  one.add("self", axis());
  CHECK(*score_class(one, axis(), 5) == doctest::Approx(1.0).epsilon(1e-12));

  ClassIndex three({PatternVariant::kSdp, Bucket::relation("L")}, 4);
  three.add_raw("a", at_cosine(0.9));
  three.add_raw("b", at_cosine(0.5));
  three.add_raw("c", at_cosine(0.1));
  const double expected = (stored_cosine(0.9) + stored_cosine(0.5)) / 2.0;
  CHECK(*score_class(three, axis(), 2) == expected);
  CHECK(*score_class(three, axis(), 2) == doctest::Approx(0.7).epsilon(1e-7));

  ClassIndex empty({PatternVariant::kSdp, Bucket::relation("L")}, 4);
  CHECK_FALSE(score_class(empty, axis(), 3).has_value());
}

TEST_CASE("two-bucket fixture flips between K=1 and K=2") {
  IndexStore store(4);
  const ClassIndexKey a{PatternVariant::kSdp, Bucket::relation("A")};
  const ClassIndexKey b{PatternVariant::kSdp, Bucket::relation("B")};
  store.ensure(a).add_raw("a1", at_cosine(0.8));
  store.ensure(a).add_raw("a2", at_cosine(0.6));
  store.ensure(b).add_raw("b1", at_cosine(0.9));
  store.ensure(b).add_raw("b2", at_cosine(0.3));
  CompatibilityMap cmap;
  cmap.seen_pairs.insert(kOrgOrg);
  cmap.relations[kOrgOrg] = {"A", "B"};
  cmap.all_buckets = {a.bucket, b.bucket};

  const Query q = query_for(kOrgOrg);
  const auto evidence = gather_evidence(q, store, cmap, 2);

  const Prediction k2 = decide(q, evidence, 2);
  CHECK(k2.label == "A");
  CHECK(k2.class_scores.at("A") == (stored_cosine(0.8) + stored_cosine(0.6)) / 2.0);
  CHECK(k2.class_scores.at("B") == (stored_cosine(0.9) + stored_cosine(0.3)) / 2.0);
  CHECK(k2.class_scores.at("A") == doctest::Approx(0.7).epsilon(1e-7));
  CHECK(k2.class_scores.at("B") == doctest::Approx(0.6).epsilon(1e-7));

  const Prediction k1 = decide(q, evidence, 1);
  CHECK(k1.label == "B");
  CHECK(k1.class_scores.at("A") == doctest::Approx(0.8).epsilon(1e-7));
  CHECK(k1.class_scores.at("B") == doctest::Approx(0.9).epsilon(1e-7));
  CHECK(k1.neighbors[1].neighbors.size() == 1);
}

TEST_CASE("ties: best single similarity, then bucket name") {
  const Query q = query_for(kOrgOrg);
  std::vector<BucketEvidence> ev = {
      {Bucket::relation("Z"), {{0.9, "z1"}, {0.5, "z2"}}},
      {Bucket::relation("M"), {{0.7, "m1"}, {0.7, "m2"}}},
  };
  CHECK(decide(q, ev, 2).label == "Z");  // equal means 0.7, Z has 0.9 on top
  ev[0].neighbors = {{0.7, "z1"}, {0.7, "z2"}};
  CHECK(decide(q, ev, 2).label == "M");  // full tie, smaller name
}

TEST_CASE("empty buckets never win, even against negative scores") {
  const Query q = query_for(kOrgOrg);
  const std::vector<BucketEvidence> ev = {
      {Bucket::relation("Empty"), {}},
      {Bucket::relation("Neg"), {{-0.4, "n1"}}},
  };
  const Prediction p = decide(q, ev, 3);
  CHECK(p.label == "Neg");
  CHECK_FALSE(p.class_scores.contains("Empty"));
}

TEST_CASE("no evidence anywhere predicts no_relation for the pair") {
  const Query q = query_for(kOrgOrg);
  const Prediction p = decide(q, {}, 3);
  CHECK(p.label == "no_relation");
  CHECK(p.bucket.name() == "no_relation[ORG-ORG]");
}

TEST_CASE("empty candidates widen the search to the whole family") {
  IndexStore store(4);
  const ClassIndexKey far{PatternVariant::kSdp, Bucket::relation("Far")};
  const ClassIndexKey near{PatternVariant::kSdp, Bucket::relation("Near")};
  store.ensure(far).add_raw("f", at_cosine(0.2));
  store.ensure({PatternVariant::kSdp, Bucket::no_relation(kOrgOrg)});  // empty
  store.ensure(near);                                                  // empty
  CompatibilityMap cmap;
  cmap.seen_pairs.insert(kOrgOrg);
  cmap.relations[kOrgOrg] = {"Near"};
  cmap.all_buckets = {far.bucket, near.bucket, Bucket::no_relation(kOrgOrg)};
  const Query q = query_for(kOrgOrg);
  const Prediction p = decide(q, gather_evidence(q, store, cmap, 3), 3);
  CHECK(p.label == "Far");
}

TEST_CASE("argmax is invariant to positive scaling of similarities") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const Query q = query_for(kOrgOrg);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<BucketEvidence> ev;
    for (int b = 0; b < 4; ++b) {
      BucketEvidence e{Bucket::relation("B" + std::to_string(b)), {}};
      const int n = static_cast<int>(rng() % 6);
      for (int i = 0; i < n; ++i) e.neighbors.push_back({u(rng), "x" + std::to_string(i)});
      std::sort(e.neighbors.begin(), e.neighbors.end(), neighbor_before);
      ev.push_back(e);
    }
    auto scaled = ev;
    const double c = 0.25 * static_cast<double>(1 + rng() % 8);  // exact binary scale
    for (auto& e : scaled) {
      for (auto& n : e.neighbors) n.similarity *= c;
    }
    for (std::size_t k : {1u, 3u, 5u}) CHECK(decide(q, ev, k).label == decide(q, scaled, k).label);
  }
}

TEST_CASE("single-bucket score is non-increasing in K") {
  std::mt19937_64 rng(23);
  ClassIndex index({PatternVariant::kSdp, Bucket::relation("L")}, 4);
  for (int i = 0; i < 40; ++i) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    index.add_raw("e" + std::to_string(i), at_cosine(u(rng)));
  }
  double previous = 2.0;
  for (std::size_t k = 1; k <= 45; ++k) {
    const double s = *score_class(index, axis(), k);
    CHECK(s <= previous + 1e-15);
    previous = s;
  }
}

TEST_CASE("self-retrieval and the sentence fallback") {
  const auto data = pkre::testing::synthetic_corpus(150, 4);
  auto embedder = pkre::testing::hash_embedder(32);
  const IndexStore store = build_store(data, kSdpVariants, *embedder);
  std::vector<Instance> plain;
  for (const auto& pi : data) plain.push_back(pi.instance);
  const CompatibilityMap cmap = CompatibilityMap::from_instances(plain);

  std::size_t checked_fallback = 0;
  for (const auto& pi : data) {
    const ClassifierConfig cfg{PatternVariant::kSdpDepNer, 1, {}};
    const Prediction p = classify(pi, store, cmap, cfg, *embedder);
    CHECK(p.used_fallback == !has_dependency_path(pi));
    CHECK(p.family == (p.used_fallback ? PatternVariant::kSentenceFallback : PatternVariant::kSdpDepNer));
    // With K=1 the instance's own pattern sits in its gold bucket at cosine
    // 1; the prediction can only differ when another instance renders to
    // the very same text.
    CHECK(p.class_scores.at(bucket_for(pi.instance).name()) == doctest::Approx(1.0).epsilon(1e-6));
    checked_fallback += p.used_fallback;
  }
  CHECK(checked_fallback > 0);
}

TEST_CASE("batch classification is identical across thread counts") {
  const auto data = pkre::testing::synthetic_corpus(300, 12);
  const auto queries_data = pkre::testing::synthetic_corpus(200, 13, Split::kDev, "d");
  auto embedder = pkre::testing::hash_embedder(16);
  const IndexStore store = build_store(data, kSdpVariants, *embedder);
  const CompatibilityMap cmap = CompatibilityMap::from_manifest(store.manifest());
  const ClassifierConfig cfg{PatternVariant::kSdpDep, 5, {}};
  const auto one = classify_batch(queries_data, store, cmap, cfg, *embedder, 1);
  const auto many = classify_batch(queries_data, store, cmap, cfg, *embedder, 8);
  REQUIRE(one.size() == queries_data.size());
  CHECK(one == many);
  for (std::size_t i = 0; i < one.size(); ++i) {
    CHECK(one[i].instance_id == queries_data[i].instance.id);
    CHECK(prediction_to_json(one[i]).dump() == prediction_to_json(many[i]).dump());
  }
}

TEST_CASE("prediction record fields") {
  const Query q = query_for(kOrgOrg);
  const std::vector<BucketEvidence> ev = {{Bucket::relation("A"), {{0.5, "a1"}, {0.25, "a2"}}}};
  const auto j = prediction_to_json(decide(q, ev, 1));
  CHECK(j.at("id") == "q");
  CHECK(j.at("label") == "A");
  CHECK(j.at("k") == 1);
  CHECK(j.at("used_fallback") == false);
  CHECK(j.at("scores").at("A") == 0.5);
  CHECK(j.at("neighbors").at("A").size() == 1);
}

TEST_CASE("parallel_for propagates the first failure") {
  std::atomic<int> ran{0};
  CHECK_THROWS_AS(parallel_for(100, 4,
                               [&](std::size_t i) {
                                 ++ran;
                                 if (i == 10) throw Error(ErrorCode::kInternal, "boom");
                               }),
                  Error);
  std::vector<int> seen(1000, 0);
  parallel_for(1000, 0, [&](std::size_t i) { seen[i] += 1; });
  CHECK(std::all_of(seen.begin(), seen.end(), [](int x) { return x == 1; }));
}

}  // TEST_SUITE
