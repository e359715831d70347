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

#include <algorithm>
#include <random>

#include "doctest.h"
#include "fixtures.hpp"
#include "pkre/error.hpp"
#include "pkre/eval.hpp"

using namespace pkre;
using pkre::testing::make_instance;

namespace {

// Straight-from-the-definition F1 over parallel label lists.
struct OracleScores {
  double micro = 0.0;
  double macro = 0.0;
};

OracleScores oracle_f1(const std::vector<std::string>& gold, const std::vector<std::string>& pred,
                       bool include_nr) {
  std::set<std::string> labels(gold.begin(), gold.end());
  labels.insert(pred.begin(), pred.end());
  auto f = [](double tp, double fp, double fn) {
    const double p = tp + fp > 0 ? tp / (tp + fp) : 0.0;
    const double r = tp + fn > 0 ? tp / (tp + fn) : 0.0;
    return p + r > 0 ? 2 * p * r / (p + r) : 0.0;
  };
  double tp_all = 0, fp_all = 0, fn_all = 0, macro = 0;
  int n = 0;
  for (const auto& l : labels) {
    if (!include_nr && l == "no_relation") continue;
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < gold.size(); ++i) {
      if (pred[i] == l && gold[i] == l) ++tp;
      if (pred[i] == l && gold[i] != l) ++fp;
      if (pred[i] != l && gold[i] == l) ++fn;
    }
    tp_all += tp;
    fp_all += fp;
    fn_all += fn;
    macro += f(tp, fp, fn);
    ++n;
  }
  return {f(tp_all, fp_all, fn_all), n ? macro / n : 0.0};
}

LabelMap as_map(const std::vector<std::string>& labels) {
  LabelMap m;
  for (std::size_t i = 0; i < labels.size(); ++i) m["i" + std::to_string(100 + i)] = labels[i];
  return m;
}

std::vector<Instance> plain(const std::vector<ParsedInstance>& data) {
  std::vector<Instance> out;
  for (const auto& pi : data) out.push_back(pi.instance);
  return out;
}

}  // namespace

TEST_SUITE("eval") {

TEST_CASE("toy F1 against the definition and by hand") {
  const std::vector<std::string> gold{"A", "A", "B", "no_relation"};
  const std::vector<std::string> pred{"A", "B", "B", "no_relation"};
  const auto micro = f1_report(as_map(pred), as_map(gold), MetricMode::kMicro, true);
  CHECK(micro.micro_f1 == doctest::Approx(0.75));  // accuracy
  CHECK(micro.headline() == micro.micro_f1);
  // A: P 1, R 1/2; B: P 1/2, R 1; no_relation perfect.
  CHECK(micro.macro_f1 == doctest::Approx((2.0 / 3 + 2.0 / 3 + 1.0) / 3));
  CHECK(micro.macro_f1 == doctest::Approx(oracle_f1(gold, pred, true).macro));

  const auto excl = f1_report(as_map(pred), as_map(gold), MetricMode::kMacro, false);
  CHECK(excl.micro_f1 == doctest::Approx(2.0 / 3));
  CHECK(excl.macro_f1 == doctest::Approx(2.0 / 3));
  CHECK(excl.headline() == excl.macro_f1);
  CHECK(excl.per_class.at("A").support == 2);
  CHECK(excl.confusion.at("A").at("B") == 1);
}

TEST_CASE("random label lists agree with the oracle") {
  std::mt19937_64 rng(41);
  const std::vector<std::string> pool{"A", "B", "C", "D", "no_relation"};
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng() % 60;
    std::vector<std::string> gold(n), pred(n);
    for (std::size_t i = 0; i < n; ++i) {
      gold[i] = pool[rng() % pool.size()];
      pred[i] = pool[rng() % pool.size()];
    }
    for (bool nr : {true, false}) {
      const auto r = f1_report(as_map(pred), as_map(gold), MetricMode::kMicro, nr);
      const auto o = oracle_f1(gold, pred, nr);
      CHECK(r.micro_f1 == doctest::Approx(o.micro).epsilon(1e-12));
      CHECK(r.macro_f1 == doctest::Approx(o.macro).epsilon(1e-12));
    }
  }
}

TEST_CASE("perfect predictions score 1 and mismatched ids are rejected") {
  const std::vector<std::string> gold{"A", "B", "no_relation"};
  const auto r = f1_report(as_map(gold), as_map(gold), MetricMode::kMacro, true);
  CHECK(r.micro_f1 == 1.0);
  CHECK(r.macro_f1 == 1.0);

  LabelMap missing = as_map(gold);
  missing.erase(missing.begin());
  try {
    f1_report(missing, as_map(gold), MetricMode::kMicro, true);
    FAIL("expected an id mismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kIdMismatch);
  }
  LabelMap renamed = as_map(gold);
  renamed["zz"] = renamed.begin()->second;
  renamed.erase(renamed.begin());
  CHECK_THROWS_AS(f1_report(renamed, as_map(gold), MetricMode::kMicro, true), Error);
}

TEST_CASE("report serializations carry the headline numbers") {
  const auto r = f1_report(as_map({"A", "B"}), as_map({"A", "A"}), MetricMode::kMicro, true);
  const auto j = r.to_json();
  CHECK(j.at("micro_f1") == r.micro_f1);
  CHECK(j.at("per_class").contains("A"));
  CHECK(r.to_text().find("micro") != std::string::npos);
  CHECK(parse_metric(metric_name(MetricMode::kMacro)) == MetricMode::kMacro);
  CHECK_THROWS_AS(parse_metric("weighted"), Error);
}

TEST_CASE("cached K sweep equals classifying independently at every K") {
  const auto train = pkre::testing::synthetic_corpus(400, 31);
  const auto dev = pkre::testing::synthetic_corpus(200, 32, Split::kDev, "d");
  auto embedder = pkre::testing::hash_embedder(16);
  const IndexStore store = build_store(train, kSdpVariants, *embedder);
  const auto cmap = CompatibilityMap::from_manifest(store.manifest());
  const auto queries = make_queries(dev, PatternVariant::kSdpNer, *embedder);
  const LabelMap gold = gold_labels(dev);

  SweepOptions opt;
  opt.threads = 3;
  const SweepResult sweep = sweep_k(queries, gold, store, cmap, PatternVariant::kSdpNer, opt, "dev");
  REQUIRE(sweep.points.size() == 20);
  double best = -1.0;
  for (const auto& [k, f1] : sweep.points) {
    std::vector<Prediction> preds;
    for (const auto& q : queries) preds.push_back(decide(q, gather_evidence(q, store, cmap, k), k));
    CHECK(f1 == f1_report(preds, gold, MetricMode::kMicro, true).micro_f1);
    best = std::max(best, f1);
  }
  CHECK(sweep.chosen_f1 == best);
  const auto first_best = std::find_if(sweep.points.begin(), sweep.points.end(),
                                       [&](const auto& p) { return p.second == best; });
  CHECK(sweep.chosen_k == first_best->first);
  CHECK(sweep.to_json().at("points").size() == 20);

  SweepOptions bad;
  bad.k_min = 5;
  bad.k_max = 4;
  CHECK_THROWS_AS(sweep_k(queries, gold, store, cmap, PatternVariant::kSdpNer, bad, "dev"), Error);
}

TEST_CASE("querying the training set with unique patterns is perfect at K=1") {
  const auto train = pkre::testing::synthetic_corpus(300, 33);
  auto embedder = pkre::testing::hash_embedder(32);
  const IndexStore store = build_store(train, kSdpVariants, *embedder);
  const auto cmap = CompatibilityMap::from_manifest(store.manifest());
  const auto all = make_queries(train, PatternVariant::kSdpDep, *embedder);
  std::map<std::string, int> text_count;
  for (const auto& q : all) ++text_count[q.text];
  std::vector<Query> unique;
  LabelMap gold;
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (text_count[all[i].text] != 1) continue;
    unique.push_back(all[i]);
    gold[all[i].instance_id] = train[i].instance.relation;
  }
  REQUIRE(unique.size() > 50);
  SweepOptions opt;
  opt.k_max = 1;
  const auto sweep = sweep_k(unique, gold, store, cmap, PatternVariant::kSdpDep, opt, "train");
  CHECK(sweep.points.at(0).second == 1.0);
}

TEST_CASE("holdout split is a deterministic partition") {
  const auto data = pkre::testing::synthetic_corpus(101, 3);
  const auto [rest, held] = split_holdout(data, 0.1, 9);
  CHECK(held.size() == 10);
  CHECK(rest.size() + held.size() == data.size());
  std::set<std::string> ids;
  for (const auto& pi : rest) ids.insert(pi.instance.id);
  for (const auto& pi : held) CHECK(ids.insert(pi.instance.id).second);
  const auto again = split_holdout(data, 0.1, 9);
  CHECK(again.second == held);
  CHECK_THROWS_AS(split_holdout(data, 1.5, 9), Error);
}

TEST_CASE("bounded draws stay in range and look uniform") {
  DeterministicRng rng(77);
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 70000; ++i) {
    const auto x = rng.below(7);
    REQUIRE(x < 7);
    ++counts[x];
  }
  // 10000 expected per cell, sd about 93.
  for (int c : counts) CHECK(std::abs(c - 10000) < 500);
  CHECK_THROWS_AS(rng.below(0), Error);
  DeterministicRng a(5), b(5);
  for (int i = 0; i < 100; ++i) CHECK(a.below(1000003) == b.below(1000003));
}

TEST_CASE("random pattern subsets: reproducible, saturating, one per bucket") {
  const auto train = plain(pkre::testing::synthetic_corpus(500, 8));
  std::map<Bucket, std::size_t> sizes;
  for (const auto& inst : train) ++sizes[bucket_for(inst)];

  for (std::size_t n : {1u, 5u, 25u, 10000u}) {
    const auto ids = random_pattern_ids(train, n, 13);
    std::size_t expected = 0;
    for (const auto& [b, s] : sizes) expected += std::min(n, s);
    CHECK(ids.size() == expected);
    CHECK(random_pattern_ids(train, n, 13) == ids);
    std::map<Bucket, std::size_t> per;
    for (const auto& inst : train) {
      if (ids.contains(inst.id)) ++per[bucket_for(inst)];
    }
    for (const auto& [b, c] : per) CHECK(c == std::min(n, sizes.at(b)));
  }
  CHECK(random_pattern_ids(train, 10000, 1).size() == train.size());

  // Input order does not matter.
  auto shuffled = train;
  std::shuffle(shuffled.begin(), shuffled.end(), std::mt19937_64(4));
  CHECK(random_pattern_ids(shuffled, 5, 13) == random_pattern_ids(train, 5, 13));
  CHECK(random_pattern_ids(train, 5, 14) != random_pattern_ids(train, 5, 13));
  CHECK(random_pattern_subset(train, 5, 13).size() == random_pattern_ids(train, 5, 13).size());
  CHECK_THROWS_AS(random_pattern_ids(train, 0, 13), Error);

  const std::vector<Instance> three = {
      make_instance("a", "x y", {0, 1}, {1, 2}, "ORG", "ORG", "R1"),
      make_instance("b", "x y", {0, 1}, {1, 2}, "ORG", "ORG", "R1"),
      make_instance("c", "x y", {0, 1}, {1, 2}, "ORG", "ORG", "R2"),
      make_instance("d", "x y", {0, 1}, {1, 2}, "ORG", "DATE", "no_relation")};
  const auto one = random_pattern_ids(three, 1, 2);
  CHECK(one.size() == 3);
  CHECK(one.contains("c"));
  CHECK(one.contains("d"));
  CHECK(one.contains("a") != one.contains("b"));
}

TEST_CASE("random selection draws each member of a bucket equally often") {
  std::vector<Instance> bucket;
  for (int i = 0; i < 5; ++i) {
    bucket.push_back(make_instance("m" + std::to_string(i), "x y", {0, 1}, {1, 2}, "ORG", "ORG", "R"));
  }
  std::map<std::string, int> hits;
  for (std::uint64_t seed = 0; seed < 5000; ++seed) {
    for (const auto& id : random_pattern_ids(bucket, 2, seed)) ++hits[id];
  }
  // 2000 expected each; sd about 35.
  for (const auto& [id, c] : hits) CHECK(std::abs(c - 2000) < 200);
}

TEST_CASE("most frequent selection counts top neighbors of correct hits") {
  const Bucket a = Bucket::relation("A");
  const Bucket b = Bucket::relation("B");
  const std::vector<CorrectHit> hits = {
      {a, {{0.9, "x"}, {0.8, "y"}}},
      {a, {{0.95, "y"}, {0.1, "z"}}},
      {a, {{0.7, "y"}, {0.6, "x"}}},
      {b, {{0.5, "p"}, {0.4, "q"}}},
      {b, {{0.5, "q"}, {0.4, "p"}}},
  };
  // k_count 2: A counts y3 x2 z1; B counts p2 (best .5) q2 (best .5).
  CHECK(select_most_frequent(hits, 1, 2) == std::set<std::string>{"y", "p"});
  CHECK(select_most_frequent(hits, 2, 2) == std::set<std::string>{"x", "y", "p", "q"});
  CHECK(select_most_frequent(hits, 9, 2) == std::set<std::string>{"x", "y", "z", "p", "q"});
  // k_count 1: A counts y2 x1; B counts p1 q1 with equal best, so p by id.
  CHECK(select_most_frequent(hits, 1, 1) == std::set<std::string>{"y", "p"});
  CHECK(select_most_frequent(hits, 2, 1) == std::set<std::string>{"x", "y", "p", "q"});
  // The better single similarity breaks count ties.
  const std::vector<CorrectHit> tie = {{a, {{0.3, "m"}}}, {a, {{0.6, "n"}}}};
  CHECK(select_most_frequent(tie, 1, 1) == std::set<std::string>{"n"});
  CHECK(select_most_frequent({}, 5, 3).empty());
}

TEST_CASE("most frequent patterns are drawn from training instances") {
  const auto train = pkre::testing::synthetic_corpus(300, 51);
  const auto dev = pkre::testing::synthetic_corpus(120, 52, Split::kDev, "d");
  auto embedder = pkre::testing::hash_embedder(16);
  const IndexStore store = build_store(train, kSdpVariants, *embedder);
  const auto cmap = CompatibilityMap::from_manifest(store.manifest());
  const auto queries = make_queries(dev, PatternVariant::kSdpDepNer, *embedder);
  MostFrequentOptions opt;
  opt.classify_k = 3;
  opt.k_count = 3;
  const auto picked = most_frequent_patterns(plain(train), queries, gold_labels(dev), store, cmap, 4, opt);
  REQUIRE_FALSE(picked.empty());
  std::map<Bucket, std::size_t> per;
  for (const auto& inst : picked) {
    CHECK(inst.split == Split::kTrain);
    ++per[bucket_for(inst)];
  }
  for (const auto& [b, c] : per) CHECK(c <= 4);

  // Gold that never matches leaves nothing to count.
  LabelMap wrong = gold_labels(dev);
  for (auto& [id, label] : wrong) label = "never";
  CHECK(most_frequent_patterns(plain(train), queries, wrong, store, cmap, 4, opt).empty());
}

TEST_CASE("budget runs report one row per N and ignore non-training entries") {
  const auto train = pkre::testing::synthetic_corpus(400, 61);
  const auto dev = pkre::testing::synthetic_corpus(150, 62, Split::kDev, "d");
  // Public test copies of the dev instances would be perfect neighbors.
  auto extra = dev;
  for (auto& pi : extra) {
    pi.instance.id = "pt" + pi.instance.id;
    pi.instance.split = Split::kPublicTest;
  }
  auto with_public = train;
  with_public.insert(with_public.end(), extra.begin(), extra.end());

  auto embedder = pkre::testing::hash_embedder(16);
  const IndexStore train_only = build_store(train, kSdpVariants, *embedder);
  const IndexStore full = build_store(with_public, kSdpVariants, *embedder);
  const auto cmap = CompatibilityMap::from_manifest(train_only.manifest());
  const auto queries = make_queries(dev, PatternVariant::kSdpDepNer, *embedder);
  const LabelMap gold = gold_labels(dev);

  for (SelectionMode mode : {SelectionMode::kRandom, SelectionMode::kMostFrequent}) {
    BudgetOptions opt;
    opt.selection = mode;
    opt.k = mode == SelectionMode::kRandom ? 1 : 4;
    opt.threads = 2;
    const auto a = run_budget(plain(train), queries, gold, full, cmap, opt);
    const auto b = run_budget(plain(train), queries, gold, train_only, cmap, opt);
    REQUIRE(a.points.size() == 4);
    CHECK(a.points == b.points);
    CHECK(a.index_sizes == b.index_sizes);
    CHECK(std::is_sorted(a.index_sizes.begin(), a.index_sizes.end()));
    CHECK(a.to_json().at("points").size() == 4);
    if (mode == SelectionMode::kRandom) {
      CHECK(a.index_sizes[0] == random_pattern_ids(plain(train), 25, opt.seed).size());
    }
  }
  CHECK(parse_selection(selection_name(SelectionMode::kMostFrequent)) == SelectionMode::kMostFrequent);
}

TEST_CASE("plot series text") {
  const std::vector<std::pair<std::size_t, double>> pts{{1, 0.5}, {2, 0.25}};
  CHECK(plot_series("K", "F1", pts) == "K\tF1\n1\t0.5000000000\n2\t0.2500000000\n");
}

}  // TEST_SUITE
