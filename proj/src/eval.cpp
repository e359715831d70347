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

#include "pkre/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>
#include <sstream>

#include "pkre/error.hpp"

namespace pkre {

using nlohmann::json;

std::string_view metric_name(MetricMode mode) {
  return mode == MetricMode::kMicro ? "micro" : "macro";
}

MetricMode parse_metric(std::string_view name) {
  if (name == "micro") return MetricMode::kMicro;
  if (name == "macro") return MetricMode::kMacro;
  throw Error(ErrorCode::kConfig, "metric must be micro or macro, got " + std::string(name));
}

namespace {

double safe_div(double num, double den) { return den > 0.0 ? num / den : 0.0; }

double harmonic(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

}  // namespace

double EvalReport::headline() const {
  return mode == MetricMode::kMicro ? micro_f1 : macro_f1;
}

EvalReport f1_report(const LabelMap& predicted, const LabelMap& gold,
                     MetricMode mode, bool include_no_relation) {
  if (predicted.size() != gold.size() ||
      !std::equal(predicted.begin(), predicted.end(), gold.begin(),
                  [](const auto& a, const auto& b) { return a.first == b.first; })) {
    std::string example;
    for (const auto& [id, label] : predicted) {
      if (!gold.contains(id)) { example = "prediction for unknown id " + id; break; }
    }
    if (example.empty()) {
      for (const auto& [id, label] : gold) {
        if (!predicted.contains(id)) { example = "no prediction for " + id; break; }
      }
    }
    throw Error(ErrorCode::kIdMismatch, "prediction and gold ids differ: " + example);
  }

  EvalReport r;
  r.mode = mode;
  r.include_no_relation = include_no_relation;
  r.instance_count = gold.size();

  auto g = gold.begin();
  for (auto p = predicted.begin(); p != predicted.end(); ++p, ++g) {
    const std::string& pred = p->second;
    const std::string& truth = g->second;
    ++r.confusion[truth][pred];
    auto& gm = r.per_class[truth];
    auto& pm = r.per_class[pred];
    ++gm.support;
    if (pred == truth) {
      ++gm.tp;
    } else {
      ++gm.fn;
      ++pm.fp;
    }
  }

  std::size_t tp = 0, pred_pos = 0, gold_pos = 0;
  double macro_sum = 0.0;
  std::size_t macro_n = 0;
  for (auto& [label, m] : r.per_class) {
    m.precision = safe_div(static_cast<double>(m.tp), static_cast<double>(m.tp + m.fp));
    m.recall = safe_div(static_cast<double>(m.tp), static_cast<double>(m.tp + m.fn));
    m.f1 = harmonic(m.precision, m.recall);
    if (!include_no_relation && label == kNoRelation) continue;
    tp += m.tp;
    pred_pos += m.tp + m.fp;
    gold_pos += m.tp + m.fn;
    macro_sum += m.f1;
    ++macro_n;
  }
  r.micro_precision = safe_div(static_cast<double>(tp), static_cast<double>(pred_pos));
  r.micro_recall = safe_div(static_cast<double>(tp), static_cast<double>(gold_pos));
  r.micro_f1 = harmonic(r.micro_precision, r.micro_recall);
  r.macro_f1 = safe_div(macro_sum, static_cast<double>(macro_n));
  return r;
}

EvalReport f1_report(std::span<const Prediction> predictions, const LabelMap& gold,
                     MetricMode mode, bool include_no_relation) {
  LabelMap predicted;
  std::size_t fallback = 0;
  for (const auto& p : predictions) {
    if (!predicted.emplace(p.instance_id, p.label).second) {
      throw Error(ErrorCode::kIdMismatch, "duplicate prediction for " + p.instance_id);
    }
    fallback += p.used_fallback;
  }
  EvalReport r = f1_report(predicted, gold, mode, include_no_relation);
  r.fallback_count = fallback;
  r.fallback_rate = safe_div(static_cast<double>(fallback), static_cast<double>(predictions.size()));
  return r;
}

json EvalReport::to_json() const {
  json classes = json::object();
  for (const auto& [label, m] : per_class) {
    classes[label] = {{"tp", m.tp}, {"fp", m.fp}, {"fn", m.fn}, {"support", m.support},
                      {"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}};
  }
  return {{"metric", metric_name(mode)},
          {"include_no_relation", include_no_relation},
          {"f1", headline()},
          {"micro_precision", micro_precision},
          {"micro_recall", micro_recall},
          {"micro_f1", micro_f1},
          {"macro_f1", macro_f1},
          {"instance_count", instance_count},
          {"fallback_count", fallback_count},
          {"fallback_rate", fallback_rate},
          {"per_class", classes},
          {"confusion", confusion}};
}

std::string EvalReport::to_text() const {
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof line, "F1 (%s%s): %.4f\n", std::string(metric_name(mode)).c_str(),
                include_no_relation ? "" : ", excluding no_relation", headline());
  out << line;
  std::snprintf(line, sizeof line, "micro P/R/F1: %.4f / %.4f / %.4f   macro F1: %.4f\n",
                micro_precision, micro_recall, micro_f1, macro_f1);
  out << line;
  std::snprintf(line, sizeof line, "instances: %zu   fallback: %zu (%.2f%%)\n\n", instance_count,
                fallback_count, 100.0 * fallback_rate);
  out << line;
  std::snprintf(line, sizeof line, "%-40s %9s %9s %9s %8s\n", "class", "precision", "recall", "f1",
                "support");
  out << line;
  for (const auto& [label, m] : per_class) {
    std::snprintf(line, sizeof line, "%-40s %9.4f %9.4f %9.4f %8zu\n", label.c_str(), m.precision,
                  m.recall, m.f1, m.support);
    out << line;
  }
  return out.str();
}

LabelMap gold_labels(std::span<const ParsedInstance> instances) {
  LabelMap out;
  for (const auto& pi : instances) out[pi.instance.id] = pi.instance.relation;
  return out;
}

LabelMap gold_labels(std::span<const Instance> instances) {
  LabelMap out;
  for (const auto& inst : instances) out[inst.id] = inst.relation;
  return out;
}

json SweepResult::to_json() const {
  json pts = json::array();
  for (const auto& [k, f1] : points) pts.push_back({{"k", k}, {"f1", f1}});
  return {{"variant", variant_name(variant)}, {"points", pts}, {"chosen_k", chosen_k},
          {"chosen_f1", chosen_f1}, {"selection_split", selection_split}};
}

SweepResult sweep_k(std::span<const Query> queries, const LabelMap& gold,
                    const IndexStore& store, const CompatibilityMap& cmap,
                    PatternVariant variant, const SweepOptions& options,
                    std::string selection_split) {
  if (options.k_min == 0 || options.k_min > options.k_max) {
    throw Error(ErrorCode::kConfig, "sweep range must satisfy 1 <= k_min <= k_max");
  }
  const auto evidence = gather_evidence_batch(queries, store, cmap, options.k_max, options.threads);
  SweepResult result;
  result.variant = variant;
  result.selection_split = std::move(selection_split);
  double best = -1.0;
  for (std::size_t k = options.k_min; k <= options.k_max; ++k) {
    std::vector<Prediction> preds(queries.size());
    for (std::size_t i = 0; i < queries.size(); ++i) preds[i] = decide(queries[i], evidence[i], k);
    const double f1 =
        f1_report(preds, gold, options.mode, options.include_no_relation).headline();
    result.points.emplace_back(k, f1);
    if (f1 > best) {
      best = f1;
      result.chosen_k = k;
      result.chosen_f1 = f1;
    }
  }
  return result;
}

std::uint64_t DeterministicRng::below(std::uint64_t bound) {
  if (bound == 0) throw Error(ErrorCode::kInternal, "empty sampling range");
  const std::uint64_t limit =
      std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
  while (true) {
    const std::uint64_t x = gen_();
    if (x < limit) return x % bound;
  }
}

std::pair<std::vector<ParsedInstance>, std::vector<ParsedInstance>> split_holdout(
    std::span<const ParsedInstance> instances, double fraction, std::uint64_t seed) {
  if (fraction < 0.0 || fraction > 1.0) {
    throw Error(ErrorCode::kConfig, "holdout fraction must lie in [0, 1]");
  }
  std::vector<std::size_t> order(instances.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  DeterministicRng rng(seed);
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  const auto n_hold = static_cast<std::size_t>(fraction * static_cast<double>(instances.size()) + 0.5);
  std::vector<char> held(instances.size(), 0);
  for (std::size_t i = 0; i < n_hold; ++i) held[order[i]] = 1;
  std::pair<std::vector<ParsedInstance>, std::vector<ParsedInstance>> out;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    (held[i] ? out.second : out.first).push_back(instances[i]);
  }
  return out;
}

std::set<std::string> random_pattern_ids(std::span<const Instance> train, std::size_t n,
                                         std::uint64_t seed, bool unordered_no_relation_pairs) {
  if (n == 0) throw Error(ErrorCode::kConfig, "patterns per class must be >= 1");
  std::map<Bucket, std::vector<std::string>> buckets;
  for (const auto& inst : train) {
    buckets[bucket_for(inst, unordered_no_relation_pairs)].push_back(inst.id);
  }
  DeterministicRng rng(seed);
  std::set<std::string> out;
  for (auto& [bucket, ids] : buckets) {
    std::sort(ids.begin(), ids.end());
    const std::size_t take = std::min(n, ids.size());
    // Partial Fisher-Yates: the first `take` slots are a uniform sample.
    for (std::size_t i = 0; i < take; ++i) {
      std::swap(ids[i], ids[i + rng.below(ids.size() - i)]);
      out.insert(ids[i]);
    }
  }
  return out;
}

std::vector<Instance> random_pattern_subset(std::span<const Instance> train, std::size_t n,
                                            std::uint64_t seed, bool unordered_no_relation_pairs) {
  const auto keep = random_pattern_ids(train, n, seed, unordered_no_relation_pairs);
  std::vector<Instance> out;
  for (const auto& inst : train) {
    if (keep.contains(inst.id)) out.push_back(inst);
  }
  return out;
}

std::set<std::string> select_most_frequent(std::span<const CorrectHit> hits, std::size_t n,
                                           std::size_t k_count) {
  struct Tally {
    std::size_t count = 0;
    double best = -std::numeric_limits<double>::infinity();
  };
  std::map<Bucket, std::map<std::string, Tally>> tallies;
  for (const auto& hit : hits) {
    auto& bucket = tallies[hit.bucket];
    const std::size_t depth = std::min(k_count, hit.neighbors.size());
    for (std::size_t i = 0; i < depth; ++i) {
      Tally& t = bucket[hit.neighbors[i].id];
      ++t.count;
      t.best = std::max(t.best, hit.neighbors[i].similarity);
    }
  }
  std::set<std::string> out;
  for (const auto& [bucket, by_id] : tallies) {
    std::vector<std::pair<std::string, Tally>> ranked(by_id.begin(), by_id.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
      if (a.second.count != b.second.count) return a.second.count > b.second.count;
      if (a.second.best != b.second.best) return a.second.best > b.second.best;
      return a.first < b.first;
    });
    for (std::size_t i = 0; i < std::min(n, ranked.size()); ++i) out.insert(ranked[i].first);
  }
  return out;
}

namespace {

std::vector<CorrectHit> correct_hits(std::span<const Query> queries, const LabelMap& gold,
                                     const IndexStore& store, const CompatibilityMap& cmap,
                                     std::size_t classify_k, std::size_t k_count,
                                     std::size_t threads) {
  const std::size_t depth = std::max(classify_k, k_count);
  const auto evidence = gather_evidence_batch(queries, store, cmap, depth, threads);
  std::vector<CorrectHit> hits;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    const Prediction p = decide(queries[i], evidence[i], classify_k);
    auto g = gold.find(queries[i].instance_id);
    if (g == gold.end() || g->second != p.label) continue;
    for (const auto& e : evidence[i]) {
      if (e.bucket == p.bucket) hits.push_back({e.bucket, e.neighbors});
    }
  }
  return hits;
}

}  // namespace

std::vector<Instance> most_frequent_patterns(std::span<const Instance> train,
                                             std::span<const Query> dev_queries,
                                             const LabelMap& dev_gold,
                                             const IndexStore& full_store,
                                             const CompatibilityMap& cmap, std::size_t n,
                                             const MostFrequentOptions& options) {
  const auto hits = correct_hits(dev_queries, dev_gold, full_store, cmap, options.classify_k,
                                 options.k_count, options.threads);
  const auto keep = select_most_frequent(hits, n, options.k_count);
  std::vector<Instance> out;
  for (const auto& inst : train) {
    if (keep.contains(inst.id)) out.push_back(inst);
  }
  return out;
}

std::string_view selection_name(SelectionMode mode) {
  return mode == SelectionMode::kRandom ? "random" : "most_frequent";
}

SelectionMode parse_selection(std::string_view name) {
  if (name == "random") return SelectionMode::kRandom;
  if (name == "most_frequent" || name == "most-frequent") return SelectionMode::kMostFrequent;
  throw Error(ErrorCode::kConfig, "selection must be random or most_frequent");
}

json BudgetResult::to_json() const {
  json pts = json::array();
  for (std::size_t i = 0; i < points.size(); ++i) {
    pts.push_back({{"n", points[i].first}, {"f1", points[i].second},
                   {"index_instances", i < index_sizes.size() ? index_sizes[i] : 0}});
  }
  return {{"selection", selection_name(selection)}, {"k", k}, {"seed", seed}, {"points", pts}};
}

BudgetResult run_budget(std::span<const Instance> train, std::span<const Query> eval_queries,
                        const LabelMap& eval_gold, const IndexStore& full_store,
                        const CompatibilityMap& cmap, const BudgetOptions& options) {
  BudgetResult result;
  result.selection = options.selection;
  result.k = options.k;
  result.seed = options.seed;

  // The budget is over training data only; public test entries of the full
  // store take no part in selection or scoring.
  std::set<std::string> train_ids;
  for (const auto& inst : train) train_ids.insert(inst.id);
  const IndexStore train_store = full_store.filtered(train_ids);

  std::vector<CorrectHit> hits;
  const std::size_t k_count = options.k_count == 0 ? options.k : options.k_count;
  if (options.selection == SelectionMode::kMostFrequent) {
    const std::size_t selection_k = options.selection_k == 0 ? options.k : options.selection_k;
    hits = correct_hits(eval_queries, eval_gold, train_store, cmap, selection_k, k_count,
                        options.threads);
  }

  for (std::size_t n : options.n_values) {
    std::set<std::string> keep =
        options.selection == SelectionMode::kRandom
            ? random_pattern_ids(train, n, options.seed, options.unordered_no_relation_pairs)
            : select_most_frequent(hits, n, k_count);
    const IndexStore reduced = train_store.filtered(keep);
    const auto evidence = gather_evidence_batch(eval_queries, reduced, cmap, options.k, options.threads);
    std::vector<Prediction> preds(eval_queries.size());
    for (std::size_t i = 0; i < eval_queries.size(); ++i) {
      preds[i] = decide(eval_queries[i], evidence[i], options.k);
    }
    result.points.emplace_back(
        n, f1_report(preds, eval_gold, options.mode, options.include_no_relation).headline());
    result.index_sizes.push_back(keep.size());
  }
  return result;
}

std::string plot_series(std::string_view x_name, std::string_view y_name,
                        std::span<const std::pair<std::size_t, double>> points) {
  std::ostringstream out;
  out << x_name << '\t' << y_name << '\n';
  char buf[64];
  for (const auto& [x, y] : points) {
    std::snprintf(buf, sizeof buf, "%zu\t%.10f\n", x, y);
    out << buf;
  }
  return out.str();
}

}  // namespace pkre
