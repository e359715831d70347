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

// Scoring and experiment drivers: F1 reports, K sweeps, and reduced-budget
// index experiments (random and most-frequent pattern selection).

#ifndef PKRE_EVAL_HPP_
#define PKRE_EVAL_HPP_

#include <cstddef>
#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "pkre/class_index.hpp"
#include "pkre/classifier.hpp"
#include "pkre/corpus.hpp"

namespace pkre {

enum class MetricMode { kMicro, kMacro };

std::string_view metric_name(MetricMode mode);
MetricMode parse_metric(std::string_view name);

struct ClassMetrics {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t support = 0;  // gold count
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct EvalReport {
  std::map<std::string, ClassMetrics> per_class;
  double micro_precision = 0.0;
  double micro_recall = 0.0;
  double micro_f1 = 0.0;
  double macro_f1 = 0.0;
  MetricMode mode = MetricMode::kMicro;
  bool include_no_relation = true;
  std::size_t instance_count = 0;
  std::size_t fallback_count = 0;
  double fallback_rate = 0.0;
  std::map<std::string, std::map<std::string, std::size_t>> confusion;  // gold -> pred

  /// micro_f1 or macro_f1 per `mode`.
  double headline() const;
  nlohmann::json to_json() const;
  std::string to_text() const;
};

using LabelMap = std::map<std::string, std::string>;  // instance id -> label

/// Per-class and aggregate precision/recall/F1. With include_no_relation,
/// no_relation is an ordinary class (micro-F1 equals accuracy); without
/// it, micro counts only non-no_relation predictions and golds and macro
/// averages exclude it. Throws kIdMismatch when the id sets differ.
EvalReport f1_report(const LabelMap& predicted, const LabelMap& gold,
                     MetricMode mode, bool include_no_relation);
EvalReport f1_report(std::span<const Prediction> predictions, const LabelMap& gold,
                     MetricMode mode, bool include_no_relation);

LabelMap gold_labels(std::span<const ParsedInstance> instances);
LabelMap gold_labels(std::span<const Instance> instances);

struct SweepOptions {
  std::size_t k_min = 1;
  std::size_t k_max = 20;
  MetricMode mode = MetricMode::kMicro;
  bool include_no_relation = true;
  std::size_t threads = 0;
};

struct SweepResult {
  PatternVariant variant = PatternVariant::kSdpDepNer;
  std::vector<std::pair<std::size_t, double>> points;  // (K, F1)
  std::size_t chosen_k = 0;                            // argmax, smallest on ties
  double chosen_f1 = 0.0;
  std::string selection_split;

  nlohmann::json to_json() const;
};

/// F1 for every K in [k_min, k_max] from one evidence pass with
/// max_k = k_max; each K averages a prefix of the cached neighbor lists.
SweepResult sweep_k(std::span<const Query> queries, const LabelMap& gold,
                    const IndexStore& store, const CompatibilityMap& cmap,
                    PatternVariant variant, const SweepOptions& options,
                    std::string selection_split);

/// Random train/holdout partition; `fraction` of the instances go to the
/// holdout.
std::pair<std::vector<ParsedInstance>, std::vector<ParsedInstance>> split_holdout(
    std::span<const ParsedInstance> instances, double fraction, std::uint64_t seed);

/// Seeded sampler whose draws are identical across standard libraries
/// (mt19937_64 output is fully specified; bounding is by rejection).
class DeterministicRng {
 public:
  explicit DeterministicRng(std::uint64_t seed) : gen_(seed) {}
  /// Uniform in [0, bound); bound > 0.
  std::uint64_t below(std::uint64_t bound);

 private:
  std::mt19937_64 gen_;
};

/// Per bucket, min(n, bucket size) ids drawn uniformly without replacement.
std::set<std::string> random_pattern_ids(std::span<const Instance> train,
                                         std::size_t n, std::uint64_t seed,
                                         bool unordered_no_relation_pairs = false);
std::vector<Instance> random_pattern_subset(std::span<const Instance> train,
                                            std::size_t n, std::uint64_t seed,
                                            bool unordered_no_relation_pairs = false);

/// Winning-bucket evidence of one correctly classified instance.
struct CorrectHit {
  Bucket bucket;
  std::vector<Neighbor> neighbors;  // descending
};

/// Counts how often each training id appears in the top-k_count neighbors
/// of correctly classified instances and keeps, per bucket, the n most
/// frequent (ties: higher best similarity, then ascending id).
std::set<std::string> select_most_frequent(std::span<const CorrectHit> hits,
                                           std::size_t n, std::size_t k_count);

struct MostFrequentOptions {
  std::size_t classify_k = 14;
  std::size_t k_count = 14;
  std::size_t threads = 0;
};

/// Classifies `dev` against the full store, collects hits for the correct
/// predictions and returns the selected training instances.
std::vector<Instance> most_frequent_patterns(std::span<const Instance> train,
                                             std::span<const Query> dev_queries,
                                             const LabelMap& dev_gold,
                                             const IndexStore& full_store,
                                             const CompatibilityMap& cmap,
                                             std::size_t n,
                                             const MostFrequentOptions& options);

enum class SelectionMode { kRandom, kMostFrequent };
std::string_view selection_name(SelectionMode mode);
SelectionMode parse_selection(std::string_view name);

struct BudgetOptions {
  SelectionMode selection = SelectionMode::kRandom;
  std::vector<std::size_t> n_values{25, 50, 75, 100};
  std::size_t k = 1;
  std::size_t k_count = 0;      // most-frequent counting depth; 0 means k
  std::size_t selection_k = 0;  // K for the full-store selection pass; 0 means k
  std::uint64_t seed = 13;
  MetricMode mode = MetricMode::kMicro;
  bool include_no_relation = true;
  bool unordered_no_relation_pairs = false;
  std::size_t threads = 0;
};

struct BudgetResult {
  SelectionMode selection = SelectionMode::kRandom;
  std::vector<std::pair<std::size_t, double>> points;  // (N, F1)
  std::vector<std::size_t> index_sizes;                // instances kept per N
  std::size_t k = 0;
  std::uint64_t seed = 0;

  nlohmann::json to_json() const;
};

/// For each N builds the reduced store by filtering `full_store` to the
/// selected training ids and scores `eval_queries` at options.k.
BudgetResult run_budget(std::span<const Instance> train,
                        std::span<const Query> eval_queries, const LabelMap& eval_gold,
                        const IndexStore& full_store, const CompatibilityMap& cmap,
                        const BudgetOptions& options);

/// "x\ty" lines with a header row.
std::string plot_series(std::string_view x_name, std::string_view y_name,
                        std::span<const std::pair<std::size_t, double>> points);

}  // namespace pkre

#endif  // PKRE_EVAL_HPP_
