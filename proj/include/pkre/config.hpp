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

// Run configuration shared by all pkre subcommands. The file is JSON; see
// README.md for the schema. Relative paths resolve against the directory of
// the config file.

#ifndef PKRE_CONFIG_HPP_
#define PKRE_CONFIG_HPP_

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "pkre/corpus.hpp"
#include "pkre/embedding.hpp"
#include "pkre/eval.hpp"
#include "pkre/pattern.hpp"

namespace pkre {

struct SplitPaths {
  std::string instances;
  std::string parses;  // CoNLL-U; optional (everything falls back)
  std::string ner;     // JSONL tags; optional
};

struct SweepConfig {
  std::size_t k_min = 1;
  std::size_t k_max = 20;
  double selection_fraction = 0.1;
};

struct BudgetConfig {
  SelectionMode selection = SelectionMode::kRandom;
  std::vector<std::size_t> n_values{25, 50, 75, 100};
  std::optional<std::size_t> k;  // default: 1 for random, 4 for most_frequent
  std::size_t k_count = 0;       // 0: same as k
  std::size_t selection_k = 0;   // 0: same as k
};

struct ServeConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string snapshot;  // written on shutdown, restored on start if present
  std::string ui_dir;
  Split pool_split = Split::kDev;
};

struct RunConfig {
  std::map<Split, SplitPaths> data;
  ProviderConfig embedding;
  PatternVariant variant = PatternVariant::kSdpDepNer;
  std::vector<PatternVariant> index_variants{kSdpVariants.begin(), kSdpVariants.end()};
  std::size_t k = 14;
  MetricMode metric = MetricMode::kMicro;
  bool include_no_relation = true;
  bool include_public_test_in_index = true;
  std::uint64_t seed = 13;
  std::string index_path = "pkre.index";
  std::string report_dir = "reports";
  SweepConfig sweep;
  BudgetConfig budget;
  bool substitute_targets_in_sdp = true;
  bool unordered_no_relation_pairs = false;
  ServeConfig serve;
  std::size_t threads = 0;  // 0: all cores

  RenderOptions render() const { return {substitute_targets_in_sdp}; }
  std::size_t budget_k() const;
  std::vector<Split> index_splits() const;
};

/// Throws kConfig for unknown keys, bad values or violated invariants
/// (K in [1, 100], sweep range inside it, positive budget sizes).
RunConfig config_from_json(const nlohmann::json& j, const std::string& base_dir = ".");
RunConfig load_config(const std::string& path);
void validate(const RunConfig& cfg);
nlohmann::json config_to_json(const RunConfig& cfg);

/// Throws kIo naming the first configured path for `splits` that does not
/// exist; with need_embeddings also the vector store of the file backend.
void require_inputs(const RunConfig& cfg, const std::vector<Split>& splits,
                    bool need_embeddings = true);

struct SplitLoad {
  std::vector<ParsedInstance> instances;
  std::vector<RecordError> errors;  // record, parse and NER problems
  std::size_t parse_failures = 0;
};

SplitLoad load_split(const RunConfig& cfg, Split split);

}  // namespace pkre

#endif  // PKRE_CONFIG_HPP_
