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

#include "pkre/config.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>

#include "pkre/error.hpp"

namespace pkre {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr std::size_t kMaxK = 100;

void check_keys(const json& j, std::initializer_list<std::string_view> allowed,
                const std::string& where) {
  if (!j.is_object()) throw Error(ErrorCode::kConfig, where + " must be an object");
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (auto a : allowed) known = known || key == a;
    if (!known) throw Error(ErrorCode::kConfig, "unknown key '" + key + "' in " + where);
  }
}

std::string resolve(const std::string& path, const std::string& base) {
  if (path.empty()) return path;
  fs::path p(path);
  if (p.is_absolute()) return p.lexically_normal().string();
  return (fs::path(base) / p).lexically_normal().string();
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

ProviderConfig provider_from_json(const json& j, const std::string& base) {
  check_keys(j, {"backend", "dimension", "endpoint", "path", "batch_size", "cache_path",
                 "concurrency"},
             "embedding");
  ProviderConfig p;
  if (j.contains("backend")) {
    const auto b = j.at("backend").get<std::string>();
    if (b == "file") {
      p.backend = BackendKind::kFile;
    } else if (b == "http") {
      p.backend = BackendKind::kHttp;
    } else {
      throw Error(ErrorCode::kConfig, "embedding.backend must be file or http");
    }
  }
  read(j, "dimension", p.dimension);
  read(j, "endpoint", p.endpoint);
  read(j, "path", p.path);
  read(j, "batch_size", p.batch_size);
  read(j, "cache_path", p.cache_path);
  read(j, "concurrency", p.concurrency);
  p.path = resolve(p.path, base);
  p.cache_path = resolve(p.cache_path, base);
  return p;
}

json provider_to_json(const ProviderConfig& p) {
  return {{"backend", p.backend == BackendKind::kFile ? "file" : "http"},
          {"dimension", p.dimension},
          {"endpoint", p.endpoint},
          {"path", p.path},
          {"batch_size", p.batch_size},
          {"cache_path", p.cache_path},
          {"concurrency", p.concurrency}};
}

}  // namespace

std::size_t RunConfig::budget_k() const {
  if (budget.k) return *budget.k;
  return budget.selection == SelectionMode::kRandom ? 1 : 4;
}

std::vector<Split> RunConfig::index_splits() const {
  std::vector<Split> out{Split::kTrain};
  if (include_public_test_in_index) out.push_back(Split::kPublicTest);
  return out;
}

RunConfig config_from_json(const json& j, const std::string& base_dir) {
  RunConfig cfg;
  try {
    check_keys(j,
               {"data", "embedding", "variant", "index_variants", "k", "metric",
                "include_no_relation", "include_public_test_in_index", "seed", "index_path",
                "report_dir", "sweep", "budget", "substitute_targets_in_sdp",
                "unordered_no_relation_pairs", "serve", "threads"},
               "config");
    if (j.contains("data")) {
      check_keys(j.at("data"), {"train", "dev", "public_test"}, "data");
      for (const auto& [name, paths] : j.at("data").items()) {
        check_keys(paths, {"instances", "parses", "ner"}, "data." + name);
        SplitPaths sp;
        read(paths, "instances", sp.instances);
        read(paths, "parses", sp.parses);
        read(paths, "ner", sp.ner);
        sp.instances = resolve(sp.instances, base_dir);
        sp.parses = resolve(sp.parses, base_dir);
        sp.ner = resolve(sp.ner, base_dir);
        cfg.data[parse_split(name)] = sp;
      }
    }
    if (j.contains("embedding")) cfg.embedding = provider_from_json(j.at("embedding"), base_dir);
    if (j.contains("variant")) cfg.variant = parse_variant(j.at("variant").get<std::string>());
    if (j.contains("index_variants")) {
      cfg.index_variants.clear();
      for (const auto& v : j.at("index_variants")) {
        cfg.index_variants.push_back(parse_variant(v.get<std::string>()));
      }
    }
    read(j, "k", cfg.k);
    if (j.contains("metric")) cfg.metric = parse_metric(j.at("metric").get<std::string>());
    read(j, "include_no_relation", cfg.include_no_relation);
    read(j, "include_public_test_in_index", cfg.include_public_test_in_index);
    read(j, "seed", cfg.seed);
    read(j, "index_path", cfg.index_path);
    read(j, "report_dir", cfg.report_dir);
    if (j.contains("sweep")) {
      const json& s = j.at("sweep");
      check_keys(s, {"k_min", "k_max", "selection_fraction"}, "sweep");
      read(s, "k_min", cfg.sweep.k_min);
      read(s, "k_max", cfg.sweep.k_max);
      read(s, "selection_fraction", cfg.sweep.selection_fraction);
    }
    if (j.contains("budget")) {
      const json& b = j.at("budget");
      check_keys(b, {"selection", "n_values", "k", "k_count", "selection_k"}, "budget");
      if (b.contains("selection")) {
        cfg.budget.selection = parse_selection(b.at("selection").get<std::string>());
      }
      read(b, "n_values", cfg.budget.n_values);
      if (b.contains("k") && !b.at("k").is_null()) cfg.budget.k = b.at("k").get<std::size_t>();
      read(b, "k_count", cfg.budget.k_count);
      read(b, "selection_k", cfg.budget.selection_k);
    }
    read(j, "substitute_targets_in_sdp", cfg.substitute_targets_in_sdp);
    read(j, "unordered_no_relation_pairs", cfg.unordered_no_relation_pairs);
    if (j.contains("serve")) {
      const json& s = j.at("serve");
      check_keys(s, {"host", "port", "snapshot", "ui_dir", "pool_split"}, "serve");
      read(s, "host", cfg.serve.host);
      read(s, "port", cfg.serve.port);
      read(s, "snapshot", cfg.serve.snapshot);
      read(s, "ui_dir", cfg.serve.ui_dir);
      if (s.contains("pool_split")) {
        cfg.serve.pool_split = parse_split(s.at("pool_split").get<std::string>());
      }
    }
    read(j, "threads", cfg.threads);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kConfig, std::string("bad config value: ") + e.what());
  }
  cfg.index_path = resolve(cfg.index_path, base_dir);
  cfg.report_dir = resolve(cfg.report_dir, base_dir);
  cfg.serve.snapshot = resolve(cfg.serve.snapshot, base_dir);
  cfg.serve.ui_dir = resolve(cfg.serve.ui_dir, base_dir);
  validate(cfg);
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot read config: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  json j;
  try {
    j = json::parse(buf.str(), nullptr, true, /*ignore_comments=*/true);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kConfig, path + ": " + e.what());
  }
  const fs::path parent = fs::path(path).parent_path();
  return config_from_json(j, parent.empty() ? "." : parent.string());
}

void validate(const RunConfig& cfg) {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::kConfig, msg); };
  if (cfg.k < 1 || cfg.k > kMaxK) fail("k must be in [1, 100]");
  if (cfg.sweep.k_min < 1 || cfg.sweep.k_min > cfg.sweep.k_max || cfg.sweep.k_max > kMaxK) {
    fail("sweep range must satisfy 1 <= k_min <= k_max <= 100");
  }
  if (!(cfg.sweep.selection_fraction > 0.0 && cfg.sweep.selection_fraction < 1.0)) {
    fail("sweep.selection_fraction must be in (0, 1)");
  }
  std::set<std::size_t> seen;
  for (std::size_t n : cfg.budget.n_values) {
    if (n == 0) fail("budget.n_values must be positive");
    if (!seen.insert(n).second) fail("budget.n_values must be distinct");
  }
  if (cfg.budget_k() < 1 || cfg.budget_k() > kMaxK) fail("budget.k must be in [1, 100]");
  if (cfg.index_variants.empty()) fail("index_variants must not be empty");
  for (PatternVariant v : cfg.index_variants) {
    if (v == PatternVariant::kSentenceFallback) {
      fail("index_variants lists SDP variants; the sentence family is always built");
    }
  }
  if (cfg.variant != PatternVariant::kSentenceFallback &&
      std::find(cfg.index_variants.begin(), cfg.index_variants.end(), cfg.variant) ==
          cfg.index_variants.end()) {
    fail("variant " + std::string(variant_name(cfg.variant)) + " is not in index_variants");
  }
  if (cfg.serve.port < 0 || cfg.serve.port > 65535) fail("serve.port out of range");
  validate(cfg.embedding);
}

json config_to_json(const RunConfig& cfg) {
  json data = json::object();
  for (const auto& [split, p] : cfg.data) {
    data[std::string(split_name(split))] = {
        {"instances", p.instances}, {"parses", p.parses}, {"ner", p.ner}};
  }
  json variants = json::array();
  for (PatternVariant v : cfg.index_variants) variants.push_back(variant_name(v));
  return {{"data", data},
          {"embedding", provider_to_json(cfg.embedding)},
          {"variant", variant_name(cfg.variant)},
          {"index_variants", variants},
          {"k", cfg.k},
          {"metric", metric_name(cfg.metric)},
          {"include_no_relation", cfg.include_no_relation},
          {"include_public_test_in_index", cfg.include_public_test_in_index},
          {"seed", cfg.seed},
          {"index_path", cfg.index_path},
          {"report_dir", cfg.report_dir},
          {"sweep",
           {{"k_min", cfg.sweep.k_min},
            {"k_max", cfg.sweep.k_max},
            {"selection_fraction", cfg.sweep.selection_fraction}}},
          {"budget",
           {{"selection", selection_name(cfg.budget.selection)},
            {"n_values", cfg.budget.n_values},
            {"k", cfg.budget_k()},
            {"k_count", cfg.budget.k_count},
            {"selection_k", cfg.budget.selection_k}}},
          {"substitute_targets_in_sdp", cfg.substitute_targets_in_sdp},
          {"unordered_no_relation_pairs", cfg.unordered_no_relation_pairs},
          {"serve",
           {{"host", cfg.serve.host},
            {"port", cfg.serve.port},
            {"snapshot", cfg.serve.snapshot},
            {"ui_dir", cfg.serve.ui_dir},
            {"pool_split", split_name(cfg.serve.pool_split)}}},
          {"threads", cfg.threads}};
}

void require_inputs(const RunConfig& cfg, const std::vector<Split>& splits,
                    bool need_embeddings) {
  auto need = [](const std::string& path, const std::string& what) {
    if (!fs::exists(path)) throw Error(ErrorCode::kIo, what + " not found: " + path);
  };
  for (Split s : splits) {
    auto it = cfg.data.find(s);
    const std::string name(split_name(s));
    if (it == cfg.data.end() || it->second.instances.empty()) {
      throw Error(ErrorCode::kConfig, "no data configured for split " + name);
    }
    need(it->second.instances, name + " instances");
    if (!it->second.parses.empty()) need(it->second.parses, name + " parse sidecar");
    if (!it->second.ner.empty()) need(it->second.ner, name + " NER sidecar");
  }
  if (need_embeddings && cfg.embedding.backend == BackendKind::kFile) need(cfg.embedding.path, "vector store");
}

SplitLoad load_split(const RunConfig& cfg, Split split) {
  const SplitPaths& paths = cfg.data.at(split);
  SplitLoad out;
  LoadResult loaded = load_dataset(paths.instances, split);
  out.errors = std::move(loaded.errors);

  std::map<std::string, DependencyParse> parses;
  if (!paths.parses.empty()) {
    ParseLoadResult p = load_conllu(paths.parses);
    parses = std::move(p.parses);
    out.errors.insert(out.errors.end(), p.errors.begin(), p.errors.end());
  }
  std::map<std::string, NerAnnotation> ner;
  if (!paths.ner.empty()) {
    NerLoadResult n = load_ner(paths.ner);
    ner = std::move(n.annotations);
    out.errors.insert(out.errors.end(), n.errors.begin(), n.errors.end());
  }
  AttachResult attached = attach_all(loaded.instances, parses, ner);
  out.instances = std::move(attached.instances);
  out.errors.insert(out.errors.end(), attached.errors.begin(), attached.errors.end());
  out.parse_failures = attached.parse_failures;
  return out;
}

}  // namespace pkre
