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

// pkre: command-line driver for pattern-based kNN relation extraction.

#include <pthread.h>
#include <signal.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "pkre/class_index.hpp"
#include "pkre/classifier.hpp"
#include "pkre/config.hpp"
#include "pkre/corpus.hpp"
#include "pkre/embedding.hpp"
#include "pkre/error.hpp"
#include "pkre/eval.hpp"
#include "pkre/hitl.hpp"
#include "pkre/pattern.hpp"

namespace {

using nlohmann::json;
using namespace pkre;
namespace fs = std::filesystem;

struct Overrides {
  std::string config_path;
  std::optional<std::size_t> k;
  std::optional<std::string> variant;
  std::optional<std::size_t> threads;
  std::optional<std::string> metric;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> index_path;
  std::optional<std::string> report_dir;
  bool train_only = false;
  bool exclude_no_relation = false;
};

RunConfig resolve_config(const Overrides& o) {
  RunConfig cfg = load_config(o.config_path);
  if (o.k) cfg.k = *o.k;
  if (o.variant) cfg.variant = parse_variant(*o.variant);
  if (o.threads) cfg.threads = *o.threads;
  if (o.metric) cfg.metric = parse_metric(*o.metric);
  if (o.seed) cfg.seed = *o.seed;
  if (o.index_path) cfg.index_path = *o.index_path;
  if (o.report_dir) cfg.report_dir = *o.report_dir;
  if (o.train_only) cfg.include_public_test_in_index = false;
  if (o.exclude_no_relation) cfg.include_no_relation = false;
  validate(cfg);
  return cfg;
}

void write_file(const std::string& path, const std::string& content) {
  const fs::path parent = fs::path(path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
  out << content;
  if (!out) throw Error(ErrorCode::kIo, "write failed: " + path);
}

std::string report_path(const RunConfig& cfg, const std::string& name) {
  return (fs::path(cfg.report_dir) / name).string();
}

// Reports carry the resolved configuration as their header.
void write_report(const RunConfig& cfg, const std::string& name, json body) {
  json doc = {{"config", config_to_json(cfg)}};
  for (auto& [key, value] : body.items()) doc[key] = std::move(value);
  write_file(report_path(cfg, name), doc.dump(2) + "\n");
}

void write_text_report(const RunConfig& cfg, const std::string& name,
                       const std::string& body) {
  write_file(report_path(cfg, name), "# config " + config_to_json(cfg).dump() + "\n" + body);
}

void print_errors(const std::vector<RecordError>& errors, const std::string& what,
                  std::size_t limit = 20) {
  if (errors.empty()) return;
  std::cerr << what << ": " << errors.size() << " problem(s)\n";
  for (std::size_t i = 0; i < std::min(limit, errors.size()); ++i) {
    std::cerr << "  record " << errors[i].record_index << ": " << errors[i].message << "\n";
  }
  if (errors.size() > limit) std::cerr << "  ...\n";
}

std::vector<ParsedInstance> load_checked(const RunConfig& cfg, Split split) {
  SplitLoad load = load_split(cfg, split);
  print_errors(load.errors, std::string(split_name(split)));
  return std::move(load.instances);
}

IndexStore load_index(const RunConfig& cfg, Embedder& embedder) {
  if (!fs::exists(cfg.index_path)) {
    throw Error(ErrorCode::kIo, "index not found: " + cfg.index_path + " (run build first)");
  }
  IndexStore store = load_store(cfg.index_path);
  auto mismatch = [&](const std::string& what) {
    throw Error(ErrorCode::kConfig, "index/config mismatch: " + what);
  };
  if (store.dimension() != embedder.dimension()) {
    mismatch("index dimension " + std::to_string(store.dimension()) + " vs embedding " +
             std::to_string(embedder.dimension()));
  }
  if (!store.variants().contains(cfg.variant)) {
    mismatch("variant " + std::string(variant_name(cfg.variant)) + " was not indexed");
  }
  if (store.manifest().unordered_no_relation_pairs != cfg.unordered_no_relation_pairs) {
    mismatch("unordered_no_relation_pairs differs");
  }
  const json& built = store.manifest().config;
  if (built.contains("substitute_targets_in_sdp") &&
      built.at("substitute_targets_in_sdp").get<bool>() != cfg.substitute_targets_in_sdp) {
    mismatch("substitute_targets_in_sdp differs");
  }
  return store;
}

std::size_t fallback_count(std::span<const ParsedInstance> instances) {
  std::size_t n = 0;
  for (const auto& pi : instances) n += !has_dependency_path(pi);
  return n;
}

// --- ingest-check ---------------------------------------------------------------

int cmd_ingest_check(const RunConfig& cfg) {
  std::vector<Split> splits;
  for (const auto& [split, paths] : cfg.data) splits.push_back(split);
  require_inputs(cfg, splits, /*need_embeddings=*/false);
  json per_split = json::object();
  bool clean = true;
  for (Split split : splits) {
    SplitLoad load = load_split(cfg, split);
    const std::string name(split_name(split));
    print_errors(load.errors, name);
    clean = clean && load.errors.empty();
    std::vector<Instance> plain;
    for (const auto& pi : load.instances) plain.push_back(pi.instance);
    const std::size_t fallback = fallback_count(load.instances);
    json errors = json::array();
    for (const auto& e : load.errors) errors.push_back({{"record", e.record_index}, {"message", e.message}});
    json pairs = json::array();
    for (const auto& p : pair_inventory(plain)) pairs.push_back(p.str());
    per_split[name] = {
        {"instances", load.instances.size()},
        {"parse_failed", load.parse_failures},
        {"fallback", fallback},
        {"fallback_rate", load.instances.empty() ? 0.0
                                                 : static_cast<double>(fallback) / load.instances.size()},
        {"relations", relation_inventory(plain)},
        {"pair_types", pairs},
        {"errors", errors}};
    std::cout << name << ": " << load.instances.size() << " instances, " << load.errors.size()
              << " errors, " << fallback << " without a dependency path\n";
  }
  write_report(cfg, "ingest.json", {{"splits", per_split}});
  return clean ? 0 : 1;
}

// --- convert-refind -------------------------------------------------------------

int cmd_convert_refind(const std::string& input, const std::string& output,
                       const std::string& split_name_arg) {
  const Split split = parse_split(split_name_arg);
  std::ifstream in(input);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + input);
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();

  std::vector<json> records;
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '[') {
    try {
      for (auto& r : json::parse(text)) records.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kFormat, input + ": " + e.what());
    }
  } else {
    std::istringstream lines(text);
    std::string line;
    std::size_t n = 0;
    while (std::getline(lines, line)) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      try {
        records.push_back(json::parse(line));
      } catch (const json::exception& e) {
        throw Error(ErrorCode::kFormat, input + " line " + std::to_string(n + 1) + ": " + e.what());
      }
      ++n;
    }
  }
  std::vector<Instance> out;
  std::vector<RecordError> errors;
  for (std::size_t i = 0; i < records.size(); ++i) {
    try {
      out.push_back(instance_from_json(canonical_from_refind(records[i]), split));
    } catch (const Error& e) {
      errors.push_back({i, e.what()});
    } catch (const json::exception& e) {
      errors.push_back({i, e.what()});
    }
  }
  print_errors(errors, input);
  write_dataset(output, out);
  std::cout << "converted " << out.size() << " of " << records.size() << " records\n";
  return errors.empty() ? 0 : 1;
}

// --- dump-patterns / import-vectors ----------------------------------------------

int cmd_dump_patterns(const RunConfig& cfg, const std::vector<std::string>& split_names,
                      const std::string& output) {
  std::vector<Split> splits;
  for (const auto& s : split_names) splits.push_back(parse_split(s));
  if (splits.empty()) {
    for (const auto& [split, paths] : cfg.data) splits.push_back(split);
  }
  require_inputs(cfg, splits, /*need_embeddings=*/false);  // no vectors exist yet

  std::ostringstream out;
  std::size_t count = 0;
  for (Split split : splits) {
    for (const auto& pi : load_checked(cfg, split)) {
      for (const auto& p : render_all(pi, cfg.render())) {
        out << json{{"id", p.instance_id}, {"variant", variant_name(p.variant)}, {"text", p.text}}.dump()
            << '\n';
        ++count;
      }
    }
  }
  write_file(output, out.str());
  std::cout << "wrote " << count << " patterns to " << output << "\n";
  return 0;
}

int cmd_import_vectors(const std::string& input, const std::string& output, std::size_t dimension) {
  std::ifstream in(input);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + input);
  std::vector<std::pair<std::string, std::vector<float>>> entries;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      entries.emplace_back(j.at("text").get<std::string>(), j.at("vector").get<std::vector<float>>());
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kFormat, input + " line " + std::to_string(n) + ": " + e.what());
    }
    if (entries.back().second.size() != dimension) {
      throw Error(ErrorCode::kDimensionMismatch,
                  input + " line " + std::to_string(n) + ": vector has " +
                      std::to_string(entries.back().second.size()) + " values, expected " +
                      std::to_string(dimension));
    }
  }
  write_vector_store(output, dimension, entries);
  std::cout << "stored " << entries.size() << " vectors in " << output << "\n";
  return 0;
}

// --- build ------------------------------------------------------------------------

int cmd_build(const RunConfig& cfg) {
  require_inputs(cfg, cfg.index_splits());
  std::vector<ParsedInstance> instances;
  for (Split split : cfg.index_splits()) {
    auto part = load_checked(cfg, split);
    instances.insert(instances.end(), std::make_move_iterator(part.begin()),
                     std::make_move_iterator(part.end()));
  }
  Embedder embedder(cfg.embedding);
  BuildOptions options;
  options.render = cfg.render();
  options.unordered_no_relation_pairs = cfg.unordered_no_relation_pairs;
  IndexStore store = build_store(instances, cfg.index_variants, embedder, options);
  store.manifest().config = config_to_json(cfg);
  const fs::path parent = fs::path(cfg.index_path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
  persist(store, cfg.index_path);
  embedder.save_cache();
  const json described = store.describe();
  write_report(cfg, "build.json", {{"manifest", described}});
  std::cout << described.dump(2) << "\n";
  return 0;
}

// --- classify / eval --------------------------------------------------------------

struct Loaded {
  std::unique_ptr<Embedder> embedder;
  IndexStore store;
  CompatibilityMap cmap;
};

Loaded open_index(const RunConfig& cfg) {
  Loaded l;
  l.embedder = std::make_unique<Embedder>(cfg.embedding);
  l.store = load_index(cfg, *l.embedder);
  l.cmap = CompatibilityMap::from_manifest(l.store.manifest());
  return l;
}

int cmd_classify(const RunConfig& cfg, Split split, const std::string& output) {
  require_inputs(cfg, {split});
  Loaded l = open_index(cfg);
  const auto instances = load_checked(cfg, split);
  const ClassifierConfig ccfg{cfg.variant, cfg.k, cfg.render()};
  const auto preds = classify_batch(instances, l.store, l.cmap, ccfg, *l.embedder, cfg.threads);
  l.embedder->save_cache();
  // One JSON object per line; the first line echoes the configuration.
  std::string lines = json{{"config", config_to_json(cfg)}, {"split", split_name(split)}}.dump() + "\n";
  for (const auto& p : preds) lines += prediction_to_json(p).dump() + "\n";
  const std::string name =
      output.empty() ? "predictions_" + std::string(split_name(split)) + ".jsonl" : output;
  write_file(report_path(cfg, name), lines);
  std::cout << "classified " << preds.size() << " instances -> " << report_path(cfg, name) << "\n";
  return 0;
}

int cmd_eval(const RunConfig& cfg, Split split, bool all_variants) {
  require_inputs(cfg, {split});
  Loaded l = open_index(cfg);
  const auto instances = load_checked(cfg, split);
  const LabelMap gold = gold_labels(instances);
  const std::string sname(split_name(split));

  std::vector<PatternVariant> variants{cfg.variant};
  if (all_variants) {
    variants.clear();
    for (PatternVariant v : l.store.variants()) variants.push_back(v);
  }
  json table = json::array();
  std::string tsv = "variant\tmicro_f1\tmacro_f1\tfallback_rate\n";
  for (PatternVariant v : variants) {
    const ClassifierConfig ccfg{v, cfg.k, cfg.render()};
    const auto preds = classify_batch(instances, l.store, l.cmap, ccfg, *l.embedder, cfg.threads);
    const EvalReport report = f1_report(preds, gold, cfg.metric, cfg.include_no_relation);
    const std::string vname(variant_name(v));
    if (v == cfg.variant) {
      write_report(cfg, "eval_" + sname + ".json",
                   {{"split", sname}, {"variant", vname}, {"k", cfg.k}, {"report", report.to_json()}});
      write_text_report(cfg, "eval_" + sname + ".txt", report.to_text());
    }
    table.push_back({{"variant", vname}, {"micro_f1", report.micro_f1}, {"macro_f1", report.macro_f1},
                     {"headline", report.headline()}, {"fallback_rate", report.fallback_rate}});
    char line[160];
    std::snprintf(line, sizeof line, "%s\t%.6f\t%.6f\t%.6f\n", vname.c_str(), report.micro_f1,
                  report.macro_f1, report.fallback_rate);
    tsv += line;
    std::printf("%-12s K=%zu %s-F1=%.4f (micro %.4f, macro %.4f) fallback=%.2f%%\n", vname.c_str(),
                cfg.k, std::string(metric_name(cfg.metric)).c_str(), report.headline(),
                report.micro_f1, report.macro_f1, 100.0 * report.fallback_rate);
  }
  if (all_variants) {
    write_report(cfg, "eval_table_" + sname + ".json", {{"split", sname}, {"k", cfg.k}, {"rows", table}});
    write_text_report(cfg, "eval_table_" + sname + ".tsv", tsv);
  }
  l.embedder->save_cache();
  return 0;
}

// --- sweep --------------------------------------------------------------------------

int cmd_sweep(const RunConfig& cfg, bool skip_selection) {
  require_inputs(cfg, {Split::kDev});
  Loaded l = open_index(cfg);
  SweepOptions options{cfg.sweep.k_min, cfg.sweep.k_max, cfg.metric, cfg.include_no_relation,
                       cfg.threads};

  const auto dev = load_checked(cfg, Split::kDev);
  const auto dev_queries = make_queries(dev, cfg.variant, *l.embedder, cfg.render());
  const SweepResult oracle =
      sweep_k(dev_queries, gold_labels(dev), l.store, l.cmap, cfg.variant, options, "dev");
  write_text_report(cfg, "sweep_dev.tsv", plot_series("K", "F1", oracle.points));

  json body = {{"oracle", oracle.to_json()}};
  std::printf("oracle-K on dev: K=%zu F1=%.4f\n", oracle.chosen_k, oracle.chosen_f1);

  if (!skip_selection) {
    // K is chosen on a holdout carved from the training data, with an index
    // built from the rest.
    require_inputs(cfg, cfg.index_splits());
    const auto train = load_checked(cfg, Split::kTrain);
    auto [rest, holdout] = split_holdout(train, cfg.sweep.selection_fraction, cfg.seed);
    if (cfg.include_public_test_in_index) {
      auto pub = load_checked(cfg, Split::kPublicTest);
      rest.insert(rest.end(), pub.begin(), pub.end());
    }
    BuildOptions bopt;
    bopt.render = cfg.render();
    bopt.unordered_no_relation_pairs = cfg.unordered_no_relation_pairs;
    std::vector<PatternVariant> fam;
    if (cfg.variant != PatternVariant::kSentenceFallback) fam.push_back(cfg.variant);
    const IndexStore hold_store = build_store(rest, fam, *l.embedder, bopt);
    const auto hold_queries = make_queries(holdout, cfg.variant, *l.embedder, cfg.render());
    const SweepResult selected = sweep_k(hold_queries, gold_labels(holdout), hold_store, l.cmap,
                                         cfg.variant, options, "train_holdout");
    write_text_report(cfg, "sweep_holdout.tsv", plot_series("K", "F1", selected.points));
    double dev_at_selected = 0.0;
    for (const auto& [k, f1] : oracle.points) {
      if (k == selected.chosen_k) dev_at_selected = f1;
    }
    body["selected"] = selected.to_json();
    body["selected"]["holdout_size"] = holdout.size();
    body["dev_f1_at_selected_k"] = dev_at_selected;
    std::printf("selected-K on train holdout: K=%zu (holdout F1=%.4f), dev F1 at that K=%.4f\n",
                selected.chosen_k, selected.chosen_f1, dev_at_selected);
  }
  write_report(cfg, "sweep.json", body);
  l.embedder->save_cache();
  return 0;
}

// --- budget / select-patterns --------------------------------------------------------

BudgetOptions budget_options(const RunConfig& cfg) {
  BudgetOptions b;
  b.selection = cfg.budget.selection;
  b.n_values = cfg.budget.n_values;
  b.k = cfg.budget_k();
  b.k_count = cfg.budget.k_count;
  b.selection_k = cfg.budget.selection_k;
  b.seed = cfg.seed;
  b.mode = cfg.metric;
  b.include_no_relation = cfg.include_no_relation;
  b.unordered_no_relation_pairs = cfg.unordered_no_relation_pairs;
  b.threads = cfg.threads;
  return b;
}

int cmd_budget(const RunConfig& cfg) {
  require_inputs(cfg, {Split::kTrain, Split::kDev});
  Loaded l = open_index(cfg);
  std::vector<Instance> train;
  for (const auto& pi : load_checked(cfg, Split::kTrain)) train.push_back(pi.instance);
  const auto dev = load_checked(cfg, Split::kDev);
  const auto queries = make_queries(dev, cfg.variant, *l.embedder, cfg.render());
  const BudgetResult result = run_budget(train, queries, gold_labels(dev), l.store, l.cmap,
                                         budget_options(cfg));
  const std::string mode(selection_name(result.selection));
  write_report(cfg, "budget_" + mode + ".json", {{"budget", result.to_json()}});
  write_text_report(cfg, "budget_" + mode + ".tsv", plot_series("N", "F1", result.points));
  for (std::size_t i = 0; i < result.points.size(); ++i) {
    std::printf("%s N=%zu K=%zu F1=%.4f (%zu training instances)\n", mode.c_str(),
                result.points[i].first, result.k, result.points[i].second, result.index_sizes[i]);
  }
  l.embedder->save_cache();
  return 0;
}

int cmd_select_patterns(const RunConfig& cfg, std::size_t n, const std::string& output) {
  require_inputs(cfg, {Split::kTrain, Split::kDev});
  std::vector<Instance> train;
  for (const auto& pi : load_checked(cfg, Split::kTrain)) train.push_back(pi.instance);
  std::vector<Instance> selected;
  if (cfg.budget.selection == SelectionMode::kRandom) {
    selected = random_pattern_subset(train, n, cfg.seed, cfg.unordered_no_relation_pairs);
  } else {
    Loaded l = open_index(cfg);
    std::set<std::string> train_ids;
    for (const auto& inst : train) train_ids.insert(inst.id);
    const IndexStore train_store = l.store.filtered(train_ids);
    const auto dev = load_checked(cfg, Split::kDev);
    const auto queries = make_queries(dev, cfg.variant, *l.embedder, cfg.render());
    MostFrequentOptions mf;
    mf.classify_k = cfg.budget.selection_k == 0 ? cfg.budget_k() : cfg.budget.selection_k;
    mf.k_count = cfg.budget.k_count == 0 ? cfg.budget_k() : cfg.budget.k_count;
    mf.threads = cfg.threads;
    selected = most_frequent_patterns(train, queries, gold_labels(dev), train_store, l.cmap, n, mf);
    l.embedder->save_cache();
  }
  const std::string path = output.empty()
                               ? report_path(cfg, "selected_" + std::string(selection_name(cfg.budget.selection)) +
                                                      "_" + std::to_string(n) + ".jsonl")
                               : output;
  const fs::path parent = fs::path(path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
  write_dataset(path, selected);
  std::cout << "selected " << selected.size() << " training instances -> " << path << "\n";
  return 0;
}

// --- serve --------------------------------------------------------------------------

int cmd_serve(RunConfig cfg, std::optional<int> port) {
  if (port) cfg.serve.port = *port;
  require_inputs(cfg, {cfg.serve.pool_split});

  // Signals are taken synchronously by a dedicated thread; block them before
  // any worker thread exists so every thread inherits the mask.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  sigaddset(&signals, SIGUSR1);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  Loaded l = open_index(cfg);
  std::set<std::string> relations;
  for (const auto& [pair, labels] : l.store.manifest().pair_labels) {
    for (const auto& label : labels) {
      if (label != kNoRelation) relations.insert(label);
    }
  }
  auto pool = load_checked(cfg, cfg.serve.pool_split);
  AnnotationSession session(std::move(l.store), l.cmap, std::move(pool), relations, *l.embedder,
                            {cfg.variant, cfg.k, cfg.render()}, cfg.threads);
  if (!cfg.serve.snapshot.empty() && fs::exists(cfg.serve.snapshot)) {
    session.import_state(cfg.serve.snapshot);
    std::cerr << "restored " << session.state().labeled.size() << " labels from "
              << cfg.serve.snapshot << "\n";
  }

  HitlServer server(session, cfg.serve.ui_dir);
  const int bound = server.bind(cfg.serve.host, cfg.serve.port);
  std::thread waiter([&] {
    int sig = 0;
    sigwait(&signals, &sig);
    server.stop();
  });
  std::printf("listening on http://%s:%d\n", cfg.serve.host.c_str(), bound);
  std::fflush(stdout);
  server.serve();
  pthread_kill(waiter.native_handle(), SIGUSR1);  // no-op if already woken
  waiter.join();

  if (!cfg.serve.snapshot.empty()) {
    session.export_state(cfg.serve.snapshot);
    std::cerr << "snapshot written to " << cfg.serve.snapshot << "\n";
  }
  l.embedder->save_cache();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pattern-based kNN relation extraction"};
  app.require_subcommand(1);
  app.fallthrough();

  Overrides o;
  app.add_option("-c,--config", o.config_path, "Run configuration (JSON)");
  app.add_option("--k", o.k, "Neighbors per class index (1-100)");
  app.add_option("--variant", o.variant, "SDP, SDP_NER, SDP_DEP, SDP_DEP_NER or SENTENCE_FALLBACK");
  app.add_option("--threads", o.threads, "Worker threads (0: all cores)");
  app.add_option("--metric", o.metric, "Headline metric: micro or macro");
  app.add_option("--seed", o.seed, "Seed for sampling");
  app.add_option("--index", o.index_path, "Index file");
  app.add_option("--report-dir", o.report_dir, "Report directory");
  app.add_flag("--train-only", o.train_only, "Leave public_test out of the index");
  app.add_flag("--exclude-no-relation", o.exclude_no_relation,
               "Score without no_relation (micro over relations, macro without it)");

  auto* ingest = app.add_subcommand("ingest-check", "Load all configured splits and report problems");

  std::string refind_in, refind_out, refind_split = "train";
  auto* convert = app.add_subcommand("convert-refind", "Convert a REFinD release file to canonical JSONL");
  convert->add_option("input", refind_in)->required();
  convert->add_option("output", refind_out)->required();
  convert->add_option("--split", refind_split);

  std::vector<std::string> dump_splits;
  std::string dump_out;
  auto* dump = app.add_subcommand("dump-patterns", "Write {id, variant, text} for every pattern");
  dump->add_option("--split", dump_splits);
  dump->add_option("-o,--output", dump_out)->required();

  std::string vec_in, vec_out;
  std::size_t vec_dim = 768;
  auto* import = app.add_subcommand("import-vectors", "Build a vector store from {text, vector} JSONL");
  import->add_option("input", vec_in)->required();
  import->add_option("output", vec_out)->required();
  import->add_option("--dimension", vec_dim);

  auto* build = app.add_subcommand("build", "Build and persist the class indices");

  std::string split_arg = "dev", out_name;
  auto* classify = app.add_subcommand("classify", "Classify a split and dump predictions");
  classify->add_option("--split", split_arg);
  classify->add_option("-o,--output", out_name, "Report file name");

  bool all_variants = false;
  auto* eval = app.add_subcommand("eval", "Score a split");
  eval->add_option("--split", split_arg);
  eval->add_flag("--all-variants", all_variants, "Score every indexed variant");

  bool no_selection = false;
  auto* sweep = app.add_subcommand("sweep", "F1 over a K range (selected-K and oracle-K)");
  sweep->add_flag("--oracle-only", no_selection, "Skip the training-holdout selection pass");

  std::optional<std::string> selection;
  std::vector<std::size_t> n_values;
  std::optional<std::size_t> budget_k;
  auto* budget = app.add_subcommand("budget", "F1 with N patterns per class");
  budget->add_option("--selection", selection, "random or most_frequent");
  budget->add_option("--n", n_values, "Patterns per class");
  budget->add_option("--budget-k", budget_k, "K at query time");

  std::size_t select_n = 100;
  std::string select_out;
  auto* select = app.add_subcommand("select-patterns", "Write the N-per-class training subset");
  select->add_option("--selection", selection, "random or most_frequent");
  select->add_option("--n", select_n);
  select->add_option("-o,--output", select_out);

  std::optional<int> port;
  auto* serve = app.add_subcommand("serve", "Run the annotation service");
  serve->add_option("--port", port, "Port (0: ephemeral)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (convert->parsed()) return cmd_convert_refind(refind_in, refind_out, refind_split);
    if (import->parsed()) return cmd_import_vectors(vec_in, vec_out, vec_dim);

    if (o.config_path.empty()) throw Error(ErrorCode::kConfig, "--config is required");
    RunConfig cfg = resolve_config(o);
    if (selection) cfg.budget.selection = parse_selection(*selection);
    if (!n_values.empty()) cfg.budget.n_values = n_values;
    if (budget_k) cfg.budget.k = *budget_k;
    validate(cfg);

    if (ingest->parsed()) return cmd_ingest_check(cfg);
    if (dump->parsed()) return cmd_dump_patterns(cfg, dump_splits, dump_out);
    if (build->parsed()) return cmd_build(cfg);
    if (classify->parsed()) return cmd_classify(cfg, parse_split(split_arg), out_name);
    if (eval->parsed()) return cmd_eval(cfg, parse_split(split_arg), all_variants);
    if (sweep->parsed()) return cmd_sweep(cfg, no_selection);
    if (budget->parsed()) return cmd_budget(cfg);
    if (select->parsed()) return cmd_select_patterns(cfg, select_n, select_out);
    if (serve->parsed()) return cmd_serve(cfg, port);
  } catch (const Error& e) {
    std::cerr << "pkre: " << error_code_name(e.code()) << ": " << e.what() << "\n";
    return exit_status_for(e.code());
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "pkre: io: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "pkre: internal: " << e.what() << "\n";
    return 3;
  }
  return 3;
}
