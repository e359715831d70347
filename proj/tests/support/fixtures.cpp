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

#include "fixtures.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <set>
#include <sstream>

#include "pkre/error.hpp"

namespace pkre::testing {

namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::uint64_t splitmix(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

std::size_t pick(std::mt19937_64& rng, std::size_t n) {
  return static_cast<std::size_t>(rng() % n);
}

}  // namespace

std::vector<float> hash_vector(const std::string& text, std::size_t dimension) {
  std::uint64_t state = fnv1a(text);
  std::vector<float> v(dimension);
  for (auto& x : v) {
    x = static_cast<float>(static_cast<double>(splitmix(state) >> 11) / 9007199254740992.0 * 2.0 - 1.0);
  }
  return v;
}

std::vector<std::vector<float>> HashBackend::fetch(std::span<const std::string> texts) {
  ++requests;
  texts_seen += texts.size();
  std::vector<std::vector<float>> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(hash_vector(t, dimension_));
  return out;
}

std::vector<std::vector<float>> TableBackend::fetch(std::span<const std::string> texts) {
  std::vector<std::vector<float>> out;
  for (const auto& t : texts) {
    auto it = table_.find(t);
    if (it == table_.end()) throw Error(ErrorCode::kMissingEmbedding, "no vector for: " + t);
    out.push_back(it->second);
  }
  return out;
}

ProviderConfig stub_config(std::size_t dimension) {
  ProviderConfig cfg;
  cfg.dimension = dimension;
  cfg.path = "(stub)";
  cfg.batch_size = 32;
  return cfg;
}

std::unique_ptr<Embedder> hash_embedder(std::size_t dimension) {
  return std::make_unique<Embedder>(stub_config(dimension),
                                    std::make_unique<HashBackend>(dimension));
}

Instance make_instance(std::string id, const std::string& sentence, TokenSpan e1,
                       TokenSpan e2, std::string e1_type, std::string e2_type,
                       std::string relation, Split split) {
  Instance inst;
  inst.id = std::move(id);
  std::istringstream in(sentence);
  std::string tok;
  while (in >> tok) inst.tokens.push_back(tok);
  inst.e1 = e1;
  inst.e2 = e2;
  inst.e1_type = std::move(e1_type);
  inst.e2_type = std::move(e2_type);
  inst.relation = std::move(relation);
  inst.split = split;
  return inst;
}

DependencyParse random_tree(std::size_t n, std::mt19937_64& rng) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  DependencyParse parse;
  parse.heads.assign(n, kRootHead);
  parse.labels.assign(n, "dep");
  static const char* kLabels[] = {"nsubj", "dobj", "prep", "pobj", "amod", "compound", "det", "conj"};
  for (std::size_t i = 1; i < n; ++i) {
    parse.heads[order[i]] = static_cast<int>(order[pick(rng, i)]);
    parse.labels[order[i]] = kLabels[pick(rng, 8)];
  }
  if (n > 0) parse.labels[order[0]] = "ROOT";
  return parse;
}

std::vector<std::size_t> bfs_path(const DependencyParse& parse, std::size_t from,
                                  std::size_t to) {
  const std::size_t n = parse.token_count();
  std::vector<std::vector<std::size_t>> adj(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (parse.heads[i] >= 0) {
      adj[i].push_back(static_cast<std::size_t>(parse.heads[i]));
      adj[static_cast<std::size_t>(parse.heads[i])].push_back(i);
    }
  }
  std::vector<long> prev(n, -2);
  std::deque<std::size_t> queue{from};
  prev[from] = -1;
  while (!queue.empty()) {
    const std::size_t u = queue.front();
    queue.pop_front();
    if (u == to) break;
    for (std::size_t v : adj[u]) {
      if (prev[v] == -2) {
        prev[v] = static_cast<long>(u);
        queue.push_back(v);
      }
    }
  }
  if (prev[to] == -2) return {};
  std::vector<std::size_t> path;
  for (long u = static_cast<long>(to); u != -1; u = prev[static_cast<std::size_t>(u)]) {
    path.push_back(static_cast<std::size_t>(u));
  }
  std::reverse(path.begin(), path.end());
  return path;
}

const std::vector<LabelSchema>& refind_like_schema() {
  static const std::vector<LabelSchema> schema = {
      {"org:date:formed_on", "ORG", "DATE"},
      {"org:date:acquired_on", "ORG", "DATE"},
      {"org:gpe:operations_in", "ORG", "GPE"},
      {"org:gpe:headquartered_in", "ORG", "GPE"},
      {"org:gpe:formed_in", "ORG", "GPE"},
      {"org:money:revenue_of", "ORG", "MONEY"},
      {"org:money:profit_of", "ORG", "MONEY"},
      {"org:money:loss_of", "ORG", "MONEY"},
      {"org:money:cost_of", "ORG", "MONEY"},
      {"org:org:shares_of", "ORG", "ORG"},
      {"org:org:subsidiary_of", "ORG", "ORG"},
      {"org:org:acquired_by", "ORG", "ORG"},
      {"org:org:agreement_with", "ORG", "ORG"},
      {"pers:org:employee_of", "PERSON", "ORG"},
      {"pers:org:founder_of", "PERSON", "ORG"},
      {"pers:org:member_of", "PERSON", "ORG"},
      {"pers:title:title", "PERSON", "TITLE"},
      {"pers:univ:employee_of", "PERSON", "UNIV"},
      {"pers:univ:member_of", "PERSON", "UNIV"},
      {"pers:univ:attended", "PERSON", "UNIV"},
      {"pers:gov_agy:member_of", "PERSON", "GOV_AGY"},
  };
  return schema;
}

const std::vector<std::pair<std::string, std::string>>& refind_like_pairs() {
  static const std::vector<std::pair<std::string, std::string>> pairs = {
      {"ORG", "DATE"},   {"ORG", "GPE"},     {"ORG", "MONEY"},  {"ORG", "ORG"},
      {"PERSON", "ORG"}, {"PERSON", "TITLE"}, {"PERSON", "UNIV"}, {"PERSON", "GOV_AGY"}};
  return pairs;
}

std::vector<ParsedInstance> synthetic_corpus(std::size_t n, std::uint64_t seed, Split split,
                                             const std::string& id_prefix) {
  static const std::vector<std::string> kWords = {
      "the",     "company", "acquired", "shares", "of",      "in",       "revenue", "reported",
      "quarter", "million", "board",    "served", "as",      "director", "officer", "during",
      "fiscal",  "year",    "agreed",   "with",   "subsidiary", "located", "founded", "by",
      "and",     "its",     "net",      "loss",   "profit",  "costs",    "filed",   "joined"};
  static const std::vector<std::string> kNerTypes = {"ORG", "PERSON", "DATE", "GPE", "MONEY"};
  const auto& schema = refind_like_schema();
  const auto& pairs = refind_like_pairs();

  std::mt19937_64 rng(seed);
  std::vector<ParsedInstance> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::string relation, t1, t2;
    const std::size_t slot = i < schema.size() + pairs.size() ? i : pick(rng, 40);
    if (slot < schema.size()) {
      relation = schema[slot].label;
      t1 = schema[slot].e1_type;
      t2 = schema[slot].e2_type;
    } else {
      const auto& p = pairs[slot < schema.size() + pairs.size() ? slot - schema.size() : pick(rng, pairs.size())];
      relation = std::string(kNoRelation);
      t1 = p.first;
      t2 = p.second;
    }

    const std::size_t len = 6 + pick(rng, 13);
    Instance inst;
    char id[32];
    std::snprintf(id, sizeof id, "%s%06zu", id_prefix.c_str(), i);
    inst.id = id;
    inst.split = split;
    for (std::size_t t = 0; t < len; ++t) inst.tokens.push_back(kWords[pick(rng, kWords.size())]);
    const std::size_t l1 = 1 + pick(rng, 3), l2 = 1 + pick(rng, 2);
    const std::size_t b1 = pick(rng, len - l1 - l2 + 1);
    const std::size_t b2 = b1 + l1 + pick(rng, len - b1 - l1 - l2 + 1);
    TokenSpan s1{b1, b1 + l1}, s2{b2, b2 + l2};
    if (pick(rng, 2) == 1) std::swap(s1, s2);  // e1 may follow e2
    inst.e1 = s1;
    inst.e2 = s2;
    for (std::size_t t = s1.begin; t < s1.end; ++t) inst.tokens[t] = "E1w" + std::to_string(pick(rng, 50));
    for (std::size_t t = s2.begin; t < s2.end; ++t) inst.tokens[t] = "E2w" + std::to_string(pick(rng, 50));
    inst.e1_type = t1;
    inst.e2_type = t2;
    inst.relation = relation;

    DependencyParse parse = random_tree(len, rng);
    if (pick(rng, 10) == 0) {
      // Head cycle without a root: the loader must flag it, not reject it.
      for (std::size_t t = 0; t < len; ++t) parse.heads[t] = static_cast<int>((t + 1) % len);
    }
    NerAnnotation ner;
    ner.tags.resize(len);
    for (std::size_t t = 0; t < len; ++t) {
      if (s1.contains(t)) {
        ner.tags[t] = t1;
      } else if (s2.contains(t)) {
        ner.tags[t] = t2;
      } else if (pick(rng, 7) == 0) {
        ner.tags[t] = kNerTypes[pick(rng, kNerTypes.size())];
      }
    }
    out.push_back(attach_parse(inst, std::move(parse), std::move(ner)));
  }
  return out;
}

TempDir::TempDir() {
  static std::atomic<unsigned> counter{0};
  std::random_device rd;
  path_ = std::filesystem::temp_directory_path() /
          ("pkre_test_" + std::to_string(rd()) + "_" + std::to_string(counter++));
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

SplitFiles write_split(const std::filesystem::path& dir, const std::string& name,
                       std::span<const ParsedInstance> data) {
  SplitFiles files{(dir / (name + ".jsonl")).string(), (dir / (name + ".conllu")).string(),
                   (dir / (name + ".ner.jsonl")).string()};
  std::vector<Instance> plain;
  std::ofstream conllu(files.parses), ner(files.ner);
  for (const auto& pi : data) {
    plain.push_back(pi.instance);
    if (!pi.parse_failed) write_conllu(conllu, pi.instance.id, pi.instance.tokens, pi.parse);
    if (!pi.ner.tags.empty()) {
      nlohmann::json tags = nlohmann::json::array();
      for (const auto& t : pi.ner.tags) tags.push_back(t ? nlohmann::json(*t) : nlohmann::json());
      ner << nlohmann::json{{"id", pi.instance.id}, {"tags", tags}}.dump() << '\n';
    }
  }
  write_dataset(files.instances, plain);
  return files;
}

std::vector<std::string> all_texts(std::span<const ParsedInstance> data,
                                   const RenderOptions& render) {
  std::set<std::string> texts;
  for (const auto& pi : data) {
    for (const auto& p : render_all(pi, render)) texts.insert(p.text);
  }
  return {texts.begin(), texts.end()};
}

void write_hash_store(const std::string& path, std::size_t dimension,
                      const std::vector<std::vector<ParsedInstance>>& corpora) {
  std::set<std::string> texts;
  for (const auto& c : corpora) {
    for (auto& t : all_texts(c)) texts.insert(std::move(t));
  }
  std::vector<std::pair<std::string, std::vector<float>>> entries;
  for (const auto& t : texts) entries.emplace_back(t, hash_vector(t, dimension));
  write_vector_store(path, dimension, entries);
}

void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << content;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace pkre::testing
