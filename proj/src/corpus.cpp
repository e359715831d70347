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

#include "pkre/corpus.hpp"

#include <fstream>
#include <sstream>

#include "pkre/error.hpp"

namespace pkre {

using nlohmann::json;

std::string_view split_name(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kDev: return "dev";
    case Split::kPublicTest: return "public_test";
  }
  return "train";
}

Split parse_split(std::string_view name) {
  if (name == "train") return Split::kTrain;
  if (name == "dev") return Split::kDev;
  if (name == "public_test" || name == "test") return Split::kPublicTest;
  throw Error(ErrorCode::kConfig, "unknown split: " + std::string(name));
}

EntityPairType entity_pair_type(const Instance& instance) {
  return {instance.e1_type, instance.e2_type};
}

std::set<EntityPairType> pair_inventory(std::span<const Instance> instances) {
  std::set<EntityPairType> out;
  for (const auto& inst : instances) out.insert(entity_pair_type(inst));
  return out;
}

std::set<std::string> relation_inventory(std::span<const Instance> instances) {
  std::set<std::string> out;
  for (const auto& inst : instances) {
    if (!inst.is_no_relation()) out.insert(inst.relation);
  }
  return out;
}

bool is_well_formed_tree(const DependencyParse& parse) {
  const std::size_t n = parse.heads.size();
  if (n == 0 || parse.labels.size() != n) return false;
  std::size_t roots = 0;
  for (int h : parse.heads) {
    if (h == kRootHead) {
      ++roots;
    } else if (h < 0 || static_cast<std::size_t>(h) >= n) {
      return false;
    }
  }
  if (roots != 1) return false;
  // 0 = unvisited, 1 = on current walk, 2 = reaches root.
  std::vector<char> state(n, 0);
  std::vector<std::size_t> walk;
  for (std::size_t start = 0; start < n; ++start) {
    walk.clear();
    std::size_t cur = start;
    while (true) {
      if (state[cur] == 2) break;
      if (state[cur] == 1) return false;  // cycle
      state[cur] = 1;
      walk.push_back(cur);
      if (parse.heads[cur] == kRootHead) break;
      cur = static_cast<std::size_t>(parse.heads[cur]);
    }
    for (std::size_t t : walk) state[t] = 2;
  }
  return true;
}

ParsedInstance attach_parse(const Instance& instance, DependencyParse parse,
                            NerAnnotation ner) {
  const std::size_t n = instance.tokens.size();
  if (parse.token_count() != n || parse.labels.size() != n) {
    throw Error(ErrorCode::kTokenCountMismatch,
                "instance " + instance.id + " has " + std::to_string(n) +
                    " tokens but its parse has " +
                    std::to_string(parse.token_count()));
  }
  if (ner.tags.empty()) {
    ner.tags.resize(n);
  } else if (ner.tags.size() != n) {
    throw Error(ErrorCode::kTokenCountMismatch,
                "instance " + instance.id + " has " + std::to_string(n) +
                    " tokens but its NER annotation has " +
                    std::to_string(ner.tags.size()));
  }
  ParsedInstance out;
  out.instance = instance;
  out.parse_failed = !is_well_formed_tree(parse);
  out.parse = std::move(parse);
  out.ner = std::move(ner);
  return out;
}

ParsedInstance without_parse(const Instance& instance) {
  ParsedInstance out;
  out.instance = instance;
  out.ner.tags.resize(instance.tokens.size());
  out.parse_failed = true;
  return out;
}

namespace {

std::size_t require_index(const json& record, const char* field) {
  auto it = record.find(field);
  if (it == record.end()) {
    throw Error(ErrorCode::kMalformedRecord,
                std::string("missing field '") + field + "'");
  }
  if (!it->is_number_integer() || it->get<long long>() < 0) {
    throw Error(ErrorCode::kMalformedRecord,
                std::string("field '") + field +
                    "' must be a non-negative integer");
  }
  return it->get<std::size_t>();
}

std::string require_string(const json& record, const char* field) {
  auto it = record.find(field);
  if (it == record.end()) {
    throw Error(ErrorCode::kMalformedRecord,
                std::string("missing field '") + field + "'");
  }
  if (!it->is_string() || it->get_ref<const std::string&>().empty()) {
    throw Error(ErrorCode::kMalformedRecord,
                std::string("field '") + field +
                    "' must be a non-empty string");
  }
  return it->get<std::string>();
}

}  // namespace

Instance instance_from_json(const json& record, Split split) {
  if (!record.is_object()) {
    throw Error(ErrorCode::kMalformedRecord, "record is not an object");
  }
  Instance inst;
  inst.split = split;
  inst.id = require_string(record, "id");
  auto tokens = record.find("tokens");
  if (tokens == record.end() || !tokens->is_array() || tokens->empty()) {
    throw Error(ErrorCode::kMalformedRecord,
                "field 'tokens' must be a non-empty array");
  }
  for (const auto& t : *tokens) {
    if (!t.is_string()) {
      throw Error(ErrorCode::kMalformedRecord, "tokens must be strings");
    }
    inst.tokens.push_back(t.get<std::string>());
  }
  inst.e1 = {require_index(record, "e1_start"), require_index(record, "e1_end")};
  inst.e2 = {require_index(record, "e2_start"), require_index(record, "e2_end")};
  inst.e1_type = require_string(record, "e1_type");
  inst.e2_type = require_string(record, "e2_type");
  inst.relation = require_string(record, "relation");

  const std::size_t n = inst.tokens.size();
  for (const TokenSpan* span : {&inst.e1, &inst.e2}) {
    if (span->begin >= span->end || span->end > n) {
      throw Error(ErrorCode::kMalformedRecord,
                  "entity span [" + std::to_string(span->begin) + ", " +
                      std::to_string(span->end) + ") is empty or exceeds " +
                      std::to_string(n) + " tokens");
    }
  }
  if (inst.e1.begin < inst.e2.end && inst.e2.begin < inst.e1.end) {
    throw Error(ErrorCode::kMalformedRecord, "entity spans overlap");
  }
  return inst;
}

json instance_to_json(const Instance& inst) {
  return json{{"id", inst.id},           {"tokens", inst.tokens},
              {"e1_start", inst.e1.begin}, {"e1_end", inst.e1.end},
              {"e1_type", inst.e1_type},   {"e2_start", inst.e2.begin},
              {"e2_end", inst.e2.end},     {"e2_type", inst.e2_type},
              {"relation", inst.relation}};
}

LoadResult load_dataset(const std::string& path, Split split) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot read instance file: " + path);
  LoadResult result;
  std::string line;
  std::size_t index = 0;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      result.instances.push_back(instance_from_json(json::parse(line), split));
    } catch (const json::exception& e) {
      result.errors.push_back({index, std::string("invalid JSON: ") + e.what()});
    } catch (const Error& e) {
      result.errors.push_back({index, e.what()});
    }
    ++index;
  }
  return result;
}

void write_dataset(const std::string& path,
                   std::span<const Instance> instances) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write instance file: " + path);
  for (const auto& inst : instances) out << instance_to_json(inst).dump() << '\n';
}

json canonical_from_refind(const json& record) {
  // The release uses TACRED naming in some versions and e1/e2 naming in
  // others; both use inclusive end offsets.
  auto pick = [&](const char* a, const char* b) -> const json& {
    if (record.contains(a)) return record.at(a);
    if (record.contains(b)) return record.at(b);
    throw Error(ErrorCode::kMalformedRecord,
                std::string("missing field '") + a + "' / '" + b + "'");
  };
  json out;
  out["id"] = pick("id", "id");
  out["tokens"] = pick("token", "tokens");
  out["e1_start"] = pick("e1_start", "subj_start").get<std::size_t>();
  out["e1_end"] = pick("e1_end", "subj_end").get<std::size_t>() + 1;
  out["e1_type"] = pick("e1_type", "subj_type");
  out["e2_start"] = pick("e2_start", "obj_start").get<std::size_t>();
  out["e2_end"] = pick("e2_end", "obj_end").get<std::size_t>() + 1;
  out["e2_type"] = pick("e2_type", "obj_type");
  out["relation"] = pick("relation", "relation");
  return out;
}

ParseLoadResult read_conllu(std::istream& in) {
  ParseLoadResult result;
  std::string line;
  std::string sent_id;
  DependencyParse current;
  bool broken = false;
  std::string broken_reason;
  std::size_t sentence_index = 0;
  std::vector<long> raw_heads;

  auto flush = [&] {
    if (raw_heads.empty() && sent_id.empty()) return;
    if (sent_id.empty()) {
      result.errors.push_back({sentence_index, "sentence without sent_id"});
    } else if (broken) {
      result.errors.push_back({sentence_index, sent_id + ": " + broken_reason});
    } else {
      current.heads.clear();
      for (long h : raw_heads) {
        current.heads.push_back(h == 0 ? kRootHead : static_cast<int>(h - 1));
      }
      result.parses[sent_id] = current;
    }
    ++sentence_index;
    sent_id.clear();
    current = {};
    raw_heads.clear();
    broken = false;
  };

  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      flush();
      continue;
    }
    if (line[0] == '#') {
      constexpr std::string_view kKey = "sent_id";
      std::string_view body(line);
      body.remove_prefix(1);
      while (!body.empty() && body.front() == ' ') body.remove_prefix(1);
      if (body.starts_with(kKey)) {
        body.remove_prefix(kKey.size());
        while (!body.empty() && (body.front() == ' ' || body.front() == '=')) {
          body.remove_prefix(1);
        }
        sent_id = std::string(body);
      }
      continue;
    }
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string col;
    while (std::getline(ss, col, '\t')) cols.push_back(col);
    if (cols.size() < 8) {
      broken = true;
      broken_reason = "token line with fewer than 8 columns";
      continue;
    }
    // Multiword ranges "3-4" and empty nodes "5.1" do not take part in the
    // basic tree.
    if (cols[0].find_first_of("-.") != std::string::npos) continue;
    try {
      long id = std::stol(cols[0]);
      if (id != static_cast<long>(raw_heads.size()) + 1) {
        broken = true;
        broken_reason = "non-consecutive token ids";
        continue;
      }
      raw_heads.push_back(std::stol(cols[6]));
      current.labels.push_back(cols[7]);
    } catch (const std::exception&) {
      broken = true;
      broken_reason = "non-numeric ID or HEAD column";
    }
  }
  flush();
  return result;
}

ParseLoadResult load_conllu(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot read parse file: " + path);
  return read_conllu(in);
}

void write_conllu(std::ostream& out, const std::string& id,
                  std::span<const std::string> tokens,
                  const DependencyParse& parse) {
  out << "# sent_id = " << id << '\n';
  for (std::size_t i = 0; i < parse.heads.size(); ++i) {
    const int h = parse.heads[i];
    out << (i + 1) << '\t' << (i < tokens.size() ? tokens[i] : "_")
        << "\t_\t_\t_\t_\t" << (h == kRootHead ? 0 : h + 1) << '\t'
        << parse.labels[i] << "\t_\t_\n";
  }
  out << '\n';
}

NerLoadResult load_ner(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot read NER file: " + path);
  NerLoadResult result;
  std::string line;
  std::size_t index = 0;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      json rec = json::parse(line);
      const auto& tags = rec.at("tags");
      if (!tags.is_array()) {
        throw Error(ErrorCode::kMalformedRecord, "'tags' must be an array");
      }
      NerAnnotation ner;
      for (const auto& t : tags) {
        if (t.is_null()) {
          ner.tags.emplace_back(std::nullopt);
        } else if (t.is_string()) {
          ner.tags.emplace_back(t.get<std::string>());
        } else {
          throw Error(ErrorCode::kMalformedRecord, "tag must be string or null");
        }
      }
      result.annotations[rec.at("id").get<std::string>()] = std::move(ner);
    } catch (const std::exception& e) {
      result.errors.push_back({index, e.what()});
    }
    ++index;
  }
  return result;
}

AttachResult attach_all(std::span<const Instance> instances,
                        const std::map<std::string, DependencyParse>& parses,
                        const std::map<std::string, NerAnnotation>& ner) {
  AttachResult result;
  result.instances.reserve(instances.size());
  for (std::size_t i = 0; i < instances.size(); ++i) {
    const Instance& inst = instances[i];
    auto p = parses.find(inst.id);
    if (p == parses.end()) {
      result.instances.push_back(without_parse(inst));
    } else {
      NerAnnotation tags;
      if (auto n = ner.find(inst.id); n != ner.end()) tags = n->second;
      try {
        result.instances.push_back(attach_parse(inst, p->second, tags));
      } catch (const Error& e) {
        result.errors.push_back({i, e.what()});
        result.instances.push_back(without_parse(inst));
      }
    }
    if (result.instances.back().parse_failed) ++result.parse_failures;
  }
  return result;
}

}  // namespace pkre
