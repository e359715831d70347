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

// Corpus ingestion: relation-extraction instances, their dependency parses
// and NER annotations, and the entity-pair taxonomy.
//
// Instance file format (one JSON object per line):
//   {"id": "...", "tokens": ["..."], "e1_start": 0, "e1_end": 1,
//    "e1_type": "ORG", "e2_start": 2, "e2_end": 3, "e2_type": "ORG",
//    "relation": "org:org:acquired_by"}
// Token indices are 0-based and end-exclusive.

#ifndef PKRE_CORPUS_HPP_
#define PKRE_CORPUS_HPP_

#include <compare>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace pkre {

inline constexpr std::string_view kNoRelation = "no_relation";

enum class Split { kTrain, kDev, kPublicTest };

std::string_view split_name(Split split);
Split parse_split(std::string_view name);

/// Half-open token range [begin, end).
struct TokenSpan {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - begin; }
  bool contains(std::size_t token) const {
    return token >= begin && token < end;
  }
  bool operator==(const TokenSpan&) const = default;
};

struct Instance {
  std::string id;
  std::vector<std::string> tokens;
  TokenSpan e1;
  TokenSpan e2;
  std::string e1_type;
  std::string e2_type;
  std::string relation;
  Split split = Split::kTrain;

  bool is_no_relation() const { return relation == kNoRelation; }
  bool operator==(const Instance&) const = default;
};

/// Ordered (e1 type, e2 type).
struct EntityPairType {
  std::string first;
  std::string second;

  std::string str() const { return first + "-" + second; }
  auto operator<=>(const EntityPairType&) const = default;
};

EntityPairType entity_pair_type(const Instance& instance);

/// Distinct pair types observed over `instances`, sorted.
std::set<EntityPairType> pair_inventory(std::span<const Instance> instances);

/// Distinct relation labels (excluding no_relation), sorted.
std::set<std::string> relation_inventory(std::span<const Instance> instances);

inline constexpr int kRootHead = -1;

/// Output of an external dependency parser. heads[i] is the 0-based index
/// of token i's head, or kRootHead.
struct DependencyParse {
  std::vector<int> heads;
  std::vector<std::string> labels;

  std::size_t token_count() const { return heads.size(); }
  bool operator==(const DependencyParse&) const = default;
};

/// True when the head array has exactly one root, no out-of-range heads,
/// and every token reaches the root (acyclic and connected).
bool is_well_formed_tree(const DependencyParse& parse);

/// Per-token optional named-entity tag from an external NER run.
struct NerAnnotation {
  std::vector<std::optional<std::string>> tags;

  bool operator==(const NerAnnotation&) const = default;
};

struct ParsedInstance {
  Instance instance;
  DependencyParse parse;
  NerAnnotation ner;
  bool parse_failed = false;

  bool operator==(const ParsedInstance&) const = default;
};

/// Binds parser and NER output to an instance. Throws kTokenCountMismatch
/// when either annotation disagrees with the instance's token count. A
/// malformed tree yields parse_failed = true rather than an error.
ParsedInstance attach_parse(const Instance& instance, DependencyParse parse,
                            NerAnnotation ner);

/// An instance with no parse available at all: routed to the fallback path.
ParsedInstance without_parse(const Instance& instance);

struct RecordError {
  std::size_t record_index = 0;  // 0-based line number among records
  std::string message;
};

struct LoadResult {
  std::vector<Instance> instances;
  std::vector<RecordError> errors;
};

/// Parses one canonical instance record. Throws kMalformedRecord.
Instance instance_from_json(const nlohmann::json& record, Split split);
nlohmann::json instance_to_json(const Instance& instance);

/// Loads a line-delimited instance file. Malformed records are reported in
/// `errors` with their index; blank lines are skipped. Throws kIo when the
/// file cannot be read.
LoadResult load_dataset(const std::string& path, Split split);

void write_dataset(const std::string& path,
                   std::span<const Instance> instances);

/// Maps one record of the REFinD release (TACRED-style field names:
/// token, subj_start/subj_end, obj_start/obj_end with inclusive ends,
/// subj_type, obj_type, relation) onto the canonical record.
nlohmann::json canonical_from_refind(const nlohmann::json& record);

struct ParseLoadResult {
  std::map<std::string, DependencyParse> parses;
  std::vector<RecordError> errors;
};

/// Reads a CoNLL-U file. Each sentence must carry a "# sent_id = <id>"
/// comment naming the instance. Multiword-token ranges and empty nodes are
/// skipped; HEAD 0 becomes kRootHead.
ParseLoadResult read_conllu(std::istream& in);
ParseLoadResult load_conllu(const std::string& path);

void write_conllu(std::ostream& out, const std::string& id,
                  std::span<const std::string> tokens,
                  const DependencyParse& parse);

struct NerLoadResult {
  std::map<std::string, NerAnnotation> annotations;
  std::vector<RecordError> errors;
};

/// Line-delimited {"id": ..., "tags": [tag-or-null, ...]}.
NerLoadResult load_ner(const std::string& path);

/// Joins instances with their sidecar annotations. Instances without a
/// parse are kept as parse_failed; a missing NER record means no tags.
/// Token-count mismatches are reported per instance and the instance is
/// routed to the fallback path.
struct AttachResult {
  std::vector<ParsedInstance> instances;
  std::vector<RecordError> errors;
  std::size_t parse_failures = 0;
};
AttachResult attach_all(std::span<const Instance> instances,
                        const std::map<std::string, DependencyParse>& parses,
                        const std::map<std::string, NerAnnotation>& ner);

}  // namespace pkre

#endif  // PKRE_CORPUS_HPP_
