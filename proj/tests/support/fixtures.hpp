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

// Shared test helpers: stub embedding backends, synthetic corpora and
// independent oracles.

#ifndef PKRE_TESTS_FIXTURES_HPP_
#define PKRE_TESTS_FIXTURES_HPP_

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "pkre/class_index.hpp"
#include "pkre/corpus.hpp"
#include "pkre/embedding.hpp"
#include "pkre/pattern.hpp"

namespace pkre::testing {

/// Text -> pseudo-random vector, seeded by an FNV-1a hash of the text. Not
/// normalized on purpose (the Embedder must do it).
class HashBackend : public EmbeddingBackend {
 public:
  explicit HashBackend(std::size_t dimension) : dimension_(dimension) {}
  std::vector<std::vector<float>> fetch(std::span<const std::string> texts) override;

  std::atomic<std::size_t> requests{0};
  std::atomic<std::size_t> texts_seen{0};

 private:
  std::size_t dimension_;
};

std::vector<float> hash_vector(const std::string& text, std::size_t dimension);

/// Fixed text -> vector table; unknown texts raise kMissingEmbedding.
class TableBackend : public EmbeddingBackend {
 public:
  explicit TableBackend(std::map<std::string, std::vector<float>> table)
      : table_(std::move(table)) {}
  std::vector<std::vector<float>> fetch(std::span<const std::string> texts) override;

 private:
  std::map<std::string, std::vector<float>> table_;
};

ProviderConfig stub_config(std::size_t dimension);
std::unique_ptr<Embedder> hash_embedder(std::size_t dimension);

/// Whitespace-tokenized instance; spans are [begin, end).
Instance make_instance(std::string id, const std::string& sentence, TokenSpan e1,
                       TokenSpan e2, std::string e1_type, std::string e2_type,
                       std::string relation, Split split = Split::kTrain);

/// Uniform random rooted tree over n nodes (random parent among earlier
/// nodes of a random order).
DependencyParse random_tree(std::size_t n, std::mt19937_64& rng);

/// Oracle: path by breadth-first search over the undirected tree.
std::vector<std::size_t> bfs_path(const DependencyParse& parse, std::size_t from,
                                  std::size_t to);

/// 21 relation labels over 8 ordered entity-pair types, REFinD style.
struct LabelSchema {
  std::string label;
  std::string e1_type;
  std::string e2_type;
};
const std::vector<LabelSchema>& refind_like_schema();
const std::vector<std::pair<std::string, std::string>>& refind_like_pairs();

/// Synthetic parsed corpus: random sentences, random trees, random NER, a
/// share of parse failures. Every label of the schema and every pair type
/// of no_relation appears at least once when n >= 29.
std::vector<ParsedInstance> synthetic_corpus(std::size_t n, std::uint64_t seed,
                                             Split split = Split::kTrain,
                                             const std::string& id_prefix = "s");

class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

struct SplitFiles {
  std::string instances;
  std::string parses;
  std::string ner;
};

/// Writes instances, CoNLL-U parses (well-formed trees only; the rest are
/// left out and fall back) and NER tags under dir/<name>.*.
SplitFiles write_split(const std::filesystem::path& dir, const std::string& name,
                       std::span<const ParsedInstance> data);

/// Every text the system may embed for `data`: all pattern variants and
/// the sentence.
std::vector<std::string> all_texts(std::span<const ParsedInstance> data,
                                   const RenderOptions& render = {});

/// Vector store with hash vectors for all_texts of every corpus given.
void write_hash_store(const std::string& path, std::size_t dimension,
                      const std::vector<std::vector<ParsedInstance>>& corpora);

void write_text(const std::string& path, const std::string& content);
std::string read_text(const std::string& path);

}  // namespace pkre::testing

#endif  // PKRE_TESTS_FIXTURES_HPP_
