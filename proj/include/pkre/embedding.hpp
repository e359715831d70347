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

// Dense text embeddings from an external encoder. Two backends: a
// precomputed binary vector store (offline) and an HTTP encoder service.
// Every vector handed out is unit-norm, so cosine similarity is a dot
// product.

#ifndef PKRE_EMBEDDING_HPP_
#define PKRE_EMBEDDING_HPP_

#include <array>
#include <atomic>
#include <cstddef>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace pkre {

/// Unit-norm float vector. Construct through normalize().
class EmbeddingVector {
 public:
  EmbeddingVector() = default;

  std::span<const float> values() const { return values_; }
  std::size_t dimension() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  bool operator==(const EmbeddingVector&) const = default;

  /// Wraps values already known to be unit-norm (e.g. read back from a
  /// store written by this library). No check beyond finiteness.
  static EmbeddingVector from_normalized(std::vector<float> values);

 private:
  friend EmbeddingVector normalize(std::span<const float> v);
  explicit EmbeddingVector(std::vector<float> values)
      : values_(std::move(values)) {}

  std::vector<float> values_;
};

/// v / ||v||. Throws kZeroVector for a zero vector and kFormat for NaN/Inf.
EmbeddingVector normalize(std::span<const float> v);

/// Dot product accumulated in double.
double dot(std::span<const float> a, std::span<const float> b);

using TextHash = std::array<unsigned char, 32>;

/// SHA-256 of the UTF-8 bytes.
TextHash hash_text(std::string_view text);
std::string to_hex(const TextHash& hash);

struct TextHashHasher {
  std::size_t operator()(const TextHash& h) const noexcept {
    std::size_t out = 0;
    for (int i = 0; i < 8; ++i) out = (out << 8) | h[i];
    return out;
  }
};

enum class BackendKind { kFile, kHttp };

struct ProviderConfig {
  BackendKind backend = BackendKind::kFile;
  std::size_t dimension = 768;
  std::string endpoint;    // http backend, e.g. "http://127.0.0.1:8000"
  std::string path;        // file backend vector store
  std::size_t batch_size = 64;
  std::string cache_path;  // optional persistent cache
  std::size_t concurrency = 1;
};

/// Throws kConfig when the invariants (dimension > 0, endpoint iff http,
/// path for the file backend) do not hold.
void validate(const ProviderConfig& cfg);

class EmbeddingBackend {
 public:
  virtual ~EmbeddingBackend() = default;
  /// Raw (not necessarily normalized) vectors, one per text, in order.
  virtual std::vector<std::vector<float>> fetch(
      std::span<const std::string> texts) = 0;
};

// --- Binary vector store -----------------------------------------------------
//
// Header: magic "PKVS", u32 version, u32 dimension, u64 count; then `count`
// records of (32-byte SHA-256 of the text, dimension little-endian f32).
// A sibling "<path>.manifest" lists "<hex hash>\t<escaped text>" per line.

using VectorMap =
    std::unordered_map<TextHash, std::vector<float>, TextHashHasher>;

struct VectorStoreContents {
  std::size_t dimension = 0;
  VectorMap vectors;
};

void write_vector_store(
    const std::string& path, std::size_t dimension,
    std::span<const std::pair<std::string, std::vector<float>>> entries);
VectorStoreContents read_vector_store(const std::string& path);

class FileBackend : public EmbeddingBackend {
 public:
  FileBackend(const std::string& path, std::size_t dimension);
  std::vector<std::vector<float>> fetch(
      std::span<const std::string> texts) override;

 private:
  VectorStoreContents store_;
};

/// POST {endpoint}/embed with {"texts": [...]}; expects {"vectors": [...]}.
class HttpBackend : public EmbeddingBackend {
 public:
  HttpBackend(std::string endpoint, std::size_t dimension);
  std::vector<std::vector<float>> fetch(
      std::span<const std::string> texts) override;

 private:
  std::string endpoint_;
  std::size_t dimension_;
};

std::unique_ptr<EmbeddingBackend> make_backend(const ProviderConfig& cfg);

/// Caching front end over a backend. Thread-safe: cache reads are shared,
/// writes and backend fetches are serialized.
class Embedder {
 public:
  explicit Embedder(const ProviderConfig& cfg);
  Embedder(const ProviderConfig& cfg, std::unique_ptr<EmbeddingBackend> backend);

  /// One normalized vector per text, in order. Duplicates are fetched once.
  std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts);
  EmbeddingVector embed(const std::string& text);

  std::size_t dimension() const { return cfg_.dimension; }
  std::size_t cache_size() const;
  std::size_t backend_fetches() const;  // texts requested from the backend
  void clear_cache();
  /// Writes the cache to cfg.cache_path (no-op when unset).
  void save_cache() const;

 private:
  std::vector<std::vector<float>> fetch_checked(
      std::span<const std::string> texts);

  ProviderConfig cfg_;
  std::unique_ptr<EmbeddingBackend> backend_;
  mutable std::shared_mutex cache_mu_;
  std::unordered_map<TextHash, EmbeddingVector, TextHashHasher> cache_;
  std::mutex fetch_mu_;
  std::atomic<std::size_t> fetched_{0};
};

}  // namespace pkre

#endif  // PKRE_EMBEDDING_HPP_
