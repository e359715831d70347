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

#include "pkre/embedding.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <future>

#include "binary_io.hpp"
#include "httplib.h"
#include "json.hpp"
#include "pkre/error.hpp"

namespace pkre {

namespace {

constexpr char kStoreMagic[4] = {'P', 'K', 'V', 'S'};
constexpr std::uint32_t kStoreVersion = 1;

bool all_finite(std::span<const float> v) {
  for (float x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

std::string escape_manifest(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    switch (c) {
      case '\t': out += "\\t"; break;
      case '\n': out += "\\n"; break;
      case '\\': out += "\\\\"; break;
      default: out += c;
    }
  }
  return out;
}

void write_store_records(
    const std::string& path, std::size_t dimension,
    std::span<const std::pair<TextHash, std::span<const float>>> records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write vector store: " + path);
  io::Writer w(out);
  w.bytes(kStoreMagic, 4);
  w.put<std::uint32_t>(kStoreVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(dimension));
  w.put<std::uint64_t>(records.size());
  for (const auto& [hash, values] : records) {
    if (values.size() != dimension) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "vector of dimension " + std::to_string(values.size()) +
                      " in a store of dimension " + std::to_string(dimension));
    }
    w.bytes(hash.data(), hash.size());
    w.floats(values);
  }
  if (!out) throw Error(ErrorCode::kIo, "write failed: " + path);
}

}  // namespace

EmbeddingVector EmbeddingVector::from_normalized(std::vector<float> values) {
  if (!all_finite(values)) {
    throw Error(ErrorCode::kFormat, "non-finite embedding value");
  }
  return EmbeddingVector(std::move(values));
}

EmbeddingVector normalize(std::span<const float> v) {
  if (!all_finite(v)) throw Error(ErrorCode::kFormat, "non-finite embedding value");
  double sq = 0.0;
  for (float x : v) sq += static_cast<double>(x) * x;
  if (!(sq > 0.0)) throw Error(ErrorCode::kZeroVector, "cannot normalize a zero vector");
  const double inv = 1.0 / std::sqrt(sq);
  std::vector<float> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = static_cast<float>(v[i] * inv);
  }
  return EmbeddingVector(std::move(out));
}

double dot(std::span<const float> a, std::span<const float> b) {
  double s = 0.0;
  const std::size_t n = std::min(a.size(), b.size());
  for (std::size_t i = 0; i < n; ++i) s += static_cast<double>(a[i]) * b[i];
  return s;
}

TextHash hash_text(std::string_view text) {
  TextHash out{};
  unsigned int len = 0;
  if (EVP_Digest(text.data(), text.size(), out.data(), &len, EVP_sha256(),
                 nullptr) != 1 ||
      len != out.size()) {
    throw Error(ErrorCode::kInternal, "SHA-256 failed");
  }
  return out;
}

std::string to_hex(const TextHash& hash) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(64);
  for (unsigned char b : hash) {
    out += kDigits[b >> 4];
    out += kDigits[b & 0xF];
  }
  return out;
}

void validate(const ProviderConfig& cfg) {
  if (cfg.dimension == 0) throw Error(ErrorCode::kConfig, "embedding dimension must be > 0");
  if (cfg.batch_size == 0) throw Error(ErrorCode::kConfig, "batch_size must be > 0");
  if (cfg.backend == BackendKind::kHttp && cfg.endpoint.empty()) {
    throw Error(ErrorCode::kConfig, "http backend requires an endpoint");
  }
  if (cfg.backend != BackendKind::kHttp && !cfg.endpoint.empty()) {
    throw Error(ErrorCode::kConfig, "endpoint is only valid for the http backend");
  }
  if (cfg.backend == BackendKind::kFile && cfg.path.empty()) {
    throw Error(ErrorCode::kConfig, "file backend requires a vector store path");
  }
}

void write_vector_store(
    const std::string& path, std::size_t dimension,
    std::span<const std::pair<std::string, std::vector<float>>> entries) {
  std::vector<std::pair<TextHash, std::span<const float>>> records;
  records.reserve(entries.size());
  for (const auto& [text, values] : entries) {
    records.emplace_back(hash_text(text), values);
  }
  write_store_records(path, dimension, records);

  std::ofstream manifest(path + ".manifest", std::ios::trunc);
  if (!manifest) throw Error(ErrorCode::kIo, "cannot write manifest for " + path);
  for (std::size_t i = 0; i < entries.size(); ++i) {
    manifest << to_hex(records[i].first) << '\t'
             << escape_manifest(entries[i].first) << '\n';
  }
}

VectorStoreContents read_vector_store(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read vector store: " + path);
  io::Reader r(in, path);
  char magic[4];
  r.bytes(magic, 4);
  if (!std::equal(magic, magic + 4, kStoreMagic)) {
    throw Error(ErrorCode::kFormat, path + ": not a vector store (bad magic)");
  }
  if (r.get<std::uint32_t>() != kStoreVersion) {
    throw Error(ErrorCode::kFormat, path + ": unsupported vector store version");
  }
  VectorStoreContents out;
  out.dimension = r.get<std::uint32_t>();
  const auto count = r.get<std::uint64_t>();
  out.vectors.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    TextHash h;
    r.bytes(h.data(), h.size());
    std::vector<float> v(out.dimension);
    r.floats(v);
    out.vectors[h] = std::move(v);
  }
  return out;
}

FileBackend::FileBackend(const std::string& path, std::size_t dimension)
    : store_(read_vector_store(path)) {
  if (store_.dimension != dimension) {
    throw Error(ErrorCode::kDimensionMismatch,
                path + " holds " + std::to_string(store_.dimension) +
                    "-dim vectors but " + std::to_string(dimension) +
                    " were configured");
  }
}

std::vector<std::vector<float>> FileBackend::fetch(
    std::span<const std::string> texts) {
  std::vector<std::vector<float>> out;
  out.reserve(texts.size());
  for (const auto& t : texts) {
    auto it = store_.vectors.find(hash_text(t));
    if (it == store_.vectors.end()) {
      throw Error(ErrorCode::kMissingEmbedding, "no embedding for text: \"" + t + "\"");
    }
    out.push_back(it->second);
  }
  return out;
}

HttpBackend::HttpBackend(std::string endpoint, std::size_t dimension)
    : endpoint_(std::move(endpoint)), dimension_(dimension) {}

std::vector<std::vector<float>> HttpBackend::fetch(
    std::span<const std::string> texts) {
  httplib::Client client(endpoint_);
  client.set_connection_timeout(10);
  client.set_read_timeout(300);
  nlohmann::json body{{"texts", texts}};
  auto res = client.Post("/embed", body.dump(), "application/json");
  if (!res) {
    throw Error(ErrorCode::kBackendUnavailable,
                "embedding service at " + endpoint_ +
                    " unreachable: " + httplib::to_string(res.error()));
  }
  if (res->status != 200) {
    throw Error(ErrorCode::kBackendUnavailable,
                "embedding service returned HTTP " + std::to_string(res->status));
  }
  std::vector<std::vector<float>> out;
  try {
    auto reply = nlohmann::json::parse(res->body);
    out = reply.at("vectors").get<std::vector<std::vector<float>>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kBackendUnavailable,
                std::string("malformed embedding reply: ") + e.what());
  }
  if (out.size() != texts.size()) {
    throw Error(ErrorCode::kBackendUnavailable,
                "embedding service returned " + std::to_string(out.size()) +
                    " vectors for " + std::to_string(texts.size()) + " texts");
  }
  for (const auto& v : out) {
    if (v.size() != dimension_) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "embedding service returned a " + std::to_string(v.size()) +
                      "-dim vector; expected " + std::to_string(dimension_));
    }
  }
  return out;
}

std::unique_ptr<EmbeddingBackend> make_backend(const ProviderConfig& cfg) {
  validate(cfg);
  if (cfg.backend == BackendKind::kHttp) {
    return std::make_unique<HttpBackend>(cfg.endpoint, cfg.dimension);
  }
  return std::make_unique<FileBackend>(cfg.path, cfg.dimension);
}

Embedder::Embedder(const ProviderConfig& cfg) : Embedder(cfg, make_backend(cfg)) {}

Embedder::Embedder(const ProviderConfig& cfg,
                   std::unique_ptr<EmbeddingBackend> backend)
    : cfg_(cfg), backend_(std::move(backend)) {
  if (cfg_.dimension == 0) throw Error(ErrorCode::kConfig, "embedding dimension must be > 0");
  if (cfg_.batch_size == 0) cfg_.batch_size = 64;
  if (!cfg_.cache_path.empty() && std::filesystem::exists(cfg_.cache_path)) {
    auto contents = read_vector_store(cfg_.cache_path);
    if (contents.dimension != cfg_.dimension) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "embedding cache " + cfg_.cache_path + " has dimension " +
                      std::to_string(contents.dimension));
    }
    for (auto& [h, v] : contents.vectors) {
      cache_.emplace(h, EmbeddingVector::from_normalized(std::move(v)));
    }
  }
}

std::vector<std::vector<float>> Embedder::fetch_checked(
    std::span<const std::string> texts) {
  auto got = backend_->fetch(texts);
  if (got.size() != texts.size()) {
    throw Error(ErrorCode::kBackendUnavailable, "backend returned the wrong vector count");
  }
  for (const auto& v : got) {
    if (v.size() != cfg_.dimension) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "backend returned a " + std::to_string(v.size()) +
                      "-dim vector; expected " + std::to_string(cfg_.dimension));
    }
  }
  fetched_ += texts.size();
  return got;
}

std::vector<EmbeddingVector> Embedder::embed_batch(
    std::span<const std::string> texts) {
  std::vector<TextHash> hashes;
  hashes.reserve(texts.size());
  for (const auto& t : texts) {
    if (t.empty()) throw Error(ErrorCode::kMalformedRecord, "cannot embed an empty text");
    hashes.push_back(hash_text(t));
  }

  std::vector<std::string> missing;
  {
    std::shared_lock lock(cache_mu_);
    std::unordered_map<TextHash, bool, TextHashHasher> queued;
    for (std::size_t i = 0; i < texts.size(); ++i) {
      if (cache_.contains(hashes[i]) || queued.contains(hashes[i])) continue;
      queued[hashes[i]] = true;
      missing.push_back(texts[i]);
    }
  }

  if (!missing.empty()) {
    std::lock_guard fetch_lock(fetch_mu_);
    std::vector<std::span<const std::string>> batches;
    for (std::size_t at = 0; at < missing.size(); at += cfg_.batch_size) {
      const std::size_t n = std::min(cfg_.batch_size, missing.size() - at);
      batches.emplace_back(missing.data() + at, n);
    }
    std::vector<std::vector<std::vector<float>>> results(batches.size());
    const std::size_t lanes = std::max<std::size_t>(1, cfg_.concurrency);
    for (std::size_t wave = 0; wave < batches.size(); wave += lanes) {
      const std::size_t end = std::min(batches.size(), wave + lanes);
      if (end - wave == 1) {
        results[wave] = fetch_checked(batches[wave]);
        continue;
      }
      std::vector<std::future<std::vector<std::vector<float>>>> pending;
      for (std::size_t b = wave; b < end; ++b) {
        pending.push_back(std::async(std::launch::async,
                                     [this, span = batches[b]] { return fetch_checked(span); }));
      }
      for (std::size_t b = wave; b < end; ++b) results[b] = pending[b - wave].get();
    }

    std::unique_lock lock(cache_mu_);
    std::size_t k = 0;
    for (auto& batch : results) {
      for (auto& raw : batch) {
        cache_.insert_or_assign(hash_text(missing[k]), normalize(raw));
        ++k;
      }
    }
  }

  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  std::shared_lock lock(cache_mu_);
  for (const auto& h : hashes) out.push_back(cache_.at(h));
  return out;
}

EmbeddingVector Embedder::embed(const std::string& text) {
  return embed_batch(std::span<const std::string>(&text, 1)).front();
}

std::size_t Embedder::cache_size() const {
  std::shared_lock lock(cache_mu_);
  return cache_.size();
}

std::size_t Embedder::backend_fetches() const { return fetched_.load(); }

void Embedder::clear_cache() {
  std::unique_lock lock(cache_mu_);
  cache_.clear();
}

void Embedder::save_cache() const {
  if (cfg_.cache_path.empty()) return;
  std::shared_lock lock(cache_mu_);
  std::vector<std::pair<TextHash, std::span<const float>>> records;
  records.reserve(cache_.size());
  for (const auto& [h, v] : cache_) records.emplace_back(h, v.values());
  std::sort(records.begin(), records.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  write_store_records(cfg_.cache_path, cfg_.dimension, records);
}

}  // namespace pkre
