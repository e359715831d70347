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

// Human-in-the-loop annotation. An AnnotationSession owns a live index store
// and a pool of unlabeled instances; humans pull explore/exploit queues and
// submit labels, which are inserted into the indices immediately.
// HitlServer exposes the session over HTTP.

#ifndef PKRE_HITL_HPP_
#define PKRE_HITL_HPP_

#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <vector>

#include "json.hpp"
#include "pkre/class_index.hpp"
#include "pkre/classifier.hpp"
#include "pkre/corpus.hpp"
#include "pkre/embedding.hpp"

namespace httplib {
class Server;
}

namespace pkre {

enum class QueueMode { kExplore, kExploit };

std::string_view queue_mode_name(QueueMode mode);
QueueMode parse_queue_mode(std::string_view name);

inline constexpr double kNoEvidence = -std::numeric_limits<double>::infinity();

struct QueueItem {
  std::string instance_id;
  QueueMode mode = QueueMode::kExplore;
  double best_similarity = kNoEvidence;  // kNoEvidence before any label
  std::optional<std::string> suggested_label;
  std::vector<BucketEvidence> evidence;

  nlohmann::json to_json() const;
};

struct AuditEntry {
  std::string timestamp;  // ISO-8601 UTC
  std::string instance_id;
  std::string label;
  std::string annotator;
  bool supersedes = false;

  bool operator==(const AuditEntry&) const = default;
};

struct LabelAck {
  bool accepted = false;
  std::string bucket;
  std::size_t new_bucket_size = 0;
};

struct HitlConfig {
  PatternVariant variant = PatternVariant::kSdpDepNer;
  std::size_t k = 14;
  RenderOptions render;
};

/// Comparable view of the mutable annotation state.
struct AnnotationState {
  std::map<std::string, std::string> labeled;
  std::set<std::string> unlabeled;
  std::vector<AuditEntry> audit;
  IndexStore store;

  bool operator==(const AnnotationState&) const = default;
};

class AnnotationSession {
 public:
  /// `pool` holds the instances to annotate; ids already present in
  /// `store` are dropped from it. `relations` is the allowed label set R
  /// (no_relation is always allowed).
  AnnotationSession(IndexStore store, CompatibilityMap cmap,
                    std::vector<ParsedInstance> pool, std::set<std::string> relations,
                    Embedder& embedder, HitlConfig cfg, std::size_t threads = 0);
  ~AnnotationSession();

  AnnotationSession(const AnnotationSession&) = delete;
  AnnotationSession& operator=(const AnnotationSession&) = delete;

  /// explore: unlabeled instances by ascending best similarity to any
  /// indexed pattern (no evidence first); exploit: descending, with the
  /// classifier's suggestion, only instances with evidence. Ties by id.
  std::vector<QueueItem> queue(QueueMode mode, std::size_t limit) const;

  /// Throws kUnknownId, kAlreadyLabeled (unless supersede) or kUnknownLabel.
  /// A superseding label retires the earlier index entries.
  LabelAck submit_label(const std::string& id, const std::string& label,
                        const std::string& annotator, bool supersede = false);

  /// The classifier's per-candidate top-k evidence for a pool instance.
  std::vector<BucketEvidence> neighbors(const std::string& id, std::size_t k) const;

  nlohmann::json instance_view(const std::string& id) const;
  nlohmann::json stats() const;
  /// Relation inventory followed by no_relation.
  std::vector<std::string> label_inventory() const;

  /// Snapshot: labels, audit log and index manifest. Throws kIo.
  void export_state(const std::string& path) const;
  /// Replays a snapshot onto the initial state. On any error (kFormat,
  /// kIo, invalid content) the current state is left untouched.
  void import_state(const std::string& path);

  AnnotationState state() const;
  std::uint64_t version() const;

 private:
  struct PoolEntry;
  struct Live;

  void apply_label(Live& live, const std::string& id, const std::string& label,
                   const std::string& annotator, bool supersede,
                   const std::string& timestamp, LabelAck* ack) const;
  void refresh_best(Live& live, PatternVariant family,
                    std::span<const float> vector) const;
  const PoolEntry& entry(const std::string& id) const;

  HitlConfig cfg_;
  std::set<std::string> relations_;
  std::map<std::string, PoolEntry> pool_;
  std::unique_ptr<Live> initial_;
  std::unique_ptr<Live> live_;
  mutable std::shared_mutex mu_;
};

/// HTTP front end. Routes:
///   GET  /api/queue?mode=explore|exploit&limit=n
///   GET  /api/instance/{id}
///   GET  /api/neighbors/{id}?k=n
///   POST /api/label    {id, label, annotator[, supersede]}
///   GET  /api/labels
///   GET  /api/stats
///   POST /api/export   {path}
/// Static UI assets from `ui_dir` are served at /.
class HitlServer {
 public:
  HitlServer(AnnotationSession& session, std::string ui_dir = {});
  ~HitlServer();

  /// Binds; returns the port (an ephemeral one when port == 0). Throws kIo
  /// when the address is unavailable.
  int bind(const std::string& host, int port);
  /// Blocks serving requests until stop().
  void serve();
  void stop();
  void wait_until_ready() const;

 private:
  AnnotationSession& session_;
  std::unique_ptr<httplib::Server> server_;
};

}  // namespace pkre

#endif  // PKRE_HITL_HPP_
