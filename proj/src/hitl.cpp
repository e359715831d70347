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

#include "pkre/hitl.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>

#include "httplib.h"
#include "pkre/error.hpp"

namespace pkre {

using nlohmann::json;

namespace {

constexpr std::string_view kSnapshotFormat = "pkre-hitl-snapshot";
constexpr int kSnapshotVersion = 1;

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                      now.time_since_epoch()) % 1000;
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[40];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
  char out[48];
  std::snprintf(out, sizeof out, "%s.%03dZ", buf, static_cast<int>(ms.count()));
  return out;
}

json evidence_json(std::span<const BucketEvidence> evidence) {
  json out = json::array();
  for (const auto& e : evidence) {
    json list = json::array();
    for (const auto& n : e.neighbors) list.push_back({{"id", n.id}, {"similarity", n.similarity}});
    out.push_back({{"bucket", e.bucket.name()}, {"label", e.bucket.label()}, {"neighbors", list}});
  }
  return out;
}

}  // namespace

std::string_view queue_mode_name(QueueMode mode) {
  return mode == QueueMode::kExplore ? "explore" : "exploit";
}

QueueMode parse_queue_mode(std::string_view name) {
  if (name == "explore") return QueueMode::kExplore;
  if (name == "exploit") return QueueMode::kExploit;
  throw Error(ErrorCode::kConfig, "mode must be explore or exploit");
}

json QueueItem::to_json() const {
  json j{{"id", instance_id},
         {"mode", queue_mode_name(mode)},
         {"has_evidence", best_similarity != kNoEvidence},
         {"best_similarity", best_similarity == kNoEvidence ? json(nullptr) : json(best_similarity)},
         {"suggested_label", suggested_label ? json(*suggested_label) : json(nullptr)},
         {"evidence", evidence_json(evidence)}};
  return j;
}

struct AnnotationSession::PoolEntry {
  ParsedInstance pi;
  Query query;  // searched family and its vector
  std::optional<EmbeddingVector> pattern_vector;
  EmbeddingVector sentence_vector;
};

struct AnnotationSession::Live {
  IndexStore store;
  CompatibilityMap cmap;
  std::map<std::string, std::string> labeled;
  std::vector<AuditEntry> audit;
  std::map<std::string, double> best;  // unlabeled id -> max similarity
  std::uint64_t version = 0;
};

AnnotationSession::AnnotationSession(IndexStore store, CompatibilityMap cmap,
                                     std::vector<ParsedInstance> pool,
                                     std::set<std::string> relations, Embedder& embedder,
                                     HitlConfig cfg, std::size_t threads)
    : cfg_(std::move(cfg)), relations_(std::move(relations)) {
  for (const auto& b : cmap.all_buckets) {
    if (!b.is_no_relation()) relations_.insert(b.label());
  }
  relations_.erase(std::string(kNoRelation));

  // Everything already indexed counts as labeled data, not pool.
  std::set<std::string> indexed;
  for (const auto& [key, index] : store.indices()) {
    for (std::size_t i = 0; i < index.size(); ++i) indexed.insert(index.id(i));
  }
  std::vector<ParsedInstance> kept;
  for (auto& pi : pool) {
    if (!indexed.contains(pi.instance.id) && !pool_.contains(pi.instance.id)) {
      pool_.emplace(pi.instance.id, PoolEntry{});
      kept.push_back(std::move(pi));
    }
  }

  std::vector<std::string> texts;
  std::vector<Query> queries;
  for (const auto& pi : kept) {
    queries.push_back(render_query(pi, cfg_.variant, cfg_.render));
    texts.push_back(queries.back().text);
    texts.push_back(render_pattern(pi, PatternVariant::kSentenceFallback, cfg_.render).text);
  }
  auto vectors = embedder.embed_batch(texts);
  for (std::size_t i = 0; i < kept.size(); ++i) {
    PoolEntry& e = pool_.at(kept[i].instance.id);
    e.query = std::move(queries[i]);
    e.query.vector = vectors[2 * i];
    e.sentence_vector = vectors[2 * i + 1];
    if (e.query.family != PatternVariant::kSentenceFallback) e.pattern_vector = vectors[2 * i];
    e.pi = std::move(kept[i]);
  }

  live_ = std::make_unique<Live>();
  live_->store = std::move(store);
  live_->cmap = std::move(cmap);

  std::vector<const PoolEntry*> entries;
  for (const auto& [id, e] : pool_) entries.push_back(&e);
  std::vector<double> best(entries.size(), kNoEvidence);
  parallel_for(entries.size(), threads, [&](std::size_t i) {
    for (const auto& key : live_->store.keys(entries[i]->query.family)) {
      const auto top = live_->store.find(key)->top_k(entries[i]->query.vector, 1);
      if (!top.empty()) best[i] = std::max(best[i], top.front().similarity);
    }
  });
  for (std::size_t i = 0; i < entries.size(); ++i) {
    live_->best[entries[i]->pi.instance.id] = best[i];
  }
  initial_ = std::make_unique<Live>(*live_);
}

AnnotationSession::~AnnotationSession() = default;

const AnnotationSession::PoolEntry& AnnotationSession::entry(const std::string& id) const {
  auto it = pool_.find(id);
  if (it == pool_.end()) throw Error(ErrorCode::kUnknownId, "unknown instance id: " + id);
  return it->second;
}

std::vector<QueueItem> AnnotationSession::queue(QueueMode mode, std::size_t limit) const {
  std::shared_lock lock(mu_);
  std::vector<std::pair<double, const std::string*>> order;
  for (const auto& [id, best] : live_->best) {
    if (mode == QueueMode::kExploit && best == kNoEvidence) continue;
    order.emplace_back(best, &id);
  }
  auto by_id = [](const auto& a, const auto& b) { return *a.second < *b.second; };
  if (mode == QueueMode::kExplore) {
    std::stable_sort(order.begin(), order.end(), [&](const auto& a, const auto& b) {
      return a.first != b.first ? a.first < b.first : by_id(a, b);
    });
  } else {
    std::stable_sort(order.begin(), order.end(), [&](const auto& a, const auto& b) {
      return a.first != b.first ? a.first > b.first : by_id(a, b);
    });
  }
  if (order.size() > limit) order.resize(limit);

  std::vector<QueueItem> out;
  out.reserve(order.size());
  for (const auto& [best, id] : order) {
    QueueItem item;
    item.instance_id = *id;
    item.mode = mode;
    item.best_similarity = best;
    if (best != kNoEvidence) {
      const Query& q = pool_.at(*id).query;
      item.evidence = gather_evidence(q, live_->store, live_->cmap, cfg_.k);
      const Prediction p = decide(q, item.evidence, cfg_.k);
      if (!p.class_scores.empty()) item.suggested_label = p.label;
      item.evidence = p.neighbors;
    }
    out.push_back(std::move(item));
  }
  return out;
}

void AnnotationSession::refresh_best(Live& live, PatternVariant family,
                                     std::span<const float> vector) const {
  for (auto& [id, best] : live.best) {
    const Query& q = pool_.at(id).query;
    if (q.family != family) continue;
    best = std::max(best, dot(q.vector.values(), vector));
  }
}

void AnnotationSession::apply_label(Live& live, const std::string& id,
                                    const std::string& label,
                                    const std::string& annotator, bool supersede,
                                    const std::string& timestamp, LabelAck* ack) const {
  const PoolEntry& e = entry(id);
  auto previous = live.labeled.find(id);
  if (previous != live.labeled.end() && !supersede) {
    throw Error(ErrorCode::kAlreadyLabeled,
                id + " is already labeled " + previous->second);
  }
  if (label != kNoRelation && !relations_.contains(label)) {
    std::string allowed;
    for (const auto& r : relations_) allowed += (allowed.empty() ? "" : ", ") + r;
    throw Error(ErrorCode::kUnknownLabel,
                "unknown label '" + label + "'; allowed: " + allowed + ", no_relation");
  }
  if (previous == live.labeled.end() && supersede) {
    throw Error(ErrorCode::kUnknownId, id + " has no label to supersede");
  }

  Instance labeled_inst = e.pi.instance;
  labeled_inst.relation = label;
  const Bucket bucket = bucket_for(labeled_inst, live.cmap.unordered_no_relation_pairs);

  std::vector<std::pair<PatternVariant, const EmbeddingVector*>> families;
  if (e.pattern_vector) families.emplace_back(cfg_.variant, &*e.pattern_vector);
  families.emplace_back(PatternVariant::kSentenceFallback, &e.sentence_vector);

  if (previous != live.labeled.end()) {
    Instance old_inst = e.pi.instance;
    old_inst.relation = previous->second;
    const Bucket old_bucket = bucket_for(old_inst, live.cmap.unordered_no_relation_pairs);
    if (old_bucket == bucket) {
      throw Error(ErrorCode::kAlreadyLabeled, id + " already carries label " + label);
    }
    for (const auto& [family, vec] : families) {
      live.store.ensure({family, old_bucket}).retire(id);
    }
  }

  for (const auto& [family, vec] : families) {
    ClassIndex& index = live.store.ensure({family, bucket});
    if (index.contains(id)) {
      index.reactivate(id);
    } else {
      live.store.insert({family, bucket}, id, *vec);
    }
    refresh_best(live, family, vec->values());
  }

  const EntityPairType pair = entity_pair_type(labeled_inst);
  live.cmap.seen_pairs.insert(pair);
  live.cmap.all_buckets.insert(bucket);
  if (!bucket.is_no_relation()) live.cmap.relations[pair].insert(label);

  live.labeled[id] = label;
  live.best.erase(id);
  live.audit.push_back({timestamp, id, label, annotator, supersede});
  ++live.version;

  if (ack != nullptr) {
    ack->accepted = true;
    ack->bucket = bucket.name();
    ack->new_bucket_size = live.store.find({e.query.family, bucket})->active_size();
  }
}

LabelAck AnnotationSession::submit_label(const std::string& id, const std::string& label,
                                         const std::string& annotator, bool supersede) {
  std::unique_lock lock(mu_);
  LabelAck ack;
  apply_label(*live_, id, label, annotator, supersede, utc_now(), &ack);
  return ack;
}

std::vector<BucketEvidence> AnnotationSession::neighbors(const std::string& id,
                                                         std::size_t k) const {
  std::shared_lock lock(mu_);
  const PoolEntry& e = entry(id);
  if (k == 0) return {};
  return gather_evidence(e.query, live_->store, live_->cmap, k);
}

json AnnotationSession::instance_view(const std::string& id) const {
  std::shared_lock lock(mu_);
  const PoolEntry& e = entry(id);
  const Instance& inst = e.pi.instance;
  const auto evidence = gather_evidence(e.query, live_->store, live_->cmap, cfg_.k);
  const Prediction p = decide(e.query, evidence, cfg_.k);
  json j = instance_to_json(inst);
  j.erase("relation");  // gold label is not shown to annotators
  j["pattern"] = e.query.text;
  j["family"] = variant_name(e.query.family);
  j["used_fallback"] = e.query.used_fallback;
  auto label = live_->labeled.find(id);
  j["label"] = label == live_->labeled.end() ? json(nullptr) : json(label->second);
  j["suggested_label"] = p.class_scores.empty() ? json(nullptr) : json(p.label);
  j["scores"] = p.class_scores;
  j["evidence"] = evidence_json(p.neighbors);
  return j;
}

json AnnotationSession::stats() const {
  std::shared_lock lock(mu_);
  std::size_t fallback = 0;
  for (const auto& [id, e] : pool_) fallback += e.query.used_fallback;
  std::map<std::string, std::size_t> per_class;
  for (const auto& [id, label] : live_->labeled) ++per_class[label];
  json families = json::object();
  for (PatternVariant v : live_->store.variants()) {
    std::size_t entries = 0;
    for (const auto& key : live_->store.keys(v)) entries += live_->store.find(key)->active_size();
    families[std::string(variant_name(v))] = {{"indices", live_->store.family_size(v)},
                                              {"entries", entries}};
  }
  return {{"version", live_->version},
          {"pool", pool_.size()},
          {"labeled", live_->labeled.size()},
          {"unlabeled", pool_.size() - live_->labeled.size()},
          {"fallback_rate", pool_.empty() ? 0.0 : static_cast<double>(fallback) / pool_.size()},
          {"labels_per_class", per_class},
          {"index_count", live_->store.indices().size()},
          {"total_entries", live_->store.total_entries()},
          {"families", families},
          {"variant", variant_name(cfg_.variant)},
          {"k", cfg_.k}};
}

std::vector<std::string> AnnotationSession::label_inventory() const {
  std::vector<std::string> out(relations_.begin(), relations_.end());
  out.emplace_back(kNoRelation);
  return out;
}

void AnnotationSession::export_state(const std::string& path) const {
  json snapshot;
  {
    std::shared_lock lock(mu_);
    json audit = json::array();
    for (const auto& a : live_->audit) {
      audit.push_back({{"timestamp", a.timestamp}, {"id", a.instance_id}, {"label", a.label},
                       {"annotator", a.annotator}, {"supersedes", a.supersedes}});
    }
    snapshot = {{"format", kSnapshotFormat},
                {"version", kSnapshotVersion},
                {"variant", variant_name(cfg_.variant)},
                {"state_version", live_->version},
                {"labels", live_->labeled},
                {"audit", audit},
                {"index_manifest", live_->store.describe()}};
  }
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIo, "cannot write snapshot: " + path);
    out << snapshot.dump(1) << '\n';
    if (!out) throw Error(ErrorCode::kIo, "write failed: " + path);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot move snapshot into place: " + ec.message());
}

void AnnotationSession::import_state(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot read snapshot: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  json snapshot;
  try {
    snapshot = json::parse(buf.str());
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kFormat, path + ": not a valid snapshot: " + e.what());
  }
  auto next = std::make_unique<Live>();
  try {
    if (snapshot.at("format") != kSnapshotFormat || snapshot.at("version") != kSnapshotVersion) {
      throw Error(ErrorCode::kFormat, path + ": unsupported snapshot format");
    }
    if (snapshot.at("variant") != variant_name(cfg_.variant)) {
      throw Error(ErrorCode::kFormat, path + ": snapshot was taken with variant " +
                                          snapshot.at("variant").get<std::string>());
    }
    *next = *initial_;
    for (const auto& a : snapshot.at("audit")) {
      apply_label(*next, a.at("id").get<std::string>(), a.at("label").get<std::string>(),
                  a.at("annotator").get<std::string>(), a.at("supersedes").get<bool>(),
                  a.at("timestamp").get<std::string>(), nullptr);
    }
    if (snapshot.at("labels").get<std::map<std::string, std::string>>() != next->labeled) {
      throw Error(ErrorCode::kFormat, path + ": labels disagree with the audit log");
    }
    next->version = snapshot.at("state_version").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kFormat, path + ": malformed snapshot: " + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kFormat) throw;
    throw Error(ErrorCode::kFormat, path + ": snapshot does not replay: " + e.what());
  }
  std::unique_lock lock(mu_);
  live_ = std::move(next);
}

AnnotationState AnnotationSession::state() const {
  std::shared_lock lock(mu_);
  AnnotationState s;
  s.labeled = live_->labeled;
  for (const auto& [id, e] : pool_) {
    if (!live_->labeled.contains(id)) s.unlabeled.insert(id);
  }
  s.audit = live_->audit;
  s.store = live_->store;
  return s;
}

std::uint64_t AnnotationSession::version() const {
  std::shared_lock lock(mu_);
  return live_->version;
}

// --- HTTP ----------------------------------------------------------------------

namespace {

int http_status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kUnknownId: return 404;
    case ErrorCode::kAlreadyLabeled: return 409;
    case ErrorCode::kIo: return 500;
    case ErrorCode::kInternal: return 500;
    default: return 400;
  }
}

void reply(httplib::Response& res, const json& body, int status = 200) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

template <typename Fn>
httplib::Server::Handler guarded(Fn fn) {
  return [fn](const httplib::Request& req, httplib::Response& res) {
    try {
      fn(req, res);
    } catch (const Error& e) {
      reply(res, {{"error", error_code_name(e.code())}, {"message", e.what()}},
            http_status_for(e.code()));
    } catch (const json::exception& e) {
      reply(res, {{"error", "bad_request"}, {"message", e.what()}}, 400);
    } catch (const std::exception& e) {
      reply(res, {{"error", "internal"}, {"message", e.what()}}, 500);
    }
  };
}

std::size_t size_param(const httplib::Request& req, const char* name, std::size_t fallback) {
  if (!req.has_param(name)) return fallback;
  const std::string v = req.get_param_value(name);
  try {
    const long long n = std::stoll(v);
    if (n < 0) throw std::invalid_argument("negative");
    return static_cast<std::size_t>(n);
  } catch (const std::exception&) {
    throw Error(ErrorCode::kConfig, std::string("parameter ") + name + " must be a non-negative integer");
  }
}

constexpr const char* kFallbackPage =
    "<!doctype html><title>pkre annotation service</title>"
    "<p>Annotation API is at <code>/api/*</code>. No UI assets configured.</p>";

}  // namespace

HitlServer::HitlServer(AnnotationSession& session, std::string ui_dir)
    : session_(session), server_(std::make_unique<httplib::Server>()) {
  auto& s = *server_;
  // SO_REUSEADDR only: the library default adds SO_REUSEPORT, which would let
  // a second server silently share a port that is already in use.
  s.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof yes);
  });
  s.Get("/api/queue", guarded([this](const httplib::Request& req, httplib::Response& res) {
          const QueueMode mode =
              parse_queue_mode(req.has_param("mode") ? req.get_param_value("mode") : "explore");
          json items = json::array();
          for (const auto& item : session_.queue(mode, size_param(req, "limit", 20))) {
            items.push_back(item.to_json());
          }
          reply(res, items);
        }));
  s.Get(R"(/api/instance/(.+))",
        guarded([this](const httplib::Request& req, httplib::Response& res) {
          reply(res, session_.instance_view(req.matches[1].str()));
        }));
  s.Get(R"(/api/neighbors/(.+))",
        guarded([this](const httplib::Request& req, httplib::Response& res) {
          const std::string id = req.matches[1].str();
          json out = {{"id", id}, {"evidence", evidence_json(session_.neighbors(id, size_param(req, "k", 5)))}};
          reply(res, out);
        }));
  s.Post("/api/label", guarded([this](const httplib::Request& req, httplib::Response& res) {
           const json body = json::parse(req.body);
           const LabelAck ack = session_.submit_label(
               body.at("id").get<std::string>(), body.at("label").get<std::string>(),
               body.value("annotator", std::string("anonymous")), body.value("supersede", false));
           reply(res, {{"accepted", ack.accepted},
                       {"bucket", ack.bucket},
                       {"new_bucket_size", ack.new_bucket_size},
                       {"version", session_.version()}});
         }));
  s.Get("/api/labels", guarded([this](const httplib::Request&, httplib::Response& res) {
          reply(res, session_.label_inventory());
        }));
  s.Get("/api/stats", guarded([this](const httplib::Request&, httplib::Response& res) {
          reply(res, session_.stats());
        }));
  s.Post("/api/export", guarded([this](const httplib::Request& req, httplib::Response& res) {
           const json body = json::parse(req.body);
           const std::string path = body.at("path").get<std::string>();
           session_.export_state(path);
           reply(res, {{"exported", true}, {"path", path}, {"version", session_.version()}});
         }));

  if (!ui_dir.empty() && std::filesystem::is_directory(ui_dir)) {
    s.set_mount_point("/", ui_dir);
  } else {
    s.Get("/", [](const httplib::Request&, httplib::Response& res) {
      res.set_content(kFallbackPage, "text/html");
    });
  }
}

HitlServer::~HitlServer() { stop(); }

int HitlServer::bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = server_->bind_to_any_port(host);
    if (bound < 0) throw Error(ErrorCode::kIo, "cannot bind " + host);
    return bound;
  }
  if (!server_->bind_to_port(host, port)) {
    throw Error(ErrorCode::kIo, "cannot bind " + host + ":" + std::to_string(port) +
                                    " (port in use?)");
  }
  return port;
}

void HitlServer::serve() { server_->listen_after_bind(); }

void HitlServer::stop() {
  if (server_ && server_->is_running()) server_->stop();
}

void HitlServer::wait_until_ready() const { server_->wait_until_ready(); }

}  // namespace pkre
