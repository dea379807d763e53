#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "cprdraft/cpr.hpp"
#include "cprdraft/error.hpp"

namespace cprdraft::service {

/// The request is valid but the session state forbids it (a finished draft).
class ConflictError : public InputError {
 public:
  using InputError::InputError;
};

struct PickRecord {
  Pack pack;
  CardId picked{};
};

struct SessionSnapshot {
  std::string id;
  std::string model_id;
  std::string created_at;  // ISO-8601 UTC
  PlayerPool pool;
  std::vector<PickRecord> history;
  std::size_t max_picks = 0;

  std::size_t anchor_size() const { return pool.size(); }
  bool complete() const { return history.size() >= max_picks; }
};

struct RankedCard {
  CardId card{};
  std::string name;
  double distance = 0.0;
  std::size_t rank = 0;
};

struct RecommendationResponse {
  std::vector<RankedCard> ranked;
  std::size_t anchor_size = 0;
};

struct CardEmbedding {
  CardId card{};
  std::vector<double> embedding;
  std::array<double, 2> projection{};
  double distance_to_empty = 0.0;
};

struct ServiceOptions {
  std::size_t max_picks = 45;
  std::size_t max_pack_size = 15;
  /// Salt for session ids; 0 draws one from std::random_device.
  std::uint64_t id_seed = 0;
};

struct HttpResponse {
  int status = 200;
  std::string body;  // JSON
};

/// Model registry and draft sessions. Requests on different sessions run
/// concurrently; requests on one session are serialized.
class RecommendationService {
 public:
  explicit RecommendationService(std::shared_ptr<const CardDatabase> db,
                                 ServiceOptions options = {});
  ~RecommendationService();

  const CardDatabase& database() const { return *db_; }

  /// Throws InputError if the model is bound to another database or the id
  /// is taken.
  void add_model(const std::string& id, std::shared_ptr<const EmbeddingModel> model);
  std::vector<std::string> model_ids() const;
  std::shared_ptr<const EmbeddingModel> model(const std::string& id) const;

  /// Replays an existing journal, then appends every later session change to
  /// it. Models must be registered first.
  void open_journal(const std::filesystem::path& path);

  std::string create_session(const std::string& model_id);
  /// Read-only ranking of the pack against the session pool.
  RecommendationResponse recommend(const std::string& session_id, const Pack& pack) const;
  /// Returns the new anchor size. Throws ConflictError once the draft is
  /// complete.
  std::size_t record_pick(const std::string& session_id, const Pack& pack, CardId picked);
  SessionSnapshot get_session(const std::string& session_id) const;
  std::vector<CardEmbedding> embeddings(const std::string& model_id) const;

  /// JSON-over-HTTP routing, independent of the transport.
  HttpResponse handle(const std::string& method, const std::string& path,
                      const std::string& body);

 private:
  struct Session;
  struct ModelEntry;

  std::shared_ptr<Session> find_session(const std::string& id) const;
  const ModelEntry& find_model(const std::string& id) const;
  void validate_pack(const Pack& pack) const;
  std::string insert_session(std::string id, const std::string& model_id, std::string created_at);
  void apply_pick(Session& session, const Pack& pack, CardId picked);
  void journal(const std::string& line);

  std::shared_ptr<const CardDatabase> db_;
  ServiceOptions options_;
  std::map<std::string, std::unique_ptr<ModelEntry>> models_;
  mutable std::shared_mutex sessions_mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::uint64_t id_salt_ = 0;
  std::uint64_t next_session_ = 0;
  std::mutex journal_mutex_;
  std::ofstream journal_;
  bool replaying_ = false;
};

struct ServerOptions {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  std::optional<std::filesystem::path> static_dir;
};

/// Parses "host:port" or ":port" or "port".
ServerOptions parse_bind_address(const std::string& address);

/// Blocking HTTP server over a RecommendationService.
class HttpServer {
 public:
  HttpServer(RecommendationService& service, ServerOptions options);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds the socket and returns the bound port.
  int bind();
  /// Serves until stop(); bind() must have succeeded.
  void run();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace cprdraft::service
