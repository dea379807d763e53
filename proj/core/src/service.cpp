#include "cprdraft/service.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <nlohmann/json.hpp>
#include <random>
#include <sstream>

#include "cprdraft/analysis.hpp"

namespace cprdraft::service {

using nlohmann::json;

struct RecommendationService::Session {
  std::mutex mutex;
  SessionSnapshot state;
};

struct RecommendationService::ModelEntry {
  std::shared_ptr<const EmbeddingModel> model;
  std::vector<CardEmbedding> embeddings;
};

namespace {

std::string utc_now() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string hex_id(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

Pack pack_from_json(const json& value) {
  if (!value.is_array()) throw InputError("pack must be an array of card ids");
  Pack pack;
  for (const json& v : value) {
    if (!v.is_number_integer() || v.get<long long>() < 0)
      throw InputError("pack entries must be non-negative integers");
    pack.push_back(card_id(v.get<std::uint64_t>()));
  }
  return pack;
}

json ids_to_json(std::span<const CardId> cards) {
  json out = json::array();
  for (CardId c : cards) out.push_back(index(c));
  return out;
}

json session_to_json(const SessionSnapshot& s) {
  json history = json::array();
  for (const PickRecord& r : s.history)
    history.push_back({{"pack", ids_to_json(r.pack)}, {"picked", index(r.picked)}});
  return {{"id", s.id},
          {"model", s.model_id},
          {"created_at", s.created_at},
          {"pool", ids_to_json(s.pool.cards())},
          {"history", std::move(history)},
          {"anchor_size", s.anchor_size()},
          {"max_picks", s.max_picks},
          {"complete", s.complete()}};
}

json card_to_json(const Card& card) {
  return {{"id", index(card.id)},
          {"name", card.name},
          {"colors", card.colors.letters()},
          {"rarity", std::string(to_string(card.rarity))}};
}

HttpResponse error_response(int status, const std::string& message) {
  return {status, json{{"error", message}}.dump()};
}

std::vector<std::string> split_path(const std::string& path) {
  std::vector<std::string> parts;
  std::string clean = path.substr(0, path.find('?'));
  std::stringstream ss(clean);
  std::string part;
  while (std::getline(ss, part, '/'))
    if (!part.empty()) parts.push_back(part);
  return parts;
}

}  // namespace

RecommendationService::RecommendationService(std::shared_ptr<const CardDatabase> db,
                                             ServiceOptions options)
    : db_(std::move(db)), options_(options) {
  if (!db_) throw InputError("service needs a card database");
  id_salt_ = options_.id_seed != 0 ? options_.id_seed
                                   : (static_cast<std::uint64_t>(std::random_device{}()) << 32) ^
                                         std::random_device{}();
}

RecommendationService::~RecommendationService() = default;

void RecommendationService::add_model(const std::string& id,
                                      std::shared_ptr<const EmbeddingModel> model) {
  if (!model) throw InputError("null model");
  if (id.empty() || id.find('/') != std::string::npos)
    throw InputError("invalid model id '" + id + "'");
  if (models_.count(id)) throw InputError("model id '" + id + "' already registered");
  model->require_database(*db_);

  auto entry = std::make_unique<ModelEntry>();
  std::vector<std::vector<double>> points;
  for (const Card& card : db_->cards()) {
    const auto e = model->candidate_embedding(card.id);
    points.emplace_back(e.begin(), e.end());
  }
  std::vector<std::array<double, 2>> projection;
  if (model->dimension() >= 2 && points.size() >= 2) {
    try {
      projection = analysis::project_2d(points);
    } catch (const InputError&) {
      projection.assign(points.size(), {0.0, 0.0});
    }
  } else {
    for (const auto& p : points) projection.push_back({p.front(), 0.0});
  }
  for (const Card& card : db_->cards()) {
    CardEmbedding row;
    row.card = card.id;
    row.embedding = points[index(card.id)];
    row.projection = projection[index(card.id)];
    row.distance_to_empty = model->distance_to_empty(card.id);
    entry->embeddings.push_back(std::move(row));
  }
  entry->model = std::move(model);
  models_.emplace(id, std::move(entry));
}

std::vector<std::string> RecommendationService::model_ids() const {
  std::vector<std::string> ids;
  for (const auto& [id, entry] : models_) ids.push_back(id);
  return ids;
}

const RecommendationService::ModelEntry& RecommendationService::find_model(
    const std::string& id) const {
  const auto it = models_.find(id);
  if (it == models_.end()) throw NotFoundError("unknown model '" + id + "'");
  return *it->second;
}

std::shared_ptr<const EmbeddingModel> RecommendationService::model(const std::string& id) const {
  return find_model(id).model;
}

std::shared_ptr<RecommendationService::Session> RecommendationService::find_session(
    const std::string& id) const {
  std::shared_lock lock(sessions_mutex_);
  const auto it = sessions_.find(id);
  if (it == sessions_.end()) throw NotFoundError("unknown session '" + id + "'");
  return it->second;
}

void RecommendationService::validate_pack(const Pack& pack) const {
  if (pack.empty()) throw InputError("pack is empty");
  if (pack.size() > options_.max_pack_size)
    throw InputError("pack has " + std::to_string(pack.size()) + " cards (max " +
                     std::to_string(options_.max_pack_size) + ")");
  for (CardId c : pack)
    if (index(c) >= db_->size())
      throw InputError("card id " + std::to_string(index(c)) + " out of range (N=" +
                       std::to_string(db_->size()) + ")");
}

std::string RecommendationService::insert_session(std::string id, const std::string& model_id,
                                                  std::string created_at) {
  auto session = std::make_shared<Session>();
  session->state.model_id = model_id;
  session->state.created_at = std::move(created_at);
  session->state.max_picks = options_.max_picks;
  std::unique_lock lock(sessions_mutex_);
  while (id.empty() || sessions_.count(id)) {
    if (!id.empty() && replaying_) throw InputError("journal repeats session '" + id + "'");
    id = hex_id(mix64(id_salt_ ^ mix64(next_session_++)));
  }
  session->state.id = id;
  sessions_.emplace(id, std::move(session));
  return id;
}

std::string RecommendationService::create_session(const std::string& model_id) {
  find_model(model_id);
  const std::string id = insert_session({}, model_id, utc_now());
  const SessionSnapshot s = get_session(id);
  journal(json{{"op", "session"}, {"id", id}, {"model", model_id}, {"created_at", s.created_at}}
              .dump());
  return id;
}

RecommendationResponse RecommendationService::recommend(const std::string& session_id,
                                                        const Pack& pack) const {
  const auto session = find_session(session_id);
  validate_pack(pack);
  std::lock_guard lock(session->mutex);
  const auto& model = *find_model(session->state.model_id).model;
  RecommendationResponse response;
  response.anchor_size = session->state.pool.size();
  for (const RankedRecommendation& r : model.rank_candidates(session->state.pool, pack, *db_))
    response.ranked.push_back({r.card, db_->card(r.card).name, r.distance, r.rank});
  return response;
}

void RecommendationService::apply_pick(Session& session, const Pack& pack, CardId picked) {
  validate_pack(pack);
  if (session.state.complete())
    throw ConflictError("draft complete: " + std::to_string(session.state.max_picks) +
                        " picks recorded");
  if (std::find(pack.begin(), pack.end(), picked) == pack.end())
    throw InputError("picked card " + std::to_string(index(picked)) + " is not in the pack");
  session.state.history.push_back({pack, picked});
  session.state.pool.add(picked);
}

std::size_t RecommendationService::record_pick(const std::string& session_id, const Pack& pack,
                                               CardId picked) {
  const auto session = find_session(session_id);
  std::lock_guard lock(session->mutex);
  apply_pick(*session, pack, picked);
  journal(json{{"op", "pick"},
               {"session", session_id},
               {"pack", ids_to_json(pack)},
               {"picked", index(picked)}}
              .dump());
  return session->state.pool.size();
}

SessionSnapshot RecommendationService::get_session(const std::string& session_id) const {
  const auto session = find_session(session_id);
  std::lock_guard lock(session->mutex);
  return session->state;
}

std::vector<CardEmbedding> RecommendationService::embeddings(const std::string& model_id) const {
  return find_model(model_id).embeddings;
}

void RecommendationService::journal(const std::string& line) {
  if (replaying_) return;
  std::lock_guard lock(journal_mutex_);
  if (!journal_.is_open()) return;
  journal_ << line << '\n';
  journal_.flush();
}

void RecommendationService::open_journal(const std::filesystem::path& path) {
  if (std::filesystem::exists(path)) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot read journal " + path.string());
    replaying_ = true;
    std::string line;
    std::size_t line_no = 0;
    try {
      while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const json entry = json::parse(line);
        const std::string op = entry.at("op").get<std::string>();
        if (op == "session") {
          find_model(entry.at("model").get<std::string>());
          insert_session(entry.at("id").get<std::string>(), entry.at("model").get<std::string>(),
                         entry.at("created_at").get<std::string>());
        } else if (op == "pick") {
          const auto session = find_session(entry.at("session").get<std::string>());
          apply_pick(*session, pack_from_json(entry.at("pack")),
                     card_id(entry.at("picked").get<std::uint64_t>()));
        } else {
          throw InputError("unknown op '" + op + "'");
        }
      }
    } catch (const std::exception& e) {
      replaying_ = false;
      throw InputError("journal " + path.string() + " line " + std::to_string(line_no) + ": " +
                       e.what());
    }
    replaying_ = false;
  }
  std::lock_guard lock(journal_mutex_);
  journal_.open(path, std::ios::app);
  if (!journal_) throw InputError("cannot open journal " + path.string());
}

HttpResponse RecommendationService::handle(const std::string& method, const std::string& path,
                                           const std::string& body) {
  const std::vector<std::string> parts = split_path(path);
  auto parse_body = [&]() -> json {
    if (body.empty()) return json::object();
    json parsed = json::parse(body, nullptr, false);
    if (parsed.is_discarded() || !parsed.is_object())
      throw InputError("request body must be a JSON object");
    return parsed;
  };
  auto expect = [&](const char* allowed) {
    if (method != allowed) throw std::invalid_argument(allowed);
  };

  try {
    if (parts.size() == 1 && parts[0] == "health") {
      expect("GET");
      return {200, json{{"status", "ok"}}.dump()};
    }
    if (parts.size() == 1 && parts[0] == "cards") {
      expect("GET");
      json cards = json::array();
      for (const Card& card : db_->cards()) cards.push_back(card_to_json(card));
      return {200, json{{"cards", std::move(cards)}}.dump()};
    }
    if (parts.size() == 1 && parts[0] == "models") {
      expect("GET");
      json models = json::array();
      for (const auto& [id, entry] : models_) {
        const auto& spec = entry->model->spec();
        models.push_back({{"id", id},
                          {"dimension", spec.output_dim},
                          {"hidden_dims", spec.hidden_dims},
                          {"card_count", spec.input_dim}});
      }
      return {200, json{{"models", std::move(models)}}.dump()};
    }
    if (parts.size() == 3 && parts[0] == "models" && parts[2] == "embeddings") {
      expect("GET");
      const ModelEntry& entry = find_model(parts[1]);
      json cards = json::array();
      for (const CardEmbedding& e : entry.embeddings) {
        json row = card_to_json(db_->card(e.card));
        row["embedding"] = e.embedding;
        row["projection"] = {e.projection[0], e.projection[1]};
        row["distance_to_empty"] = e.distance_to_empty;
        cards.push_back(std::move(row));
      }
      return {200, json{{"model", parts[1]},
                        {"dimension", entry.model->dimension()},
                        {"cards", std::move(cards)}}
                       .dump()};
    }
    if (parts.size() == 1 && parts[0] == "sessions") {
      expect("POST");
      const json request = parse_body();
      std::string model_id;
      if (request.contains("model")) {
        if (!request["model"].is_string()) throw InputError("model must be a string");
        model_id = request["model"].get<std::string>();
      } else if (models_.size() == 1) {
        model_id = models_.begin()->first;
      } else {
        throw InputError("request must name a model");
      }
      const std::string id = create_session(model_id);
      return {201, session_to_json(get_session(id)).dump()};
    }
    if (parts.size() == 2 && parts[0] == "sessions") {
      expect("GET");
      return {200, session_to_json(get_session(parts[1])).dump()};
    }
    if (parts.size() == 3 && parts[0] == "sessions" && parts[2] == "recommend") {
      expect("POST");
      const json request = parse_body();
      if (!request.contains("pack")) throw InputError("request must contain 'pack'");
      const RecommendationResponse r = recommend(parts[1], pack_from_json(request["pack"]));
      json ranked = json::array();
      for (const RankedCard& c : r.ranked)
        ranked.push_back({{"card_id", index(c.card)},
                          {"name", c.name},
                          {"distance", c.distance},
                          {"rank", c.rank}});
      return {200, json{{"anchor_size", r.anchor_size}, {"ranked", std::move(ranked)}}.dump()};
    }
    if (parts.size() == 3 && parts[0] == "sessions" && parts[2] == "pick") {
      expect("POST");
      const json request = parse_body();
      if (!request.contains("pack")) throw InputError("request must contain 'pack'");
      if (!request.contains("picked") || !request["picked"].is_number_integer() ||
          request["picked"].get<long long>() < 0)
        throw InputError("request must contain a non-negative integer 'picked'");
      const std::size_t size = record_pick(parts[1], pack_from_json(request["pack"]),
                                           card_id(request["picked"].get<std::uint64_t>()));
      const SessionSnapshot s = get_session(parts[1]);
      return {200, json{{"anchor_size", size}, {"complete", s.complete()}}.dump()};
    }
    return error_response(404, "no route for " + method + " " + path);
  } catch (const std::invalid_argument& e) {
    return error_response(405, "method " + method + " not allowed; use " + e.what());
  } catch (const NotFoundError& e) {
    return error_response(404, e.what());
  } catch (const ConflictError& e) {
    return error_response(409, e.what());
  } catch (const InputError& e) {
    return error_response(400, e.what());
  } catch (const json::exception& e) {
    return error_response(400, e.what());
  } catch (const std::exception& e) {
    return error_response(500, e.what());
  }
}

ServerOptions parse_bind_address(const std::string& address) {
  ServerOptions options;
  std::string port = address;
  const auto colon = address.rfind(':');
  if (colon != std::string::npos) {
    if (colon > 0) options.host = address.substr(0, colon);
    port = address.substr(colon + 1);
  }
  try {
    std::size_t used = 0;
    const int value = std::stoi(port, &used);
    if (used != port.size() || value < 0 || value > 65535) throw std::out_of_range(port);
    options.port = value;
  } catch (const std::logic_error&) {
    throw InputError("invalid bind address '" + address + "'");
  }
  return options;
}

}  // namespace cprdraft::service
