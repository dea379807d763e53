#include "cprdraft/cpr.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "cprdraft/error.hpp"

namespace cprdraft {

namespace {

void fill_anchor(const PlayerPool& pool, std::size_t n_cards, std::vector<double>& out) {
  out.assign(n_cards, 0.0);
  for (CardId c : pool.cards()) {
    if (index(c) >= n_cards)
      throw InputError("card id " + std::to_string(index(c)) + " out of range (N=" +
                       std::to_string(n_cards) + ")");
    out[index(c)] += 1.0;
  }
}

void fill_candidate(CardId card, std::size_t n_cards, std::vector<double>& out) {
  if (index(card) >= n_cards)
    throw InputError("card id " + std::to_string(index(card)) + " out of range (N=" +
                     std::to_string(n_cards) + ")");
  out.assign(n_cards, 0.0);
  out[index(card)] = 1.0;
}

}  // namespace

std::vector<double> encode_anchor(const PlayerPool& pool, std::size_t n_cards) {
  std::vector<double> out;
  fill_anchor(pool, n_cards, out);
  return out;
}

std::vector<double> encode_candidate(CardId card, std::size_t n_cards) {
  std::vector<double> out;
  fill_candidate(card, n_cards, out);
  return out;
}

EmbeddingModel::EmbeddingModel(nn::ModelParams params, std::uint64_t db_fingerprint)
    : params_(std::move(params)), db_fingerprint_(db_fingerprint) {
  if (params_.spec().output != nn::OutputActivation::Tanh)
    throw InputError("embedding models need a tanh output layer");
  refresh_cache();
}

EmbeddingModel EmbeddingModel::create(nn::NetworkSpec spec, const CardDatabase& db, Rng& rng) {
  spec.input_dim = db.size();
  spec.output = nn::OutputActivation::Tanh;
  return EmbeddingModel(nn::ModelParams::initialize(spec, rng), db.fingerprint());
}

EmbeddingModel EmbeddingModel::load(const std::filesystem::path& path) {
  nn::ModelFile file = nn::load_model_file(path);
  return EmbeddingModel(std::move(file.params), file.db_fingerprint);
}

void EmbeddingModel::save(const std::filesystem::path& path) const {
  nn::save_model_file(path, params_, db_fingerprint_);
}

void EmbeddingModel::set_params(nn::ModelParams params) {
  if (!params.same_shape(params_)) throw InputError("set_params: shape mismatch");
  params_ = std::move(params);
  refresh_cache();
}

void EmbeddingModel::refresh_cache() {
  const std::size_t n = card_count();
  const std::size_t d = dimension();
  candidate_cache_.resize(n * d);
  std::vector<double> input;
  for (std::size_t c = 0; c < n; ++c) {
    fill_candidate(card_id(c), n, input);
    const auto e = nn::forward(params_, input);
    std::copy(e.begin(), e.end(), candidate_cache_.begin() + static_cast<std::ptrdiff_t>(c * d));
  }
  empty_embedding_ = nn::forward(params_, std::vector<double>(n, 0.0));
}

void EmbeddingModel::require_database(const CardDatabase& db) const {
  if (db.fingerprint() != db_fingerprint_ || db.size() != card_count())
    throw InputError("model is bound to a different card database");
}

void EmbeddingModel::check_card(CardId card) const {
  if (index(card) >= card_count())
    throw InputError("card id " + std::to_string(index(card)) + " out of range (N=" +
                     std::to_string(card_count()) + ")");
}

std::vector<double> EmbeddingModel::embed_anchor(const PlayerPool& pool) const {
  if (pool.empty()) return empty_embedding_;
  return nn::forward(params_, encode_anchor(pool, card_count()));
}

std::span<const double> EmbeddingModel::candidate_embedding(CardId card) const {
  check_card(card);
  return {candidate_cache_.data() + index(card) * dimension(), dimension()};
}

std::vector<RankedRecommendation> EmbeddingModel::rank_candidates(const PlayerPool& pool,
                                                                  const Pack& pack,
                                                                  const CardDatabase& db) const {
  require_database(db);
  if (pack.empty()) throw InputError("cannot rank an empty pack");
  for (CardId c : pack) check_card(c);
  const std::vector<double> anchor = embed_anchor(pool);
  std::vector<RankedRecommendation> ranked;
  ranked.reserve(pack.size());
  for (CardId c : pack)
    ranked.push_back({c, nn::euclidean_distance(anchor, candidate_embedding(c)), 0});
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.distance != b.distance) return a.distance < b.distance;
    return a.card < b.card;
  });
  for (std::size_t i = 0; i < ranked.size(); ++i) ranked[i].rank = i;
  return ranked;
}

CardId EmbeddingModel::pick_card(const PlayerPool& pool, const Pack& pack,
                                 const CardDatabase& db) const {
  return rank_candidates(pool, pack, db).front().card;
}

double EmbeddingModel::distance_to_empty(CardId card) const {
  return nn::euclidean_distance(empty_embedding_, candidate_embedding(card));
}

std::vector<double> EmbeddingModel::distances_to_empty() const {
  std::vector<double> out(card_count());
  for (std::size_t c = 0; c < out.size(); ++c) out[c] = distance_to_empty(card_id(c));
  return out;
}

std::vector<CardId> SiameseAgent::rank(const PlayerPool& pool, const Pack& pack,
                                       const CardDatabase& db) {
  std::vector<CardId> out;
  for (const auto& r : model_->rank_candidates(pool, pack, db)) out.push_back(r.card);
  return out;
}

BatchGradient compute_batch_gradient(const nn::ModelParams& params,
                                     std::span<const TripletExample> batch, double margin,
                                     Rng& rng) {
  BatchGradient out{0.0, nn::Gradients::zeros(params.spec())};
  if (batch.empty()) return out;
  const std::size_t n = params.spec().input_dim;
  std::vector<double> input;
  nn::ForwardTrace ta, tp, tn;
  double total = 0.0;
  for (const TripletExample& t : batch) {
    fill_anchor(t.anchor, n, input);
    nn::forward_train(params, input, rng, ta);
    fill_candidate(t.positive, n, input);
    nn::forward_train(params, input, rng, tp);
    fill_candidate(t.negative, n, input);
    nn::forward_train(params, input, rng, tn);
    total += nn::triplet_backward(params, ta, tp, tn, margin, out.grads);
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (double& g : out.grads.values()) g *= inv;
  out.mean_loss = total * inv;
  return out;
}

TrainHistory train(EmbeddingModel& model, const TripletSupplier& next, const CardDatabase& db,
                   const TrainConfig& config, Rng& rng, const ValidationFn& validate) {
  model.require_database(db);
  if (config.batch_size < 1) throw InputError("batch size must be at least 1");
  nn::ModelParams params = model.params();
  nn::AdamState adam(params, config.adam);
  TrainHistory history;
  std::vector<TripletExample> batch;
  batch.reserve(config.batch_size);
  std::size_t next_validation = config.validate_every;

  auto run_batch = [&] {
    BatchGradient g = compute_batch_gradient(params, batch, config.margin, rng);
    if (!std::isfinite(g.mean_loss))
      throw std::runtime_error("non-finite loss at batch " +
                               std::to_string(history.batch_losses.size()));
    nn::adam_step(params, g.grads, adam);
    history.batch_losses.push_back(g.mean_loss);
    history.triplets_seen += batch.size();
    batch.clear();
    if (validate && config.validate_every > 0 && history.triplets_seen >= next_validation) {
      model.set_params(params);
      history.validation.push_back({history.triplets_seen, validate(model)});
      while (next_validation <= history.triplets_seen) next_validation += config.validate_every;
    }
  };

  while (config.max_triplets == 0 ||
         history.triplets_seen + batch.size() < config.max_triplets) {
    auto t = next();
    if (!t) break;
    batch.push_back(std::move(*t));
    if (batch.size() == config.batch_size) run_batch();
  }
  if (!batch.empty()) run_batch();
  model.set_params(std::move(params));
  return history;
}

TrainHistory train(EmbeddingModel& model, TripletStream& stream, const CardDatabase& db,
                   const TrainConfig& config, Rng& rng, const ValidationFn& validate) {
  if (stream.partition() != Partition::Train)
    throw InputError("training requires a train-partition stream");
  return train(model, [&] { return stream.next(); }, db, config, rng, validate);
}

TrainHistory train(EmbeddingModel& model, std::span<const TripletExample> triplets,
                   const CardDatabase& db, const TrainConfig& config, Rng& rng,
                   const ValidationFn& validate) {
  std::size_t i = 0;
  return train(
      model,
      [&]() -> std::optional<TripletExample> {
        if (i >= triplets.size()) return std::nullopt;
        return triplets[i++];
      },
      db, config, rng, validate);
}

void write_embedding_export(std::ostream& out, const EmbeddingModel& model,
                            const CardDatabase& db) {
  model.require_database(db);
  out << "card_id,name,colors,rarity,distance_to_empty";
  for (std::size_t k = 0; k < model.dimension(); ++k) out << ",e_" << k;
  out << '\n';
  out.precision(17);
  for (const Card& card : db.cards()) {
    std::string name = card.name;
    if (name.find_first_of(",\"") != std::string::npos) {
      std::string quoted = "\"";
      for (char c : name) quoted += c == '"' ? std::string("\"\"") : std::string(1, c);
      name = quoted + '"';
    }
    out << index(card.id) << ',' << name << ',' << card.colors.letters() << ','
        << to_string(card.rarity) << ',' << model.distance_to_empty(card.id);
    for (double v : model.candidate_embedding(card.id)) out << ',' << v;
    out << '\n';
  }
}

void write_model_summary(const std::filesystem::path& model_path, const EmbeddingModel& model,
                         const std::vector<std::pair<std::string, std::string>>& details) {
  std::filesystem::path sidecar = model_path;
  sidecar += ".txt";
  std::ofstream out(sidecar);
  if (!out) throw InputError("cannot write model summary " + sidecar.string());
  const auto& spec = model.spec();
  out << "input_dim: " << spec.input_dim << '\n' << "hidden_dims:";
  for (std::size_t h : spec.hidden_dims) out << ' ' << h;
  out << '\n'
      << "output_dim: " << spec.output_dim << '\n'
      << "dropout_rate: " << spec.dropout_rate << '\n'
      << "db_fingerprint: " << model.db_fingerprint() << '\n'
      << "params_checksum: " << nn::params_checksum(model.params()) << '\n';
  for (const auto& [key, value] : details) out << key << ": " << value << '\n';
}

}  // namespace cprdraft
