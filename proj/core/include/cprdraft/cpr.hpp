#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cprdraft/agents.hpp"
#include "cprdraft/dataio.hpp"
#include "cprdraft/nn.hpp"

namespace cprdraft {

/// Count vector of the context multiset; the empty pool maps to zeros.
std::vector<double> encode_anchor(const PlayerPool& pool, std::size_t n_cards);

/// One-hot vector; identical to encode_anchor of the singleton pool.
std::vector<double> encode_candidate(CardId card, std::size_t n_cards);

struct RankedRecommendation {
  CardId card{};
  double distance = 0.0;
  std::size_t rank = 0;

  bool operator==(const RankedRecommendation&) const = default;
};

/// Shared embedding network bound to one card database. Candidate
/// embeddings do not depend on the context, so they are computed once per
/// parameter set and cached; anchors are embedded per query.
class EmbeddingModel {
 public:
  EmbeddingModel(nn::ModelParams params, std::uint64_t db_fingerprint);

  /// Freshly initialized model; spec.input_dim is taken from the database.
  static EmbeddingModel create(nn::NetworkSpec spec, const CardDatabase& db, Rng& rng);

  static EmbeddingModel load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  const nn::NetworkSpec& spec() const { return params_.spec(); }
  const nn::ModelParams& params() const { return params_; }
  void set_params(nn::ModelParams params);
  std::uint64_t db_fingerprint() const { return db_fingerprint_; }
  std::size_t card_count() const { return params_.spec().input_dim; }
  std::size_t dimension() const { return params_.spec().output_dim; }

  /// Throws InputError when the model was trained on a different database.
  void require_database(const CardDatabase& db) const;

  std::vector<double> embed_anchor(const PlayerPool& pool) const;
  std::span<const double> candidate_embedding(CardId card) const;
  std::span<const double> empty_embedding() const { return empty_embedding_; }

  /// Ascending by distance to the embedded pool, ties by lowest id.
  std::vector<RankedRecommendation> rank_candidates(const PlayerPool& pool, const Pack& pack,
                                                    const CardDatabase& db) const;
  CardId pick_card(const PlayerPool& pool, const Pack& pack, const CardDatabase& db) const;

  /// d(N(empty set), N(card)): context-free strength, lower is stronger.
  double distance_to_empty(CardId card) const;
  std::vector<double> distances_to_empty() const;

 private:
  void refresh_cache();
  void check_card(CardId card) const;

  nn::ModelParams params_;
  std::uint64_t db_fingerprint_ = 0;
  std::vector<double> candidate_cache_;  // N x D
  std::vector<double> empty_embedding_;
};

class SiameseAgent final : public Agent {
 public:
  explicit SiameseAgent(std::shared_ptr<const EmbeddingModel> model) : model_(std::move(model)) {}
  std::string name() const override { return "siamese"; }
  std::vector<CardId> rank(const PlayerPool& pool, const Pack& pack,
                           const CardDatabase& db) override;

 private:
  std::shared_ptr<const EmbeddingModel> model_;
};

struct TrainConfig {
  std::size_t batch_size = 128;
  nn::AdamConfig adam;  // learning rate 1e-4
  double margin = 1.0;
  std::size_t validate_every = 50'000;  // triplets; 0 disables
  std::size_t max_triplets = 0;         // 0 = whole stream
};

struct ValidationPoint {
  std::size_t triplets_seen = 0;
  double mtta = 0.0;
};

struct TrainHistory {
  std::vector<double> batch_losses;  // mean loss per batch
  std::vector<ValidationPoint> validation;
  std::size_t triplets_seen = 0;
};

using TripletSupplier = std::function<std::optional<TripletExample>()>;
using ValidationFn = std::function<double(const EmbeddingModel&)>;

struct BatchGradient {
  double mean_loss = 0.0;
  nn::Gradients grads;
};

/// Mean triplet loss over the batch and its gradient; each triplet takes
/// three training-mode passes through the shared network.
BatchGradient compute_batch_gradient(const nn::ModelParams& params,
                                     std::span<const TripletExample> batch, double margin,
                                     Rng& rng);

/// One Adam update per batch of mean loss. Throws std::runtime_error on a
/// non-finite loss, naming the batch.
TrainHistory train(EmbeddingModel& model, const TripletSupplier& next, const CardDatabase& db,
                   const TrainConfig& config, Rng& rng, const ValidationFn& validate = {});
TrainHistory train(EmbeddingModel& model, TripletStream& stream, const CardDatabase& db,
                   const TrainConfig& config, Rng& rng, const ValidationFn& validate = {});
TrainHistory train(EmbeddingModel& model, std::span<const TripletExample> triplets,
                   const CardDatabase& db, const TrainConfig& config, Rng& rng,
                   const ValidationFn& validate = {});

/// `card_id,name,colors,rarity,distance_to_empty,e_0..e_{D-1}` with a header.
void write_embedding_export(std::ostream& out, const EmbeddingModel& model,
                            const CardDatabase& db);

/// Plain-text `key: value` sidecar written next to a model file.
void write_model_summary(const std::filesystem::path& model_path, const EmbeddingModel& model,
                         const std::vector<std::pair<std::string, std::string>>& details);

}  // namespace cprdraft
