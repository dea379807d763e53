#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <vector>

#include "cprdraft/agents.hpp"
#include "cprdraft/nn.hpp"

namespace cprdraft {

/// Classification baseline: the pool count vector is mapped to one real
/// score per card, and pack cards are ranked by score.
class ScoreModel {
 public:
  ScoreModel(nn::ModelParams params, std::uint64_t db_fingerprint);

  /// output_dim and input_dim are both taken from the database.
  static ScoreModel create(nn::NetworkSpec spec, const CardDatabase& db, Rng& rng);
  static ScoreModel load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  const nn::NetworkSpec& spec() const { return params_.spec(); }
  const nn::ModelParams& params() const { return params_; }
  void set_params(nn::ModelParams params);
  std::uint64_t db_fingerprint() const { return db_fingerprint_; }
  std::size_t card_count() const { return params_.spec().input_dim; }

  void require_database(const CardDatabase& db) const;
  std::vector<double> scores(const PlayerPool& pool) const;

 private:
  nn::ModelParams params_;
  std::uint64_t db_fingerprint_ = 0;
};

class NNetAgent final : public Agent {
 public:
  explicit NNetAgent(std::shared_ptr<const ScoreModel> model) : model_(std::move(model)) {}
  std::string name() const override { return "nnet"; }
  std::vector<CardId> rank(const PlayerPool& pool, const Pack& pack,
                           const CardDatabase& db) override;

 private:
  std::shared_ptr<const ScoreModel> model_;
};

struct ClassifierTrainConfig {
  std::size_t batch_size = 128;
  nn::AdamConfig adam;
  std::size_t epochs = 1;
};

struct ClassifierHistory {
  std::vector<double> batch_losses;
  std::size_t events_seen = 0;
};

/// Softmax cross-entropy over the cards in the pack, with the reference pick
/// as target; forced picks (pack of one) are skipped. Events are visited in
/// the given order each epoch.
ClassifierHistory train_classifier(ScoreModel& model, std::span<const PickEvent> events,
                                   const CardDatabase& db, const ClassifierTrainConfig& config,
                                   Rng& rng);

}  // namespace cprdraft
