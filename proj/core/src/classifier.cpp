#include "cprdraft/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "cprdraft/cpr.hpp"
#include "cprdraft/error.hpp"

namespace cprdraft {

ScoreModel::ScoreModel(nn::ModelParams params, std::uint64_t db_fingerprint)
    : params_(std::move(params)), db_fingerprint_(db_fingerprint) {
  if (params_.spec().output != nn::OutputActivation::Identity)
    throw InputError("score models need an identity output layer");
  if (params_.spec().output_dim != params_.spec().input_dim)
    throw InputError("score models need one output per card");
}

ScoreModel ScoreModel::create(nn::NetworkSpec spec, const CardDatabase& db, Rng& rng) {
  spec.input_dim = db.size();
  spec.output_dim = db.size();
  spec.output = nn::OutputActivation::Identity;
  return ScoreModel(nn::ModelParams::initialize(spec, rng), db.fingerprint());
}

ScoreModel ScoreModel::load(const std::filesystem::path& path) {
  nn::ModelFile file = nn::load_model_file(path);
  return ScoreModel(std::move(file.params), file.db_fingerprint);
}

void ScoreModel::save(const std::filesystem::path& path) const {
  nn::save_model_file(path, params_, db_fingerprint_);
}

void ScoreModel::set_params(nn::ModelParams params) {
  if (!params.same_shape(params_)) throw InputError("set_params: shape mismatch");
  params_ = std::move(params);
}

void ScoreModel::require_database(const CardDatabase& db) const {
  if (db.fingerprint() != db_fingerprint_ || db.size() != card_count())
    throw InputError("model is bound to a different card database");
}

std::vector<double> ScoreModel::scores(const PlayerPool& pool) const {
  return nn::forward(params_, encode_anchor(pool, card_count()));
}

std::vector<CardId> NNetAgent::rank(const PlayerPool& pool, const Pack& pack,
                                    const CardDatabase& db) {
  model_->require_database(db);
  if (pack.empty()) throw InputError("cannot rank an empty pack");
  const std::vector<double> all = model_->scores(pool);
  std::vector<double> scores;
  scores.reserve(pack.size());
  for (CardId c : pack) {
    if (index(c) >= all.size())
      throw InputError("card id " + std::to_string(index(c)) + " out of range");
    scores.push_back(all[index(c)]);
  }
  return order_by_score(pack, scores);
}

ClassifierHistory train_classifier(ScoreModel& model, std::span<const PickEvent> events,
                                   const CardDatabase& db, const ClassifierTrainConfig& config,
                                   Rng& rng) {
  model.require_database(db);
  if (config.batch_size < 1) throw InputError("batch size must be at least 1");
  nn::ModelParams params = model.params();
  nn::AdamState adam(params, config.adam);
  ClassifierHistory history;
  const std::size_t n = model.card_count();
  nn::Gradients grads = nn::Gradients::zeros(params.spec());
  nn::ForwardTrace trace;
  std::vector<double> output_grad(n);
  std::size_t in_batch = 0;
  double batch_loss = 0.0;

  auto flush = [&] {
    const double inv = 1.0 / static_cast<double>(in_batch);
    for (double& g : grads.values()) g *= inv;
    const double mean = batch_loss * inv;
    if (!std::isfinite(mean))
      throw std::runtime_error("non-finite loss at batch " +
                               std::to_string(history.batch_losses.size()));
    nn::adam_step(params, grads, adam);
    history.batch_losses.push_back(mean);
    grads.set_zero();
    in_batch = 0;
    batch_loss = 0.0;
  };

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    for (const PickEvent& e : events) {
      if (e.pack.size() < 2) continue;
      nn::forward_train(params, encode_anchor(e.pool_before, n), rng, trace);
      const auto out = trace.output();
      double top = -std::numeric_limits<double>::infinity();
      for (CardId c : e.pack) top = std::max(top, out[index(c)]);
      // Duplicate copies in the pack share one logit and one probability.
      std::vector<CardId> distinct = e.pack;
      std::sort(distinct.begin(), distinct.end());
      distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
      double z = 0.0;
      for (CardId c : distinct) z += std::exp(out[index(c)] - top);
      std::fill(output_grad.begin(), output_grad.end(), 0.0);
      for (CardId c : distinct) output_grad[index(c)] = std::exp(out[index(c)] - top) / z;
      output_grad[index(e.picked)] -= 1.0;
      batch_loss += -(out[index(e.picked)] - top - std::log(z));
      nn::backward(params, trace, output_grad, grads);
      ++history.events_seen;
      if (++in_batch == config.batch_size) flush();
    }
  }
  if (in_batch > 0) flush();
  model.set_params(std::move(params));
  return history;
}

}  // namespace cprdraft
