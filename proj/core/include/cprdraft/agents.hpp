#pragma once

#include <array>
#include <string>
#include <vector>

#include "cprdraft/draftsim.hpp"

namespace cprdraft {

/// A pick policy. rank() orders the whole pack best-first; pick() is always
/// its first element.
class Agent {
 public:
  virtual ~Agent() = default;
  virtual std::string name() const = 0;
  virtual std::vector<CardId> rank(const PlayerPool& pool, const Pack& pack,
                                   const CardDatabase& db) = 0;
  CardId pick(const PlayerPool& pool, const Pack& pack, const CardDatabase& db);
};

CardId random_agent_pick(const PlayerPool& pool, const Pack& pack, Rng& rng);

/// Uniformly random ordering. Holds its own generator, so an instance must
/// not be shared between threads.
class RandomAgent final : public Agent {
 public:
  explicit RandomAgent(std::uint64_t seed) : rng_(seed) {}
  std::string name() const override { return "random"; }
  std::vector<CardId> rank(const PlayerPool& pool, const Pack& pack,
                           const CardDatabase& db) override;

 private:
  Rng rng_;
};

/// Highest rarity first, then overlap of the card's colors with the pool's
/// color histogram, then lowest id.
CardId raredraft_agent_pick(const PlayerPool& pool, const Pack& pack, const CardDatabase& db);

class RaredraftAgent final : public Agent {
 public:
  std::string name() const override { return "raredraft"; }
  std::vector<CardId> rank(const PlayerPool& pool, const Pack& pack,
                           const CardDatabase& db) override;
};

struct OracleParams {
  /// Base strength is U(0, 1) plus a per-rarity bonus.
  std::array<double, 4> rarity_bonus = {0.0, 0.25, 0.55, 0.75};
  /// Color synergy weights are drawn from synergy_scale * U(0.8, 1.2).
  double synergy_scale = 1.0;
  /// Colorless cards fit any pool at this fraction of the mean weight.
  double colorless_affinity = 0.35;
  double noise_scale = 0.0;
};

/// Known ground-truth utility used to synthesize draft logs:
///   score(c | C) = strength[c] + synergy(colors(c), C) + noise * Gumbel
/// where synergy uses the fraction of pool cards sharing each color and is
/// zero for an empty pool.
struct OracleUtility {
  std::vector<double> strength;
  std::array<double, 5> color_weight{};
  double colorless_affinity = 0.35;
  double noise_scale = 0.0;

  static OracleUtility generate(const CardDatabase& db, const OracleParams& params, Rng& rng);

  double synergy(const Card& card, const std::array<int, 5>& histogram,
                 std::size_t pool_size) const;
  double score(const Card& card, const std::array<int, 5>& histogram,
               std::size_t pool_size) const;
};

/// Noise-perturbed scores for every pack card, in pack order.
std::vector<double> oracle_scores(const PlayerPool& pool, const Pack& pack,
                                  const CardDatabase& db, const OracleUtility& latent, Rng& rng);

CardId oracle_agent_pick(const PlayerPool& pool, const Pack& pack, const CardDatabase& db,
                         const OracleUtility& latent, Rng& rng);

class OracleAgent final : public Agent {
 public:
  OracleAgent(OracleUtility latent, std::uint64_t seed)
      : latent_(std::move(latent)), rng_(seed) {}
  std::string name() const override { return "oracle"; }
  std::vector<CardId> rank(const PlayerPool& pool, const Pack& pack,
                           const CardDatabase& db) override;
  const OracleUtility& latent() const { return latent_; }

 private:
  OracleUtility latent_;
  Rng rng_;
};

/// Sorts pack cards by descending score, ties by lowest id.
std::vector<CardId> order_by_score(const Pack& pack, const std::vector<double>& scores);

}  // namespace cprdraft
