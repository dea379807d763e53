#include "cprdraft/agents.hpp"

#include <algorithm>
#include <numeric>

#include "cprdraft/error.hpp"

namespace cprdraft {

namespace {

void require_nonempty(const Pack& pack) {
  if (pack.empty()) throw InputError("cannot pick from an empty pack");
}

int color_overlap(const Card& card, const std::array<int, 5>& histogram) {
  int overlap = 0;
  for (Color c : kAllColors)
    if (card.colors.contains(c)) overlap += histogram[index(c)];
  return overlap;
}

}  // namespace

CardId Agent::pick(const PlayerPool& pool, const Pack& pack, const CardDatabase& db) {
  require_nonempty(pack);
  return rank(pool, pack, db).front();
}

std::vector<CardId> order_by_score(const Pack& pack, const std::vector<double>& scores) {
  std::vector<std::size_t> order(pack.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return pack[a] < pack[b];
  });
  std::vector<CardId> ranked;
  ranked.reserve(pack.size());
  for (std::size_t i : order) ranked.push_back(pack[i]);
  return ranked;
}

CardId random_agent_pick(const PlayerPool&, const Pack& pack, Rng& rng) {
  require_nonempty(pack);
  std::uniform_int_distribution<std::size_t> dist(0, pack.size() - 1);
  return pack[dist(rng)];
}

std::vector<CardId> RandomAgent::rank(const PlayerPool&, const Pack& pack, const CardDatabase&) {
  require_nonempty(pack);
  std::vector<CardId> ranked = pack;
  std::shuffle(ranked.begin(), ranked.end(), rng_);
  return ranked;
}

std::vector<CardId> RaredraftAgent::rank(const PlayerPool& pool, const Pack& pack,
                                         const CardDatabase& db) {
  require_nonempty(pack);
  const auto histogram = pool.color_histogram(db);
  std::vector<CardId> ranked = pack;
  std::stable_sort(ranked.begin(), ranked.end(), [&](CardId a, CardId b) {
    const Card& ca = db.card(a);
    const Card& cb = db.card(b);
    if (ca.rarity != cb.rarity) return ca.rarity > cb.rarity;
    const int oa = color_overlap(ca, histogram);
    const int ob = color_overlap(cb, histogram);
    if (oa != ob) return oa > ob;
    return a < b;
  });
  return ranked;
}

CardId raredraft_agent_pick(const PlayerPool& pool, const Pack& pack, const CardDatabase& db) {
  RaredraftAgent agent;
  return agent.pick(pool, pack, db);
}

OracleUtility OracleUtility::generate(const CardDatabase& db, const OracleParams& params,
                                      Rng& rng) {
  OracleUtility latent;
  latent.strength.reserve(db.size());
  for (const Card& card : db.cards())
    latent.strength.push_back(uniform01(rng) + params.rarity_bonus[index(card.rarity)]);
  for (double& w : latent.color_weight) w = params.synergy_scale * (0.8 + 0.4 * uniform01(rng));
  latent.colorless_affinity = params.colorless_affinity;
  latent.noise_scale = params.noise_scale;
  return latent;
}

double OracleUtility::synergy(const Card& card, const std::array<int, 5>& histogram,
                              std::size_t pool_size) const {
  if (pool_size == 0) return 0.0;
  const double n = static_cast<double>(pool_size);
  if (card.colors.colorless()) {
    double mean = 0.0;
    for (double w : color_weight) mean += w;
    return colorless_affinity * mean / 5.0;
  }
  double weight = 0.0;
  double fraction = 1.0;
  for (Color c : kAllColors) {
    if (!card.colors.contains(c)) continue;
    weight += color_weight[index(c)];
    fraction = std::min(fraction, histogram[index(c)] / n);
  }
  // A multicolored card only fits as well as its least-supported color.
  return weight / card.colors.size() * fraction;
}

double OracleUtility::score(const Card& card, const std::array<int, 5>& histogram,
                            std::size_t pool_size) const {
  return strength.at(index(card.id)) + synergy(card, histogram, pool_size);
}

std::vector<double> oracle_scores(const PlayerPool& pool, const Pack& pack,
                                  const CardDatabase& db, const OracleUtility& latent, Rng& rng) {
  if (latent.strength.size() != db.size())
    throw InputError("oracle utility does not match the card database");
  const auto histogram = pool.color_histogram(db);
  std::vector<double> scores;
  scores.reserve(pack.size());
  for (CardId id : pack) {
    double s = latent.score(db.card(id), histogram, pool.size());
    if (latent.noise_scale > 0.0) s += latent.noise_scale * gumbel(rng);
    scores.push_back(s);
  }
  return scores;
}

CardId oracle_agent_pick(const PlayerPool& pool, const Pack& pack, const CardDatabase& db,
                         const OracleUtility& latent, Rng& rng) {
  require_nonempty(pack);
  return order_by_score(pack, oracle_scores(pool, pack, db, latent, rng)).front();
}

std::vector<CardId> OracleAgent::rank(const PlayerPool& pool, const Pack& pack,
                                      const CardDatabase& db) {
  require_nonempty(pack);
  return order_by_score(pack, oracle_scores(pool, pack, db, latent_, rng_));
}

}  // namespace cprdraft
