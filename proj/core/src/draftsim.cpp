#include "cprdraft/draftsim.hpp"

#include <algorithm>
#include <string>

#include "cprdraft/agents.hpp"
#include "cprdraft/error.hpp"

namespace cprdraft {

PlayerPool::PlayerPool(std::vector<CardId> cards) : cards_(std::move(cards)) {
  std::sort(cards_.begin(), cards_.end());
}

void PlayerPool::add(CardId card) {
  cards_.insert(std::upper_bound(cards_.begin(), cards_.end(), card), card);
}

std::size_t PlayerPool::count(CardId card) const {
  auto [lo, hi] = std::equal_range(cards_.begin(), cards_.end(), card);
  return static_cast<std::size_t>(hi - lo);
}

std::array<int, 5> PlayerPool::color_histogram(const CardDatabase& db) const {
  std::array<int, 5> hist{};
  for (CardId id : cards_) {
    const ColorSet colors = db.card(id).colors;
    for (Color c : kAllColors)
      if (colors.contains(c)) ++hist[index(c)];
  }
  return hist;
}

void DraftConfig::validate() const {
  if (players < 2) throw InputError("draft needs at least 2 players");
  if (rounds < 1) throw InputError("draft needs at least 1 round");
  if (pack_size < 1) throw InputError("pack_size must be at least 1");
  if (!(mythic_probability >= 0.0 && mythic_probability <= 1.0))
    throw InputError("mythic_probability must lie in [0, 1]");
}

PackLayout pack_layout(int pack_size) {
  if (pack_size < 1) throw InputError("pack_size must be at least 1");
  PackLayout layout;
  layout.rares = 1;
  layout.uncommons = std::min(3, (pack_size - 1) / 4);
  layout.commons = pack_size - layout.rares - layout.uncommons;
  return layout;
}

namespace {

void draw_slots(std::span<const CardId> group, int slots, Rng& rng, Pack& out) {
  if (slots <= 0) return;
  if (group.size() >= static_cast<std::size_t>(slots)) {
    std::vector<CardId> chosen;
    chosen.reserve(static_cast<std::size_t>(slots));
    std::sample(group.begin(), group.end(), std::back_inserter(chosen), slots, rng);
    // std::sample keeps the source order; shuffle so slot order is random too.
    std::shuffle(chosen.begin(), chosen.end(), rng);
    out.insert(out.end(), chosen.begin(), chosen.end());
  } else {
    std::uniform_int_distribution<std::size_t> pick(0, group.size() - 1);
    for (int i = 0; i < slots; ++i) out.push_back(group[pick(rng)]);
  }
}

}  // namespace

Pack generate_pack(const CardDatabase& db, Rng& rng, double mythic_probability, int pack_size) {
  if (!(mythic_probability >= 0.0 && mythic_probability <= 1.0))
    throw InputError("mythic_probability must lie in [0, 1]");
  const PackLayout layout = pack_layout(pack_size);
  for (Rarity r : kAllRarities) {
    if (db.with_rarity(r).empty())
      throw InputError("cannot generate packs: no " + std::string(to_string(r)) + " cards");
  }
  Pack pack;
  pack.reserve(static_cast<std::size_t>(pack_size));
  draw_slots(db.with_rarity(Rarity::Common), layout.commons, rng, pack);
  draw_slots(db.with_rarity(Rarity::Uncommon), layout.uncommons, rng, pack);
  for (int i = 0; i < layout.rares; ++i) {
    const bool mythic = uniform01(rng) < mythic_probability;
    draw_slots(db.with_rarity(mythic ? Rarity::Mythic : Rarity::Rare), 1, rng, pack);
  }
  return pack;
}

DraftLog run_draft(std::span<Agent* const> agents, const DraftConfig& config,
                   const CardDatabase& db, Rng& rng) {
  config.validate();
  if (agents.size() != static_cast<std::size_t>(config.players)) {
    throw InputError("draft expects " + std::to_string(config.players) + " agents, got " +
                     std::to_string(agents.size()));
  }
  const auto seats = static_cast<std::size_t>(config.players);
  DraftLog log;
  log.config = config;
  log.events.reserve(static_cast<std::size_t>(config.total_picks()));
  std::vector<PlayerPool> pools(seats);

  for (int round = 0; round < config.rounds; ++round) {
    std::vector<Pack> packs(seats);
    for (auto& pack : packs)
      pack = generate_pack(db, rng, config.mythic_probability, config.pack_size);

    for (int turn = 0; turn < config.pack_size; ++turn) {
      const int pick_number = round * config.pack_size + turn + 1;
      for (std::size_t seat = 0; seat < seats; ++seat) {
        Pack& pack = packs[seat];
        const CardId picked = agents[seat]->pick(pools[seat], pack, db);
        auto it = std::find(pack.begin(), pack.end(), picked);
        if (it == pack.end()) {
          throw std::logic_error("agent '" + agents[seat]->name() + "' at seat " +
                                 std::to_string(seat) + " picked card " +
                                 std::to_string(index(picked)) + " not in pack at pick " +
                                 std::to_string(pick_number));
        }
        log.events.push_back(
            PickEvent{static_cast<int>(seat), round, pick_number, pools[seat], pack, picked});
        pools[seat].add(picked);
        pack.erase(it);
      }
      // Seat s receives the pack previously held by seat s-1.
      std::rotate(packs.rbegin(), packs.rbegin() + 1, packs.rend());
    }
  }
  return log;
}

}  // namespace cprdraft
