#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "cprdraft/cardset.hpp"
#include "cprdraft/random.hpp"

namespace cprdraft {

/// Cards offered for one pick, in the order they were dealt.
using Pack = std::vector<CardId>;

/// Multiset of cards a player has already picked (the context set).
class PlayerPool {
 public:
  PlayerPool() = default;
  explicit PlayerPool(std::vector<CardId> cards);

  void add(CardId card);
  std::size_t size() const { return cards_.size(); }
  bool empty() const { return cards_.empty(); }
  std::size_t count(CardId card) const;

  /// Sorted, with repeats.
  std::span<const CardId> cards() const { return cards_; }

  /// Per-color count over the pool; multicolored cards add to each of
  /// their colors.
  std::array<int, 5> color_histogram(const CardDatabase& db) const;

  bool operator==(const PlayerPool&) const = default;

 private:
  std::vector<CardId> cards_;
};

struct DraftConfig {
  int players = 8;
  int rounds = 3;
  int pack_size = 15;
  double mythic_probability = 0.125;
  std::uint64_t rng_seed = 0;

  /// Throws InputError on players < 2, rounds < 1, pack_size < 1 or a
  /// mythic probability outside [0, 1].
  void validate() const;
  int picks_per_player() const { return rounds * pack_size; }
  int total_picks() const { return players * picks_per_player(); }

  bool operator==(const DraftConfig&) const = default;
};

/// Rarity slots of a generated pack. A 15-card pack is 11 common,
/// 3 uncommon and 1 rare-or-mythic; other sizes keep one rare slot and
/// scale the uncommons.
struct PackLayout {
  int commons = 11;
  int uncommons = 3;
  int rares = 1;
};

PackLayout pack_layout(int pack_size);

/// Slots of one rarity group are filled without replacement when the group
/// is large enough, otherwise with replacement.
Pack generate_pack(const CardDatabase& db, Rng& rng, double mythic_probability = 0.125,
                   int pack_size = 15);

struct PickEvent {
  int player = 0;
  int round = 0;
  int pick_number = 1;  // 1-based overall ordinal for this player
  PlayerPool pool_before;
  Pack pack;
  CardId picked{};

  bool operator==(const PickEvent&) const = default;
};

struct DraftLog {
  DraftConfig config;
  std::vector<PickEvent> events;  // in simulation order

  bool operator==(const DraftLog&) const = default;
};

class Agent;

/// Simulates a full draft. Packs pass to the next seat in the same
/// direction every round. Agents are consulted in seat order.
DraftLog run_draft(std::span<Agent* const> agents, const DraftConfig& config,
                   const CardDatabase& db, Rng& rng);

}  // namespace cprdraft
