#include <gtest/gtest.h>

#include <map>

#include "cprdraft/analysis.hpp"
#include "cprdraft/error.hpp"
#include "test_support.hpp"

namespace cprdraft {
namespace {

std::array<int, 4> rarity_counts(const Pack& pack, const CardDatabase& db) {
  std::array<int, 4> counts{};
  for (CardId c : pack) ++counts[index(db.card(c).rarity)];
  return counts;
}

DraftLog draft_with(Agent& agent, const CardDatabase& db, DraftConfig config, std::uint64_t seed) {
  std::vector<Agent*> seats(static_cast<std::size_t>(config.players), &agent);
  Rng rng(seed);
  return run_draft(seats, config, db, rng);
}

TEST(GeneratePackTest, SlotCounts) {
  const CardDatabase db = testing::synthetic_db(30);
  Rng rng(1);
  for (int i = 0; i < 200; ++i) {
    const Pack pack = generate_pack(db, rng);
    ASSERT_EQ(pack.size(), 15u);
    const auto counts = rarity_counts(pack, db);
    EXPECT_EQ(counts[index(Rarity::Common)], 11);
    EXPECT_EQ(counts[index(Rarity::Uncommon)], 3);
    EXPECT_EQ(counts[index(Rarity::Rare)] + counts[index(Rarity::Mythic)], 1);
    // Groups this large are drawn without replacement.
    std::vector<CardId> sorted = pack;
    std::sort(sorted.begin(), sorted.end());
    EXPECT_EQ(std::adjacent_find(sorted.begin(), sorted.end()), sorted.end());
  }
}

TEST(GeneratePackTest, MythicProbabilityZero) {
  const CardDatabase db = testing::synthetic_db(30);
  Rng rng(2);
  for (int i = 0; i < 1000; ++i)
    EXPECT_EQ(rarity_counts(generate_pack(db, rng, 0.0), db)[index(Rarity::Mythic)], 0);
}

TEST(GeneratePackTest, MythicRateMatchesBernoulli) {
  const CardDatabase db = testing::synthetic_db(30);
  Rng rng(3);
  int mythics = 0;
  const int packs = 10000;
  for (int i = 0; i < packs; ++i)
    mythics += rarity_counts(generate_pack(db, rng, 0.125), db)[index(Rarity::Mythic)];
  EXPECT_NEAR(static_cast<double>(mythics) / packs, 0.125, 0.02);
}

TEST(GeneratePackTest, SmallGroupsDrawWithReplacement) {
  const CardDatabase db = testing::make_db({{"C", "W", Rarity::Common},
                                            {"U", "U", Rarity::Uncommon},
                                            {"R", "B", Rarity::Rare},
                                            {"M", "R", Rarity::Mythic}});
  Rng rng(4);
  const Pack pack = generate_pack(db, rng);
  EXPECT_EQ(pack.size(), 15u);
  EXPECT_EQ(std::count(pack.begin(), pack.end(), card_id(0)), 11);
}

TEST(GeneratePackTest, RejectsBadProbability) {
  const CardDatabase db = testing::synthetic_db(30);
  Rng rng(5);
  EXPECT_THROW(generate_pack(db, rng, 1.5), InputError);
}

TEST(RunDraftTest, DefaultDraftShape) {
  const CardDatabase db = testing::synthetic_db(30);
  RandomAgent agent(1);
  const DraftLog log = draft_with(agent, db, DraftConfig{}, 9);
  ASSERT_EQ(log.events.size(), 360u);
  std::map<int, std::size_t> pool_sizes;
  for (const PickEvent& e : log.events) {
    EXPECT_EQ(e.pack.size(), static_cast<std::size_t>(15 - (e.pick_number - 1) % 15));
    EXPECT_EQ(e.pool_before.size(), static_cast<std::size_t>(e.pick_number - 1));
    EXPECT_NE(std::find(e.pack.begin(), e.pack.end(), e.picked), e.pack.end());
    pool_sizes[e.player] = e.pool_before.size() + 1;
  }
  for (const auto& [seat, size] : pool_sizes) EXPECT_EQ(size, 45u);
}

TEST(RunDraftTest, MinimalDraft) {
  const CardDatabase db = testing::synthetic_db(30);
  RandomAgent agent(2);
  DraftConfig config;
  config.players = 2;
  config.rounds = 1;
  config.pack_size = 2;
  const DraftLog log = draft_with(agent, db, config, 1);
  ASSERT_EQ(log.events.size(), 4u);
  EXPECT_EQ(log.events[0].pack.size(), 2u);
  EXPECT_EQ(log.events[1].pack.size(), 2u);
  EXPECT_EQ(log.events[2].pack.size(), 1u);
  EXPECT_EQ(log.events[3].pack.size(), 1u);
}

TEST(RunDraftTest, LastPickIsForced) {
  const CardDatabase db = testing::synthetic_db(30);
  RaredraftAgent agent;
  const DraftLog log = draft_with(agent, db, DraftConfig{}, 3);
  for (const PickEvent& e : log.events) {
    if (e.pick_number % 15 != 0) continue;
    ASSERT_EQ(e.pack.size(), 1u);
    EXPECT_EQ(e.picked, e.pack.front());
  }
}

TEST(RunDraftTest, PacksPassInOneDirection) {
  const CardDatabase db = testing::synthetic_db(30);
  RandomAgent agent(3);
  const DraftLog log = draft_with(agent, db, DraftConfig{}, 4);
  // events are in simulation order: pick p of seat s sits at index (p-1)*8+s.
  for (int round = 0; round < 3; ++round) {
    for (int turn = 1; turn < 15; ++turn) {
      for (int seat = 0; seat < 8; ++seat) {
        const int pick = round * 15 + turn;
        const PickEvent& prev = log.events[static_cast<std::size_t>((pick - 1) * 8 + (seat + 7) % 8)];
        const PickEvent& next = log.events[static_cast<std::size_t>(pick * 8 + seat)];
        Pack expected = prev.pack;
        expected.erase(std::find(expected.begin(), expected.end(), prev.picked));
        EXPECT_EQ(next.pack, expected);
      }
    }
  }
}

TEST(RunDraftTest, ConservationOfCards) {
  const CardDatabase db = testing::synthetic_db(30);
  RandomAgent agent(4);
  const DraftLog log = draft_with(agent, db, DraftConfig{}, 5);
  std::map<CardId, int> opened, picked;
  for (const PickEvent& e : log.events) {
    if ((e.pick_number - 1) % 15 == 0)
      for (CardId c : e.pack) ++opened[c];
    ++picked[e.picked];
  }
  EXPECT_EQ(opened, picked);
}

TEST(RunDraftTest, ReplayIsDeterministic) {
  const CardDatabase db = testing::synthetic_db(30);
  const auto a = testing::random_drafts(db, 3, 11);
  const auto b = testing::random_drafts(db, 3, 11);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    EXPECT_EQ(encode_draft_record(a[i]), encode_draft_record(b[i]));
  EXPECT_NE(encode_draft_record(a[0]), encode_draft_record(testing::random_drafts(db, 1, 12)[0]));
}

class OffPackAgent final : public Agent {
 public:
  std::string name() const override { return "offpack"; }
  std::vector<CardId> rank(const PlayerPool&, const Pack&, const CardDatabase&) override {
    return {card_id(999)};
  }
};

TEST(RunDraftTest, AbortsOnCardOutsidePack) {
  const CardDatabase db = testing::synthetic_db(30);
  RandomAgent good(1);
  OffPackAgent bad;
  std::vector<Agent*> seats(8, &good);
  seats[3] = &bad;
  Rng rng(1);
  try {
    run_draft(seats, DraftConfig{}, db, rng);
    FAIL() << "expected an error";
  } catch (const std::logic_error& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("seat 3"), std::string::npos) << msg;
    EXPECT_NE(msg.find("pick 1"), std::string::npos) << msg;
  }
}

TEST(RunDraftTest, RejectsWrongAgentCount) {
  const CardDatabase db = testing::synthetic_db(30);
  RandomAgent agent(1);
  std::vector<Agent*> seats(3, &agent);
  Rng rng(1);
  EXPECT_THROW(run_draft(seats, DraftConfig{}, db, rng), InputError);
}

TEST(DraftConfigTest, Validation) {
  DraftConfig c;
  EXPECT_NO_THROW(c.validate());
  c.players = 1;
  EXPECT_THROW(c.validate(), InputError);
  c = DraftConfig{};
  c.pack_size = 0;
  EXPECT_THROW(c.validate(), InputError);
  c = DraftConfig{};
  c.mythic_probability = -0.1;
  EXPECT_THROW(c.validate(), InputError);
}

TEST(RandomAgentTest, SingleCardPack) {
  Rng rng(1);
  EXPECT_EQ(random_agent_pick(PlayerPool{}, {card_id(4)}, rng), card_id(4));
}

TEST(RandomAgentTest, UniformOverPack) {
  Rng rng(2);
  const Pack pack = {card_id(0), card_id(1), card_id(2), card_id(3)};
  std::array<int, 4> hits{};
  const int trials = 10000;
  for (int i = 0; i < trials; ++i) ++hits[index(random_agent_pick(PlayerPool{}, pack, rng))];
  for (int h : hits) EXPECT_NEAR(static_cast<double>(h) / trials, 0.25, 0.02);
}

TEST(RandomAgentTest, SelfLabeledAccuracyMatchesHarmonicChance) {
  const CardDatabase db = testing::synthetic_db(30);
  const auto records = testing::random_drafts(db, 200, 21);
  std::vector<PickEvent> events;
  for (const auto& r : records)
    for (auto& e : extract_pick_events(r.log)) events.push_back(std::move(e));
  RandomAgent scorer(99);
  const double mtta = analysis::evaluate_agent(scorer, events, db).mtta;
  EXPECT_NEAR(mtta, testing::harmonic_mean_chance(15), 0.005);
  EXPECT_NEAR(testing::harmonic_mean_chance(15), 0.2212, 5e-5);
}

TEST(RaredraftAgentTest, UniqueTopRarity) {
  const CardDatabase db = testing::synthetic_db(30);
  const CardId mythic = db.with_rarity(Rarity::Mythic).front();
  Pack pack(db.with_rarity(Rarity::Common).begin(), db.with_rarity(Rarity::Common).end());
  pack.push_back(mythic);
  PlayerPool pool({db.with_rarity(Rarity::Rare).front()});
  EXPECT_EQ(raredraft_agent_pick(pool, pack, db), mythic);
  EXPECT_EQ(raredraft_agent_pick(PlayerPool{}, pack, db), mythic);
}

TEST(RaredraftAgentTest, ColorOverlapBreaksTies) {
  const CardDatabase db = testing::make_db({{"Blue", "U", Rarity::Common},
                                            {"Red", "R", Rarity::Common},
                                            {"Red Pool", "R", Rarity::Uncommon},
                                            {"Rare", "G", Rarity::Rare},
                                            {"Mythic", "W", Rarity::Mythic}});
  const PlayerPool pool({card_id(2), card_id(2)});
  EXPECT_EQ(raredraft_agent_pick(pool, {card_id(0), card_id(1)}, db), card_id(1));
}

TEST(RaredraftAgentTest, LowestIdBreaksRemainingTies) {
  const CardDatabase db = testing::make_db({{"A", "W", Rarity::Common},
                                            {"B", "U", Rarity::Uncommon},
                                            {"C", "B", Rarity::Rare},
                                            {"D", "", Rarity::Common},
                                            {"E", "R", Rarity::Mythic},
                                            {"F", "G", Rarity::Common},
                                            {"G", "W", Rarity::Common},
                                            {"H", "U", Rarity::Common},
                                            {"I", "B", Rarity::Common},
                                            {"J", "", Rarity::Common}});
  EXPECT_EQ(raredraft_agent_pick(PlayerPool{}, {card_id(9), card_id(3)}, db), card_id(3));
}

TEST(OracleAgentTest, NoiseFreeArgmax) {
  const CardDatabase db = testing::synthetic_db(30);
  OracleUtility latent = testing::make_oracle(db, 0.0);
  const PlayerPool pool({card_id(0), card_id(1), card_id(7)});
  const Pack pack = {card_id(3), card_id(12), card_id(20), card_id(25)};
  const auto hist = pool.color_histogram(db);
  CardId best = pack.front();
  for (CardId c : pack)
    if (latent.score(db.card(c), hist, pool.size()) > latent.score(db.card(best), hist, pool.size()))
      best = c;
  Rng rng(1);
  EXPECT_EQ(oracle_agent_pick(pool, pack, db, latent, rng), best);
}

TEST(OracleAgentTest, EmptyPoolPicksStrongest) {
  const CardDatabase db = testing::synthetic_db(30);
  OracleUtility latent = testing::make_oracle(db, 0.0);
  Pack pack;
  for (std::size_t i = 0; i < db.size(); i += 2) pack.push_back(card_id(i));
  CardId best = pack.front();
  for (CardId c : pack)
    if (latent.strength[index(c)] > latent.strength[index(best)]) best = c;
  Rng rng(1);
  EXPECT_EQ(oracle_agent_pick(PlayerPool{}, pack, db, latent, rng), best);
}

TEST(OracleAgentTest, SynergyVanishesOnEmptyPool) {
  const CardDatabase db = testing::synthetic_db(30);
  const OracleUtility latent = testing::make_oracle(db, 0.0);
  for (const Card& c : db.cards()) EXPECT_EQ(latent.synergy(c, {}, 0), 0.0);
}

TEST(OracleAgentTest, SelfReplayIsPerfectWithoutNoise) {
  const CardDatabase db = testing::synthetic_db(30);
  const OracleUtility latent = testing::make_oracle(db, 0.0);
  const auto records = oracle_drafts(db, latent, 5, DraftConfig{}, 3);
  std::vector<PickEvent> events;
  for (const auto& r : records)
    for (auto& e : extract_pick_events(r.log)) events.push_back(std::move(e));
  OracleAgent replay(latent, 123);
  const auto report = analysis::evaluate_agent(replay, events, db);
  EXPECT_EQ(report.mtta, 1.0);
  EXPECT_EQ(report.mtpd, 0.0);
}

TEST(AgentContractTest, PickIsFirstOfRankingAndInPack) {
  const CardDatabase db = testing::synthetic_db(30);
  const auto records = testing::random_drafts(db, 2, 8);
  RandomAgent random(5);
  RaredraftAgent rare;
  OracleAgent oracle(testing::make_oracle(db, 0.3), 6);
  std::vector<Agent*> agents = {&random, &rare, &oracle};
  for (const auto& r : records) {
    for (const PickEvent& e : r.log.events) {
      for (Agent* agent : agents) {
        const auto ranking = agent->rank(e.pool_before, e.pack, db);
        std::vector<CardId> a = ranking, b = e.pack;
        std::sort(a.begin(), a.end());
        std::sort(b.begin(), b.end());
        ASSERT_EQ(a, b) << agent->name();
        if (agent != &random && agent != &oracle)
          EXPECT_EQ(agent->pick(e.pool_before, e.pack, db), ranking.front());
        EXPECT_NE(std::find(e.pack.begin(), e.pack.end(), agent->pick(e.pool_before, e.pack, db)),
                  e.pack.end());
      }
    }
  }
}

TEST(PlayerPoolTest, CountsAndHistogram) {
  const CardDatabase db = testing::make_db({{"W1", "W", Rarity::Common},
                                            {"WU", "WU", Rarity::Uncommon},
                                            {"C", "", Rarity::Rare},
                                            {"M", "G", Rarity::Mythic}});
  PlayerPool pool;
  pool.add(card_id(1));
  pool.add(card_id(0));
  pool.add(card_id(1));
  pool.add(card_id(2));
  EXPECT_EQ(pool.size(), 4u);
  EXPECT_EQ(pool.count(card_id(1)), 2u);
  EXPECT_TRUE(std::is_sorted(pool.cards().begin(), pool.cards().end()));
  const auto h = pool.color_histogram(db);
  EXPECT_EQ(h[index(Color::White)], 3);
  EXPECT_EQ(h[index(Color::Blue)], 2);
  EXPECT_EQ(h[index(Color::Green)], 0);
}

}  // namespace
}  // namespace cprdraft
