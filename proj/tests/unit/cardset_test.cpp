#include <gtest/gtest.h>

#include <sstream>

#include "cprdraft/cardset.hpp"
#include "cprdraft/error.hpp"
#include "test_support.hpp"

namespace cprdraft {
namespace {

using testing::TempDir;

std::string csv_with_rows(std::size_t n) {
  std::ostringstream out;
  out << "id,name,colors,rarity\n";
  const char* rarities[] = {"common", "uncommon", "rare", "mythic"};
  const char* colors[] = {"W", "U", "B", "R", "G", "", "WU"};
  for (std::size_t i = 0; i < n; ++i)
    out << i << ",Card " << i << ',' << colors[i % 7] << ',' << rarities[i % 4] << '\n';
  return out.str();
}

std::string parse_error(const std::string& text) {
  std::istringstream in(text);
  try {
    parse_card_database(in);
  } catch (const InputError& e) {
    return e.what();
  }
  return {};
}

TEST(CardDatabaseTest, LoadsAllRows) {
  std::istringstream in(csv_with_rows(265));
  const CardDatabase db = parse_card_database(in);
  EXPECT_EQ(db.size(), 265u);
  for (const Card& c : db.cards()) EXPECT_LT(index(c.id), db.size());
}

TEST(CardDatabaseTest, RejectsEmptyFile) {
  EXPECT_NE(parse_error("id,name,colors,rarity\n").find("empty database"), std::string::npos);
  EXPECT_NE(parse_error("").find("empty database"), std::string::npos);
}

TEST(CardDatabaseTest, DuplicateIdIsNamed) {
  std::string text = csv_with_rows(10);
  text += "7,Another,R,common\n";
  const std::string msg = parse_error(text);
  EXPECT_NE(msg.find("duplicate id 7"), std::string::npos) << msg;
  EXPECT_NE(msg.find("line 12"), std::string::npos) << msg;
}

TEST(CardDatabaseTest, RejectsBadTokensWithLineNumbers) {
  EXPECT_NE(parse_error(csv_with_rows(8) + "8,X,Q,common\n").find("unknown color token 'Q'"),
            std::string::npos);
  EXPECT_NE(parse_error(csv_with_rows(8) + "8,X,W,legendary\n").find("unknown rarity"),
            std::string::npos);
  EXPECT_NE(parse_error(csv_with_rows(8) + "8,Card 1,W,common\n").find("duplicate name"),
            std::string::npos);
  EXPECT_NE(parse_error(csv_with_rows(8) + "8,X,W\n").find("line 10"), std::string::npos);
  EXPECT_NE(parse_error(csv_with_rows(8) + "10,X,W,common\n").find("missing id 8"),
            std::string::npos);
}

TEST(CardDatabaseTest, RequiresEveryRarity) {
  const std::string msg = parse_error("id,name,colors,rarity\n0,A,W,common\n1,B,U,rare\n");
  EXPECT_NE(msg.find("no uncommon"), std::string::npos) << msg;
}

TEST(CardDatabaseTest, SaveLoadRoundTrip) {
  TempDir dir;
  std::vector<testing::CardSpec> specs = {{"Plain, with comma", "W", Rarity::Common},
                                          {"Quote \"q\"", "UB", Rarity::Uncommon},
                                          {"Colorless", "", Rarity::Rare},
                                          {"Five", "WUBRG", Rarity::Mythic}};
  const CardDatabase db = testing::make_db(specs);
  save_card_database(dir / "cards.csv", db);
  const CardDatabase loaded = load_card_database(dir / "cards.csv");
  EXPECT_EQ(loaded, db);
  EXPECT_EQ(loaded.fingerprint(), db.fingerprint());

  const CardDatabase synthetic = testing::synthetic_db(265, 3);
  save_card_database(dir / "synthetic.csv", synthetic);
  EXPECT_EQ(load_card_database(dir / "synthetic.csv"), synthetic);
}

TEST(CardDatabaseTest, FingerprintTracksContent) {
  const CardDatabase a = testing::synthetic_db(30, 1);
  const CardDatabase b = testing::synthetic_db(30, 2);
  EXPECT_EQ(a.fingerprint(), testing::synthetic_db(30, 1).fingerprint());
  EXPECT_NE(a.fingerprint(), b.fingerprint());
}

TEST(ColorSetTest, ParseAndClassify) {
  EXPECT_TRUE(ColorSet::parse("").colorless());
  EXPECT_EQ(ColorSet::parse("GW").letters(), "WG");
  EXPECT_TRUE(ColorSet::parse("UR").multicolored());
  EXPECT_EQ(ColorSet::parse("B").mono(), Color::Black);
  EXPECT_FALSE(ColorSet::parse("BR").mono().has_value());
  EXPECT_EQ(ColorSet::parse("WUBRG").size(), 5);
  EXPECT_THROW(ColorSet::parse("X"), InputError);
}

TEST(SyntheticDatabaseTest, ThirtyCardSet) {
  const CardDatabase db = testing::synthetic_db(30);
  EXPECT_EQ(db.size(), 30u);
  for (Rarity r : kAllRarities) EXPECT_FALSE(db.with_rarity(r).empty());
  EXPECT_GE(db.with_rarity(Rarity::Common).size(), 11u);
  EXPECT_GE(db.with_rarity(Rarity::Uncommon).size(), 3u);
  std::array<int, 5> mono{};
  for (const Card& c : db.cards())
    if (auto m = c.colors.mono()) ++mono[index(*m)];
  for (int count : mono) EXPECT_GE(count, 4);
  EXPECT_EQ(db, testing::synthetic_db(30));
}

TEST(SyntheticDatabaseTest, LookupByName) {
  const CardDatabase db = testing::synthetic_db(30);
  const Card& c = db.card(card_id(5));
  EXPECT_EQ(db.find(c.name), c.id);
  EXPECT_FALSE(db.find("no such card").has_value());
  EXPECT_THROW(db.card(card_id(30)), InputError);
}

}  // namespace
}  // namespace cprdraft
