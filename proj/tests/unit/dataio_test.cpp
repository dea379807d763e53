#include <gtest/gtest.h>

#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "cprdraft/error.hpp"
#include "test_support.hpp"

namespace cprdraft {
namespace {

using testing::TempDir;

PickEvent make_event(int k, int picked_index = 0) {
  PickEvent e;
  for (int i = 0; i < k; ++i) e.pack.push_back(card_id(static_cast<std::size_t>(i)));
  e.picked = e.pack[static_cast<std::size_t>(picked_index)];
  e.pool_before = PlayerPool({card_id(3), card_id(3), card_id(7)});
  return e;
}

std::size_t closed_form_triplets_per_draft(int players, int rounds, int pack_size) {
  std::size_t per_pack = 0;
  for (int s = 1; s <= pack_size; ++s) per_pack += static_cast<std::size_t>(s - 1);
  return static_cast<std::size_t>(players * rounds) * per_pack;
}

std::shared_ptr<const std::vector<DraftRecord>> shared(std::vector<DraftRecord> records) {
  return std::make_shared<const std::vector<DraftRecord>>(std::move(records));
}

std::vector<TripletExample> drain(TripletStream& stream) {
  std::vector<TripletExample> out;
  while (auto t = stream.next()) out.push_back(std::move(*t));
  return out;
}

std::vector<std::uint64_t> ids_of(const std::vector<DraftRecord>& records) {
  std::vector<std::uint64_t> ids;
  for (const auto& r : records) ids.push_back(r.draft_id);
  return ids;
}

TEST(GenerateTripletsTest, FullPack) {
  const PickEvent e = make_event(15, 4);
  const auto triplets = generate_triplets(e, 77);
  ASSERT_EQ(triplets.size(), 14u);
  std::set<CardId> negatives;
  for (const auto& t : triplets) {
    EXPECT_EQ(t.anchor, e.pool_before);
    EXPECT_EQ(t.positive, card_id(4));
    EXPECT_NE(t.negative, t.positive);
    EXPECT_EQ(t.draft_id, 77u);
    negatives.insert(t.negative);
  }
  EXPECT_EQ(negatives.size(), 14u);
  EXPECT_EQ(count_triplets(e), 14u);
}

TEST(GenerateTripletsTest, ForcedPickCarriesNoPreference) {
  EXPECT_TRUE(generate_triplets(make_event(1)).empty());
}

TEST(GenerateTripletsTest, DuplicateOfPickIsSkipped) {
  PickEvent e;
  e.pack = {card_id(2), card_id(5), card_id(2)};
  e.picked = card_id(2);
  const auto triplets = generate_triplets(e);
  ASSERT_EQ(triplets.size(), 1u);
  EXPECT_EQ(triplets[0].negative, card_id(5));
}

TEST(GenerateTripletsTest, DefaultDraftYieldsClosedFormCount) {
  const CardDatabase db = testing::synthetic_db(30);
  const auto records = testing::random_drafts(db, 100, 5);
  const std::size_t per_draft = closed_form_triplets_per_draft(8, 3, 15);
  EXPECT_EQ(per_draft, 2520u);
  std::size_t total = 0;
  for (const auto& r : records) {
    std::size_t draft_total = 0;
    for (const auto& e : extract_pick_events(r.log)) draft_total += generate_triplets(e).size();
    EXPECT_EQ(draft_total, per_draft);
    total += draft_total;
  }
  EXPECT_EQ(total, per_draft * records.size());
}

TEST(ExtractPickEventsTest, OrderedByPlayerThenPick) {
  const CardDatabase db = testing::synthetic_db(30);
  const auto records = testing::random_drafts(db, 1, 3);
  const auto events = extract_pick_events(records[0].log);
  ASSERT_EQ(events.size(), 360u);
  for (std::size_t i = 0; i < events.size(); ++i) {
    EXPECT_EQ(events[i].player, static_cast<int>(i / 45));
    EXPECT_EQ(events[i].pick_number, static_cast<int>(i % 45) + 1);
  }
}

TEST(ExtractPickEventsTest, MinimalDraft) {
  const CardDatabase db = testing::synthetic_db(30);
  DraftConfig config;
  config.players = 2;
  config.rounds = 1;
  config.pack_size = 2;
  const auto records = simulate_drafts(
      db, [](std::uint64_t, int) { return std::make_unique<RaredraftAgent>(); }, 1, config, 1);
  EXPECT_EQ(extract_pick_events(records[0].log).size(), 4u);
}

TEST(ExtractPickEventsTest, PickOutsidePackIsNamed) {
  const CardDatabase db = testing::synthetic_db(30);
  auto records = testing::random_drafts(db, 1, 3);
  DraftLog log = records[0].log;
  PickEvent& e = log.events[17];
  e.picked = card_id(29);
  e.pack.erase(std::remove(e.pack.begin(), e.pack.end(), card_id(29)), e.pack.end());
  try {
    extract_pick_events(log);
    FAIL() << "expected an error";
  } catch (const InputError& err) {
    const std::string msg = err.what();
    EXPECT_NE(msg.find("seat " + std::to_string(e.player)), std::string::npos) << msg;
    EXPECT_NE(msg.find("pick " + std::to_string(e.pick_number)), std::string::npos) << msg;
    EXPECT_NE(msg.find("not in pack"), std::string::npos) << msg;
  }
}

TEST(ExtractPickEventsTest, PoolSnapshotMustMatchPicks) {
  const CardDatabase db = testing::synthetic_db(30);
  auto records = testing::random_drafts(db, 1, 4);
  DraftLog log = records[0].log;
  log.events[40].pool_before.add(card_id(0));
  EXPECT_THROW(extract_pick_events(log), InputError);
}

TEST(DraftLogFormatTest, RoundTrip) {
  const CardDatabase db = testing::synthetic_db(30);
  const auto records = testing::random_drafts(db, 4, 6);
  std::stringstream buffer;
  DraftLogWriter writer(buffer);
  for (const auto& r : records) writer.write(r);
  EXPECT_EQ(writer.written(), 4u);
  const auto loaded = read_draft_log(buffer);
  ASSERT_EQ(loaded.size(), records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    EXPECT_EQ(loaded[i].draft_id, records[i].draft_id);
    EXPECT_EQ(loaded[i].log.config, records[i].log.config);
    EXPECT_EQ(extract_pick_events(loaded[i].log), extract_pick_events(records[i].log));
  }
}

TEST(DraftLogFormatTest, FileRoundTripAndEmptyLog) {
  TempDir dir;
  const CardDatabase db = testing::synthetic_db(30);
  const auto records = testing::random_drafts(db, 2, 7);
  save_draft_log(dir / "log.jsonl", records);
  EXPECT_EQ(load_draft_log(dir / "log.jsonl").size(), 2u);
  save_draft_log(dir / "empty.jsonl", {});
  EXPECT_TRUE(load_draft_log(dir / "empty.jsonl").empty());
  EXPECT_THROW(load_draft_log(dir / "missing.jsonl"), InputError);
}

TEST(DraftLogFormatTest, MalformedInput) {
  std::istringstream no_header("{\"draft_id\":1}\n");
  EXPECT_THROW(read_draft_log(no_header), InputError);
  std::istringstream bad_line(draft_log_header() + "\n{not json\n");
  EXPECT_THROW(read_draft_log(bad_line), InputError);
  EXPECT_THROW(decode_draft_record("{\"draft_id\":1,\"config\":{}}"), InputError);
}

TEST(DraftLogFormatTest, DecodeRejectsPickOutsidePack) {
  const CardDatabase db = testing::synthetic_db(30);
  const auto records = testing::random_drafts(db, 1, 8);
  std::string line = encode_draft_record(records[0]);
  const std::string needle = "\"picked\":";
  const auto pos = line.find(needle);
  ASSERT_NE(pos, std::string::npos);
  const auto end = line.find('}', pos);
  line.replace(pos + needle.size(), end - pos - needle.size(), "9999");
  EXPECT_THROW(decode_draft_record(line), InputError);
}

TEST(CheckCardIdsTest, RejectsUnknownCards) {
  const CardDatabase db = testing::synthetic_db(30);
  const CardDatabase small = testing::synthetic_db(20);
  const auto records = testing::random_drafts(db, 1, 9);
  EXPECT_NO_THROW(check_card_ids(records[0].log, db));
  EXPECT_THROW(check_card_ids(records[0].log, small), InputError);
}

TEST(SplitDraftsTest, ExactFraction) {
  std::vector<std::uint64_t> ids(10);
  std::iota(ids.begin(), ids.end(), 100);
  const DatasetSplit split = split_drafts(ids, 0.8, 1);
  EXPECT_EQ(split.train.size(), 8u);
  EXPECT_EQ(split.test.size(), 2u);
}

TEST(SplitDraftsTest, DeterministicDisjointCovering) {
  std::vector<std::uint64_t> ids(1000);
  std::iota(ids.begin(), ids.end(), 0);
  const DatasetSplit a = split_drafts(ids, 0.8, 42);
  const DatasetSplit b = split_drafts(ids, 0.8, 42);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.test, b.test);
  std::vector<std::uint64_t> all = a.train;
  all.insert(all.end(), a.test.begin(), a.test.end());
  std::sort(all.begin(), all.end());
  EXPECT_EQ(all, ids);
  for (std::uint64_t id : a.test) EXPECT_FALSE(a.in_train(id));
  EXPECT_NE(split_drafts(ids, 0.8, 43).train, a.train);
}

TEST(SplitDraftsTest, FullScaleDraftCount) {
  std::vector<std::uint64_t> ids(107949);
  std::iota(ids.begin(), ids.end(), 0);
  const DatasetSplit split = split_drafts(ids, 0.8, 0);
  const double expected = 0.8 * 107949.0;
  EXPECT_LE(std::abs(static_cast<double>(split.train.size()) - expected), 1.0);
  EXPECT_EQ(split.train.size() * 2520, 217624680u);
}

TEST(SplitDraftsTest, RejectsBadInput) {
  EXPECT_THROW(split_drafts({}, 0.8, 0), InputError);
  const std::vector<std::uint64_t> ids = {1, 2, 3};
  EXPECT_THROW(split_drafts(ids, 1.0, 0), InputError);
  EXPECT_THROW(split_drafts(ids, 0.0, 0), InputError);
}

TEST(ShardSetTest, StableAndInRange) {
  const ShardSet shards(220, 5);
  for (std::uint64_t id = 0; id < 5000; ++id) {
    EXPECT_LT(shards.shard_of(id), 220u);
    EXPECT_EQ(shards.shard_of(id), ShardSet(220, 5).shard_of(id));
  }
  EXPECT_THROW(ShardSet(0), InputError);
}

class TripletStreamTest : public ::testing::Test {
 protected:
  void SetUp() override {
    db_ = std::make_unique<CardDatabase>(testing::synthetic_db(30));
    records_ = testing::random_drafts(*db_, 30, 13);
    split_ = split_drafts(ids_of(records_), 0.8, 2);
  }

  std::unique_ptr<CardDatabase> db_;
  std::vector<DraftRecord> records_;
  DatasetSplit split_;
};

TEST_F(TripletStreamTest, AllShardsConserveTriplets) {
  MemoryShardSource source(shared(records_), ShardSet(7));
  TripletStream stream(source, split_, Partition::Train);
  const auto triplets = drain(stream);
  std::size_t expected = 0;
  for (const auto& e : partition_events(records_, split_, Partition::Train))
    expected += count_triplets(e);
  EXPECT_EQ(triplets.size(), expected);
  EXPECT_EQ(stream.shards_consumed(), 7u);
}

TEST_F(TripletStreamTest, ZeroBudgetIsEmpty) {
  MemoryShardSource source(shared(records_), ShardSet(7));
  StreamOptions options;
  options.shard_budget = 0;
  TripletStream stream(source, split_, Partition::Train, options);
  EXPECT_FALSE(stream.next().has_value());
}

TEST_F(TripletStreamTest, BudgetLimitsShards) {
  const ShardSet shards(220, 0);
  std::vector<DraftRecord> many = testing::random_drafts(*db_, 300, 17);
  const DatasetSplit split = split_drafts(ids_of(many), 0.8, 1);
  MemoryShardSource source(shared(many), shards);
  StreamOptions options;
  options.shard_budget = 50;
  TripletStream stream(source, split, Partition::Train, options);
  const auto triplets = drain(stream);
  ASSERT_FALSE(triplets.empty());
  std::size_t expected = 0;
  for (const auto& r : many) {
    if (!split.in_train(r.draft_id) || shards.shard_of(r.draft_id) >= 50) continue;
    for (const auto& e : extract_pick_events(r.log)) expected += count_triplets(e);
  }
  EXPECT_EQ(triplets.size(), expected);
  for (const auto& t : triplets) EXPECT_LT(shards.shard_of(t.draft_id), 50u);
}

TEST_F(TripletStreamTest, NoLeakageAcrossPartitions) {
  MemoryShardSource source(shared(records_), ShardSet(5));
  TripletStream train(source, split_, Partition::Train);
  TripletStream test(source, split_, Partition::Test);
  for (const auto& t : drain(train)) EXPECT_TRUE(split_.in_train(t.draft_id));
  for (const auto& t : drain(test)) EXPECT_TRUE(split_.in_test(t.draft_id));
}

TEST_F(TripletStreamTest, OrderIsReproducible) {
  MemoryShardSource source(shared(records_), ShardSet(5));
  StreamOptions options;
  options.seed = 9;
  TripletStream a(source, split_, Partition::Train, options);
  TripletStream b(source, split_, Partition::Train, options);
  EXPECT_EQ(drain(a), drain(b));
  options.seed = 10;
  TripletStream c(source, split_, Partition::Train, options);
  TripletStream d(source, split_, Partition::Train);
  EXPECT_NE(drain(c), drain(d));
}

TEST_F(TripletStreamTest, DirectoryShardsMatchMemory) {
  TempDir dir;
  const ShardSet shards(4, 3);
  write_shards(records_, shards, dir.path());
  DirectoryShardSource disk(dir.path(), 4);
  MemoryShardSource memory(shared(records_), shards);
  TripletStream a(disk, split_, Partition::Train);
  TripletStream b(memory, split_, Partition::Train);
  EXPECT_EQ(drain(a), drain(b));
}

TEST_F(TripletStreamTest, MissingShardFile) {
  TempDir dir;
  write_shards(records_, ShardSet(4), dir.path());
  std::filesystem::remove(dir / shard_file_name(2));
  DirectoryShardSource disk(dir.path(), 4);
  TripletStream stream(disk, split_, Partition::Train);
  EXPECT_THROW(drain(stream), InputError);
}

TEST(TripletCacheTest, RoundTrip) {
  TempDir dir;
  const CardDatabase db = testing::synthetic_db(30);
  const auto records = testing::random_drafts(db, 2, 3);
  std::vector<TripletExample> triplets;
  for (const auto& r : records)
    for (const auto& e : extract_pick_events(r.log))
      for (auto& t : generate_triplets(e, r.draft_id)) triplets.push_back(std::move(t));
  write_triplet_cache(dir / "t.bin", triplets);
  EXPECT_EQ(read_triplet_cache(dir / "t.bin"), triplets);

  std::ofstream(dir / "bad.bin") << "NOPE";
  EXPECT_THROW(read_triplet_cache(dir / "bad.bin"), InputError);
}

}  // namespace
}  // namespace cprdraft
