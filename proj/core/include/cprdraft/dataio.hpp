#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cprdraft/draftsim.hpp"

namespace cprdraft {

/// One contextual preference: `positive` was picked over `negative` while
/// both were in the pack and the player held `anchor`.
struct TripletExample {
  PlayerPool anchor;
  CardId positive{};
  CardId negative{};
  std::uint64_t draft_id = 0;  // provenance, used for leakage checks

  bool operator==(const TripletExample&) const = default;
};

/// One triplet per unpicked pack card. A duplicate copy of the picked card
/// carries no preference and is skipped, so a pack of k distinct cards
/// yields exactly k-1 triplets.
std::vector<TripletExample> generate_triplets(const PickEvent& event, std::uint64_t draft_id = 0);
std::size_t count_triplets(const PickEvent& event);

/// Validates the log (picks in pack, pool snapshots consistent with earlier
/// picks) and returns its events ordered by player, then pick number.
std::vector<PickEvent> extract_pick_events(const DraftLog& log);

/// Throws InputError if any card in the log is outside the database.
void check_card_ids(const DraftLog& log, const CardDatabase& db);

struct DraftRecord {
  std::uint64_t draft_id = 0;
  DraftLog log;

  bool operator==(const DraftRecord&) const = default;
};

inline constexpr int kDraftLogVersion = 1;

/// First line of every draft-log file.
std::string draft_log_header();

/// One draft as a single JSON line (no trailing newline).
std::string encode_draft_record(const DraftRecord& record);

/// Parses one line; pools are rebuilt from the pick sequence.
DraftRecord decode_draft_record(std::string_view line);

class DraftLogWriter {
 public:
  /// Writes the header immediately.
  explicit DraftLogWriter(std::ostream& out);
  void write(const DraftRecord& record);
  std::size_t written() const { return written_; }

 private:
  std::ostream& out_;
  std::size_t written_ = 0;
};

std::vector<DraftRecord> read_draft_log(std::istream& in);
std::vector<DraftRecord> load_draft_log(const std::filesystem::path& path);
void save_draft_log(const std::filesystem::path& path, std::span<const DraftRecord> records);

/// Whole-draft train/test partition.
struct DatasetSplit {
  std::vector<std::uint64_t> train;  // sorted
  std::vector<std::uint64_t> test;   // sorted
  double ratio = 0.8;

  bool in_train(std::uint64_t draft_id) const;
  bool in_test(std::uint64_t draft_id) const;
};

/// Orders drafts by a seeded hash of their id and sends the first
/// round(ratio * n) to train.
DatasetSplit split_drafts(std::span<const std::uint64_t> draft_ids, double ratio,
                          std::uint64_t seed);

enum class Partition { Train, Test };

/// Hash-based draft-to-shard assignment, stable under re-ingestion.
class ShardSet {
 public:
  explicit ShardSet(std::size_t shard_count, std::uint64_t salt = 0);
  std::size_t shard_count() const { return shard_count_; }
  std::uint64_t salt() const { return salt_; }
  std::size_t shard_of(std::uint64_t draft_id) const;

 private:
  std::size_t shard_count_;
  std::uint64_t salt_;
};

class ShardSource {
 public:
  virtual ~ShardSource() = default;
  virtual std::size_t shard_count() const = 0;
  /// Drafts of one shard, in ingestion order.
  virtual std::vector<DraftRecord> load_shard(std::size_t shard) const = 0;
};

class MemoryShardSource final : public ShardSource {
 public:
  MemoryShardSource(std::shared_ptr<const std::vector<DraftRecord>> records, ShardSet shards);
  std::size_t shard_count() const override { return shards_.shard_count(); }
  std::vector<DraftRecord> load_shard(std::size_t shard) const override;

 private:
  std::shared_ptr<const std::vector<DraftRecord>> records_;
  ShardSet shards_;
  std::vector<std::vector<std::size_t>> members_;
};

std::string shard_file_name(std::size_t shard);

/// Writes `shard-NNNNN.jsonl` files (each a complete draft log) into `dir`.
void write_shards(std::span<const DraftRecord> records, const ShardSet& shards,
                  const std::filesystem::path& dir);

class DirectoryShardSource final : public ShardSource {
 public:
  DirectoryShardSource(std::filesystem::path dir, std::size_t shard_count);
  std::size_t shard_count() const override { return shard_count_; }
  /// Throws InputError if the shard file is missing.
  std::vector<DraftRecord> load_shard(std::size_t shard) const override;

 private:
  std::filesystem::path dir_;
  std::size_t shard_count_;
};

struct StreamOptions {
  std::size_t shard_budget = std::numeric_limits<std::size_t>::max();
  bool shuffle_within_shard = true;
  std::uint64_t seed = 0;
};

/// Single-consumer triplet sequence over the first `shard_budget` shards,
/// restricted to one partition. Order is a function of (seed, shard set,
/// budget).
class TripletStream {
 public:
  TripletStream(const ShardSource& source, DatasetSplit split, Partition partition,
                StreamOptions options = {});

  std::optional<TripletExample> next();
  std::size_t shards_consumed() const { return next_shard_; }
  Partition partition() const { return partition_; }

 private:
  bool load_next_shard();

  const ShardSource& source_;
  DatasetSplit split_;
  Partition partition_;
  StreamOptions options_;
  std::size_t last_shard_;
  std::size_t next_shard_ = 0;
  std::vector<TripletExample> buffer_;
  std::size_t cursor_ = 0;
};

/// All pick events from the drafts of one partition.
std::vector<PickEvent> partition_events(std::span<const DraftRecord> records,
                                        const DatasetSplit& split, Partition partition);

inline constexpr std::uint32_t kTripletCacheVersion = 1;

/// Binary cache: "CPRT" magic, u32 version, u64 count, then per record the
/// anchor as run-length (u32 id, u16 count) pairs prefixed by a u16 run
/// count, u32 positive, u32 negative, u64 draft id. Little-endian.
void write_triplet_cache(const std::filesystem::path& path,
                         std::span<const TripletExample> triplets);
std::vector<TripletExample> read_triplet_cache(const std::filesystem::path& path);

}  // namespace cprdraft
