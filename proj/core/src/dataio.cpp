#include "cprdraft/dataio.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <nlohmann/json.hpp>
#include <ostream>

#include "binary_io.hpp"
#include "cprdraft/error.hpp"

namespace cprdraft {

using nlohmann::json;

namespace {

std::string event_label(const PickEvent& e) {
  return "seat " + std::to_string(e.player) + " pick " + std::to_string(e.pick_number);
}

}  // namespace

std::vector<TripletExample> generate_triplets(const PickEvent& event, std::uint64_t draft_id) {
  std::vector<TripletExample> out;
  if (event.pack.size() <= 1) return out;
  out.reserve(event.pack.size() - 1);
  for (CardId card : event.pack) {
    if (card == event.picked) continue;
    out.push_back(TripletExample{event.pool_before, event.picked, card, draft_id});
  }
  return out;
}

std::size_t count_triplets(const PickEvent& event) {
  return static_cast<std::size_t>(
      std::count_if(event.pack.begin(), event.pack.end(),
                    [&](CardId c) { return c != event.picked; }));
}

std::vector<PickEvent> extract_pick_events(const DraftLog& log) {
  log.config.validate();
  const auto seats = static_cast<std::size_t>(log.config.players);
  std::vector<std::vector<const PickEvent*>> by_seat(seats);
  for (std::size_t i = 0; i < log.events.size(); ++i) {
    const PickEvent& e = log.events[i];
    if (e.player < 0 || static_cast<std::size_t>(e.player) >= seats)
      throw InputError("inconsistent log: event " + std::to_string(i) + " has seat " +
                       std::to_string(e.player));
    by_seat[static_cast<std::size_t>(e.player)].push_back(&e);
  }

  std::vector<PickEvent> out;
  out.reserve(log.events.size());
  for (auto& seat_events : by_seat) {
    std::stable_sort(seat_events.begin(), seat_events.end(),
                     [](const PickEvent* a, const PickEvent* b) {
                       return a->pick_number < b->pick_number;
                     });
    PlayerPool pool;
    int expected_pick = 1;
    for (const PickEvent* e : seat_events) {
      if (e->pick_number != expected_pick)
        throw InputError("inconsistent log: " + event_label(*e) + " out of sequence, expected pick " +
                         std::to_string(expected_pick));
      if (std::find(e->pack.begin(), e->pack.end(), e->picked) == e->pack.end())
        throw InputError("inconsistent log: " + event_label(*e) + ": picked card " +
                         std::to_string(index(e->picked)) + " not in pack");
      if (!(e->pool_before == pool))
        throw InputError("inconsistent log: " + event_label(*e) +
                         ": pool snapshot disagrees with earlier picks");
      out.push_back(*e);
      pool.add(e->picked);
      ++expected_pick;
    }
  }
  return out;
}

void check_card_ids(const DraftLog& log, const CardDatabase& db) {
  for (const PickEvent& e : log.events) {
    for (CardId c : e.pack) {
      if (!db.contains(c))
        throw InputError("draft log references card " + std::to_string(index(c)) +
                         " outside the database (N=" + std::to_string(db.size()) + ")");
    }
  }
}

std::string draft_log_header() {
  return json{{"format", "cprdraft-draftlog"}, {"version", kDraftLogVersion}}.dump();
}

std::string encode_draft_record(const DraftRecord& record) {
  const DraftConfig& cfg = record.log.config;
  json seats = json::array();
  const auto events = extract_pick_events(record.log);
  for (int s = 0; s < cfg.players; ++s) seats.push_back(json{{"events", json::array()}});
  for (const PickEvent& e : events) {
    json pack = json::array();
    for (CardId c : e.pack) pack.push_back(index(c));
    seats[static_cast<std::size_t>(e.player)]["events"].push_back(
        json{{"pack", std::move(pack)}, {"picked", index(e.picked)}});
  }
  json line{{"draft_id", record.draft_id},
            {"config",
             {{"players", cfg.players},
              {"rounds", cfg.rounds},
              {"pack_size", cfg.pack_size},
              {"mythic_probability", cfg.mythic_probability},
              {"rng_seed", cfg.rng_seed}}},
            {"seats", std::move(seats)}};
  return line.dump();
}

DraftRecord decode_draft_record(std::string_view line) {
  DraftRecord record;
  try {
    const json j = json::parse(line);
    record.draft_id = j.at("draft_id").get<std::uint64_t>();
    const json& cfg = j.at("config");
    DraftConfig& config = record.log.config;
    config.players = cfg.at("players").get<int>();
    config.rounds = cfg.at("rounds").get<int>();
    config.pack_size = cfg.at("pack_size").get<int>();
    config.mythic_probability = cfg.value("mythic_probability", 0.125);
    config.rng_seed = cfg.value("rng_seed", std::uint64_t{0});
    config.validate();

    const json& seats = j.at("seats");
    if (!seats.is_array() || seats.size() != static_cast<std::size_t>(config.players))
      throw InputError("draft " + std::to_string(record.draft_id) + ": expected " +
                       std::to_string(config.players) + " seats");

    const int picks = config.picks_per_player();
    std::vector<std::vector<PickEvent>> per_seat(seats.size());
    for (std::size_t s = 0; s < seats.size(); ++s) {
      const json& events = seats[s].at("events");
      if (events.size() != static_cast<std::size_t>(picks))
        throw InputError("draft " + std::to_string(record.draft_id) + " seat " +
                         std::to_string(s) + ": expected " + std::to_string(picks) + " events");
      PlayerPool pool;
      for (int i = 0; i < picks; ++i) {
        const json& ev = events[static_cast<std::size_t>(i)];
        PickEvent e;
        e.player = static_cast<int>(s);
        e.round = i / config.pack_size;
        e.pick_number = i + 1;
        e.pool_before = pool;
        for (const json& id : ev.at("pack")) e.pack.push_back(card_id(id.get<std::uint32_t>()));
        e.picked = card_id(ev.at("picked").get<std::uint32_t>());
        const auto expected_size =
            static_cast<std::size_t>(config.pack_size - (i % config.pack_size));
        if (e.pack.size() != expected_size)
          throw InputError("draft " + std::to_string(record.draft_id) + ": " + event_label(e) +
                           " has pack of " + std::to_string(e.pack.size()) + ", expected " +
                           std::to_string(expected_size));
        if (std::find(e.pack.begin(), e.pack.end(), e.picked) == e.pack.end())
          throw InputError("draft " + std::to_string(record.draft_id) + ": " + event_label(e) +
                           ": picked card " + std::to_string(index(e.picked)) + " not in pack");
        pool.add(e.picked);
        per_seat[s].push_back(std::move(e));
      }
    }
    // Back to simulation order: pick-major, seat-minor.
    record.log.events.reserve(static_cast<std::size_t>(config.total_picks()));
    for (int i = 0; i < picks; ++i)
      for (auto& seat_events : per_seat)
        record.log.events.push_back(std::move(seat_events[static_cast<std::size_t>(i)]));
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed draft record: ") + e.what());
  }
  return record;
}

DraftLogWriter::DraftLogWriter(std::ostream& out) : out_(out) {
  out_ << draft_log_header() << '\n';
}

void DraftLogWriter::write(const DraftRecord& record) {
  out_ << encode_draft_record(record) << '\n';
  ++written_;
}

std::vector<DraftRecord> read_draft_log(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  std::vector<DraftRecord> out;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    if (!have_header) {
      json header;
      try {
        header = json::parse(line);
      } catch (const json::exception&) {
        throw InputError("draft log line 1: missing header");
      }
      if (header.value("format", "") != "cprdraft-draftlog")
        throw InputError("draft log line " + std::to_string(line_no) + ": not a cprdraft draft log");
      if (header.value("version", 0) != kDraftLogVersion)
        throw InputError("draft log: unsupported version");
      have_header = true;
      continue;
    }
    try {
      out.push_back(decode_draft_record(line));
    } catch (const InputError& e) {
      throw InputError("draft log line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!have_header) throw InputError("draft log is empty (no header)");
  return out;
}

std::vector<DraftRecord> load_draft_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open draft log " + path.string());
  return read_draft_log(in);
}

void save_draft_log(const std::filesystem::path& path, std::span<const DraftRecord> records) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write draft log " + path.string());
  DraftLogWriter writer(out);
  for (const auto& r : records) writer.write(r);
  if (!out) throw InputError("write failed for " + path.string());
}

bool DatasetSplit::in_train(std::uint64_t id) const {
  return std::binary_search(train.begin(), train.end(), id);
}

bool DatasetSplit::in_test(std::uint64_t id) const {
  return std::binary_search(test.begin(), test.end(), id);
}

DatasetSplit split_drafts(std::span<const std::uint64_t> draft_ids, double ratio,
                          std::uint64_t seed) {
  if (draft_ids.empty()) throw InputError("cannot split an empty draft set");
  if (!(ratio > 0.0 && ratio < 1.0)) throw InputError("split ratio must lie in (0, 1)");
  std::vector<std::uint64_t> ids(draft_ids.begin(), draft_ids.end());
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end())
    throw InputError("duplicate draft ids in split input");
  const std::uint64_t salt = mix64(seed);
  std::stable_sort(ids.begin(), ids.end(), [salt](std::uint64_t a, std::uint64_t b) {
    const auto ha = mix64(a ^ salt), hb = mix64(b ^ salt);
    return ha != hb ? ha < hb : a < b;
  });
  const auto n_train = static_cast<std::size_t>(std::llround(ratio * double(ids.size())));
  DatasetSplit split;
  split.ratio = ratio;
  split.train.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_train));
  split.test.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_train), ids.end());
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

ShardSet::ShardSet(std::size_t shard_count, std::uint64_t salt)
    : shard_count_(shard_count), salt_(salt) {
  if (shard_count_ == 0) throw InputError("shard count must be at least 1");
}

std::size_t ShardSet::shard_of(std::uint64_t draft_id) const {
  return static_cast<std::size_t>(mix64(draft_id ^ mix64(salt_ + 0x5AD)) % shard_count_);
}

MemoryShardSource::MemoryShardSource(std::shared_ptr<const std::vector<DraftRecord>> records,
                                     ShardSet shards)
    : records_(std::move(records)), shards_(shards), members_(shards.shard_count()) {
  for (std::size_t i = 0; i < records_->size(); ++i)
    members_[shards_.shard_of((*records_)[i].draft_id)].push_back(i);
}

std::vector<DraftRecord> MemoryShardSource::load_shard(std::size_t shard) const {
  std::vector<DraftRecord> out;
  out.reserve(members_.at(shard).size());
  for (std::size_t i : members_[shard]) out.push_back((*records_)[i]);
  return out;
}

std::string shard_file_name(std::size_t shard) {
  std::string digits = std::to_string(shard);
  if (digits.size() < 5) digits.insert(0, 5 - digits.size(), '0');
  return "shard-" + digits + ".jsonl";
}

void write_shards(std::span<const DraftRecord> records, const ShardSet& shards,
                  const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<std::vector<const DraftRecord*>> members(shards.shard_count());
  for (const auto& r : records) members[shards.shard_of(r.draft_id)].push_back(&r);
  for (std::size_t s = 0; s < members.size(); ++s) {
    std::ofstream out(dir / shard_file_name(s));
    if (!out) throw InputError("cannot write shard " + (dir / shard_file_name(s)).string());
    DraftLogWriter writer(out);
    for (const DraftRecord* r : members[s]) writer.write(*r);
  }
}

DirectoryShardSource::DirectoryShardSource(std::filesystem::path dir, std::size_t shard_count)
    : dir_(std::move(dir)), shard_count_(shard_count) {}

std::vector<DraftRecord> DirectoryShardSource::load_shard(std::size_t shard) const {
  const auto path = dir_ / shard_file_name(shard);
  if (!std::filesystem::exists(path)) throw InputError("missing shard file " + path.string());
  return load_draft_log(path);
}

TripletStream::TripletStream(const ShardSource& source, DatasetSplit split, Partition partition,
                             StreamOptions options)
    : source_(source),
      split_(std::move(split)),
      partition_(partition),
      options_(options),
      last_shard_(std::min(options.shard_budget, source.shard_count())) {}

bool TripletStream::load_next_shard() {
  while (next_shard_ < last_shard_) {
    const std::size_t shard = next_shard_++;
    buffer_.clear();
    cursor_ = 0;
    for (const DraftRecord& r : source_.load_shard(shard)) {
      const bool keep = partition_ == Partition::Train ? split_.in_train(r.draft_id)
                                                       : split_.in_test(r.draft_id);
      if (!keep) continue;
      for (const PickEvent& e : extract_pick_events(r.log)) {
        auto triplets = generate_triplets(e, r.draft_id);
        std::move(triplets.begin(), triplets.end(), std::back_inserter(buffer_));
      }
    }
    if (options_.shuffle_within_shard) {
      Rng rng(derive_seed(options_.seed, shard));
      std::shuffle(buffer_.begin(), buffer_.end(), rng);
    }
    if (!buffer_.empty()) return true;
  }
  return false;
}

std::optional<TripletExample> TripletStream::next() {
  if (cursor_ >= buffer_.size() && !load_next_shard()) return std::nullopt;
  return std::move(buffer_[cursor_++]);
}

std::vector<PickEvent> partition_events(std::span<const DraftRecord> records,
                                        const DatasetSplit& split, Partition partition) {
  std::vector<PickEvent> out;
  for (const DraftRecord& r : records) {
    const bool keep =
        partition == Partition::Train ? split.in_train(r.draft_id) : split.in_test(r.draft_id);
    if (!keep) continue;
    auto events = extract_pick_events(r.log);
    std::move(events.begin(), events.end(), std::back_inserter(out));
  }
  return out;
}

void write_triplet_cache(const std::filesystem::path& path,
                         std::span<const TripletExample> triplets) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write triplet cache " + path.string());
  detail::LeWriter w(out);
  w.put_bytes("CPRT");
  w.put<std::uint32_t>(kTripletCacheVersion);
  w.put<std::uint64_t>(triplets.size());
  for (const TripletExample& t : triplets) {
    std::vector<std::pair<CardId, std::uint16_t>> runs;
    for (CardId c : t.anchor.cards()) {
      if (!runs.empty() && runs.back().first == c) ++runs.back().second;
      else runs.emplace_back(c, 1);
    }
    w.put<std::uint16_t>(static_cast<std::uint16_t>(runs.size()));
    for (auto [id, count] : runs) {
      w.put<std::uint32_t>(static_cast<std::uint32_t>(index(id)));
      w.put<std::uint16_t>(count);
    }
    w.put<std::uint32_t>(static_cast<std::uint32_t>(index(t.positive)));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(index(t.negative)));
    w.put<std::uint64_t>(t.draft_id);
  }
  if (!out) throw InputError("write failed for " + path.string());
}

std::vector<TripletExample> read_triplet_cache(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open triplet cache " + path.string());
  detail::LeReader r(in, path.string());
  if (r.get_bytes(4) != "CPRT") throw InputError(path.string() + ": not a triplet cache");
  if (r.get<std::uint32_t>() != kTripletCacheVersion)
    throw InputError(path.string() + ": unsupported triplet cache version");
  const auto count = r.get<std::uint64_t>();
  std::vector<TripletExample> out;
  out.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(count, 1u << 20)));
  for (std::uint64_t i = 0; i < count; ++i) {
    TripletExample t;
    std::vector<CardId> anchor;
    const auto runs = r.get<std::uint16_t>();
    for (std::uint16_t k = 0; k < runs; ++k) {
      const CardId id = card_id(r.get<std::uint32_t>());
      const auto n = r.get<std::uint16_t>();
      anchor.insert(anchor.end(), n, id);
    }
    t.anchor = PlayerPool(std::move(anchor));
    t.positive = card_id(r.get<std::uint32_t>());
    t.negative = card_id(r.get<std::uint32_t>());
    t.draft_id = r.get<std::uint64_t>();
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace cprdraft
