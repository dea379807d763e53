#include "cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <nlohmann/json.hpp>
#include <numeric>
#include <sstream>

#include "cprdraft/analysis.hpp"
#include "cprdraft/classifier.hpp"
#include "cprdraft/cpr.hpp"
#include "cprdraft/error.hpp"
#include "cprdraft/service.hpp"
#include "cprdraft/synthetic.hpp"

namespace cprdraft::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kModelDirEnv = "CPRDRAFT_MODEL_DIR";
constexpr const char* kBindEnv = "CPRDRAFT_BIND";
constexpr const char* kVersion = "0.1.0";

std::string utc_now() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::optional<fs::path> model_dir() {
  if (const char* dir = std::getenv(kModelDirEnv); dir && *dir) return fs::path(dir);
  return std::nullopt;
}

// Relative model paths that do not exist here are looked up in the model
// directory.
fs::path model_input_path(const fs::path& path) {
  if (path.is_relative() && !fs::exists(path))
    if (auto dir = model_dir()) return *dir / path;
  return path;
}

// Relative model outputs go to the model directory when one is set.
fs::path model_output_path(const fs::path& path) {
  if (path.is_relative())
    if (auto dir = model_dir()) return *dir / path;
  return path;
}

fs::path with_suffix(const fs::path& path, const std::string& suffix) {
  fs::path out = path;
  out += suffix;
  return out;
}

std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  return out;
}

struct Manifest {
  std::string command;
  std::string started_at = utc_now();
  std::uint64_t seed = 0;
  json inputs = json::object();
  json outputs = json::array();

  void write(const fs::path& artifact, const CLI::App& sub) {
    const json j = {{"command", command},
                    {"version", kVersion},
                    {"config", sub.config_to_str(true, false)},
                    {"seed", seed},
                    {"inputs", inputs},
                    {"outputs", outputs},
                    {"started_at", started_at},
                    {"finished_at", utc_now()}};
    std::ofstream out = open_output(with_suffix(artifact, ".manifest.json"));
    out << j.dump(2) << '\n';
  }
};

struct DraftOptions {
  int players = 8;
  int rounds = 3;
  int pack_size = 15;
  double mythic_probability = 0.125;

  void add(CLI::App* app) {
    app->add_option("--players", players, "Seats per draft")->capture_default_str();
    app->add_option("--rounds", rounds, "Packs per player")->capture_default_str();
    app->add_option("--pack-size", pack_size, "Cards per pack")->capture_default_str();
    app->add_option("--mythic-probability", mythic_probability,
                    "Chance a rare slot is upgraded to mythic")
        ->capture_default_str();
  }
  DraftConfig config() const {
    DraftConfig c;
    c.players = players;
    c.rounds = rounds;
    c.pack_size = pack_size;
    c.mythic_probability = mythic_probability;
    c.validate();
    return c;
  }
};

struct SplitOptions {
  double ratio = 0.8;
  std::uint64_t seed = 0;

  void add(CLI::App* app) {
    app->add_option("--split-ratio", ratio, "Fraction of drafts used for training")
        ->capture_default_str();
    app->add_option("--split-seed", seed, "Seed of the draft-level split")->capture_default_str();
  }
  DatasetSplit split(std::span<const DraftRecord> records) const {
    std::vector<std::uint64_t> ids;
    for (const auto& r : records) ids.push_back(r.draft_id);
    return split_drafts(ids, ratio, seed);
  }
};

struct NetOptions {
  std::vector<std::size_t> hidden = {64, 64};
  std::size_t dim = 16;
  double dropout = 0.5;
  double lr = 1e-4;
  std::size_t batch = 128;
  double margin = 1.0;

  void add(CLI::App* app, bool with_dim) {
    app->add_option("--hidden", hidden, "Hidden layer widths")
        ->delimiter(',')
        ->capture_default_str();
    if (with_dim) app->add_option("--dim", dim, "Embedding dimension D")->capture_default_str();
    app->add_option("--dropout", dropout, "Dropout rate")->capture_default_str();
    app->add_option("--lr", lr, "Adam learning rate")->capture_default_str();
    app->add_option("--batch", batch, "Batch size")->capture_default_str();
    app->add_option("--margin", margin, "Triplet margin")->capture_default_str();
  }
  nn::NetworkSpec spec() const {
    nn::NetworkSpec s;
    s.hidden_dims = hidden;
    s.output_dim = dim;
    s.dropout_rate = dropout;
    return s;
  }
  TrainConfig train_config() const {
    TrainConfig c;
    c.batch_size = batch;
    c.adam.learning_rate = lr;
    c.margin = margin;
    return c;
  }
};

struct StreamArgs {
  std::size_t shards = 20;
  std::size_t shard_budget = 0;  // 0 = all
  std::uint64_t shard_salt = 0;

  void add(CLI::App* app) {
    app->add_option("--shards", shards, "Number of hash shards")->capture_default_str();
    app->add_option("--shard-budget", shard_budget, "Shards to stream (0 = all)")
        ->capture_default_str();
    app->add_option("--shard-salt", shard_salt, "Salt of the shard hash")->capture_default_str();
  }
  StreamOptions options(std::uint64_t seed) const {
    StreamOptions o;
    if (shard_budget > 0) o.shard_budget = shard_budget;
    o.seed = seed;
    return o;
  }
};

std::vector<PickEvent> all_events(std::span<const DraftRecord> records) {
  std::vector<PickEvent> events;
  for (const auto& r : records) {
    auto e = extract_pick_events(r.log);
    events.insert(events.end(), std::make_move_iterator(e.begin()),
                  std::make_move_iterator(e.end()));
  }
  return events;
}

std::vector<PickEvent> select_events(std::span<const DraftRecord> records,
                                     const SplitOptions& split, const std::string& partition) {
  if (partition == "all") return all_events(records);
  const DatasetSplit s = split.split(records);
  return partition_events(records, s, partition == "train" ? Partition::Train : Partition::Test);
}

std::vector<DraftRecord> load_checked_log(const fs::path& path, const CardDatabase& db) {
  std::vector<DraftRecord> records = load_draft_log(path);
  for (const auto& r : records) check_card_ids(r.log, db);
  return records;
}

/// Parses `name` or `name=path` agent specifications.
class AgentSpec {
 public:
  explicit AgentSpec(const std::string& text) {
    const auto eq = text.find('=');
    kind_ = text.substr(0, eq);
    if (eq != std::string::npos) path_ = text.substr(eq + 1);
    static const std::vector<std::string> kinds = {"random", "raredraft", "oracle",
                                                   "siamese", "nnet",      "model"};
    if (std::find(kinds.begin(), kinds.end(), kind_) == kinds.end())
      throw InputError("unknown agent '" + kind_ +
                       "' (expected random, raredraft, oracle, siamese=PATH, nnet=PATH or "
                       "model=PATH)");
    if ((kind_ == "siamese" || kind_ == "nnet" || kind_ == "model") && path_.empty())
      throw InputError("agent '" + kind_ + "' needs a model path: " + kind_ + "=PATH");
  }

  const std::string& kind() const { return kind_; }

  /// Loads any model once; make() then builds cheap per-seat agents.
  void prepare(const CardDatabase& db, const std::optional<OracleUtility>& oracle) {
    if (kind_ == "oracle") {
      if (!oracle) throw InputError("oracle agent needs --oracle FILE");
      oracle_ = *oracle;
    }
    if (path_.empty()) return;
    const nn::ModelFile file = nn::load_model_file(model_input_path(path_));
    const bool embedding = file.params.spec().output == nn::OutputActivation::Tanh;
    if (kind_ == "siamese" && !embedding) throw InputError(path_ + " is not a siamese model");
    if (kind_ == "nnet" && embedding) throw InputError(path_ + " is not an nnet model");
    if (embedding) {
      embedding_ = std::make_shared<const EmbeddingModel>(file.params, file.db_fingerprint);
      embedding_->require_database(db);
    } else {
      scores_ = std::make_shared<const ScoreModel>(file.params, file.db_fingerprint);
      scores_->require_database(db);
    }
  }

  std::unique_ptr<Agent> make(std::uint64_t seed) const {
    if (kind_ == "random") return std::make_unique<RandomAgent>(seed);
    if (kind_ == "raredraft") return std::make_unique<RaredraftAgent>();
    if (kind_ == "oracle") return std::make_unique<OracleAgent>(*oracle_, seed);
    if (embedding_) return std::make_unique<SiameseAgent>(embedding_);
    return std::make_unique<NNetAgent>(scores_);
  }

 private:
  std::string kind_;
  std::string path_;
  std::optional<OracleUtility> oracle_;
  std::shared_ptr<const EmbeddingModel> embedding_;
  std::shared_ptr<const ScoreModel> scores_;
};

void write_history(const fs::path& path, const TrainHistory& h, std::size_t batch) {
  std::ofstream out = open_output(path);
  out << "batch,triplets,mean_loss\n" << std::setprecision(10);
  for (std::size_t i = 0; i < h.batch_losses.size(); ++i)
    out << i << ',' << std::min((i + 1) * batch, h.triplets_seen) << ',' << h.batch_losses[i]
        << '\n';
}

void write_validation(const fs::path& path, const TrainHistory& h) {
  std::ofstream out = open_output(path);
  out << "triplets,mtta\n" << std::setprecision(10);
  for (const auto& v : h.validation) out << v.triplets_seen << ',' << v.mtta << '\n';
}

// ---------------------------------------------------------------- gen

struct GenArgs {
  std::string db;
  std::size_t synthetic_cards = 0;
  std::uint64_t card_seed = 1;
  std::size_t drafts = 0;
  std::uint64_t seed = 0;
  std::optional<std::uint64_t> oracle_seed;
  double noise = 0.01;
  double synergy_scale = 1.0;
  double colorless_affinity = 0.35;
  std::string out;
  std::string oracle_out;
  DraftOptions draft;
};

void cmd_gen(const GenArgs& a, const CLI::App& sub, std::ostream& out) {
  Manifest manifest{"gen"};
  manifest.seed = a.seed;
  std::optional<CardDatabase> db;
  if (a.synthetic_cards > 0) {
    SyntheticDatabaseOptions o;
    o.cards = a.synthetic_cards;
    o.seed = a.card_seed;
    db = make_synthetic_database(o);
    if (fs::path(a.db).has_parent_path()) fs::create_directories(fs::path(a.db).parent_path());
    save_card_database(a.db, *db);
    manifest.outputs.push_back(a.db);
  } else {
    db = load_card_database(a.db);
    manifest.inputs["db"] = a.db;
  }

  OracleParams params;
  params.noise_scale = a.noise;
  params.synergy_scale = a.synergy_scale;
  params.colorless_affinity = a.colorless_affinity;
  Rng latent_rng(derive_seed(a.oracle_seed.value_or(a.seed), 0x1A7E));
  const OracleUtility latent = OracleUtility::generate(*db, params, latent_rng);

  const auto records = oracle_drafts(*db, latent, a.drafts, a.draft.config(), a.seed);
  const fs::path log_path = a.out;
  if (log_path.has_parent_path()) fs::create_directories(log_path.parent_path());
  save_draft_log(log_path, records);
  const fs::path oracle_path =
      a.oracle_out.empty() ? with_suffix(log_path, ".oracle.json") : fs::path(a.oracle_out);
  save_oracle(oracle_path, latent, db->fingerprint());
  manifest.outputs.push_back(log_path.string());
  manifest.outputs.push_back(oracle_path.string());
  manifest.write(log_path, sub);

  std::size_t events = 0, triplets = 0;
  for (const auto& r : records)
    for (const auto& e : r.log.events) {
      ++events;
      triplets += count_triplets(e);
    }
  out << "wrote " << records.size() << " drafts (" << events << " pick events, " << triplets
      << " triplets) to " << log_path.string() << '\n';
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
  std::string db;
  std::vector<std::string> agents;
  std::string oracle;
  std::size_t drafts = 0;
  std::uint64_t seed = 0;
  std::string out;
  DraftOptions draft;
};

void cmd_simulate(const SimulateArgs& a, const CLI::App& sub, std::ostream& out) {
  Manifest manifest{"simulate"};
  manifest.seed = a.seed;
  const CardDatabase db = load_card_database(a.db);
  manifest.inputs["db"] = a.db;
  const DraftConfig config = a.draft.config();
  if (a.agents.size() != 1 && a.agents.size() != static_cast<std::size_t>(config.players))
    throw InputError("give one --agent for every seat (" + std::to_string(config.players) +
                     ") or a single --agent for all seats");
  std::optional<OracleUtility> oracle;
  if (!a.oracle.empty()) {
    oracle = load_oracle(a.oracle, db);
    manifest.inputs["oracle"] = a.oracle;
  }
  std::vector<AgentSpec> specs;
  for (const auto& text : a.agents) {
    specs.emplace_back(text);
    specs.back().prepare(db, oracle);
  }
  const std::uint64_t agent_seed = mix64(a.seed ^ 0x5EA7);
  const auto records = simulate_drafts(
      db,
      [&](std::uint64_t id, int seat) {
        const AgentSpec& spec = specs[specs.size() == 1 ? 0 : static_cast<std::size_t>(seat)];
        return spec.make(derive_seed(agent_seed, id * 64 + static_cast<std::uint64_t>(seat)));
      },
      a.drafts, config, a.seed);
  if (fs::path(a.out).has_parent_path()) fs::create_directories(fs::path(a.out).parent_path());
  save_draft_log(a.out, records);
  manifest.outputs.push_back(a.out);
  manifest.write(a.out, sub);
  out << "wrote " << records.size() << " drafts to " << a.out << '\n';
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  std::string db;
  std::string log;
  std::string kind = "siamese";
  std::string out;
  std::uint64_t seed = 0;
  std::size_t validate_every = 50'000;
  std::size_t validation_events = 5'000;
  std::size_t max_triplets = 0;
  std::size_t epochs = 1;
  SplitOptions split;
  NetOptions net;
  StreamArgs stream;
};

void cmd_train(const TrainArgs& a, const CLI::App& sub, std::ostream& out) {
  Manifest manifest{"train"};
  manifest.seed = a.seed;
  const CardDatabase db = load_card_database(a.db);
  auto records = std::make_shared<const std::vector<DraftRecord>>(load_checked_log(a.log, db));
  manifest.inputs["db"] = a.db;
  manifest.inputs["log"] = a.log;
  const DatasetSplit split = a.split.split(*records);
  const fs::path model_path = model_output_path(a.out);
  if (model_path.has_parent_path()) fs::create_directories(model_path.parent_path());
  Rng rng(a.seed);

  std::vector<PickEvent> validation = partition_events(*records, split, Partition::Test);
  if (validation.size() > a.validation_events) validation.resize(a.validation_events);

  if (a.kind == "nnet") {
    ScoreModel model = ScoreModel::create(a.net.spec(), db, rng);
    std::vector<PickEvent> events = partition_events(*records, split, Partition::Train);
    std::shuffle(events.begin(), events.end(), rng);
    ClassifierTrainConfig config;
    config.batch_size = a.net.batch;
    config.adam.learning_rate = a.net.lr;
    config.epochs = a.epochs;
    const ClassifierHistory h = train_classifier(model, events, db, config, rng);
    model.save(model_path);
    std::ofstream hist = open_output(with_suffix(model_path, ".history.csv"));
    hist << "batch,mean_loss\n" << std::setprecision(10);
    for (std::size_t i = 0; i < h.batch_losses.size(); ++i)
      hist << i << ',' << h.batch_losses[i] << '\n';
    out << "trained nnet on " << h.events_seen << " pick events; final batch loss "
        << (h.batch_losses.empty() ? 0.0 : h.batch_losses.back()) << '\n';
  } else if (a.kind == "siamese") {
    EmbeddingModel model = EmbeddingModel::create(a.net.spec(), db, rng);
    MemoryShardSource source(records, ShardSet(a.stream.shards, a.stream.shard_salt));
    TripletStream stream(source, split, Partition::Train, a.stream.options(a.seed));
    TrainConfig config = a.net.train_config();
    config.validate_every = validation.empty() ? 0 : a.validate_every;
    config.max_triplets = a.max_triplets;
    const TrainHistory h = train(model, stream, db, config, rng, [&](const EmbeddingModel& m) {
      SiameseAgent agent(std::make_shared<const EmbeddingModel>(m));
      return analysis::evaluate_agent(agent, validation, db).mtta;
    });
    model.save(model_path);
    write_model_summary(model_path, model,
                        {{"seed", std::to_string(a.seed)},
                         {"batch_size", std::to_string(config.batch_size)},
                         {"learning_rate", std::to_string(config.adam.learning_rate)},
                         {"margin", std::to_string(config.margin)},
                         {"shards", std::to_string(a.stream.shards)},
                         {"shard_budget", a.stream.shard_budget == 0
                                              ? std::string("all")
                                              : std::to_string(a.stream.shard_budget)},
                         {"shards_consumed", std::to_string(stream.shards_consumed())},
                         {"triplets_seen", std::to_string(h.triplets_seen)}});
    write_history(with_suffix(model_path, ".history.csv"), h, config.batch_size);
    write_validation(with_suffix(model_path, ".validation.csv"), h);
    manifest.outputs.push_back(with_suffix(model_path, ".txt").string());
    manifest.outputs.push_back(with_suffix(model_path, ".validation.csv").string());
    out << "trained siamese D=" << model.dimension() << " on " << h.triplets_seen
        << " triplets (" << h.batch_losses.size() << " batches); final batch loss "
        << (h.batch_losses.empty() ? 0.0 : h.batch_losses.back()) << '\n';
    if (!h.validation.empty())
      out << "validation MTTA " << std::fixed << std::setprecision(4) << h.validation.back().mtta
          << '\n';
  } else {
    throw InputError("--kind must be siamese or nnet");
  }
  manifest.outputs.push_back(model_path.string());
  manifest.outputs.push_back(with_suffix(model_path, ".history.csv").string());
  manifest.write(model_path, sub);
  out << "model written to " << model_path.string() << " (checksum "
      << nn::params_checksum(nn::load_model_file(model_path).params) << ")\n";
}

// ---------------------------------------------------------------- evaluate

struct EvaluateArgs {
  std::string db;
  std::string log;
  std::vector<std::string> agents;
  std::string oracle;
  std::string partition = "test";
  std::string out;
  std::uint64_t seed = 0;
  SplitOptions split;
};

void cmd_evaluate(const EvaluateArgs& a, const CLI::App& sub, std::ostream& out) {
  Manifest manifest{"evaluate"};
  manifest.seed = a.seed;
  const CardDatabase db = load_card_database(a.db);
  const auto records = load_checked_log(a.log, db);
  manifest.inputs["db"] = a.db;
  manifest.inputs["log"] = a.log;
  const std::vector<PickEvent> events = select_events(records, a.split, a.partition);
  if (events.empty()) throw InputError("no pick events in the " + a.partition + " partition");

  std::optional<OracleUtility> oracle;
  if (!a.oracle.empty()) {
    oracle = load_oracle(a.oracle, db);
    oracle->noise_scale = 0.0;  // the reference policy, not the noisy labeler
  }
  std::vector<analysis::EvaluationReport> reports;
  for (std::size_t i = 0; i < a.agents.size(); ++i) {
    AgentSpec spec(a.agents[i]);
    spec.prepare(db, oracle);
    auto agent = spec.make(derive_seed(a.seed, i));
    reports.push_back(analysis::evaluate_agent(*agent, events, db));
  }
  analysis::write_report_table(out, reports);

  if (!a.out.empty()) {
    const fs::path prefix = a.out;
    {
      std::ofstream summary = open_output(with_suffix(prefix, ".summary.csv"));
      summary << "agent,events,mtta,mtpd\n" << std::setprecision(10);
      for (const auto& r : reports)
        summary << r.agent << ',' << r.events << ',' << r.mtta << ',' << r.mtpd << '\n';
    }
    manifest.outputs.push_back(with_suffix(prefix, ".summary.csv").string());
    for (std::size_t i = 0; i < reports.size(); ++i) {
      const fs::path path =
          with_suffix(prefix, "." + std::to_string(i) + "-" + reports[i].agent + ".per_pick.csv");
      std::ofstream per_pick = open_output(path);
      analysis::write_per_pick_csv(per_pick, reports[i]);
      manifest.outputs.push_back(path.string());
    }
    manifest.write(prefix, sub);
  }
}

// ---------------------------------------------------------------- rank

struct RankArgs {
  std::string db;
  std::string model;
  std::string log;
  std::string partition = "all";
  std::string out;
  std::string embeddings_out;
  SplitOptions split;
};

void cmd_rank(const RankArgs& a, const CLI::App& sub, std::ostream& out) {
  Manifest manifest{"rank"};
  const CardDatabase db = load_card_database(a.db);
  const EmbeddingModel model = EmbeddingModel::load(model_input_path(a.model));
  model.require_database(db);
  manifest.inputs["db"] = a.db;
  manifest.inputs["model"] = a.model;

  const std::vector<double> distances = model.distances_to_empty();
  std::vector<std::size_t> order(db.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return distances[x] < distances[y]; });

  std::ostringstream text;
  text << "rank,card_id,name,colors,rarity,distance_to_empty\n" << std::setprecision(17);
  for (std::size_t r = 0; r < order.size(); ++r) {
    const Card& card = db.card(card_id(order[r]));
    std::string name = card.name;
    if (name.find(',') != std::string::npos) name = '"' + name + '"';
    text << r << ',' << order[r] << ',' << name << ',' << card.colors.letters() << ','
         << to_string(card.rarity) << ',' << distances[order[r]] << '\n';
  }
  if (!a.log.empty()) {
    const auto records = load_checked_log(a.log, db);
    manifest.inputs["log"] = a.log;
    const auto stats = analysis::card_stats(select_events(records, a.split, a.partition),
                                            db.size());
    std::vector<double> fpr, neg_distance;
    for (std::size_t c = 0; c < db.size(); ++c) {
      if (auto f = stats[c].first_pick_rate()) {
        fpr.push_back(*f);
        neg_distance.push_back(-distances[c]);
      }
    }
    text << "# kendall_tau(first_pick_rate, -distance_to_empty) = ";
    try {
      text << std::setprecision(4) << std::fixed << analysis::kendall_tau(fpr, neg_distance);
    } catch (const InputError&) {
      text << "undefined";
    }
    text << " over " << fpr.size() << " cards offered on a first pick\n";
  }

  if (a.out.empty()) {
    out << text.str();
  } else {
    std::ofstream file = open_output(a.out);
    file << text.str();
    manifest.outputs.push_back(a.out);
  }
  if (!a.embeddings_out.empty()) {
    std::ofstream file = open_output(a.embeddings_out);
    write_embedding_export(file, model, db);
    manifest.outputs.push_back(a.embeddings_out);
  }
  if (!a.out.empty()) manifest.write(a.out, sub);
}

// ---------------------------------------------------------------- sweep

struct SweepArgs {
  std::string db;
  std::string log;
  std::vector<std::size_t> dims = {2, 8, 32};
  std::vector<std::uint64_t> seeds = {1, 2, 3};
  std::uint64_t data_seed = 0;
  std::size_t max_triplets = 0;
  std::size_t test_events = 0;
  std::string out;
  SplitOptions split;
  NetOptions net;
  StreamArgs stream;
};

void cmd_sweep(const SweepArgs& a, const CLI::App& sub, std::ostream& out) {
  Manifest manifest{"sweep"};
  manifest.seed = a.data_seed;
  const CardDatabase db = load_card_database(a.db);
  auto records = std::make_shared<const std::vector<DraftRecord>>(load_checked_log(a.log, db));
  manifest.inputs["db"] = a.db;
  manifest.inputs["log"] = a.log;
  const DatasetSplit split = a.split.split(*records);
  std::vector<PickEvent> test = partition_events(*records, split, Partition::Test);
  if (a.test_events > 0 && test.size() > a.test_events) test.resize(a.test_events);
  if (test.empty()) throw InputError("test partition is empty");

  MemoryShardSource source(records, ShardSet(a.stream.shards, a.stream.shard_salt));
  analysis::SweepConfig config;
  config.spec_template = a.net.spec();
  config.dimensions = a.dims;
  config.seeds = a.seeds;
  config.train = a.net.train_config();
  config.train.validate_every = 0;
  config.train.max_triplets = a.max_triplets;
  const auto rows = analysis::dimension_sweep(
      db,
      [&]() -> TripletSupplier {
        auto stream = std::make_shared<TripletStream>(source, split, Partition::Train,
                                                      a.stream.options(a.data_seed));
        return [stream] { return stream->next(); };
      },
      test, config);

  out << std::setw(6) << "D" << std::setw(12) << "MTTA(%)" << "  per seed\n";
  for (const auto& row : rows) {
    out << std::setw(6) << row.dimension << std::setw(12) << std::fixed << std::setprecision(2)
        << 100.0 * row.mean_mtta << " ";
    for (double m : row.mtta_per_seed) out << ' ' << std::setprecision(4) << m;
    out << '\n';
  }
  if (!a.out.empty()) {
    std::ofstream file = open_output(a.out);
    analysis::write_sweep_csv(file, rows);
    manifest.outputs.push_back(a.out);
    manifest.write(a.out, sub);
  }
}

// ---------------------------------------------------------------- serve

struct ServeArgs {
  std::string db;
  std::vector<std::string> models;
  std::string bind;
  std::string static_dir;
  std::string journal;
};

void cmd_serve(const ServeArgs& a, std::ostream& out) {
  auto db = std::make_shared<const CardDatabase>(load_card_database(a.db));
  service::RecommendationService svc(db);
  for (const std::string& text : a.models) {
    const auto eq = text.find('=');
    const fs::path path = model_input_path(eq == std::string::npos ? text : text.substr(eq + 1));
    const std::string id = eq == std::string::npos ? path.stem().string() : text.substr(0, eq);
    svc.add_model(id, std::make_shared<const EmbeddingModel>(EmbeddingModel::load(path)));
  }
  if (!a.journal.empty()) svc.open_journal(a.journal);

  std::string bind = a.bind;
  if (bind.empty())
    if (const char* env = std::getenv(kBindEnv); env && *env) bind = env;
  service::ServerOptions options =
      bind.empty() ? service::ServerOptions{} : service::parse_bind_address(bind);
  if (!a.static_dir.empty()) options.static_dir = a.static_dir;
  service::HttpServer server(svc, options);
  const int port = server.bind();
  out << "listening on " << options.host << ':' << port << std::endl;
  server.run();
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Contextual preference ranking for card drafts", "cprdraft"};
  app.set_config("--config", "", "INI/TOML file; explicit flags take precedence");
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen", "Generate synthetic oracle drafts");
  gen_cmd->add_option("--db", gen.db, "Card database (written when --synthetic-cards is set)")
      ->required();
  gen_cmd->add_option("--synthetic-cards", gen.synthetic_cards,
                      "Create a synthetic database with this many cards (e.g. 30)");
  gen_cmd->add_option("--card-seed", gen.card_seed, "Seed of the synthetic database")
      ->capture_default_str();
  gen_cmd->add_option("--drafts", gen.drafts, "Number of drafts")->required();
  gen_cmd->add_option("--seed", gen.seed, "Draft seed")->capture_default_str();
  gen_cmd->add_option("--oracle-seed", gen.oracle_seed, "Seed of the latent utility");
  gen_cmd->add_option("--noise", gen.noise, "Gumbel noise scale of the oracle")
      ->capture_default_str();
  gen_cmd->add_option("--synergy-scale", gen.synergy_scale, "Color synergy weight scale")
      ->capture_default_str();
  gen_cmd->add_option("--colorless-affinity", gen.colorless_affinity,
                      "Colorless fit as a fraction of the mean color weight")
      ->capture_default_str();
  gen_cmd->add_option("--out", gen.out, "Draft-log output")->required();
  gen_cmd->add_option("--oracle-out", gen.oracle_out, "Oracle output (default <out>.oracle.json)");
  gen.draft.add(gen_cmd);

  SimulateArgs sim;
  auto* sim_cmd = app.add_subcommand("simulate", "Run drafts between agents");
  sim_cmd->add_option("--db", sim.db, "Card database")->required();
  sim_cmd->add_option("--agent", sim.agents,
                      "random | raredraft | oracle | siamese=PATH | nnet=PATH | model=PATH; "
                      "once for all seats or once per seat")
      ->required();
  sim_cmd->add_option("--oracle", sim.oracle, "Oracle file for oracle agents");
  sim_cmd->add_option("--drafts", sim.drafts, "Number of drafts")->required();
  sim_cmd->add_option("--seed", sim.seed, "Seed")->capture_default_str();
  sim_cmd->add_option("--out", sim.out, "Draft-log output")->required();
  sim.draft.add(sim_cmd);

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train a siamese or nnet model");
  train_cmd->add_option("--db", tr.db, "Card database")->required();
  train_cmd->add_option("--log", tr.log, "Draft log")->required();
  train_cmd->add_option("--kind", tr.kind, "siamese or nnet")->capture_default_str();
  train_cmd->add_option("--out", tr.out, "Model output (relative paths go to $" +
                                             std::string(kModelDirEnv) + " when set)")
      ->required();
  train_cmd->add_option("--seed", tr.seed, "Initialization, dropout and shuffle seed")
      ->capture_default_str();
  train_cmd->add_option("--validate-every", tr.validate_every,
                        "Validation cadence in triplets (0 = off)")
      ->capture_default_str();
  train_cmd->add_option("--validation-events", tr.validation_events,
                        "Held-out events used for validation")
      ->capture_default_str();
  train_cmd->add_option("--max-triplets", tr.max_triplets, "Stop after this many (0 = all)")
      ->capture_default_str();
  train_cmd->add_option("--epochs", tr.epochs, "Passes over the events (nnet only)")
      ->capture_default_str();
  tr.split.add(train_cmd);
  tr.net.add(train_cmd, true);
  tr.stream.add(train_cmd);

  EvaluateArgs ev;
  auto* eval_cmd = app.add_subcommand("evaluate", "Score agents against reference picks");
  eval_cmd->add_option("--db", ev.db, "Card database")->required();
  eval_cmd->add_option("--log", ev.log, "Draft log")->required();
  eval_cmd->add_option("--agent", ev.agents,
                       "random | raredraft | oracle | siamese=PATH | nnet=PATH | model=PATH")
      ->required();
  eval_cmd->add_option("--oracle", ev.oracle, "Oracle file (evaluated without noise)");
  eval_cmd->add_option("--partition", ev.partition, "test | train | all")
      ->check(CLI::IsMember({"test", "train", "all"}))
      ->capture_default_str();
  eval_cmd->add_option("--out", ev.out, "Report prefix");
  eval_cmd->add_option("--seed", ev.seed, "Seed for random agents")->capture_default_str();
  ev.split.add(eval_cmd);

  RankArgs rk;
  auto* rank_cmd = app.add_subcommand("rank", "Rank all cards by distance to the empty set");
  rank_cmd->add_option("--db", rk.db, "Card database")->required();
  rank_cmd->add_option("--model", rk.model, "Siamese model")->required();
  rank_cmd->add_option("--log", rk.log, "Draft log for the first-pick-rate correlation footer");
  rank_cmd->add_option("--partition", rk.partition, "test | train | all")
      ->check(CLI::IsMember({"test", "train", "all"}))
      ->capture_default_str();
  rank_cmd->add_option("--out", rk.out, "Ranking output (default stdout)");
  rank_cmd->add_option("--embeddings-out", rk.embeddings_out, "Embedding export CSV");
  rk.split.add(rank_cmd);

  SweepArgs sw;
  auto* sweep_cmd = app.add_subcommand("sweep", "Embedding-dimension sweep");
  sweep_cmd->add_option("--db", sw.db, "Card database")->required();
  sweep_cmd->add_option("--log", sw.log, "Draft log")->required();
  sweep_cmd->add_option("--dims", sw.dims, "D values")->delimiter(',')->capture_default_str();
  sweep_cmd->add_option("--seeds", sw.seeds, "Training seeds")
      ->delimiter(',')
      ->capture_default_str();
  sweep_cmd->add_option("--data-seed", sw.data_seed, "Triplet order seed")->capture_default_str();
  sweep_cmd->add_option("--max-triplets", sw.max_triplets, "Per-model budget (0 = all)")
      ->capture_default_str();
  sweep_cmd->add_option("--test-events", sw.test_events, "Cap on test events (0 = all)")
      ->capture_default_str();
  sweep_cmd->add_option("--out", sw.out, "CSV output");
  sw.split.add(sweep_cmd);
  sw.net.add(sweep_cmd, false);
  sw.stream.add(sweep_cmd);

  ServeArgs sv;
  auto* serve_cmd = app.add_subcommand("serve", "HTTP recommendation service");
  serve_cmd->add_option("--db", sv.db, "Card database")->required();
  serve_cmd->add_option("--model", sv.models, "Model as PATH or ID=PATH (repeatable)")
      ->required();
  serve_cmd->add_option("--bind", sv.bind,
                        "HOST:PORT (default $" + std::string(kBindEnv) + " or 127.0.0.1:8080)");
  serve_cmd->add_option("--static", sv.static_dir, "Directory served at /");
  serve_cmd->add_option("--journal", sv.journal, "Append-only session journal");

  std::vector<std::string> argv_storage;
  argv_storage.reserve(args.size() + 1);
  argv_storage.push_back("cprdraft");
  argv_storage.insert(argv_storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : argv_storage) argv.push_back(s.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*gen_cmd) cmd_gen(gen, *gen_cmd, out);
    else if (*sim_cmd) cmd_simulate(sim, *sim_cmd, out);
    else if (*train_cmd) cmd_train(tr, *train_cmd, out);
    else if (*eval_cmd) cmd_evaluate(ev, *eval_cmd, out);
    else if (*rank_cmd) cmd_rank(rk, *rank_cmd, out);
    else if (*sweep_cmd) cmd_sweep(sw, *sweep_cmd, out);
    else if (*serve_cmd) cmd_serve(sv, out);
    return 0;
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return 2;
  }
}

}  // namespace cprdraft::cli
