#include "cprdraft/synthetic.hpp"

#include <fstream>
#include <nlohmann/json.hpp>

#include "cprdraft/error.hpp"

namespace cprdraft {

std::vector<DraftRecord> simulate_drafts(const CardDatabase& db, const AgentFactory& agents,
                                         std::size_t count, DraftConfig config,
                                         std::uint64_t seed, std::uint64_t first_id) {
  config.validate();
  std::vector<DraftRecord> records;
  records.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint64_t id = first_id + i;
    std::vector<std::unique_ptr<Agent>> owned;
    std::vector<Agent*> seats;
    for (int s = 0; s < config.players; ++s) {
      owned.push_back(agents(id, s));
      seats.push_back(owned.back().get());
    }
    DraftConfig draft_config = config;
    draft_config.rng_seed = derive_seed(seed, id);
    Rng rng(draft_config.rng_seed);
    records.push_back({id, run_draft(seats, draft_config, db, rng)});
  }
  return records;
}

std::vector<DraftRecord> oracle_drafts(const CardDatabase& db, const OracleUtility& latent,
                                       std::size_t count, DraftConfig config, std::uint64_t seed,
                                       std::uint64_t first_id) {
  const std::uint64_t agent_seed = mix64(seed ^ 0x0AC1E);
  return simulate_drafts(
      db,
      [&](std::uint64_t id, int seat) {
        return std::make_unique<OracleAgent>(
            latent, derive_seed(agent_seed, id * 64 + static_cast<std::uint64_t>(seat)));
      },
      count, config, seed, first_id);
}

void save_oracle(const std::filesystem::path& path, const OracleUtility& latent,
                 std::uint64_t db_fingerprint) {
  nlohmann::json j = {{"format", "cprdraft-oracle"},
                      {"version", 1},
                      {"db_fingerprint", db_fingerprint},
                      {"strength", latent.strength},
                      {"color_weight", latent.color_weight},
                      {"colorless_affinity", latent.colorless_affinity},
                      {"noise_scale", latent.noise_scale}};
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

OracleUtility load_oracle(const std::filesystem::path& path, const CardDatabase& db) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot read oracle file " + path.string());
  try {
    const nlohmann::json j = nlohmann::json::parse(in);
    if (j.at("format") != "cprdraft-oracle") throw InputError("not an oracle file");
    if (j.at("db_fingerprint").get<std::uint64_t>() != db.fingerprint())
      throw InputError("oracle is bound to a different card database");
    OracleUtility latent;
    latent.strength = j.at("strength").get<std::vector<double>>();
    latent.color_weight = j.at("color_weight").get<std::array<double, 5>>();
    latent.colorless_affinity = j.at("colorless_affinity").get<double>();
    latent.noise_scale = j.at("noise_scale").get<double>();
    if (latent.strength.size() != db.size())
      throw InputError("oracle strength list does not match the database size");
    return latent;
  } catch (const nlohmann::json::exception& e) {
    throw InputError("oracle file " + path.string() + ": " + e.what());
  }
}

}  // namespace cprdraft
