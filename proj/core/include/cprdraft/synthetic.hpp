#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <vector>

#include "cprdraft/agents.hpp"
#include "cprdraft/dataio.hpp"

namespace cprdraft {

/// Builds the agent for one seat of one draft.
using AgentFactory =
    std::function<std::unique_ptr<Agent>(std::uint64_t draft_id, int seat)>;

/// Runs `count` drafts with ids first_id, first_id + 1, ... Draft d uses
/// config.rng_seed = derive_seed(seed, d), so any draft can be regenerated
/// on its own.
std::vector<DraftRecord> simulate_drafts(const CardDatabase& db, const AgentFactory& agents,
                                         std::size_t count, DraftConfig config,
                                         std::uint64_t seed, std::uint64_t first_id = 0);

/// All seats are oracle agents sharing one latent utility, each with its own
/// noise stream.
std::vector<DraftRecord> oracle_drafts(const CardDatabase& db, const OracleUtility& latent,
                                       std::size_t count, DraftConfig config, std::uint64_t seed,
                                       std::uint64_t first_id = 0);

/// JSON description of a latent utility, bound to a database fingerprint.
void save_oracle(const std::filesystem::path& path, const OracleUtility& latent,
                 std::uint64_t db_fingerprint);
/// Throws InputError on a malformed file or a fingerprint mismatch.
OracleUtility load_oracle(const std::filesystem::path& path, const CardDatabase& db);

}  // namespace cprdraft
