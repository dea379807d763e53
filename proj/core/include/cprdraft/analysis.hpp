#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cprdraft/cpr.hpp"

namespace cprdraft::analysis {

struct EvaluationReport {
  std::string agent;
  std::size_t events = 0;
  double mtta = 0.0;  // fraction of events whose reference pick is ranked first
  double mtpd = 0.0;  // mean 0-based rank of the reference pick
  std::vector<double> per_pick_accuracy;    // index = pick number - 1
  std::vector<std::size_t> per_pick_counts;
};

/// Scores an agent's rankings against the reference picks. Throws
/// InputError if the ranking is not a permutation of the pack.
EvaluationReport evaluate_agent(Agent& agent, std::span<const PickEvent> events,
                                const CardDatabase& db);

struct CardStat {
  std::size_t times_offered = 0;
  std::size_t times_chosen = 0;
  std::size_t times_offered_first = 0;
  std::size_t times_chosen_first = 0;

  /// chosen / offered; empty when the card was never offered.
  std::optional<double> pick_rate() const;
  std::optional<double> first_pick_rate() const;
};

/// Per-card offer and pick counts; "first" refers to pick number 1 (empty
/// pool).
std::vector<CardStat> card_stats(std::span<const PickEvent> events, std::size_t n_cards);

/// Tie-corrected Kendall tau-b. Throws InputError on a length mismatch,
/// fewer than two entries, or a list without variation.
double kendall_tau(std::span<const double> x, std::span<const double> y);

struct KMeansResult {
  std::vector<std::size_t> assignment;
  std::vector<std::vector<double>> centroids;
  double wcss = 0.0;  // within-cluster sum of squares
  std::size_t iterations = 0;
};

/// Lloyd's iteration from k distinct sampled points, until assignments stop
/// changing or `max_iterations`. An emptied cluster keeps its centroid.
KMeansResult kmeans(const std::vector<std::vector<double>>& points, int k, Rng& rng,
                    std::size_t max_iterations = 500);

/// k-means on the embeddings of mono-colored cards; purity is the mean over
/// non-empty clusters of the majority-color fraction. k defaults to the
/// number of distinct mono colors present. The best of `restarts` runs by
/// WCSS is scored.
double color_cluster_purity(const EmbeddingModel& model, const CardDatabase& db, Rng& rng,
                            std::optional<int> k = std::nullopt, int restarts = 10);

/// Centers the points and projects them on the top two principal axes,
/// found by power iteration. Deterministic given the input order.
std::vector<std::array<double, 2>> project_2d(const std::vector<std::vector<double>>& points);

struct SweepRow {
  std::size_t dimension = 0;
  std::vector<double> mtta_per_seed;
  double mean_mtta = 0.0;
};

struct SweepConfig {
  nn::NetworkSpec spec_template;
  std::vector<std::size_t> dimensions;
  std::vector<std::uint64_t> seeds;
  TrainConfig train;
};

/// Returns a fresh supplier yielding the same triplet order on every call.
using StreamFactory = std::function<TripletSupplier()>;

/// Trains one model per (D, seed) on identical data order and reports the
/// seed-averaged test MTTA for each D.
std::vector<SweepRow> dimension_sweep(const CardDatabase& db, const StreamFactory& streams,
                                      std::span<const PickEvent> test_events,
                                      const SweepConfig& config);

void write_report_table(std::ostream& out, std::span<const EvaluationReport> reports);
/// One row per pick number: pick,accuracy,count.
void write_per_pick_csv(std::ostream& out, const EvaluationReport& report);
void write_card_stats_csv(std::ostream& out, std::span<const CardStat> stats,
                          const CardDatabase& db);
void write_sweep_csv(std::ostream& out, std::span<const SweepRow> rows);

}  // namespace cprdraft::analysis
