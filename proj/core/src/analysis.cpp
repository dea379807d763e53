#include "cprdraft/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>

#include "cprdraft/error.hpp"

namespace cprdraft::analysis {

EvaluationReport evaluate_agent(Agent& agent, std::span<const PickEvent> events,
                                const CardDatabase& db) {
  if (events.empty()) throw InputError("evaluation needs at least one event");
  EvaluationReport report;
  report.agent = agent.name();
  report.events = events.size();
  std::size_t correct = 0;
  double rank_sum = 0.0;
  std::vector<std::size_t> hits;

  for (const PickEvent& e : events) {
    const std::vector<CardId> ranking = agent.rank(e.pool_before, e.pack, db);
    std::vector<CardId> sorted_ranking = ranking;
    std::vector<CardId> sorted_pack = e.pack;
    std::sort(sorted_ranking.begin(), sorted_ranking.end());
    std::sort(sorted_pack.begin(), sorted_pack.end());
    if (sorted_ranking != sorted_pack)
      throw InputError("agent '" + agent.name() + "' ranking is missing a pack card at seat " +
                       std::to_string(e.player) + " pick " + std::to_string(e.pick_number));
    const auto position = static_cast<std::size_t>(
        std::find(ranking.begin(), ranking.end(), e.picked) - ranking.begin());
    if (position == ranking.size())
      throw InputError("reference pick not in pack at seat " + std::to_string(e.player) +
                       " pick " + std::to_string(e.pick_number));

    const auto slot = static_cast<std::size_t>(std::max(e.pick_number, 1) - 1);
    if (slot >= report.per_pick_counts.size()) {
      report.per_pick_counts.resize(slot + 1, 0);
      hits.resize(slot + 1, 0);
    }
    ++report.per_pick_counts[slot];
    if (position == 0) {
      ++correct;
      ++hits[slot];
    }
    rank_sum += static_cast<double>(position);
  }
  const double n = static_cast<double>(events.size());
  report.mtta = static_cast<double>(correct) / n;
  report.mtpd = rank_sum / n;
  report.per_pick_accuracy.resize(report.per_pick_counts.size(), 0.0);
  for (std::size_t i = 0; i < hits.size(); ++i) {
    if (report.per_pick_counts[i] > 0)
      report.per_pick_accuracy[i] =
          static_cast<double>(hits[i]) / static_cast<double>(report.per_pick_counts[i]);
  }
  return report;
}

std::optional<double> CardStat::pick_rate() const {
  if (times_offered == 0) return std::nullopt;
  return static_cast<double>(times_chosen) / static_cast<double>(times_offered);
}

std::optional<double> CardStat::first_pick_rate() const {
  if (times_offered_first == 0) return std::nullopt;
  return static_cast<double>(times_chosen_first) / static_cast<double>(times_offered_first);
}

std::vector<CardStat> card_stats(std::span<const PickEvent> events, std::size_t n_cards) {
  std::vector<CardStat> stats(n_cards);
  auto at = [&](CardId c) -> CardStat& {
    if (index(c) >= n_cards)
      throw InputError("card id " + std::to_string(index(c)) + " out of range");
    return stats[index(c)];
  };
  for (const PickEvent& e : events) {
    const bool first = e.pick_number == 1;
    for (CardId c : e.pack) {
      ++at(c).times_offered;
      if (first) ++at(c).times_offered_first;
    }
    ++at(e.picked).times_chosen;
    if (first) ++at(e.picked).times_chosen_first;
  }
  return stats;
}

double kendall_tau(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw InputError("kendall_tau: length mismatch");
  if (x.size() < 2) throw InputError("kendall_tau: need at least two observations");
  const std::size_t n = x.size();
  long long concordant = 0, discordant = 0, ties_x = 0, ties_y = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double dx = x[i] - x[j];
      const double dy = y[i] - y[j];
      if (dx == 0.0) ++ties_x;
      if (dy == 0.0) ++ties_y;
      if (dx == 0.0 || dy == 0.0) continue;
      if ((dx > 0.0) == (dy > 0.0)) ++concordant;
      else ++discordant;
    }
  }
  const auto pairs = static_cast<long long>(n * (n - 1) / 2);
  if (ties_x == pairs || ties_y == pairs) throw InputError("kendall_tau: zero variance");
  const double denom =
      std::sqrt(static_cast<double>(pairs - ties_x) * static_cast<double>(pairs - ties_y));
  return static_cast<double>(concordant - discordant) / denom;
}

namespace {

double squared_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

}  // namespace

KMeansResult kmeans(const std::vector<std::vector<double>>& points, int k, Rng& rng,
                    std::size_t max_iterations) {
  if (k <= 0) throw InputError("kmeans: k must be positive");
  if (static_cast<std::size_t>(k) > points.size())
    throw InputError("kmeans: k exceeds the number of points");
  const auto clusters = static_cast<std::size_t>(k);
  const std::size_t dim = points.front().size();
  for (const auto& p : points)
    if (p.size() != dim) throw InputError("kmeans: points differ in dimension");

  std::vector<std::size_t> indices(points.size());
  std::iota(indices.begin(), indices.end(), std::size_t{0});
  std::vector<std::size_t> seeds;
  std::sample(indices.begin(), indices.end(), std::back_inserter(seeds), k, rng);
  std::shuffle(seeds.begin(), seeds.end(), rng);

  KMeansResult result;
  for (std::size_t s : seeds) result.centroids.push_back(points[s]);
  result.assignment.assign(points.size(), std::numeric_limits<std::size_t>::max());

  for (result.iterations = 0; result.iterations < max_iterations; ++result.iterations) {
    bool changed = false;
    for (std::size_t i = 0; i < points.size(); ++i) {
      std::size_t best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < clusters; ++c) {
        const double d = squared_distance(points[i], result.centroids[c]);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (result.assignment[i] != best) {
        result.assignment[i] = best;
        changed = true;
      }
    }
    if (!changed) break;
    std::vector<std::vector<double>> sums(clusters, std::vector<double>(dim, 0.0));
    std::vector<std::size_t> counts(clusters, 0);
    for (std::size_t i = 0; i < points.size(); ++i) {
      auto& s = sums[result.assignment[i]];
      for (std::size_t d = 0; d < dim; ++d) s[d] += points[i][d];
      ++counts[result.assignment[i]];
    }
    for (std::size_t c = 0; c < clusters; ++c) {
      if (counts[c] == 0) continue;
      for (std::size_t d = 0; d < dim; ++d)
        result.centroids[c][d] = sums[c][d] / static_cast<double>(counts[c]);
    }
  }
  result.wcss = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i)
    result.wcss += squared_distance(points[i], result.centroids[result.assignment[i]]);
  return result;
}

double color_cluster_purity(const EmbeddingModel& model, const CardDatabase& db, Rng& rng,
                            std::optional<int> k, int restarts) {
  model.require_database(db);
  std::vector<std::vector<double>> points;
  std::vector<Color> labels;
  std::array<bool, 5> present{};
  for (const Card& card : db.cards()) {
    const auto mono = card.colors.mono();
    if (!mono) continue;
    const auto e = model.candidate_embedding(card.id);
    points.emplace_back(e.begin(), e.end());
    labels.push_back(*mono);
    present[index(*mono)] = true;
  }
  const int clusters =
      k.value_or(static_cast<int>(std::count(present.begin(), present.end(), true)));
  if (clusters <= 0 || points.size() < static_cast<std::size_t>(clusters))
    throw InputError("color_cluster_purity: fewer mono-colored cards than clusters");

  KMeansResult best;
  best.wcss = std::numeric_limits<double>::infinity();
  for (int r = 0; r < std::max(1, restarts); ++r) {
    KMeansResult run = kmeans(points, clusters, rng);
    if (run.wcss < best.wcss) best = std::move(run);
  }

  std::vector<std::array<std::size_t, 5>> tally(static_cast<std::size_t>(clusters));
  for (auto& t : tally) t.fill(0);
  for (std::size_t i = 0; i < points.size(); ++i) ++tally[best.assignment[i]][index(labels[i])];
  double sum = 0.0;
  int non_empty = 0;
  for (const auto& t : tally) {
    const std::size_t total = std::accumulate(t.begin(), t.end(), std::size_t{0});
    if (total == 0) continue;
    sum += static_cast<double>(*std::max_element(t.begin(), t.end())) / static_cast<double>(total);
    ++non_empty;
  }
  return sum / non_empty;
}

namespace {

std::vector<double> multiply(const std::vector<std::vector<double>>& m,
                             const std::vector<double>& v) {
  std::vector<double> out(m.size(), 0.0);
  for (std::size_t i = 0; i < m.size(); ++i)
    for (std::size_t j = 0; j < v.size(); ++j) out[i] += m[i][j] * v[j];
  return out;
}

double norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

void orthogonalize(std::vector<double>& v, const std::vector<double>& against) {
  double dot = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) dot += v[i] * against[i];
  for (std::size_t i = 0; i < v.size(); ++i) v[i] -= dot * against[i];
}

// Any unit vector orthogonal to `axis` (or the first basis vector if none).
std::vector<double> orthogonal_unit(const std::vector<double>& axis) {
  for (std::size_t b = 0; b < axis.size(); ++b) {
    std::vector<double> v(axis.size(), 0.0);
    v[b] = 1.0;
    if (!axis.empty()) orthogonalize(v, axis);
    const double n = norm(v);
    if (n > 1e-6) {
      for (double& x : v) x /= n;
      return v;
    }
  }
  return std::vector<double>(axis.size(), 0.0);
}

std::vector<double> principal_axis(const std::vector<std::vector<double>>& cov,
                                   std::vector<double> start,
                                   const std::vector<double>* orthogonal_to) {
  if (orthogonal_to) orthogonalize(start, *orthogonal_to);
  double n = norm(start);
  if (n < 1e-12) {
    start = orthogonal_to ? orthogonal_unit(*orthogonal_to)
                          : orthogonal_unit(std::vector<double>(cov.size(), 0.0));
    n = norm(start);
  }
  for (double& x : start) x /= n;
  std::vector<double> v = start;
  for (int iter = 0; iter < 2000; ++iter) {
    std::vector<double> next = multiply(cov, v);
    if (orthogonal_to) orthogonalize(next, *orthogonal_to);
    const double len = norm(next);
    if (len < 1e-300) return v;  // no variance left in this subspace
    for (double& x : next) x /= len;
    double delta = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) delta = std::max(delta, std::abs(next[i] - v[i]));
    v = std::move(next);
    if (delta < 1e-13) break;
  }
  // Fix the sign: largest-magnitude component positive.
  std::size_t arg = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (std::abs(v[i]) > std::abs(v[arg])) arg = i;
  if (v[arg] < 0.0)
    for (double& x : v) x = -x;
  return v;
}

}  // namespace

std::vector<std::array<double, 2>> project_2d(const std::vector<std::vector<double>>& points) {
  if (points.size() < 2) throw InputError("project_2d: need at least two points");
  const std::size_t dim = points.front().size();
  if (dim < 2) throw InputError("project_2d: need at least two dimensions");
  for (const auto& p : points)
    if (p.size() != dim) throw InputError("project_2d: points differ in dimension");

  std::vector<double> mean(dim, 0.0);
  for (const auto& p : points)
    for (std::size_t d = 0; d < dim; ++d) mean[d] += p[d];
  for (double& m : mean) m /= static_cast<double>(points.size());
  std::vector<std::vector<double>> centered;
  centered.reserve(points.size());
  for (const auto& p : points) {
    std::vector<double> c(dim);
    for (std::size_t d = 0; d < dim; ++d) c[d] = p[d] - mean[d];
    centered.push_back(std::move(c));
  }

  std::vector<std::vector<double>> cov(dim, std::vector<double>(dim, 0.0));
  for (const auto& c : centered)
    for (std::size_t i = 0; i < dim; ++i)
      for (std::size_t j = 0; j < dim; ++j) cov[i][j] += c[i] * c[j];
  double trace = 0.0;
  for (std::size_t i = 0; i < dim; ++i) trace += cov[i][i];
  if (trace <= 0.0) throw InputError("project_2d: all points are equal");

  // Start from the point farthest from the mean.
  const auto far = std::max_element(centered.begin(), centered.end(),
                                     [](const auto& a, const auto& b) { return norm(a) < norm(b); });
  const std::vector<double> first = principal_axis(cov, *far, nullptr);
  std::vector<double> start2 = orthogonal_unit(first);
  for (const auto& c : centered) {
    std::vector<double> r = c;
    orthogonalize(r, first);
    if (norm(r) > norm(start2) * 1e-3 && norm(r) > 1e-9) {
      start2 = r;
      break;
    }
  }
  const std::vector<double> second = principal_axis(cov, start2, &first);

  std::vector<std::array<double, 2>> out;
  out.reserve(points.size());
  for (const auto& c : centered) {
    double a = 0.0, b = 0.0;
    for (std::size_t d = 0; d < dim; ++d) {
      a += c[d] * first[d];
      b += c[d] * second[d];
    }
    out.push_back({a, b});
  }
  return out;
}

std::vector<SweepRow> dimension_sweep(const CardDatabase& db, const StreamFactory& streams,
                                      std::span<const PickEvent> test_events,
                                      const SweepConfig& config) {
  if (config.dimensions.empty()) throw InputError("dimension sweep needs at least one D value");
  if (config.seeds.empty()) throw InputError("dimension sweep needs at least one seed");
  std::vector<SweepRow> rows;
  for (std::size_t dimension : config.dimensions) {
    SweepRow row;
    row.dimension = dimension;
    for (std::uint64_t seed : config.seeds) {
      nn::NetworkSpec spec = config.spec_template;
      spec.output_dim = dimension;
      Rng rng(derive_seed(seed, dimension));
      EmbeddingModel model = EmbeddingModel::create(spec, db, rng);
      train(model, streams(), db, config.train, rng);
      SiameseAgent agent(std::make_shared<const EmbeddingModel>(model));
      row.mtta_per_seed.push_back(evaluate_agent(agent, test_events, db).mtta);
    }
    row.mean_mtta = std::accumulate(row.mtta_per_seed.begin(), row.mtta_per_seed.end(), 0.0) /
                    static_cast<double>(row.mtta_per_seed.size());
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_report_table(std::ostream& out, std::span<const EvaluationReport> reports) {
  out << std::left << std::setw(16) << "agent" << std::right << std::setw(10) << "events"
      << std::setw(12) << "MTTA(%)" << std::setw(10) << "MTPD" << '\n';
  for (const auto& r : reports) {
    out << std::left << std::setw(16) << r.agent << std::right << std::setw(10) << r.events
        << std::setw(12) << std::fixed << std::setprecision(2) << 100.0 * r.mtta << std::setw(10)
        << std::setprecision(4) << r.mtpd << '\n';
  }
  out.unsetf(std::ios::fixed);
}

void write_per_pick_csv(std::ostream& out, const EvaluationReport& report) {
  out << "pick,accuracy,count\n";
  out << std::setprecision(10);
  for (std::size_t i = 0; i < report.per_pick_counts.size(); ++i)
    out << i + 1 << ',' << report.per_pick_accuracy[i] << ',' << report.per_pick_counts[i] << '\n';
}

void write_card_stats_csv(std::ostream& out, std::span<const CardStat> stats,
                          const CardDatabase& db) {
  out << "card_id,name,times_offered,times_chosen,pick_rate,times_offered_first,"
         "times_chosen_first,first_pick_rate\n";
  out << std::setprecision(10);
  for (std::size_t i = 0; i < stats.size(); ++i) {
    const CardStat& s = stats[i];
    std::string name = db.card(card_id(i)).name;
    if (name.find(',') != std::string::npos) name = '"' + name + '"';
    out << i << ',' << name << ',' << s.times_offered << ',' << s.times_chosen << ',';
    if (auto r = s.pick_rate()) out << *r;
    out << ',' << s.times_offered_first << ',' << s.times_chosen_first << ',';
    if (auto r = s.first_pick_rate()) out << *r;
    out << '\n';
  }
}

void write_sweep_csv(std::ostream& out, std::span<const SweepRow> rows) {
  out << "dimension,mean_mtta,seeds,mtta_per_seed\n";
  out << std::setprecision(10);
  for (const auto& row : rows) {
    out << row.dimension << ',' << row.mean_mtta << ',' << row.mtta_per_seed.size() << ',';
    for (std::size_t i = 0; i < row.mtta_per_seed.size(); ++i)
      out << (i ? ";" : "") << row.mtta_per_seed[i];
    out << '\n';
  }
}

}  // namespace cprdraft::analysis
