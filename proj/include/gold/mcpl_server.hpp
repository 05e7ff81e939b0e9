#pragma once

// Server side: stack client centroids and explore them at successively
// coarser granularities.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "gold/cpl.hpp"
#include "gold/model.hpp"

namespace gold {

struct Provenance {
  std::int64_t client_id;
  std::size_t local_cluster;
  bool operator==(const Provenance&) const = default;
};

struct StackedCentroids {
  Dataset data;
  std::vector<Provenance> provenance;  // one per stacked row
};

inline StackedCentroids stack_uploads(const std::vector<CentroidUpload>& uploads) {
  if (uploads.empty()) throw invalid_input("stack_uploads: no uploads");
  const std::size_t d = uploads.front().d;
  StackedCentroids out;
  out.data.name = "stacked";
  out.data.values = Matrix(0, d);
  for (const auto& u : uploads) {
    u.validate();
    if (u.d != d) throw dimension_mismatch("stack_uploads: uploads disagree on d");
    for (std::size_t j = 0; j < u.k; ++j) {
      out.data.values.append_row(u.centroids.row(j));
      out.provenance.push_back({u.client_id, j});
    }
  }
  return out;
}

struct GranularityStack {
  std::vector<AffiliationMatrix> levels;  // finest first
  std::vector<std::size_t> cluster_counts;
  std::vector<double> objectives;

  std::size_t delta() const noexcept { return levels.size(); }
  std::size_t n() const noexcept { return levels.empty() ? 0 : levels.front().n(); }

  void push(AffiliationMatrix q, double p) {
    cluster_counts.push_back(q.k);
    objectives.push_back(p);
    levels.push_back(std::move(q));
  }
};

inline std::size_t server_k0(std::size_t n, const RunConfig& config) {
  auto k0 = static_cast<std::size_t>(std::llround(config.k0_fraction * static_cast<double>(n)));
  k0 = std::max<std::size_t>(2, k0);
  return std::min(k0, n);
}

// Recursive exploration. Each stage starts afresh from k centroids sampled
// from the stacked rows, where k is the count the previous stage ended with.
inline GranularityStack mcpl_explore(const Dataset& stacked, const RunConfig& config, Rng& rng) {
  config.validate();
  stacked.validate();
  GranularityStack stack;
  const std::size_t n = stacked.n();
  if (n < 2) {
    stack.push(AffiliationMatrix{std::vector<std::size_t>(n, 0), 1}, static_cast<double>(n));
    return stack;
  }
  std::size_t k = server_k0(n, config);
  while (stack.delta() < config.max_granularities) {
    auto r = run_cpl(stacked.values, k, config, SimilarityMode::row_normalized, rng);
    const bool have_prev = stack.delta() > 0;
    const bool same_k = have_prev && r.k_final == stack.cluster_counts.back();
    const double p_old = have_prev ? stack.objectives.back() : 0.0;
    const bool settled =
        same_k && std::abs(r.objective - p_old) <= config.objective_eps * std::abs(p_old);
    k = r.k_final;
    stack.push(std::move(r.assignments), r.objective);
    if (settled) break;
  }
  return stack;
}

inline GranularityStack mcpl_explore(const Dataset& stacked, const RunConfig& config) {
  Rng rng(config.seed);
  return mcpl_explore(stacked, config, rng);
}

// True when a and b induce the same partition, ignoring cluster ids.
inline bool same_partition(const AffiliationMatrix& a, const AffiliationMatrix& b) {
  if (a.n() != b.n() || a.k != b.k) return false;
  constexpr std::size_t unset = static_cast<std::size_t>(-1);
  std::vector<std::size_t> fwd(a.k, unset);
  std::vector<std::size_t> back(b.k, unset);
  for (std::size_t i = 0; i < a.n(); ++i) {
    const std::size_t x = a.assignments[i];
    const std::size_t y = b.assignments[i];
    if (fwd[x] == unset && back[y] == unset) {
      fwd[x] = y;
      back[y] = x;
    } else if (fwd[x] != y || back[y] != x) {
      return false;
    }
  }
  return true;
}

// Drops levels that repeat the partition immediately before them.
inline GranularityStack dedupe_levels(const GranularityStack& stack) {
  GranularityStack out;
  for (std::size_t t = 0; t < stack.delta(); ++t) {
    if (t > 0 && same_partition(stack.levels[t], out.levels.back())) continue;
    out.push(stack.levels[t], stack.objectives[t]);
  }
  return out;
}

// Keeps only the listed levels, in the given order.
inline GranularityStack select_levels(const GranularityStack& stack,
                                      const std::vector<std::size_t>& keep) {
  GranularityStack out;
  for (std::size_t t : keep) {
    if (t >= stack.delta()) throw invalid_config("select_levels: level out of range");
    out.push(stack.levels[t], stack.objectives[t]);
  }
  return out;
}

inline nlohmann::ordered_json stack_to_json(const GranularityStack& stack) {
  nlohmann::ordered_json j;
  j["delta"] = stack.delta();
  j["cluster_counts"] = stack.cluster_counts;
  j["objectives"] = stack.objectives;
  auto levels = nlohmann::ordered_json::array();
  for (std::size_t t = 0; t < stack.delta(); ++t) {
    nlohmann::ordered_json level;
    level["level"] = t + 1;
    level["k"] = stack.levels[t].k;
    level["assignments"] = stack.levels[t].assignments;
    levels.push_back(std::move(level));
  }
  j["levels"] = std::move(levels);
  return j;
}

}  // namespace gold
