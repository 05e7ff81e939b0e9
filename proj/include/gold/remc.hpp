#pragma once

// Categorical re-encoding of the granularity stack and weighted
// mode-seeking clustering over it.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <map>
#include <vector>

#include "gold/mcpl_server.hpp"
#include "gold/model.hpp"

namespace gold {

// n x delta matrix of 1-based cluster ids, one column per granularity level.
struct EncodedMatrix {
  std::size_t n = 0;
  std::size_t delta = 0;
  std::vector<std::size_t> values;  // row-major
  std::vector<std::size_t> level_arities;

  std::size_t operator()(std::size_t i, std::size_t t) const { return values[i * delta + t]; }
  std::span<const std::size_t> row(std::size_t i) const { return {values.data() + i * delta, delta}; }
};

inline EncodedMatrix encode(const GranularityStack& stack) {
  EncodedMatrix e;
  e.n = stack.n();
  e.delta = stack.delta();
  e.values.resize(e.n * e.delta);
  for (std::size_t t = 0; t < e.delta; ++t) {
    const auto& q = stack.levels[t];
    if (q.n() != e.n) throw dimension_mismatch("encode: levels cover different object counts");
    e.level_arities.push_back(q.k);
    for (std::size_t i = 0; i < e.n; ++i) e.values[i * e.delta + t] = q.assignments[i] + 1;
  }
  return e;
}

inline double match_similarity(std::span<const std::size_t> x, std::span<const std::size_t> mode,
                               std::span<const double> u) {
  double s = 0.0;
  for (std::size_t t = 0; t < x.size(); ++t) {
    if (x[t] == mode[t]) s += u[t] * u[t];
  }
  return std::sqrt(s);
}

// Hellinger distance between two category-count profiles, on relative
// frequencies. 0 when the outside profile is empty.
inline double category_hellinger(std::span<const std::size_t> inside, std::span<const std::size_t> outside) {
  const double n_in = std::accumulate(inside.begin(), inside.end(), 0.0);
  const double n_out = std::accumulate(outside.begin(), outside.end(), 0.0);
  if (n_in == 0.0 || n_out == 0.0) return 0.0;
  double s = 0.0;
  for (std::size_t c = 0; c < inside.size(); ++c) {
    const double t = static_cast<double>(inside[c]) / n_in - static_cast<double>(outside[c]) / n_out;
    s += t * t;
  }
  return std::sqrt(s) / std::sqrt(2.0);
}

// Mean matching rate of a cluster on one level: sum of squared category
// counts over |C|^2. 1 when all members share a category.
inline double matching_rate(std::span<const std::size_t> inside) {
  const double n_in = std::accumulate(inside.begin(), inside.end(), 0.0);
  if (n_in == 0.0) return 0.0;
  double s = 0.0;
  for (std::size_t c : inside) s += static_cast<double>(c) * static_cast<double>(c);
  return s / (n_in * n_in);
}

// k* x delta weights; each row sums to 1.
inline Matrix update_level_weights(const EncodedMatrix& e, const AffiliationMatrix& q) {
  const std::size_t k = q.k;
  const std::size_t delta = e.delta;
  const double uniform = 1.0 / static_cast<double>(delta);
  Matrix u(k, delta, uniform);
  const std::size_t n = e.n;

  std::vector<std::size_t> outside;
  for (std::size_t t = 0; t < delta; ++t) {
    const std::size_t arity = e.level_arities[t];
    // counts[j][c]: members of cluster j holding category c + 1 at level t.
    std::vector<std::vector<std::size_t>> counts(k, std::vector<std::size_t>(arity, 0));
    std::vector<std::size_t> total(arity, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t c = e(i, t) - 1;
      ++counts[q.assignments[i]][c];
      ++total[c];
    }
    for (std::size_t j = 0; j < k; ++j) {
      outside.resize(arity);
      for (std::size_t c = 0; c < arity; ++c) outside[c] = total[c] - counts[j][c];
      u(j, t) = category_hellinger(counts[j], outside) * matching_rate(counts[j]);
    }
  }
  for (std::size_t j = 0; j < k; ++j) {
    auto row = u.row(j);
    double s = 0.0;
    for (double v : row) s += v;
    if (!(s > 0.0) || !std::isfinite(s)) {
      std::fill(row.begin(), row.end(), uniform);
    } else {
      for (double& v : row) v /= s;
    }
  }
  return u;
}

struct GlobalResult {
  AffiliationMatrix assignments;
  std::vector<std::size_t> modes;  // k* x delta, row-major, 1-based categories
  Matrix weights;                  // k* x delta
  std::size_t iterations = 0;
  std::vector<std::size_t> empty_clusters;
  // Set when there were fewer distinct rows than k*.
  bool duplicate_modes = false;
  bool cycle_broken = false;
};

namespace detail {

inline std::vector<std::size_t> cluster_modes(const EncodedMatrix& e, const AffiliationMatrix& q,
                                              std::vector<std::size_t> previous) {
  for (std::size_t t = 0; t < e.delta; ++t) {
    std::vector<std::vector<std::size_t>> counts(q.k, std::vector<std::size_t>(e.level_arities[t] + 1, 0));
    for (std::size_t i = 0; i < e.n; ++i) ++counts[q.assignments[i]][e(i, t)];
    for (std::size_t j = 0; j < q.k; ++j) {
      const auto& c = counts[j];
      const auto best = std::max_element(c.begin(), c.end());
      if (*best == 0) continue;  // empty cluster keeps its mode
      previous[j * e.delta + t] = static_cast<std::size_t>(best - c.begin());
    }
  }
  return previous;
}

struct Sweep {
  std::vector<std::size_t> assignments;
  double score;
};

inline Sweep assign_rows(const EncodedMatrix& e, const std::vector<std::size_t>& modes,
                         const Matrix& u, std::size_t k) {
  Sweep s{std::vector<std::size_t>(e.n, 0), 0.0};
  for (std::size_t i = 0; i < e.n; ++i) {
    const auto x = e.row(i);
    double best = -1.0;
    for (std::size_t j = 0; j < k; ++j) {
      const double v = match_similarity(x, {modes.data() + j * e.delta, e.delta}, u.row(j));
      if (v > best) {
        best = v;
        s.assignments[i] = j;
      }
    }
    s.score += best;
  }
  return s;
}

}  // namespace detail

inline GlobalResult remc_cluster(const EncodedMatrix& e, std::size_t k_star, const RunConfig& config,
                                 Rng& rng) {
  if (k_star < 1 || k_star > e.n) throw invalid_config("remc_cluster: k* must lie in [1, n]");
  if (e.delta == 0) throw invalid_input("remc_cluster: encoded matrix has no levels");

  GlobalResult out;
  out.weights = Matrix(k_star, e.delta, 1.0 / static_cast<double>(e.delta));

  // Initial modes: k* distinct rows where possible.
  std::vector<std::size_t> distinct;
  {
    std::map<std::vector<std::size_t>, std::size_t> seen;
    for (std::size_t i : rng.permutation(e.n)) {
      std::vector<std::size_t> key(e.row(i).begin(), e.row(i).end());
      if (seen.emplace(std::move(key), i).second) distinct.push_back(i);
    }
  }
  std::vector<std::size_t> seeds;
  if (distinct.size() >= k_star) {
    seeds.assign(distinct.begin(), distinct.begin() + static_cast<std::ptrdiff_t>(k_star));
  } else {
    out.duplicate_modes = true;
    seeds = distinct;
    for (std::size_t i = 0; seeds.size() < k_star; ++i) seeds.push_back(distinct[i % distinct.size()]);
  }
  out.modes.resize(k_star * e.delta);
  for (std::size_t j = 0; j < k_star; ++j) {
    std::copy_n(e.row(seeds[j]).begin(), e.delta, out.modes.begin() + static_cast<std::ptrdiff_t>(j * e.delta));
  }

  std::vector<detail::Sweep> history;
  AffiliationMatrix q;
  q.k = k_star;
  for (std::size_t it = 0; it < config.max_epochs; ++it) {
    auto sweep = detail::assign_rows(e, out.modes, out.weights, k_star);
    out.iterations = it + 1;
    const auto repeat = std::find_if(history.begin(), history.end(), [&](const detail::Sweep& h) {
      return h.assignments == sweep.assignments;
    });
    if (repeat != history.end()) {
      if (repeat + 1 != history.end()) {
        // Cycle: settle on its best sweep.
        out.cycle_broken = true;
        auto best = std::max_element(repeat, history.end(), [](const auto& a, const auto& b) {
          return a.score < b.score;
        });
        q.assignments = best->assignments;
        out.weights = update_level_weights(e, q);
        out.modes = detail::cluster_modes(e, q, out.modes);
      }
      break;
    }
    q.assignments = sweep.assignments;
    history.push_back(std::move(sweep));
    out.weights = update_level_weights(e, q);
    out.modes = detail::cluster_modes(e, q, out.modes);
  }
  out.assignments = q;
  const auto sizes = q.sizes();
  for (std::size_t j = 0; j < k_star; ++j) {
    if (sizes[j] == 0) out.empty_clusters.push_back(j);
  }
  return out;
}

inline GlobalResult remc_cluster(const EncodedMatrix& e, std::size_t k_star, const RunConfig& config) {
  Rng rng(config.seed);
  return remc_cluster(e, k_star, config, rng);
}

inline nlohmann::ordered_json global_result_to_json(const GlobalResult& g) {
  nlohmann::ordered_json j;
  j["k"] = g.assignments.k;
  j["iterations"] = g.iterations;
  j["assignments"] = g.assignments.assignments;
  const std::size_t delta = g.weights.cols();
  auto modes = nlohmann::ordered_json::array();
  auto weights = nlohmann::ordered_json::array();
  for (std::size_t r = 0; r < g.assignments.k; ++r) {
    modes.push_back(std::vector<std::size_t>(g.modes.begin() + static_cast<std::ptrdiff_t>(r * delta),
                                             g.modes.begin() + static_cast<std::ptrdiff_t>((r + 1) * delta)));
    auto w = g.weights.row(r);
    weights.push_back(std::vector<double>(w.begin(), w.end()));
  }
  j["modes"] = std::move(modes);
  j["weights"] = std::move(weights);
  j["empty_clusters"] = g.empty_clusters;
  j["duplicate_modes"] = g.duplicate_modes;
  return j;
}

}  // namespace gold
