#pragma once

// Competitive penalized learning: winner/rival competition over a set of
// candidate clusters, sigmoid-regularised cluster weights, elimination of
// clusters whose weight collapses, and Hellinger-based feature importance.
// The same engine drives client-side micro-cluster discovery and the
// server-side multi-granular exploration.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "gold/model.hpp"

namespace gold {

enum class SimilarityMode { raw, row_normalized };

inline constexpr double kVarianceFloor = 1e-8;

struct CplState {
  Matrix centroids;                          // k x d
  std::vector<double> intermediate_weights;  // unbounded, one per cluster
  std::vector<double> cluster_weights;       // sigmoid of the above, in (0, 1)
  std::vector<std::uint64_t> win_counts;
  Matrix importance;  // k x d, rows sum to 1
  std::vector<std::size_t> assignments;
  std::vector<char> alive;

  std::size_t k() const noexcept { return centroids.rows(); }
  std::size_t d() const noexcept { return centroids.cols(); }
  std::size_t alive_count() const noexcept {
    return static_cast<std::size_t>(std::count(alive.begin(), alive.end(), char{1}));
  }
};

struct CplResult {
  Matrix centroids;
  AffiliationMatrix assignments;
  std::size_t k_final = 0;
  double objective = 0.0;
  std::size_t epochs_run = 0;
  Matrix importance;
  // Alive cluster count at the end of each epoch.
  std::vector<std::size_t> alive_history;
};

inline double sigmoid_weight(double intermediate) {
  return 1.0 / (1.0 + std::exp(-10.0 * (intermediate + 5.0)));
}

// Intermediate weight whose sigmoid has odds init_odds / (k0 - 1).
inline double initial_intermediate_weight(std::size_t k0, double init_odds) {
  const double denom = k0 > 1 ? static_cast<double>(k0 - 1) : 1.0;
  return -5.0 + std::log(init_odds / denom) / 10.0;
}

inline CplState make_state(Matrix centroids, std::size_t n_objects, double init_odds) {
  CplState s;
  const std::size_t k = centroids.rows();
  const std::size_t d = centroids.cols();
  s.centroids = std::move(centroids);
  s.intermediate_weights.assign(k, initial_intermediate_weight(k, init_odds));
  s.cluster_weights.assign(k, sigmoid_weight(s.intermediate_weights.front()));
  s.win_counts.assign(k, 0);
  s.importance = Matrix(k, d, d > 0 ? 1.0 / static_cast<double>(d) : 0.0);
  s.assignments.assign(n_objects, 0);
  s.alive.assign(k, 1);
  return s;
}

// ||h_j o (x - c_j)||_2, the feature-weighted distance.
inline double weighted_distance(std::span<const double> x, std::span<const double> h,
                                std::span<const double> c) {
  double s = 0.0;
  for (std::size_t m = 0; m < x.size(); ++m) {
    const double t = h[m] * (x[m] - c[m]);
    s += t * t;
  }
  return std::sqrt(s);
}

inline double weighted_distance(std::span<const double> x, const CplState& state, std::size_t j) {
  return weighted_distance(x, state.importance.row(j), state.centroids.row(j));
}

inline double similarity(std::span<const double> x, const CplState& state, std::size_t j) {
  return std::exp(-0.5 * weighted_distance(x, state, j));
}

// Similarity to cluster j normalised over every alive centroid, all measured
// with cluster j's importance vector.
inline double normalized_similarity(std::span<const double> x, const CplState& state,
                                    std::size_t j) {
  const auto h = state.importance.row(j);
  double numer = 0.0;
  double denom = 0.0;
  for (std::size_t t = 0; t < state.k(); ++t) {
    if (!state.alive[t]) continue;
    const double e = std::exp(-0.5 * weighted_distance(x, h, state.centroids.row(t)));
    denom += e;
    if (t == j) numer = e;
  }
  return denom > 0.0 ? numer / denom : 0.0;
}

inline double similarity(std::span<const double> x, const CplState& state, std::size_t j,
                         SimilarityMode mode) {
  return mode == SimilarityMode::raw ? similarity(x, state, j)
                                     : normalized_similarity(x, state, j);
}

// Relative winning probability 1 - g_j / sum(g) over alive clusters; all ones
// before any win has been recorded. Dead clusters get 0.
inline std::vector<double> gamma(const CplState& state) {
  std::uint64_t total = 0;
  for (std::size_t j = 0; j < state.k(); ++j) {
    if (state.alive[j]) total += state.win_counts[j];
  }
  std::vector<double> out(state.k(), 0.0);
  for (std::size_t j = 0; j < state.k(); ++j) {
    if (!state.alive[j]) continue;
    out[j] = total == 0 ? 1.0
                        : 1.0 - static_cast<double>(state.win_counts[j]) / static_cast<double>(total);
  }
  return out;
}

struct WinnerRival {
  std::size_t winner;
  std::size_t rival;
  double winner_similarity;
  double rival_similarity;
};

namespace detail {

inline std::vector<double> all_similarities(std::span<const double> x, const CplState& state,
                                            SimilarityMode mode) {
  const std::size_t k = state.k();
  std::vector<double> sims(k, 0.0);
  if (mode == SimilarityMode::raw) {
    for (std::size_t j = 0; j < k; ++j) {
      if (state.alive[j]) sims[j] = similarity(x, state, j);
    }
    return sims;
  }
  for (std::size_t j = 0; j < k; ++j) {
    if (state.alive[j]) sims[j] = normalized_similarity(x, state, j);
  }
  return sims;
}

}  // namespace detail

// Picks the winner (highest gamma * w * s) and rival (second highest) among
// alive clusters, lowest index on ties, and records the win. Returns nullopt
// when fewer than two clusters are alive.
inline std::optional<WinnerRival> select_winner_rival(std::span<const double> x, CplState& state,
                                                      SimilarityMode mode = SimilarityMode::raw) {
  if (state.alive_count() < 2) return std::nullopt;
  const auto g = gamma(state);
  const auto sims = detail::all_similarities(x, state, mode);
  constexpr std::size_t none = std::numeric_limits<std::size_t>::max();
  std::size_t v = none;
  std::size_t r = none;
  double best = -1.0;
  double second = -1.0;
  for (std::size_t j = 0; j < state.k(); ++j) {
    if (!state.alive[j]) continue;
    const double score = g[j] * state.cluster_weights[j] * sims[j];
    if (v == none || score > best) {
      r = v;
      second = best;
      v = j;
      best = score;
    } else if (r == none || score > second) {
      r = j;
      second = score;
    }
  }
  ++state.win_counts[v];
  return WinnerRival{v, r, sims[v], sims[r]};
}

inline void update_weights(CplState& state, std::size_t v, std::size_t r, double winner_similarity,
                           double rival_similarity, double eta) {
  state.intermediate_weights[v] += eta;
  if (winner_similarity > 0.0) {
    state.intermediate_weights[r] -= eta * rival_similarity / winner_similarity;
  }
  state.cluster_weights[v] = sigmoid_weight(state.intermediate_weights[v]);
  state.cluster_weights[r] = sigmoid_weight(state.intermediate_weights[r]);
}

// Rewards the winner by eta and penalises the rival by eta * s_r / s_v.
inline void update_weights(CplState& state, std::size_t v, std::size_t r,
                           std::span<const double> x, double eta,
                           SimilarityMode mode = SimilarityMode::raw) {
  update_weights(state, v, r, similarity(x, state, v, mode), similarity(x, state, r, mode), eta);
}

// Hellinger distance between N(mu, var) and N(mu_bar, var_bar).
inline double hellinger_gaussian(double mu, double var, double mu_bar, double var_bar) {
  var = std::max(var, kVarianceFloor);
  var_bar = std::max(var_bar, kVarianceFloor);
  if (mu == mu_bar && var == var_bar) return 0.0;
  const double sum = var + var_bar;
  const double bc = std::sqrt(2.0 * std::sqrt(var * var_bar) / sum) *
                    std::exp(-(mu - mu_bar) * (mu - mu_bar) / (4.0 * sum));
  return std::sqrt(std::max(0.0, 1.0 - bc));
}

// Recomputes the importance row of every alive cluster from the current
// assignments: h_jm is proportional to (inside/outside separation) x
// (within-cluster compactness); rows with no usable signal become uniform.
inline void update_importance(CplState& state, const Matrix& data) {
  const std::size_t n = data.rows();
  const std::size_t d = data.cols();
  const std::size_t k = state.k();
  const double uniform = 1.0 / static_cast<double>(d);

  // Shifted totals limit cancellation in the complement variance.
  std::vector<double> shift(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t m = 0; m < d; ++m) shift[m] += data(i, m);
  }
  for (double& s : shift) s /= static_cast<double>(n);
  std::vector<double> total(d, 0.0);
  std::vector<double> total_sq(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t m = 0; m < d; ++m) {
      const double t = data(i, m) - shift[m];
      total[m] += t;
      total_sq[m] += t * t;
    }
  }

  std::vector<std::vector<std::size_t>> members(k);
  for (std::size_t i = 0; i < n; ++i) members[state.assignments[i]].push_back(i);

  std::vector<double> mean(d);
  std::vector<double> var(d);
  std::vector<double> beta_sum(d);
  std::vector<double> score(d);
  for (std::size_t j = 0; j < k; ++j) {
    if (!state.alive[j]) continue;
    auto h = state.importance.row(j);
    const auto& mem = members[j];
    const std::size_t n_in = mem.size();
    const std::size_t n_out = n - n_in;
    if (n_in == 0 || n_out == 0) {
      std::fill(h.begin(), h.end(), uniform);
      continue;
    }
    std::fill(mean.begin(), mean.end(), 0.0);
    std::fill(var.begin(), var.end(), 0.0);
    std::fill(beta_sum.begin(), beta_sum.end(), 0.0);
    for (std::size_t i : mem) {
      for (std::size_t m = 0; m < d; ++m) mean[m] += data(i, m) - shift[m];
    }
    for (double& v : mean) v /= static_cast<double>(n_in);
    const auto c = state.centroids.row(j);
    for (std::size_t i : mem) {
      for (std::size_t m = 0; m < d; ++m) {
        const double t = data(i, m) - shift[m] - mean[m];
        var[m] += t * t;
        const double u = data(i, m) - c[m];
        beta_sum[m] += std::exp(-0.5 * u * u);
      }
    }
    double norm = 0.0;
    for (std::size_t m = 0; m < d; ++m) {
      const double in_var = n_in > 1 ? var[m] / static_cast<double>(n_in - 1) : kVarianceFloor;
      double in_sum = mean[m] * static_cast<double>(n_in);
      double in_sq = var[m] + static_cast<double>(n_in) * mean[m] * mean[m];
      const double out_mean = (total[m] - in_sum) / static_cast<double>(n_out);
      double out_var = kVarianceFloor;
      if (n_out > 1) {
        const double ss = total_sq[m] - in_sq - static_cast<double>(n_out) * out_mean * out_mean;
        out_var = std::max(ss, 0.0) / static_cast<double>(n_out - 1);
      }
      const double alpha = hellinger_gaussian(mean[m], in_var, out_mean, out_var);
      const double beta = std::sqrt(beta_sum[m]) / static_cast<double>(n_in);
      score[m] = alpha * beta;
      norm += score[m];
    }
    if (!(norm > 0.0) || !std::isfinite(norm)) {
      std::fill(h.begin(), h.end(), uniform);
    } else {
      for (std::size_t m = 0; m < d; ++m) h[m] = score[m] / norm;
    }
  }
}

// Marks clusters whose weight fell below weight_floor as dead (never the last
// survivor), reassigns their objects to the most similar alive cluster, then
// drops any alive cluster left without members.
inline void eliminate(CplState& state, double weight_floor, const Matrix& data,
                      SimilarityMode mode = SimilarityMode::raw) {
  const std::size_t k = state.k();
  std::size_t survivors = 0;
  for (std::size_t j = 0; j < k; ++j) {
    if (state.alive[j] && state.cluster_weights[j] >= weight_floor) ++survivors;
  }
  if (survivors == 0) {
    // Keep the heaviest cluster.
    std::size_t best = k;
    for (std::size_t j = 0; j < k; ++j) {
      if (state.alive[j] && (best == k || state.cluster_weights[j] > state.cluster_weights[best])) {
        best = j;
      }
    }
    for (std::size_t j = 0; j < k; ++j) {
      if (j != best) state.alive[j] = 0;
    }
  } else {
    for (std::size_t j = 0; j < k; ++j) {
      if (state.alive[j] && state.cluster_weights[j] < weight_floor) state.alive[j] = 0;
    }
  }

  for (std::size_t i = 0; i < data.rows(); ++i) {
    if (state.alive[state.assignments[i]]) continue;
    const auto x = data.row(i);
    std::size_t best = k;
    double best_sim = -1.0;
    for (std::size_t j = 0; j < k; ++j) {
      if (!state.alive[j]) continue;
      const double s = similarity(x, state, j, mode);
      if (s > best_sim) {
        best_sim = s;
        best = j;
      }
    }
    state.assignments[i] = best;
  }

  std::vector<std::size_t> count(k, 0);
  for (std::size_t a : state.assignments) ++count[a];
  for (std::size_t j = 0; j < k; ++j) {
    if (state.alive[j] && count[j] == 0) state.alive[j] = 0;
  }
}

inline void recompute_centroids(CplState& state, const Matrix& data) {
  const std::size_t d = data.cols();
  Matrix sums(state.k(), d, 0.0);
  std::vector<std::size_t> count(state.k(), 0);
  for (std::size_t i = 0; i < data.rows(); ++i) {
    const std::size_t a = state.assignments[i];
    ++count[a];
    auto row = data.row(i);
    auto s = sums.row(a);
    for (std::size_t m = 0; m < d; ++m) s[m] += row[m];
  }
  for (std::size_t j = 0; j < state.k(); ++j) {
    if (!state.alive[j] || count[j] == 0) continue;
    auto c = state.centroids.row(j);
    auto s = sums.row(j);
    for (std::size_t m = 0; m < d; ++m) c[m] = s[m] / static_cast<double>(count[j]);
  }
}

inline double objective(const CplState& state, const Matrix& data, SimilarityMode mode) {
  double p = 0.0;
  for (std::size_t i = 0; i < data.rows(); ++i) {
    p += similarity(data.row(i), state, state.assignments[i], mode);
  }
  return p;
}

// One full competitive penalized learning run from k0 candidates sampled
// from the data.
inline CplResult run_cpl(const Matrix& data, std::size_t k0, const RunConfig& config,
                         SimilarityMode mode, Rng& rng) {
  config.validate();
  const std::size_t n = data.rows();
  const std::size_t d = data.cols();
  if (n == 0 || d == 0) throw invalid_input("run_cpl: empty data");
  if (k0 < 1 || k0 > n) throw invalid_config("run_cpl: k0 must lie in [1, n]");

  const auto seeds = rng.sample(n, k0);
  Matrix init(k0, d);
  for (std::size_t j = 0; j < k0; ++j) {
    std::copy_n(data.row(seeds[j]).begin(), d, init.row(j).begin());
  }
  CplState state = make_state(std::move(init), n, config.init_odds);

  // Start from the most similar candidate so every object has a valid owner.
  for (std::size_t i = 0; i < n; ++i) {
    const auto x = data.row(i);
    std::size_t best = 0;
    double best_sim = -1.0;
    for (std::size_t j = 0; j < k0; ++j) {
      const double s = similarity(x, state, j);
      if (s > best_sim) {
        best_sim = s;
        best = j;
      }
    }
    state.assignments[i] = best;
  }

  CplResult result;
  std::vector<std::size_t> previous;
  std::size_t epoch = 0;
  while (epoch < config.max_epochs) {
    ++epoch;
    previous = state.assignments;
    for (std::size_t i : rng.permutation(n)) {
      const auto x = data.row(i);
      if (auto wr = select_winner_rival(x, state, mode)) {
        update_weights(state, wr->winner, wr->rival, wr->winner_similarity, wr->rival_similarity,
                       config.eta);
        state.assignments[i] = wr->winner;
      } else {
        state.assignments[i] = static_cast<std::size_t>(
            std::find(state.alive.begin(), state.alive.end(), char{1}) - state.alive.begin());
      }
    }
    eliminate(state, config.weight_floor, data, mode);
    result.alive_history.push_back(state.alive_count());
    if (state.assignments == previous) break;
    if (!config.fixed_prototypes) recompute_centroids(state, data);
    update_importance(state, data);
  }

  result.epochs_run = epoch;
  result.objective = objective(state, data, mode);

  std::vector<std::size_t> remap(state.k(), 0);
  std::size_t next = 0;
  for (std::size_t j = 0; j < state.k(); ++j) {
    if (state.alive[j]) remap[j] = next++;
  }
  result.k_final = next;
  result.centroids = Matrix(next, d);
  result.importance = Matrix(next, d);
  for (std::size_t j = 0; j < state.k(); ++j) {
    if (!state.alive[j]) continue;
    std::copy_n(state.centroids.row(j).begin(), d, result.centroids.row(remap[j]).begin());
    std::copy_n(state.importance.row(j).begin(), d, result.importance.row(remap[j]).begin());
  }
  result.assignments.k = next;
  result.assignments.assignments.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    result.assignments.assignments[i] = remap[state.assignments[i]];
  }
  return result;
}

inline CplResult run_cpl(const Dataset& data, std::size_t k0, const RunConfig& config,
                         SimilarityMode mode, Rng& rng) {
  data.validate();
  return run_cpl(data.values, k0, config, mode, rng);
}

}  // namespace gold
