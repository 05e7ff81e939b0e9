#pragma once

// Non-ICD degree: per-client Gaussian KDE on a shared support, pairwise
// Jensen-Shannon distance, averaged over client pairs.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "gold/model.hpp"

namespace gold {

inline constexpr double kFallbackBandwidth = 0.1;
inline constexpr std::size_t kMaxSupport = 2000;
inline constexpr std::size_t kMaxLooSample = 1000;

inline std::vector<double> default_bandwidth_grid() {
  std::vector<double> grid(10);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    grid[i] = std::pow(10.0, -2.0 + 2.0 * static_cast<double>(i) / 9.0);
  }
  return grid;
}

namespace detail {

inline double logsumexp(const std::vector<double>& v) {
  if (v.empty()) return -std::numeric_limits<double>::infinity();
  const double mx = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (double x : v) s += std::exp(x - mx);
  return mx + std::log(s);
}

// Evenly strided row indices, at most cap of them.
inline std::vector<std::size_t> stride_indices(std::size_t n, std::size_t cap) {
  std::vector<std::size_t> idx;
  if (n <= cap) {
    idx.resize(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    return idx;
  }
  idx.reserve(cap);
  for (std::size_t i = 0; i < cap; ++i) idx.push_back(i * n / cap);
  return idx;
}

}  // namespace detail

// Mean leave-one-out log-likelihood of a product Gaussian kernel with
// bandwidth h over the given rows.
inline double loo_log_likelihood(const Matrix& x, double h) {
  const std::size_t n = x.rows();
  const double d = static_cast<double>(x.cols());
  const double log_norm = std::log(static_cast<double>(n - 1)) + d * std::log(h * std::sqrt(2.0 * std::numbers::pi));
  std::vector<double> terms(n - 1);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t t = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      terms[t++] = -squared_distance(x.row(i), x.row(j)) / (2.0 * h * h);
    }
    total += detail::logsumexp(terms) - log_norm;
  }
  return total / static_cast<double>(n);
}

inline double select_bandwidth(const Matrix& data, const std::vector<double>& candidates) {
  if (candidates.empty()) throw invalid_config("select_bandwidth: no candidates");
  if (data.rows() < 2) return kFallbackBandwidth;
  Matrix sample;
  const Matrix* x = &data;
  if (data.rows() > kMaxLooSample) {
    for (std::size_t i : detail::stride_indices(data.rows(), kMaxLooSample)) sample.append_row(data.row(i));
    x = &sample;
  }
  double best_h = candidates.front();
  double best_ll = -std::numeric_limits<double>::infinity();
  for (double h : candidates) {
    if (!(h > 0.0)) throw invalid_config("select_bandwidth: candidates must be > 0");
    const double ll = loo_log_likelihood(*x, h);
    if (ll > best_ll) {
      best_ll = ll;
      best_h = h;
    }
  }
  return best_h;
}

inline double select_bandwidth(const Dataset& data, const std::vector<double>& candidates = default_bandwidth_grid()) {
  return select_bandwidth(data.values, candidates);
}

struct DensityProfile {
  Matrix eval_points;
  std::vector<double> probs;
  double bandwidth = 0.0;
};

inline DensityProfile density_profile(const Matrix& data, const Matrix& eval_points, double h) {
  if (!(h > 0.0)) throw invalid_config("density_profile: bandwidth must be > 0");
  if (data.cols() != eval_points.cols()) throw dimension_mismatch("density_profile: width mismatch");
  DensityProfile p{eval_points, std::vector<double>(eval_points.rows()), h};
  std::vector<double> logs(eval_points.rows());
  std::vector<double> terms(data.rows());
  for (std::size_t e = 0; e < eval_points.rows(); ++e) {
    for (std::size_t i = 0; i < data.rows(); ++i) {
      terms[i] = -squared_distance(eval_points.row(e), data.row(i)) / (2.0 * h * h);
    }
    logs[e] = detail::logsumexp(terms);
  }
  const double z = detail::logsumexp(logs);
  for (std::size_t e = 0; e < logs.size(); ++e) p.probs[e] = std::exp(logs[e] - z);
  return p;
}

inline DensityProfile density_profile(const Dataset& data, const Matrix& eval_points, double h) {
  return density_profile(data.values, eval_points, h);
}

// Base-2 KL divergence; +infinity when p has mass where q has none.
inline double kl(const std::vector<double>& p, const std::vector<double>& q) {
  if (p.size() != q.size()) throw dimension_mismatch("kl: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    if (q[i] <= 0.0) return std::numeric_limits<double>::infinity();
    s += p[i] * std::log2(p[i] / q[i]);
  }
  return std::max(0.0, s);
}

inline double js(const std::vector<double>& p, const std::vector<double>& q) {
  if (p.size() != q.size()) throw dimension_mismatch("js: length mismatch");
  std::vector<double> m(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) m[i] = 0.5 * (p[i] + q[i]);
  return std::clamp(0.5 * kl(p, m) + 0.5 * kl(q, m), 0.0, 1.0);
}

struct NonIcdResult {
  double lambda = 0.0;
  Matrix pairwise;  // L x L, symmetric, zero diagonal
  std::vector<double> bandwidths;
};

inline Matrix shared_support(const std::vector<Dataset>& clients) {
  std::size_t total = 0;
  for (const auto& c : clients) total += c.n();
  Matrix support;
  const auto picks = detail::stride_indices(total, kMaxSupport);
  std::size_t next = 0;
  std::size_t offset = 0;
  for (const auto& c : clients) {
    while (next < picks.size() && picks[next] < offset + c.n()) {
      support.append_row(c.values.row(picks[next] - offset));
      ++next;
    }
    offset += c.n();
  }
  return support;
}

inline NonIcdResult non_icd_degree(const std::vector<Dataset>& clients) {
  const std::size_t L = clients.size();
  if (L < 2) throw invalid_input("non_icd_degree: need at least two clients");
  for (const auto& c : clients) {
    c.validate();
    if (c.d() != clients.front().d()) throw dimension_mismatch("non_icd_degree: clients disagree on d");
  }
  const Matrix support = shared_support(clients);
  const auto grid = default_bandwidth_grid();
  NonIcdResult out;
  std::vector<std::vector<double>> probs;
  for (const auto& c : clients) {
    const double h = select_bandwidth(c.values, grid);
    out.bandwidths.push_back(h);
    probs.push_back(density_profile(c.values, support, h).probs);
  }
  out.pairwise = Matrix(L, L, 0.0);
  double sum = 0.0;
  for (std::size_t a = 0; a < L; ++a) {
    for (std::size_t b = a + 1; b < L; ++b) {
      const double v = js(probs[a], probs[b]);
      out.pairwise(a, b) = v;
      out.pairwise(b, a) = v;
      sum += 2.0 * v;
    }
  }
  out.lambda = std::clamp(sum / static_cast<double>(L * (L - 1)), 0.0, 1.0);
  return out;
}

inline nlohmann::ordered_json non_icd_to_json(const NonIcdResult& r) {
  nlohmann::ordered_json j;
  j["lambda"] = r.lambda;
  j["bandwidths"] = r.bandwidths;
  auto rows = nlohmann::ordered_json::array();
  for (std::size_t a = 0; a < r.pairwise.rows(); ++a) {
    auto row = r.pairwise.row(a);
    rows.push_back(std::vector<double>(row.begin(), row.end()));
  }
  j["pairwise_js"] = std::move(rows);
  return j;
}

}  // namespace gold
