#pragma once

// External and internal clustering validity indices.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <vector>

#include "gold/model.hpp"

namespace gold {

struct ContingencyTable {
  std::vector<std::vector<std::size_t>> counts;  // k_pred x k_true
  std::size_t n = 0;

  std::size_t rows() const noexcept { return counts.size(); }
  std::size_t cols() const noexcept { return counts.empty() ? 0 : counts.front().size(); }
};

namespace detail {

// Maps arbitrary ids to 0..m-1 in increasing id order.
inline std::vector<std::size_t> compact(const std::vector<std::size_t>& ids, std::size_t& m) {
  std::map<std::size_t, std::size_t> index;
  for (std::size_t v : ids) index.emplace(v, 0);
  m = 0;
  for (auto& [id, pos] : index) pos = m++;
  std::vector<std::size_t> out(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) out[i] = index[ids[i]];
  return out;
}

inline double entropy(const std::vector<double>& counts, double n) {
  double h = 0.0;
  for (double c : counts) {
    if (c > 0.0) h -= (c / n) * std::log(c / n);
  }
  return h;
}

inline double choose2(double x) { return x * (x - 1.0) / 2.0; }

}  // namespace detail

inline ContingencyTable contingency(const std::vector<std::size_t>& pred, const std::vector<std::size_t>& truth) {
  if (pred.size() != truth.size()) throw dimension_mismatch("contingency: length mismatch");
  std::size_t kp = 0;
  std::size_t kt = 0;
  const auto p = detail::compact(pred, kp);
  const auto t = detail::compact(truth, kt);
  ContingencyTable c;
  c.n = pred.size();
  c.counts.assign(kp, std::vector<std::size_t>(kt, 0));
  for (std::size_t i = 0; i < p.size(); ++i) ++c.counts[p[i]][t[i]];
  return c;
}

inline double purity(const std::vector<std::size_t>& pred, const std::vector<std::size_t>& truth) {
  const auto c = contingency(pred, truth);
  if (c.n == 0) throw invalid_input("purity: empty labelling");
  std::size_t s = 0;
  for (const auto& row : c.counts) s += *std::max_element(row.begin(), row.end());
  return static_cast<double>(s) / static_cast<double>(c.n);
}

inline double ari(const std::vector<std::size_t>& pred, const std::vector<std::size_t>& truth) {
  const auto c = contingency(pred, truth);
  const double n = static_cast<double>(c.n);
  double sum_ij = 0.0;
  std::vector<double> a(c.rows(), 0.0);
  std::vector<double> b(c.cols(), 0.0);
  for (std::size_t i = 0; i < c.rows(); ++i) {
    for (std::size_t j = 0; j < c.cols(); ++j) {
      const double v = static_cast<double>(c.counts[i][j]);
      sum_ij += detail::choose2(v);
      a[i] += v;
      b[j] += v;
    }
  }
  double sum_a = 0.0;
  double sum_b = 0.0;
  for (double v : a) sum_a += detail::choose2(v);
  for (double v : b) sum_b += detail::choose2(v);
  const double total = detail::choose2(n);
  const double expected = total > 0.0 ? sum_a * sum_b / total : 0.0;
  const double max_index = 0.5 * (sum_a + sum_b);
  const double denom = max_index - expected;
  if (denom == 0.0) return 1.0;
  return (sum_ij - expected) / denom;
}

inline double nmi(const std::vector<std::size_t>& pred, const std::vector<std::size_t>& truth) {
  const auto c = contingency(pred, truth);
  const double n = static_cast<double>(c.n);
  if (c.n == 0) throw invalid_input("nmi: empty labelling");
  std::vector<double> a(c.rows(), 0.0);
  std::vector<double> b(c.cols(), 0.0);
  for (std::size_t i = 0; i < c.rows(); ++i) {
    for (std::size_t j = 0; j < c.cols(); ++j) {
      a[i] += static_cast<double>(c.counts[i][j]);
      b[j] += static_cast<double>(c.counts[i][j]);
    }
  }
  const double ha = detail::entropy(a, n);
  const double hb = detail::entropy(b, n);
  if (ha == 0.0 && hb == 0.0) return 1.0;
  if (ha == 0.0 || hb == 0.0) return 0.0;
  double mi = 0.0;
  for (std::size_t i = 0; i < c.rows(); ++i) {
    for (std::size_t j = 0; j < c.cols(); ++j) {
      const double v = static_cast<double>(c.counts[i][j]);
      if (v > 0.0) mi += (v / n) * std::log(n * v / (a[i] * b[j]));
    }
  }
  return std::clamp(mi / std::sqrt(ha * hb), 0.0, 1.0);
}

// Minimum-cost perfect matching on a square cost matrix (Hungarian method,
// potentials form). Returns row -> column.
inline std::vector<std::size_t> hungarian(const std::vector<std::vector<double>>& cost) {
  const std::size_t n = cost.size();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> match(n);
  for (std::size_t j = 1; j <= n; ++j) {
    if (p[j] != 0) match[p[j] - 1] = j - 1;
  }
  return match;
}

inline double acc(const std::vector<std::size_t>& pred, const std::vector<std::size_t>& truth) {
  const auto c = contingency(pred, truth);
  if (c.n == 0) throw invalid_input("acc: empty labelling");
  const std::size_t m = std::max(c.rows(), c.cols());
  std::vector<std::vector<double>> cost(m, std::vector<double>(m, 0.0));
  for (std::size_t i = 0; i < c.rows(); ++i) {
    for (std::size_t j = 0; j < c.cols(); ++j) cost[i][j] = -static_cast<double>(c.counts[i][j]);
  }
  const auto match = hungarian(cost);
  std::size_t hit = 0;
  for (std::size_t i = 0; i < c.rows(); ++i) {
    if (match[i] < c.cols()) hit += c.counts[i][match[i]];
  }
  return static_cast<double>(hit) / static_cast<double>(c.n);
}

inline double silhouette(const Matrix& data, const std::vector<std::size_t>& pred) {
  if (data.rows() != pred.size()) throw dimension_mismatch("silhouette: length mismatch");
  std::size_t k = 0;
  const auto lab = detail::compact(pred, k);
  if (k < 2) throw undefined_metric("silhouette: needs at least two clusters");
  const std::size_t n = data.rows();
  std::vector<std::size_t> size(k, 0);
  for (std::size_t l : lab) ++size[l];
  std::vector<double> to(k);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (size[lab[i]] == 1) continue;
    std::fill(to.begin(), to.end(), 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) to[lab[j]] += std::sqrt(squared_distance(data.row(i), data.row(j)));
    }
    const double a = to[lab[i]] / static_cast<double>(size[lab[i]] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < k; ++c) {
      if (c != lab[i]) b = std::min(b, to[c] / static_cast<double>(size[c]));
    }
    const double mx = std::max(a, b);
    if (mx > 0.0) total += (b - a) / mx;
  }
  return total / static_cast<double>(n);
}

inline double calinski_harabasz(const Matrix& data, const std::vector<std::size_t>& pred) {
  if (data.rows() != pred.size()) throw dimension_mismatch("calinski_harabasz: length mismatch");
  std::size_t k = 0;
  const auto lab = detail::compact(pred, k);
  const std::size_t n = data.rows();
  const std::size_t d = data.cols();
  if (k < 2) throw undefined_metric("calinski_harabasz: needs at least two clusters");
  if (n <= k) throw undefined_metric("calinski_harabasz: needs n > k");
  Matrix means(k, d, 0.0);
  std::vector<double> overall(d, 0.0);
  std::vector<std::size_t> size(k, 0);
  for (std::size_t i = 0; i < n; ++i) {
    ++size[lab[i]];
    for (std::size_t m = 0; m < d; ++m) {
      means(lab[i], m) += data(i, m);
      overall[m] += data(i, m);
    }
  }
  for (double& v : overall) v /= static_cast<double>(n);
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t m = 0; m < d; ++m) means(c, m) /= static_cast<double>(size[c]);
  }
  double between = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    between += static_cast<double>(size[c]) * squared_distance(means.row(c), overall);
  }
  double within = 0.0;
  for (std::size_t i = 0; i < n; ++i) within += squared_distance(data.row(i), means.row(lab[i]));
  if (within == 0.0) return std::numeric_limits<double>::infinity();
  return (between / static_cast<double>(k - 1)) / (within / static_cast<double>(n - k));
}

// All six indices; internal ones are NaN when undefined for the labelling.
struct Indices {
  double purity = 0.0;
  double ari = 0.0;
  double nmi = 0.0;
  double acc = 0.0;
  double silhouette = std::numeric_limits<double>::quiet_NaN();
  double calinski_harabasz = std::numeric_limits<double>::quiet_NaN();
};

inline Indices compute_indices(const Matrix& data, const std::vector<std::size_t>& pred,
                               const std::vector<std::size_t>& truth) {
  Indices r;
  r.purity = purity(pred, truth);
  r.ari = ari(pred, truth);
  r.nmi = nmi(pred, truth);
  r.acc = acc(pred, truth);
  try {
    r.silhouette = silhouette(data, pred);
  } catch (const undefined_metric&) {
  }
  try {
    r.calinski_harabasz = calinski_harabasz(data, pred);
  } catch (const undefined_metric&) {
  }
  return r;
}

inline nlohmann::ordered_json indices_to_json(const Indices& x) {
  auto num = [](double v) -> nlohmann::ordered_json {
    if (std::isnan(v)) return nullptr;
    if (std::isinf(v)) return "inf";
    return v;
  };
  nlohmann::ordered_json j;
  j["purity"] = x.purity;
  j["ari"] = x.ari;
  j["nmi"] = x.nmi;
  j["acc"] = x.acc;
  j["silhouette"] = num(x.silhouette);
  j["calinski_harabasz"] = num(x.calinski_harabasz);
  return j;
}

}  // namespace gold
