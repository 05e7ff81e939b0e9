#pragma once

// Brute-force reference computations and shared synthetic fixtures. Nothing
// here calls into the metric implementations under test.

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <vector>

#include "gold/gold.hpp"

namespace oracle {

using Lab = std::vector<std::size_t>;

// Pair enumeration.
inline double ari(const Lab& p, const Lab& t) {
  const std::size_t n = p.size();
  double both = 0, in_p = 0, in_t = 0, pairs = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const bool sp = p[i] == p[j];
      const bool st = t[i] == t[j];
      both += sp && st;
      in_p += sp;
      in_t += st;
      pairs += 1;
    }
  }
  const double expected = pairs > 0 ? in_p * in_t / pairs : 0.0;
  const double top = 0.5 * (in_p + in_t);
  if (top - expected == 0.0) return 1.0;
  return (both - expected) / (top - expected);
}

inline double entropy_of(const std::map<std::size_t, double>& counts, double n) {
  double h = 0;
  for (const auto& [_, c] : counts) h -= c / n * std::log(c / n);
  return h;
}

inline double nmi(const Lab& p, const Lab& t) {
  const double n = static_cast<double>(p.size());
  std::map<std::size_t, double> cp, ct;
  std::map<std::pair<std::size_t, std::size_t>, double> joint;
  for (std::size_t i = 0; i < p.size(); ++i) {
    cp[p[i]] += 1;
    ct[t[i]] += 1;
    joint[{p[i], t[i]}] += 1;
  }
  const double hp = entropy_of(cp, n);
  const double ht = entropy_of(ct, n);
  if (hp == 0 && ht == 0) return 1.0;
  if (hp == 0 || ht == 0) return 0.0;
  double mi = 0;
  for (const auto& [key, c] : joint) {
    const double pij = c / n;
    mi += pij * std::log(pij / ((cp[key.first] / n) * (ct[key.second] / n)));
  }
  return mi / std::sqrt(hp * ht);
}

// Exhaustive one-to-one matching over a square padding of the two label sets.
inline double acc(const Lab& p, const Lab& t) {
  std::vector<std::size_t> ps(p.begin(), p.end()), ts(t.begin(), t.end());
  std::sort(ps.begin(), ps.end());
  ps.erase(std::unique(ps.begin(), ps.end()), ps.end());
  std::sort(ts.begin(), ts.end());
  ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
  const std::size_t m = std::max(ps.size(), ts.size());
  std::vector<std::size_t> perm(m);
  std::iota(perm.begin(), perm.end(), 0);
  std::size_t best = 0;
  do {
    std::size_t hit = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const std::size_t a = std::lower_bound(ps.begin(), ps.end(), p[i]) - ps.begin();
      const std::size_t b = std::lower_bound(ts.begin(), ts.end(), t[i]) - ts.begin();
      hit += perm[a] == b;
    }
    best = std::max(best, hit);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return static_cast<double>(best) / static_cast<double>(p.size());
}

inline double purity(const Lab& p, const Lab& t) {
  std::map<std::size_t, std::map<std::size_t, std::size_t>> by_cluster;
  for (std::size_t i = 0; i < p.size(); ++i) ++by_cluster[p[i]][t[i]];
  std::size_t s = 0;
  for (const auto& [_, row] : by_cluster) {
    std::size_t mx = 0;
    for (const auto& [__, c] : row) mx = std::max(mx, c);
    s += mx;
  }
  return static_cast<double>(s) / static_cast<double>(p.size());
}

inline Lab random_labels(gold::Rng& rng, std::size_t n, std::size_t k) {
  Lab out(n);
  for (auto& v : out) v = rng.uniform_int(0, k - 1);
  return out;
}

}  // namespace oracle

namespace fixture {

// Well separated corner classes in the unit square, each built from `subs`
// tight sub-blobs placed on a small ring around the corner. Labels are the
// corner index.
inline gold::Dataset corner_hierarchy(std::size_t classes, std::size_t subs, double spread, double sd,
                                      std::size_t per_sub, gold::Rng& rng) {
  static const double corners[4][2] = {{0, 0}, {1, 0}, {0, 1}, {1, 1}};
  std::vector<std::vector<double>> centers;
  std::vector<std::size_t> owner;
  for (std::size_t a = 0; a < classes; ++a) {
    for (std::size_t s = 0; s < subs; ++s) {
      const double ang = 2.0 * 3.14159265358979 * static_cast<double>(s) / static_cast<double>(subs) + 0.7 * a;
      centers.push_back({corners[a % 4][0] + spread * std::cos(ang), corners[a % 4][1] + spread * std::sin(ang)});
      owner.push_back(a);
    }
  }
  auto ds = gold::make_blobs(gold::Matrix::from_rows(centers), per_sub, sd, rng);
  for (auto& l : *ds.labels) l = owner[l];
  gold::min_max_scale(ds.values);
  return ds;
}

// Four tight blobs forming two super-pairs: one pair near x=0.1, the other
// near x=0.9, blobs within a pair separated by `gap` along y.
inline gold::Dataset super_pairs(std::size_t per_blob, double gap, double sd, gold::Rng& rng) {
  const double lo = 0.5 - gap / 2, hi = 0.5 + gap / 2;
  const auto centers = gold::Matrix::from_rows({{0.1, lo}, {0.1, hi}, {0.9, lo}, {0.9, hi}});
  return gold::make_blobs(centers, per_blob, sd, rng);
}

inline gold::Dataset four_blobs(std::size_t per_blob, double sd, gold::Rng& rng) {
  const auto centers = gold::Matrix::from_rows({{0, 0}, {1, 0}, {0, 1}, {1, 1}});
  auto ds = gold::make_blobs(centers, per_blob, sd, rng);
  gold::min_max_scale(ds.values);
  return ds;
}

// L clients, each drawing a (1 - tau) share of its rows from one shared
// blob and the rest from a blob owned by that client.
inline std::vector<gold::Dataset> mixing_clients(double tau, std::size_t L, std::size_t n, gold::Rng& rng) {
  std::vector<gold::Dataset> out;
  for (std::size_t l = 0; l < L; ++l) {
    const double ang = 2.0 * 3.14159265358979 * static_cast<double>(l) / static_cast<double>(L);
    const double own[2] = {0.5 + 0.4 * std::cos(ang), 0.5 + 0.4 * std::sin(ang)};
    gold::Dataset d;
    d.values = gold::Matrix(n, 2);
    for (std::size_t i = 0; i < n; ++i) {
      const bool mine = rng.uniform() < tau;
      for (std::size_t m = 0; m < 2; ++m) d.values(i, m) = rng.normal(mine ? own[m] : 0.5, 0.05);
    }
    out.push_back(std::move(d));
  }
  return out;
}

}  // namespace fixture
