#pragma once

// Lloyd k-means, the Non-ICD federation splitter and synthetic generators.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "gold/model.hpp"

namespace gold {

struct KMeansResult {
  Matrix centroids;
  AffiliationMatrix assignments;
  std::size_t iterations = 0;
};

inline KMeansResult kmeans(const Matrix& data, std::size_t k, Rng& rng, std::size_t max_iters = 100) {
  const std::size_t n = data.rows();
  const std::size_t d = data.cols();
  if (k < 1 || k > n) throw invalid_config("kmeans: k must lie in [1, n]");
  KMeansResult r;
  r.centroids = Matrix(k, d);
  // k-means++ seeding over distinct rows.
  {
    std::vector<double> d2(n, std::numeric_limits<double>::infinity());
    std::vector<char> taken(n, 0);
    std::size_t pick = rng.uniform_int(0, n - 1);
    for (std::size_t j = 0; j < k; ++j) {
      if (j > 0) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) total += taken[i] ? 0.0 : d2[i];
        if (total > 0.0) {
          double u = rng.uniform() * total;
          pick = n;
          for (std::size_t i = 0; i < n; ++i) {
            if (taken[i] || d2[i] <= 0.0) continue;
            pick = i;
            u -= d2[i];
            if (u < 0.0) break;
          }
        } else {
          // Every remaining row duplicates a seed; take the first unused one.
          pick = 0;
          while (taken[pick]) ++pick;
        }
      }
      taken[pick] = 1;
      std::copy_n(data.row(pick).begin(), d, r.centroids.row(j).begin());
      for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], squared_distance(data.row(i), data.row(pick)));
    }
  }
  r.assignments.k = k;
  auto& a = r.assignments.assignments;
  a.assign(n, k);  // sentinel: nothing assigned yet

  std::vector<double> dist(n);
  for (std::size_t it = 0; it < max_iters; ++it) {
    r.iterations = it + 1;
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = 0;
      double bd = std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < k; ++j) {
        const double s = squared_distance(data.row(i), r.centroids.row(j));
        if (s < bd) {
          bd = s;
          best = j;
        }
      }
      dist[i] = bd;
      if (a[i] != best) {
        a[i] = best;
        changed = true;
      }
    }
    // Re-seed empty clusters from the point farthest from its centroid.
    auto sizes = r.assignments.sizes();
    for (std::size_t j = 0; j < k; ++j) {
      if (sizes[j] > 0) continue;
      std::size_t far = n;
      for (std::size_t i = 0; i < n; ++i) {
        if (sizes[a[i]] > 1 && (far == n || dist[i] > dist[far])) far = i;
      }
      if (far == n) break;
      --sizes[a[far]];
      a[far] = j;
      sizes[j] = 1;
      dist[far] = 0.0;
      changed = true;
    }
    Matrix sums(k, d, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      auto s = sums.row(a[i]);
      auto x = data.row(i);
      for (std::size_t m = 0; m < d; ++m) s[m] += x[m];
    }
    for (std::size_t j = 0; j < k; ++j) {
      if (sizes[j] == 0) continue;
      for (std::size_t m = 0; m < d; ++m) r.centroids(j, m) = sums(j, m) / static_cast<double>(sizes[j]);
    }
    if (!changed) break;
  }
  return r;
}

inline KMeansResult kmeans(const Dataset& data, std::size_t k, std::uint64_t seed, std::size_t max_iters = 100) {
  Rng rng(seed);
  return kmeans(data.values, k, rng, max_iters);
}

struct Range {
  double lo;
  double hi;
};

struct PartitionSpec {
  std::size_t L = 8;
  std::size_t k_sub_min = 2;
  std::size_t k_sub_max = 5;
  Range sample_fraction{0.25, 0.75};
  // Clusters per client, as fractions of k: draws from [ceil(lo*k), ceil(hi*k)], at least 1.
  Range cluster_fraction{0.0, 1.0};
  // Subclusters kept per selected cluster, as fractions of k_sub.
  Range select_fraction{0.0, 1.0};
  std::uint64_t seed = 0;

  void validate() const {
    if (L < 1) throw invalid_config("PartitionSpec: L must be >= 1");
    if (k_sub_min < 1 || k_sub_max < k_sub_min) throw invalid_config("PartitionSpec: bad k_sub range");
    auto ok = [](Range r, double floor) { return r.lo >= floor && r.lo <= r.hi && r.hi <= 1.0; };
    if (!ok(sample_fraction, 0.0) || !(sample_fraction.lo > 0.0)) {
      throw invalid_config("PartitionSpec: sample fractions must lie in (0, 1]");
    }
    if (!ok(cluster_fraction, 0.0) || !ok(select_fraction, 0.0)) {
      throw invalid_config("PartitionSpec: fraction ranges must lie in [0, 1]");
    }
  }
};

enum class LambdaLevel { low, medium, high };

inline PartitionSpec lambda_preset(LambdaLevel level, PartitionSpec base = {}) {
  switch (level) {
    case LambdaLevel::low:
      base.cluster_fraction = {1.0, 1.0};
      base.select_fraction = {1.0, 1.0};
      break;
    case LambdaLevel::medium:
      base.cluster_fraction = {0.0, 1.0};
      base.select_fraction = {0.0, 1.0};
      break;
    case LambdaLevel::high:
      base.cluster_fraction = {0.0, 0.25};
      base.select_fraction = {0.0, 0.25};
      break;
  }
  return base;
}

inline LambdaLevel parse_lambda_level(const std::string& s) {
  if (s == "low") return LambdaLevel::low;
  if (s == "medium") return LambdaLevel::medium;
  if (s == "high") return LambdaLevel::high;
  throw invalid_config("unknown lambda level '" + s + "'");
}

inline void to_json(nlohmann::json& j, const PartitionSpec& s) {
  j = nlohmann::json{{"L", s.L},
                     {"k_sub_range", {s.k_sub_min, s.k_sub_max}},
                     {"sample_fraction_range", {s.sample_fraction.lo, s.sample_fraction.hi}},
                     {"cluster_fraction_range", {s.cluster_fraction.lo, s.cluster_fraction.hi}},
                     {"select_fraction_range", {s.select_fraction.lo, s.select_fraction.hi}},
                     {"seed", s.seed}};
}

inline void from_json(const nlohmann::json& j, PartitionSpec& s) {
  s.L = j.value("L", s.L);
  auto pair = [&](const char* key, auto& lo, auto& hi) {
    if (!j.contains(key)) return;
    const auto& v = j.at(key);
    if (!v.is_array() || v.size() != 2) throw invalid_config(std::string(key) + " must be a 2-element array");
    v.at(0).get_to(lo);
    v.at(1).get_to(hi);
  };
  pair("k_sub_range", s.k_sub_min, s.k_sub_max);
  pair("sample_fraction_range", s.sample_fraction.lo, s.sample_fraction.hi);
  pair("cluster_fraction_range", s.cluster_fraction.lo, s.cluster_fraction.hi);
  pair("select_fraction_range", s.select_fraction.lo, s.select_fraction.hi);
  s.seed = j.value("seed", s.seed);
}

struct ObjectOrigin {
  std::size_t global_index;
  std::size_t global_cluster;  // position among the sorted distinct labels
  std::size_t subcluster;      // client-local subcluster id within that cluster
  bool operator==(const ObjectOrigin&) const = default;
};

struct FederationSplit {
  std::vector<Dataset> clients;
  std::vector<std::vector<ObjectOrigin>> provenance;  // per client, per object
  PartitionSpec spec;
  std::optional<Dataset> global;
};

namespace detail {

inline std::size_t draw_count(Rng& rng, Range r, std::size_t of) {
  const double x = static_cast<double>(of);
  auto lo = static_cast<std::size_t>(std::ceil(r.lo * x - 1e-9));
  auto hi = static_cast<std::size_t>(std::ceil(r.hi * x - 1e-9));
  lo = std::clamp<std::size_t>(lo, 1, of);
  hi = std::clamp<std::size_t>(hi, lo, of);
  return rng.uniform_int(lo, hi);
}

}  // namespace detail

// Splits a labelled dataset across spec.L clients: each client sees a random
// subset of clusters, each cut into k-means subclusters of which only some
// are kept, and then a random fraction of the pooled objects.
inline FederationSplit simulate_non_icd(const Dataset& data, const PartitionSpec& spec) {
  spec.validate();
  if (!data.labels) throw invalid_input("simulate_non_icd: labels are required");
  data.validate();

  std::map<std::size_t, std::vector<std::size_t>> by_label;
  for (std::size_t i = 0; i < data.n(); ++i) by_label[(*data.labels)[i]].push_back(i);
  std::vector<std::vector<std::size_t>> clusters;
  for (auto& [label, idx] : by_label) {
    if (idx.size() < 2) throw invalid_input("simulate_non_icd: every cluster needs >= 2 objects");
    clusters.push_back(std::move(idx));
  }
  const std::size_t k = clusters.size();

  FederationSplit out;
  out.spec = spec;
  out.global = data;
  const Rng root(spec.seed);
  constexpr int kMaxRetries = 16;
  for (std::size_t l = 0; l < spec.L; ++l) {
    Rng rng = root.fork(l);
    std::vector<ObjectOrigin> pool;
    for (int attempt = 0; attempt < kMaxRetries && pool.empty(); ++attempt) {
      const std::size_t k_l = detail::draw_count(rng, spec.cluster_fraction, k);
      for (std::size_t c : rng.sample(k, k_l)) {
        const auto& members = clusters[c];
        const std::size_t cap = std::max<std::size_t>(1, members.size() / 2);
        const std::size_t k_sub =
            std::min(cap, rng.uniform_int(spec.k_sub_min, spec.k_sub_max));
        Matrix sub(0, data.d());
        for (std::size_t i : members) sub.append_row(data.values.row(i));
        const auto km = kmeans(sub, k_sub, rng);
        const std::size_t n_sel = detail::draw_count(rng, spec.select_fraction, k_sub);
        const auto chosen = rng.sample(k_sub, n_sel);
        for (std::size_t t = 0; t < members.size(); ++t) {
          const std::size_t s = km.assignments.assignments[t];
          if (std::find(chosen.begin(), chosen.end(), s) != chosen.end()) pool.push_back({members[t], c, s});
        }
      }
      if (pool.empty()) continue;
      const std::size_t N = pool.size();
      auto lo = static_cast<std::size_t>(std::ceil(spec.sample_fraction.lo * static_cast<double>(N) - 1e-9));
      auto hi = static_cast<std::size_t>(std::floor(spec.sample_fraction.hi * static_cast<double>(N) + 1e-9));
      lo = std::max<std::size_t>(lo, 1);
      hi = std::clamp<std::size_t>(hi, lo, N);
      const std::size_t n_l = rng.uniform_int(lo, hi);
      auto pick = rng.sample(N, n_l);
      std::sort(pick.begin(), pick.end());
      std::vector<ObjectOrigin> kept;
      for (std::size_t p : pick) kept.push_back(pool[p]);
      pool = std::move(kept);
    }
    if (pool.empty()) throw invalid_input("simulate_non_icd: could not draw a non-empty client");

    Dataset client;
    client.name = "client_" + std::to_string(l);
    client.values = Matrix(0, data.d());
    client.labels = Labels{};
    for (const auto& o : pool) {
      client.values.append_row(data.values.row(o.global_index));
      client.labels->push_back((*data.labels)[o.global_index]);
    }
    out.clients.push_back(std::move(client));
    out.provenance.push_back(std::move(pool));
  }
  return out;
}

// Isotropic Gaussian blobs, `per_cluster` points around each row of centers.
inline Dataset make_blobs(const Matrix& centers, std::size_t per_cluster, double sd, Rng& rng) {
  Dataset ds;
  ds.name = "blobs";
  ds.values = Matrix(centers.rows() * per_cluster, centers.cols());
  ds.labels = Labels(centers.rows() * per_cluster);
  std::size_t i = 0;
  for (std::size_t c = 0; c < centers.rows(); ++c) {
    for (std::size_t p = 0; p < per_cluster; ++p, ++i) {
      for (std::size_t m = 0; m < centers.cols(); ++m) ds.values(i, m) = rng.normal(centers(c, m), sd);
      (*ds.labels)[i] = c;
    }
  }
  return ds;
}

// n points from a k-component isotropic mixture whose means sit on random
// corners of the unit cube. Means depend only on (k, d, center_seed).
inline Dataset gaussian_mixture(std::size_t n, std::size_t d, std::size_t k, double sd, Rng& rng,
                                std::uint64_t center_seed = 0) {
  Rng crng(center_seed);
  Matrix centers(k, d);
  for (double& v : centers.values()) v = crng.uniform() < 0.5 ? 0.0 : 1.0;
  Dataset ds;
  ds.name = "mixture";
  ds.values = Matrix(n, d);
  ds.labels = Labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = i % k;
    for (std::size_t m = 0; m < d; ++m) ds.values(i, m) = rng.normal(centers(c, m), sd);
    (*ds.labels)[i] = c;
  }
  return ds;
}

}  // namespace gold
