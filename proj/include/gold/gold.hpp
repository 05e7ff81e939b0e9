#pragma once

// End-to-end runner: client fits, server exploration, categorical
// aggregation, label propagation back to client objects, evaluation,
// ablations and the scaling benchmark.

#include <chrono>
#include <cmath>
#include <future>
#include <string>
#include <variant>
#include <vector>

#include "gold/cpl.hpp"
#include "gold/fcpl_client.hpp"
#include "gold/heterogeneity.hpp"
#include "gold/mcpl_server.hpp"
#include "gold/metrics.hpp"
#include "gold/model.hpp"
#include "gold/remc.hpp"
#include "gold/simulate.hpp"

namespace gold {

enum class AblationKind { full, no_fcpl, no_mcpl, neither, drop_level, prefix_levels };

struct Ablation {
  AblationKind kind = AblationKind::full;
  std::size_t level = 0;  // 1-based level for drop_level, count for prefix_levels

  std::string name() const {
    switch (kind) {
      case AblationKind::full: return "full";
      case AblationKind::no_fcpl: return "no_fcpl";
      case AblationKind::no_mcpl: return "no_mcpl";
      case AblationKind::neither: return "neither";
      case AblationKind::drop_level: return "drop_level " + std::to_string(level);
      case AblationKind::prefix_levels: return "prefix_levels " + std::to_string(level);
    }
    return "unknown";
  }
  bool uses_fcpl() const { return kind != AblationKind::no_fcpl && kind != AblationKind::neither; }
  bool uses_mcpl() const { return kind != AblationKind::no_mcpl && kind != AblationKind::neither; }
};

struct RunOptions {
  Ablation ablation;
  bool evaluate = true;          // federated and assign-only indices
  bool measure_lambda = true;
};

struct PhaseTimes {
  double clients = 0.0;
  double server = 0.0;
  double aggregation = 0.0;
  double evaluation = 0.0;
  double total = 0.0;
};

struct ExperimentReport {
  RunConfig config;
  std::size_t k_star = 0;
  std::string ablation = "full";
  std::string client_method;
  std::vector<std::size_t> client_k;
  GranularityStack stack;  // after deduplication and level filtering
  std::size_t raw_delta = 0;
  std::size_t global_k = 0;
  std::optional<Indices> federated;
  std::optional<Indices> assign_only;
  std::optional<double> lambda;
  // Global cluster of every client object, per client.
  std::vector<std::vector<std::size_t>> client_predictions;
  std::vector<std::size_t> stacked_global;  // global cluster per stacked centroid
  Matrix representatives;                   // raw-space mean of member centroids
  PhaseTimes times;
};

inline std::size_t sqrt_heuristic_k(std::size_t n) {
  const auto k = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(n))));
  return std::min(n, std::max<std::size_t>(2, k));
}

namespace detail {

using Clock = std::chrono::steady_clock;

inline double seconds_since(Clock::time_point t) {
  return std::chrono::duration<double>(Clock::now() - t).count();
}

inline ClientResult kmeans_client(const Dataset& local, std::int64_t id, Rng& rng) {
  const auto km = kmeans(local.values, sqrt_heuristic_k(local.n()), rng);
  ClientResult r;
  r.local_assignments = km.assignments;
  // Drop clusters that ended up empty so the upload holds real centroids only.
  const auto sizes = km.assignments.sizes();
  std::vector<std::size_t> remap(sizes.size());
  std::size_t next = 0;
  Matrix c(0, local.d());
  for (std::size_t j = 0; j < sizes.size(); ++j) {
    if (sizes[j] == 0) continue;
    remap[j] = next++;
    c.append_row(km.centroids.row(j));
  }
  for (auto& a : r.local_assignments.assignments) a = remap[a];
  r.local_assignments.k = next;
  r.k_local = next;
  r.upload = CentroidUpload{id, next, local.d(), std::move(c)};
  return r;
}

inline GranularityStack filter_levels(const GranularityStack& stack, const Ablation& ab) {
  const std::size_t delta = stack.delta();
  std::vector<std::size_t> keep;
  if (ab.kind == AblationKind::drop_level) {
    if (delta <= 1) throw invalid_config("drop_level: cannot drop the only granularity level");
    if (ab.level < 1 || ab.level > delta) throw invalid_config("drop_level: level out of range");
    for (std::size_t t = 0; t < delta; ++t) {
      if (t + 1 != ab.level) keep.push_back(t);
    }
    return select_levels(stack, keep);
  }
  if (ab.kind == AblationKind::prefix_levels) {
    if (ab.level < 1) throw invalid_config("prefix_levels: t must be >= 1");
    for (std::size_t t = 0; t < std::min(ab.level, delta); ++t) keep.push_back(t);
    return select_levels(stack, keep);
  }
  return stack;
}

}  // namespace detail

// Labels raw objects by their nearest representative and scores the result.
inline Indices assign_only_global_eval(const Dataset& raw_global, const Matrix& representatives) {
  if (representatives.rows() == 0) throw invalid_input("assign_only_global_eval: no clusters");
  if (!raw_global.labels) throw invalid_input("assign_only_global_eval: labels are required");
  if (representatives.cols() != raw_global.d()) throw dimension_mismatch("assign_only_global_eval: width mismatch");
  std::vector<std::size_t> pred(raw_global.n());
  for (std::size_t i = 0; i < raw_global.n(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < representatives.rows(); ++j) {
      const double s = squared_distance(raw_global.values.row(i), representatives.row(j));
      if (s < best) {
        best = s;
        pred[i] = j;
      }
    }
  }
  return compute_indices(raw_global.values, pred, *raw_global.labels);
}

inline ExperimentReport run_gold(const FederationSplit& split, std::size_t k_star, const RunConfig& config,
                                 const RunOptions& options = {}) {
  config.validate();
  if (split.clients.empty()) throw invalid_input("run_gold: split has no clients");
  if (k_star < 1) throw invalid_config("run_gold: k* must be >= 1");
  const auto t_start = detail::Clock::now();
  const Rng root(config.seed);
  const Ablation& ab = options.ablation;

  ExperimentReport rep;
  rep.config = config;
  rep.k_star = k_star;
  rep.ablation = ab.name();
  rep.client_method = ab.uses_fcpl() ? "fcpl" : "kmeans_sqrt_n";

  // Clients.
  auto t = detail::Clock::now();
  const std::size_t L = split.clients.size();
  std::vector<ClientResult> results(L);
  auto fit_one = [&](std::size_t l) {
    Rng rng = root.fork(l);
    const auto id = static_cast<std::int64_t>(l);
    return ab.uses_fcpl() ? fcpl_fit(split.clients[l], config, id, rng)
                          : detail::kmeans_client(split.clients[l], id, rng);
  };
  if (config.parallel_clients) {
    std::vector<std::future<ClientResult>> jobs;
    for (std::size_t l = 0; l < L; ++l) jobs.push_back(std::async(std::launch::async, fit_one, l));
    for (std::size_t l = 0; l < L; ++l) results[l] = jobs[l].get();
  } else {
    for (std::size_t l = 0; l < L; ++l) results[l] = fit_one(l);
  }
  std::vector<CentroidUpload> uploads;
  for (const auto& r : results) {
    rep.client_k.push_back(r.k_local);
    uploads.push_back(r.upload);
  }
  rep.times.clients = detail::seconds_since(t);

  // Server.
  t = detail::Clock::now();
  const auto stacked = stack_uploads(uploads);
  const std::size_t n_stacked = stacked.data.n();
  if (n_stacked == 0) throw invalid_input("run_gold: empty stack");
  if (k_star > n_stacked) throw invalid_config("run_gold: k* exceeds the number of stacked centroids");
  Rng server_rng = root.fork(0xFFFF0001ULL);
  Rng remc_rng = root.fork(0xFFFF0002ULL);
  AffiliationMatrix global;
  if (ab.uses_mcpl()) {
    const auto explored = mcpl_explore(stacked.data, config, server_rng);
    rep.raw_delta = explored.delta();
    rep.stack = detail::filter_levels(dedupe_levels(explored), ab);
    rep.times.server = detail::seconds_since(t);
    t = detail::Clock::now();
    global = remc_cluster(encode(rep.stack), k_star, config, remc_rng).assignments;
  } else {
    rep.times.server = detail::seconds_since(t);
    t = detail::Clock::now();
    global = kmeans(stacked.data.values, k_star, remc_rng).assignments;
  }
  rep.times.aggregation = detail::seconds_since(t);
  rep.global_k = global.k;
  rep.stacked_global = global.assignments;

  // Propagate global ids back to client objects.
  t = detail::Clock::now();
  std::size_t offset = 0;
  for (std::size_t l = 0; l < L; ++l) {
    std::vector<std::size_t> pred;
    pred.reserve(results[l].local_assignments.n());
    for (std::size_t a : results[l].local_assignments.assignments) pred.push_back(global.assignments[offset + a]);
    offset += results[l].k_local;
    rep.client_predictions.push_back(std::move(pred));
  }

  // Raw-space representatives, empty global clusters skipped.
  {
    const std::size_t d = stacked.data.d();
    Matrix sums(global.k, d, 0.0);
    const auto sizes = global.sizes();
    for (std::size_t i = 0; i < n_stacked; ++i) {
      for (std::size_t m = 0; m < d; ++m) sums(global.assignments[i], m) += stacked.data.values(i, m);
    }
    rep.representatives = Matrix(0, d);
    for (std::size_t j = 0; j < global.k; ++j) {
      if (sizes[j] == 0) continue;
      auto row = sums.row(j);
      for (double& v : row) v /= static_cast<double>(sizes[j]);
      rep.representatives.append_row(row);
    }
  }

  if (options.evaluate) {
    bool labelled = true;
    for (const auto& c : split.clients) labelled = labelled && c.labels.has_value();
    if (labelled) {
      Matrix all(0, stacked.data.d());
      std::vector<std::size_t> pred;
      std::vector<std::size_t> truth;
      for (std::size_t l = 0; l < L; ++l) {
        const auto& c = split.clients[l];
        for (std::size_t i = 0; i < c.n(); ++i) {
          all.append_row(c.values.row(i));
          pred.push_back(rep.client_predictions[l][i]);
          truth.push_back((*c.labels)[i]);
        }
      }
      rep.federated = compute_indices(all, pred, truth);
    }
    if (split.global && split.global->labels) {
      rep.assign_only = assign_only_global_eval(*split.global, rep.representatives);
    }
  }
  if (options.measure_lambda && L >= 2) rep.lambda = non_icd_degree(split.clients).lambda;
  rep.times.evaluation = detail::seconds_since(t);
  rep.times.total = detail::seconds_since(t_start);
  return rep;
}

inline ExperimentReport ablate(const FederationSplit& split, std::size_t k_star, const RunConfig& config,
                               Ablation mode, bool measure_lambda = false) {
  RunOptions o;
  o.ablation = mode;
  o.measure_lambda = measure_lambda;
  return run_gold(split, k_star, config, o);
}

inline Ablation parse_ablation(const std::string& mode, std::size_t level = 0) {
  if (mode == "full") return {AblationKind::full, 0};
  if (mode == "no_fcpl") return {AblationKind::no_fcpl, 0};
  if (mode == "no_mcpl") return {AblationKind::no_mcpl, 0};
  if (mode == "neither") return {AblationKind::neither, 0};
  if (mode == "drop_level") return {AblationKind::drop_level, level};
  if (mode == "prefix_levels") {
    if (level < 1) throw invalid_config("prefix_levels: t must be >= 1");
    return {AblationKind::prefix_levels, level};
  }
  throw invalid_config("unknown ablation mode '" + mode + "'");
}

// Deterministic part of the report. Wall times are kept out on purpose so
// identical inputs give identical bytes; see times_to_json.
inline nlohmann::ordered_json report_to_json(const ExperimentReport& r) {
  nlohmann::ordered_json j;
  nlohmann::json cfg = r.config;
  j["config"] = cfg;
  j["k_star"] = r.k_star;
  j["ablation"] = r.ablation;
  j["client_method"] = r.client_method;
  j["client_k"] = r.client_k;
  nlohmann::ordered_json st;
  st["raw_delta"] = r.raw_delta;
  st["delta"] = r.stack.delta();
  st["cluster_counts"] = r.stack.cluster_counts;
  st["objectives"] = r.stack.objectives;
  j["granularity_stack"] = std::move(st);
  j["global_k"] = r.global_k;
  j["federated"] = r.federated ? indices_to_json(*r.federated) : nlohmann::ordered_json(nullptr);
  j["assign_only"] = r.assign_only ? indices_to_json(*r.assign_only) : nlohmann::ordered_json(nullptr);
  j["lambda"] = r.lambda ? nlohmann::ordered_json(*r.lambda) : nlohmann::ordered_json(nullptr);
  j["stacked_global"] = r.stacked_global;
  j["client_predictions"] = r.client_predictions;
  return j;
}

inline nlohmann::ordered_json times_to_json(const PhaseTimes& t) {
  nlohmann::ordered_json j;
  j["clients"] = t.clients;
  j["server"] = t.server;
  j["aggregation"] = t.aggregation;
  j["evaluation"] = t.evaluation;
  j["total"] = t.total;
  return j;
}

// ---------------------------------------------------------------------------
// Scaling benchmark
// ---------------------------------------------------------------------------

enum class BenchAxis { objects, dims };

struct BenchRow {
  std::size_t size;
  double seconds;
  PhaseTimes phases;
};

struct BenchResult {
  BenchAxis axis;
  std::vector<BenchRow> rows;
  double slope = 0.0;
  bool insufficient_spread = false;
};

// Least-squares slope of log(y) against log(x).
inline double log_log_slope(const std::vector<double>& x, const std::vector<double>& y, bool* degenerate = nullptr) {
  const std::size_t n = x.size();
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = std::log(x[i]) - mx;
    sxx += dx * dx;
    sxy += dx * (std::log(y[i]) - my);
  }
  const bool flat = sxx < 1e-12;
  if (degenerate) *degenerate = flat;
  return flat ? 0.0 : sxy / sxx;
}

struct BenchSettings {
  std::size_t fixed_n = 500;   // used on the dims axis
  std::size_t fixed_d = 10;    // used on the objects axis
  std::size_t clusters = 5;
  std::size_t L = 8;
  double sd = 0.05;
  std::size_t repeats = 3;     // best-of timing
};

inline BenchResult bench_scaling(BenchAxis axis, const std::vector<std::size_t>& points, const RunConfig& config,
                                 const BenchSettings& s = {}) {
  if (points.size() < 3) throw invalid_config("bench: need at least three sizes");
  BenchResult out;
  out.axis = axis;
  std::vector<double> xs, ys;
  for (std::size_t idx = 0; idx < points.size(); ++idx) {
    const std::size_t n = axis == BenchAxis::objects ? points[idx] : s.fixed_n;
    const std::size_t d = axis == BenchAxis::dims ? points[idx] : s.fixed_d;
    Rng rng = Rng(config.seed).fork(points[idx]);
    const auto data = gaussian_mixture(n, d, s.clusters, s.sd, rng, config.seed);

    // Random even split into L clients.
    FederationSplit split;
    const auto perm = rng.permutation(n);
    for (std::size_t l = 0; l < s.L; ++l) {
      Dataset c;
      c.name = "client_" + std::to_string(l);
      c.values = Matrix(0, d);
      c.labels = Labels{};
      for (std::size_t p = l; p < n; p += s.L) {
        c.values.append_row(data.values.row(perm[p]));
        c.labels->push_back((*data.labels)[perm[p]]);
      }
      split.clients.push_back(std::move(c));
    }
    RunOptions o;
    o.evaluate = false;
    o.measure_lambda = false;
    BenchRow row{points[idx], std::numeric_limits<double>::infinity(), {}};
    for (std::size_t rep = 0; rep < std::max<std::size_t>(1, s.repeats); ++rep) {
      const auto r = run_gold(split, s.clusters, config, o);
      if (r.times.total < row.seconds) {
        row.seconds = r.times.total;
        row.phases = r.times;
      }
    }
    out.rows.push_back(row);
    xs.push_back(static_cast<double>(points[idx]));
    ys.push_back(std::max(row.seconds, 1e-9));
  }
  out.slope = log_log_slope(xs, ys, &out.insufficient_spread);
  return out;
}

inline nlohmann::ordered_json bench_to_json(const BenchResult& b) {
  nlohmann::ordered_json j;
  j["axis"] = b.axis == BenchAxis::objects ? "objects" : "dims";
  auto rows = nlohmann::ordered_json::array();
  for (const auto& r : b.rows) {
    nlohmann::ordered_json x;
    x["size"] = r.size;
    x["seconds"] = r.seconds;
    x["phases"] = times_to_json(r.phases);
    rows.push_back(std::move(x));
  }
  j["rows"] = std::move(rows);
  j["slope"] = b.slope;
  j["insufficient_spread"] = b.insufficient_spread;
  return j;
}

}  // namespace gold
