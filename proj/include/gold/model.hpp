#pragma once

// Shared data types, CSV ingestion, seeded randomness and the one-shot
// centroid upload message.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <json.hpp>

namespace gold {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

struct parse_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct validation_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct empty_input_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct invalid_config : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct invalid_input : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct dimension_mismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct undefined_metric : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Matrix
// ---------------------------------------------------------------------------

// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_{rows}, cols_{cols}, data_(rows * cols, fill) {}

  static Matrix from_rows(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) return {};
    Matrix m(rows.size(), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != m.cols_) {
        throw dimension_mismatch("ragged rows in Matrix::from_rows");
      }
      std::copy(rows[i].begin(), rows[i].end(), m.row(i).begin());
    }
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const {
    return {data_.data() + i * cols_, cols_};
  }

  const std::vector<double>& values() const noexcept { return data_; }
  std::vector<double>& values() noexcept { return data_; }

  void append_row(std::span<const double> r) {
    if (rows_ == 0 && cols_ == 0) cols_ = r.size();
    if (r.size() != cols_) throw dimension_mismatch("append_row: width mismatch");
    data_.insert(data_.end(), r.begin(), r.end());
    ++rows_;
  }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t m = 0; m < a.size(); ++m) {
    const double t = a[m] - b[m];
    s += t * t;
  }
  return s;
}

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

using Labels = std::vector<std::size_t>;

struct Dataset {
  Matrix values;
  std::optional<Labels> labels;
  std::string name;

  std::size_t n() const noexcept { return values.rows(); }
  std::size_t d() const noexcept { return values.cols(); }

  // Throws validation_error when an invariant is broken.
  void validate() const {
    if (values.rows() == 0) throw validation_error("dataset '" + name + "' has no rows");
    if (values.cols() == 0) throw validation_error("dataset '" + name + "' has no features");
    for (double v : values.values()) {
      if (!std::isfinite(v)) throw validation_error("dataset '" + name + "' has a non-finite value");
    }
    if (labels && labels->size() != values.rows()) {
      throw validation_error("dataset '" + name + "' label count differs from row count");
    }
  }
};

// One cluster index per object; every index < k.
struct AffiliationMatrix {
  std::vector<std::size_t> assignments;
  std::size_t k = 0;

  std::size_t n() const noexcept { return assignments.size(); }

  bool valid() const noexcept {
    if (k == 0) return assignments.empty();
    return std::all_of(assignments.begin(), assignments.end(),
                       [this](std::size_t a) { return a < k; });
  }

  std::vector<std::size_t> sizes() const {
    std::vector<std::size_t> out(k, 0);
    for (std::size_t a : assignments) ++out[a];
    return out;
  }

  bool operator==(const AffiliationMatrix&) const = default;
};

// The client -> server one-shot message.
struct CentroidUpload {
  std::int64_t client_id = 0;
  std::size_t k = 0;
  std::size_t d = 0;
  Matrix centroids;

  void validate() const {
    if (k == 0) throw validation_error("upload: k must be >= 1");
    if (d == 0) throw validation_error("upload: d must be >= 1");
    if (centroids.rows() != k || centroids.cols() != d) {
      throw dimension_mismatch("upload: centroid matrix does not match k x d");
    }
    for (double v : centroids.values()) {
      if (!std::isfinite(v)) throw validation_error("upload: non-finite centroid value");
    }
  }

  bool operator==(const CentroidUpload&) const = default;
};

struct RunConfig {
  double eta = 0.05;
  double k0_fraction = 0.5;
  double weight_floor = 1e-3;
  double objective_eps = 1e-6;
  std::size_t max_epochs = 100;
  std::size_t max_granularities = 12;
  std::uint64_t seed = 0;
  bool fixed_prototypes = false;
  // Initial cluster weights satisfy w/(1-w) = init_odds / (k0 - 1).
  // init_odds = 1 gives w = 1/k0 exactly.
  double init_odds = 400.0;
  // Upper bound on the initial candidate count; 0 means unbounded.
  std::size_t max_k0 = 0;
  bool parallel_clients = false;

  void validate() const {
    if (!(eta > 0.0)) throw invalid_config("eta must be > 0");
    if (!(k0_fraction > 0.0 && k0_fraction <= 1.0)) {
      throw invalid_config("k0_fraction must lie in (0, 1]");
    }
    if (!(weight_floor > 0.0 && weight_floor < 1.0)) {
      throw invalid_config("weight_floor must lie in (0, 1)");
    }
    if (!(objective_eps >= 0.0)) throw invalid_config("objective_eps must be >= 0");
    if (max_epochs < 1 || max_granularities < 1) throw invalid_config("caps must be >= 1");
    if (!(init_odds > 0.0)) throw invalid_config("init_odds must be > 0");
  }
};

inline void to_json(nlohmann::json& j, const RunConfig& c) {
  j = nlohmann::json{{"eta", c.eta},
                     {"k0_fraction", c.k0_fraction},
                     {"weight_floor", c.weight_floor},
                     {"objective_eps", c.objective_eps},
                     {"max_epochs", c.max_epochs},
                     {"max_granularities", c.max_granularities},
                     {"seed", c.seed},
                     {"fixed_prototypes", c.fixed_prototypes},
                     {"init_odds", c.init_odds},
                     {"max_k0", c.max_k0},
                     {"parallel_clients", c.parallel_clients}};
}

inline void from_json(const nlohmann::json& j, RunConfig& c) {
  c.eta = j.value("eta", c.eta);
  c.k0_fraction = j.value("k0_fraction", c.k0_fraction);
  c.weight_floor = j.value("weight_floor", c.weight_floor);
  c.objective_eps = j.value("objective_eps", c.objective_eps);
  c.max_epochs = j.value("max_epochs", c.max_epochs);
  c.max_granularities = j.value("max_granularities", c.max_granularities);
  c.seed = j.value("seed", c.seed);
  c.fixed_prototypes = j.value("fixed_prototypes", c.fixed_prototypes);
  c.init_odds = j.value("init_odds", c.init_odds);
  c.max_k0 = j.value("max_k0", c.max_k0);
  c.parallel_clients = j.value("parallel_clients", c.parallel_clients);
}

// ---------------------------------------------------------------------------
// Randomness
// ---------------------------------------------------------------------------

inline std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Seeded generator. Independent streams come from fork(id), so results never
// depend on the order in which streams are consumed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_{seed}, engine_{splitmix64(seed)} {}

  Rng fork(std::uint64_t stream) const {
    return Rng{splitmix64(seed_ ^ splitmix64(stream + 0x5851F42D4C957F2DULL))};
  }

  std::uint64_t seed() const noexcept { return seed_; }
  std::mt19937_64& engine() noexcept { return engine_; }

  // Uniform integer in [lo, hi].
  std::size_t uniform_int(std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>{lo, hi}(engine_);
  }
  double uniform() { return std::uniform_real_distribution<double>{0.0, 1.0}(engine_); }
  double normal(double mean = 0.0, double sd = 1.0) {
    return std::normal_distribution<double>{mean, sd}(engine_);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    std::shuffle(v.begin(), v.end(), engine_);
  }

  // Random permutation of 0..n-1.
  std::vector<std::size_t> permutation(std::size_t n) {
    std::vector<std::size_t> p(n);
    std::iota(p.begin(), p.end(), std::size_t{0});
    shuffle(p);
    return p;
  }

  // k distinct indices from 0..n-1, in draw order.
  std::vector<std::size_t> sample(std::size_t n, std::size_t k) {
    if (k > n) throw invalid_config("cannot sample more indices than available");
    std::vector<std::size_t> p(n);
    std::iota(p.begin(), p.end(), std::size_t{0});
    for (std::size_t i = 0; i < k; ++i) {
      std::swap(p[i], p[uniform_int(i, n - 1)]);
    }
    p.resize(k);
    return p;
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

// ---------------------------------------------------------------------------
// CSV ingestion
// ---------------------------------------------------------------------------

enum class Scaling { min_max, none };

inline void min_max_scale(Matrix& m) {
  for (std::size_t j = 0; j < m.cols(); ++j) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::size_t i = 0; i < m.rows(); ++i) {
      lo = std::min(lo, m(i, j));
      hi = std::max(hi, m(i, j));
    }
    const double span = hi - lo;
    for (std::size_t i = 0; i < m.rows(); ++i) {
      m(i, j) = span > 0.0 ? (m(i, j) - lo) / span : 0.0;
    }
  }
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline double parse_double(std::string_view field, std::size_t row) {
  field = trim(field);
  double v = 0.0;
  const auto* first = field.data();
  const auto* last = field.data() + field.size();
  if (!field.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (field.empty() || ec == std::errc::invalid_argument || ptr != last) {
    throw parse_error("row " + std::to_string(row) + ": cannot parse '" + std::string(field) + "'");
  }
  if (ec == std::errc::result_out_of_range || !std::isfinite(v)) {
    throw validation_error("row " + std::to_string(row) + ": non-finite value");
  }
  return v;
}

}  // namespace detail

inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

// Parses CSV text. Rows are 1-based in error messages; blank lines are skipped.
inline Dataset parse_csv(std::string_view text, bool has_labels, Scaling scaling = Scaling::min_max,
                         std::string name = {}) {
  Dataset ds;
  ds.name = std::move(name);
  Labels labels;
  std::size_t width = 0;
  std::size_t row_no = 0;
  std::vector<double> fields;

  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = detail::trim(text.substr(pos, end - pos));
    pos = end + 1;
    ++row_no;
    if (line.empty()) {
      if (end == text.size()) break;
      continue;
    }
    fields.clear();
    std::size_t f = 0;
    while (true) {
      std::size_t comma = line.find(',', f);
      fields.push_back(detail::parse_double(line.substr(f, comma == std::string_view::npos
                                                               ? std::string_view::npos
                                                               : comma - f),
                                            row_no));
      if (comma == std::string_view::npos) break;
      f = comma + 1;
    }
    if (width == 0) {
      width = fields.size();
      if (has_labels && width < 2) {
        throw parse_error("row " + std::to_string(row_no) + ": need at least one feature and a label");
      }
    } else if (fields.size() != width) {
      throw parse_error("row " + std::to_string(row_no) + ": expected " + std::to_string(width) +
                        " fields, found " + std::to_string(fields.size()));
    }
    std::span<const double> features(fields);
    if (has_labels) {
      const double lab = fields.back();
      if (lab < 0.0 || lab != std::floor(lab)) {
        throw parse_error("row " + std::to_string(row_no) + ": label must be a non-negative integer");
      }
      labels.push_back(static_cast<std::size_t>(lab));
      features = features.first(width - 1);
    }
    ds.values.append_row(features);
    if (end == text.size()) break;
  }
  if (ds.values.rows() == 0) throw empty_input_error("CSV input has no data rows");
  if (has_labels) ds.labels = std::move(labels);
  if (scaling == Scaling::min_max) min_max_scale(ds.values);
  ds.validate();
  return ds;
}

inline Dataset load_csv(const std::string& path, bool has_labels, Scaling scaling = Scaling::min_max) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw invalid_input("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_csv(buf.str(), has_labels, scaling, path);
}

inline std::string to_csv(const Dataset& ds) {
  std::string out;
  for (std::size_t i = 0; i < ds.n(); ++i) {
    for (std::size_t j = 0; j < ds.d(); ++j) {
      if (j) out += ',';
      out += format_double(ds.values(i, j));
    }
    if (ds.labels) {
      out += ',';
      out += std::to_string((*ds.labels)[i]);
    }
    out += '\n';
  }
  return out;
}

inline void save_csv(const std::string& path, const Dataset& ds) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw invalid_input("cannot write " + path);
  out << to_csv(ds);
}

// ---------------------------------------------------------------------------
// Upload message
// ---------------------------------------------------------------------------

inline nlohmann::ordered_json upload_to_json(const CentroidUpload& u) {
  u.validate();
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < u.k; ++i) {
    auto r = u.centroids.row(i);
    rows.push_back(std::vector<double>(r.begin(), r.end()));
  }
  nlohmann::ordered_json j;
  j["client_id"] = u.client_id;
  j["k"] = u.k;
  j["d"] = u.d;
  j["centroids"] = std::move(rows);
  return j;
}

inline std::string serialize_upload(const CentroidUpload& u) { return upload_to_json(u).dump(); }

template <typename Json>
CentroidUpload upload_from_json(const Json& j) {
  auto need = [&](const char* key) -> const Json& {
    if (!j.is_object() || !j.contains(key)) throw parse_error(std::string("upload: missing field '") + key + "'");
    return j.at(key);
  };
  const auto& id = need("client_id");
  const auto& k = need("k");
  const auto& d = need("d");
  const auto& rows = need("centroids");
  if (!id.is_number_integer()) throw parse_error("upload: client_id must be an integer");
  if (!k.is_number_integer() || k.template get<std::int64_t>() < 1) throw parse_error("upload: k must be an integer >= 1");
  if (!d.is_number_integer() || d.template get<std::int64_t>() < 1) throw parse_error("upload: d must be an integer >= 1");
  if (!rows.is_array()) throw parse_error("upload: centroids must be an array");

  CentroidUpload u;
  u.client_id = id.template get<std::int64_t>();
  u.k = k.template get<std::size_t>();
  u.d = d.template get<std::size_t>();
  if (rows.size() != u.k) throw dimension_mismatch("upload: centroid row count differs from k");
  u.centroids = Matrix(u.k, u.d);
  for (std::size_t i = 0; i < u.k; ++i) {
    const auto& r = rows[i];
    if (!r.is_array() || r.size() != u.d) throw dimension_mismatch("upload: centroid row width differs from d");
    for (std::size_t m = 0; m < u.d; ++m) {
      if (!r[m].is_number()) throw validation_error("upload: non-numeric or non-finite centroid value");
      u.centroids(i, m) = r[m].template get<double>();
    }
  }
  u.validate();
  return u;
}

inline CentroidUpload parse_upload(std::string_view bytes) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(bytes);
  } catch (const nlohmann::json::parse_error& e) {
    throw parse_error(std::string("upload: ") + e.what());
  }
  return upload_from_json(j);
}

}  // namespace gold
