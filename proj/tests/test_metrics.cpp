#include <gtest/gtest.h>

#include <cmath>

#include "gold/metrics.hpp"
#include "gold/simulate.hpp"
#include "support.hpp"

using namespace gold;

namespace {

// Labellings realising the contingency table [[3,1],[0,4]].
const std::vector<std::size_t> kPred{0, 0, 0, 0, 1, 1, 1, 1};
const std::vector<std::size_t> kTruth{0, 0, 0, 1, 1, 1, 1, 1};

}  // namespace

TEST(Purity, Examples) {
  EXPECT_EQ(purity(kTruth, kTruth), 1.0);
  EXPECT_EQ(purity({0, 0, 0, 0}, {0, 0, 1, 1}), 0.5);
  EXPECT_DOUBLE_EQ(purity(kPred, kTruth), 0.875);
}

TEST(Ari, Examples) {
  EXPECT_DOUBLE_EQ(ari(kTruth, kTruth), 1.0);
  EXPECT_DOUBLE_EQ(ari({2, 2, 0, 0, 1}, {0, 0, 1, 1, 2}), 1.0);
}

TEST(Nmi, Examples) {
  EXPECT_NEAR(nmi({0, 0, 1, 1, 2}, {0, 0, 1, 1, 2}), 1.0, 1e-12);
  EXPECT_EQ(nmi({0, 0, 0}, {0, 0, 0}), 1.0);
  EXPECT_EQ(nmi({0, 0, 0}, {0, 1, 0}), 0.0);
}

TEST(Nmi, IndependentLabellingsNearZero) {
  Rng rng(1);
  const auto a = oracle::random_labels(rng, 10000, 4);
  const auto b = oracle::random_labels(rng, 10000, 3);
  EXPECT_LT(nmi(a, b), 0.05);
}

TEST(Acc, Examples) {
  EXPECT_DOUBLE_EQ(acc({1, 1, 2, 2, 0}, {0, 0, 1, 1, 2}), 1.0);
  EXPECT_DOUBLE_EQ(acc(kPred, kTruth), 0.875);
}

TEST(Metrics, LengthMismatch) {
  EXPECT_THROW(purity({0, 1}, {0}), dimension_mismatch);
  EXPECT_THROW(ari({0, 1}, {0}), dimension_mismatch);
  EXPECT_THROW(nmi({0, 1}, {0}), dimension_mismatch);
  EXPECT_THROW(acc({0, 1}, {0}), dimension_mismatch);
}

TEST(Metrics, MatchBruteForceOracles) {
  Rng rng(2024);
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = rng.uniform_int(2, 12);
    const auto p = oracle::random_labels(rng, n, rng.uniform_int(1, 5));
    const auto q = oracle::random_labels(rng, n, rng.uniform_int(1, 5));
    EXPECT_NEAR(ari(p, q), oracle::ari(p, q), 1e-10);
    EXPECT_NEAR(nmi(p, q), oracle::nmi(p, q), 1e-10);
    EXPECT_NEAR(acc(p, q), oracle::acc(p, q), 1e-10);
    EXPECT_NEAR(purity(p, q), oracle::purity(p, q), 1e-10);
  }
}

TEST(Metrics, AccMatchesEnumerationWithUnequalK) {
  Rng rng(7);
  for (int t = 0; t < 50; ++t) {
    const auto p = oracle::random_labels(rng, 12, 6);
    const auto q = oracle::random_labels(rng, 12, 3);
    EXPECT_NEAR(acc(p, q), oracle::acc(p, q), 1e-12);
    EXPECT_NEAR(acc(q, p), oracle::acc(q, p), 1e-12);
  }
}

TEST(Metrics, RangesOnRandomLabellings) {
  Rng rng(3);
  for (int t = 0; t < 100; ++t) {
    const auto p = oracle::random_labels(rng, 30, 4);
    const auto q = oracle::random_labels(rng, 30, 3);
    EXPECT_GT(purity(p, q), 0.0);
    EXPECT_LE(purity(p, q), 1.0);
    EXPECT_LE(ari(p, q), 1.0);
    EXPECT_GE(nmi(p, q), 0.0);
    EXPECT_LE(nmi(p, q), 1.0);
    EXPECT_GT(acc(p, q), 0.0);
    EXPECT_LE(acc(p, q), 1.0);
  }
}

TEST(Silhouette, HandInstance) {
  const auto m = Matrix::from_rows({{0}, {1}, {2}, {10}, {11}, {12}});
  const std::vector<std::size_t> lab{0, 0, 0, 1, 1, 1};
  // a and b worked out by hand for each point.
  const double expected = (2 * (9.5 / 11) + 2 * (9.0 / 10) + 2 * (7.5 / 9)) / 6;
  EXPECT_NEAR(silhouette(m, lab), expected, 1e-12);
}

TEST(Silhouette, SeparatedBlobsHigh) {
  Rng rng(1);
  const auto ds = make_blobs(Matrix::from_rows({{0, 0}, {1, 1}}), 50, 0.01, rng);
  EXPECT_GT(silhouette(ds.values, *ds.labels), 0.9);
}

TEST(Silhouette, RandomLabelsNearZero) {
  Rng rng(2);
  const auto ds = make_blobs(Matrix::from_rows({{0, 0}}), 500, 1.0, rng);
  EXPECT_LT(std::abs(silhouette(ds.values, oracle::random_labels(rng, 500, 3))), 0.1);
}

TEST(Silhouette, SingletonsScoreZeroAndSingleClusterUndefined) {
  const auto m = Matrix::from_rows({{0}, {1}, {5}});
  const double s = silhouette(m, {0, 0, 1});
  // Point 2 is a singleton; points 0 and 1 have a = 1, b = 5 and 4.
  EXPECT_NEAR(s, ((5.0 - 1) / 5 + (4.0 - 1) / 4) / 3, 1e-12);
  EXPECT_THROW(silhouette(m, {0, 0, 0}), undefined_metric);
}

TEST(CalinskiHarabasz, SeparatedBlobsLarge) {
  Rng rng(3);
  const auto ds = make_blobs(Matrix::from_rows({{0, 0}, {1, 0}}), 50, 0.1, rng);
  EXPECT_GT(calinski_harabasz(ds.values, *ds.labels), 100.0);
  const auto random = oracle::random_labels(rng, ds.n(), 2);
  EXPECT_GT(calinski_harabasz(ds.values, *ds.labels), calinski_harabasz(ds.values, random));
}

TEST(CalinskiHarabasz, ScaleInvariant) {
  Rng rng(4);
  const auto ds = make_blobs(Matrix::from_rows({{0, 0}, {1, 0}, {0, 1}}), 20, 0.2, rng);
  Matrix scaled = ds.values;
  for (double& v : scaled.values()) v *= 7.5;
  EXPECT_NEAR(calinski_harabasz(ds.values, *ds.labels), calinski_harabasz(scaled, *ds.labels),
              1e-9 * calinski_harabasz(ds.values, *ds.labels));
}

TEST(CalinskiHarabasz, EdgeCases) {
  const auto m = Matrix::from_rows({{0}, {0}, {3}, {3}});
  EXPECT_TRUE(std::isinf(calinski_harabasz(m, {0, 0, 1, 1})));
  EXPECT_THROW(calinski_harabasz(m, {0, 0, 0, 0}), undefined_metric);
  EXPECT_THROW(calinski_harabasz(m, {0, 1, 2, 3}), undefined_metric);
}

TEST(Indices, JsonEncodesSpecialValues) {
  Indices x;
  x.calinski_harabasz = std::numeric_limits<double>::infinity();
  const auto j = indices_to_json(x);
  EXPECT_TRUE(j["silhouette"].is_null());
  EXPECT_EQ(j["calinski_harabasz"], "inf");
}
