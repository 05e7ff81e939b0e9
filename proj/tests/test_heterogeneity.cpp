#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "gold/heterogeneity.hpp"
#include "gold/simulate.hpp"
#include "support.hpp"

using namespace gold;

namespace {

// Direct LOO log-likelihood, no log-sum-exp tricks.
double loo_direct(const Matrix& x, double h) {
  const std::size_t n = x.rows();
  const double d = static_cast<double>(x.cols());
  double total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double dens = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      dens += std::exp(-squared_distance(x.row(i), x.row(j)) / (2 * h * h)) / std::pow(h * std::sqrt(2 * std::numbers::pi), d);
    }
    total += std::log(dens / static_cast<double>(n - 1));
  }
  return total / static_cast<double>(n);
}

Dataset from(const Matrix& m) {
  Dataset d;
  d.values = m;
  return d;
}

}  // namespace

TEST(Bandwidth, SingleCandidate) {
  const auto m = Matrix::from_rows({{0.1}, {0.4}, {0.9}});
  EXPECT_EQ(select_bandwidth(m, {0.3}), 0.3);
}

TEST(Bandwidth, TwinPointsPreferNarrowKernel) {
  const auto m = Matrix::from_rows({{0.5, 0.5}, {0.5, 0.5}});
  const double narrow = loo_direct(m, 0.01);
  const double wide = loo_direct(m, 1.0);
  const double expected = narrow > wide ? 0.01 : 1.0;
  EXPECT_EQ(select_bandwidth(m, {0.01, 1.0}), expected);
  EXPECT_EQ(expected, 0.01);
}

TEST(Bandwidth, LooMatchesDirectEvaluation) {
  Rng rng(1);
  Matrix m(25, 2);
  for (double& v : m.values()) v = rng.uniform();
  for (double h : default_bandwidth_grid()) EXPECT_NEAR(loo_log_likelihood(m, h), loo_direct(m, h), 1e-9);
}

TEST(Bandwidth, WiderSpreadWiderKernel) {
  std::vector<double> picked;
  for (double sd : {0.01, 0.05, 0.2}) {
    Rng rng(7);
    Matrix m(200, 1);
    for (double& v : m.values()) v = rng.normal(0.5, sd);
    picked.push_back(select_bandwidth(m, default_bandwidth_grid()));
  }
  EXPECT_LE(picked[0], picked[1]);
  EXPECT_LE(picked[1], picked[2]);
  EXPECT_LT(picked[0], picked[2]);
}

TEST(Bandwidth, FallbackForTinyInput) {
  EXPECT_EQ(select_bandwidth(Matrix::from_rows({{0.2}}), default_bandwidth_grid()), kFallbackBandwidth);
}

TEST(Density, DirectEvaluation) {
  const auto p = density_profile(Matrix::from_rows({{0.0}}), Matrix::from_rows({{0.0}, {1.0}}), 1.0);
  EXPECT_NEAR(p.probs[0], 1 / (1 + std::exp(-0.5)), 1e-12);
  EXPECT_NEAR(p.probs[0], 0.6225, 1e-4);
  EXPECT_NEAR(p.probs[1], 0.3775, 1e-4);
}

TEST(Density, ConcentratesAsBandwidthShrinks) {
  const auto data = Matrix::from_rows({{0.0}});
  const auto eval = Matrix::from_rows({{0.0}, {0.8}});
  double prev = 0;
  for (double h : {1.0, 0.3, 0.1, 0.03}) {
    const double near = density_profile(data, eval, h).probs[0];
    EXPECT_GT(near, prev);
    prev = near;
  }
  EXPECT_GT(prev, 0.999999);
}

TEST(Density, SymmetricDataSymmetricProbs) {
  const auto data = Matrix::from_rows({{-1.0}, {1.0}});
  const auto eval = Matrix::from_rows({{-2.0}, {-0.5}, {0.5}, {2.0}});
  const auto p = density_profile(data, eval, 0.7);
  EXPECT_NEAR(p.probs[0], p.probs[3], 1e-15);
  EXPECT_NEAR(p.probs[1], p.probs[2], 1e-15);
}

TEST(Divergence, KlExamples) {
  EXPECT_EQ(kl({0.3, 0.7}, {0.3, 0.7}), 0.0);
  EXPECT_NEAR(kl({1, 0}, {0.5, 0.5}), 1.0, 1e-15);
  EXPECT_EQ(kl({0.5, 0.5}, {0.5, 0.5}), 0.0);
  EXPECT_TRUE(std::isinf(kl({0.5, 0.5}, {1, 0})));
}

TEST(Divergence, JsExamples) {
  EXPECT_EQ(js({0.2, 0.8}, {0.2, 0.8}), 0.0);
  EXPECT_NEAR(js({1, 0}, {0, 1}), 1.0, 1e-15);
  EXPECT_NEAR(js({0.1, 0.9}, {0.6, 0.4}), js({0.6, 0.4}, {0.1, 0.9}), 1e-15);
}

TEST(Lambda, IdenticalCopiesNearZero) {
  Rng rng(2);
  Dataset d = from(Matrix(60, 2));
  for (double& v : d.values.values()) v = rng.uniform();
  const auto r = non_icd_degree({d, d, d, d});
  EXPECT_LT(r.lambda, 0.01);
}

TEST(Lambda, FarDisjointNearOne) {
  Rng rng(3);
  const auto a = make_blobs(Matrix::from_rows({{0.0, 0.0}}), 50, 0.01, rng);
  const auto b = make_blobs(Matrix::from_rows({{1.0, 1.0}}), 50, 0.01, rng);
  const auto r = non_icd_degree({a, b});
  EXPECT_GT(r.lambda, 0.9);
}

TEST(Lambda, NeedsTwoClients) {
  EXPECT_THROW(non_icd_degree({from(Matrix::from_rows({{0.0}}))}), invalid_input);
}

TEST(Lambda, PairwiseSymmetricAndBounded) {
  Rng rng(4);
  std::vector<Dataset> cs;
  for (int l = 0; l < 4; ++l) {
    Dataset d = from(Matrix(30, 2));
    for (double& v : d.values.values()) v = rng.uniform() * (0.3 + 0.2 * l);
    cs.push_back(d);
  }
  const auto r = non_icd_degree(cs);
  EXPECT_GE(r.lambda, 0.0);
  EXPECT_LE(r.lambda, 1.0);
  for (std::size_t a = 0; a < 4; ++a) {
    EXPECT_EQ(r.pairwise(a, a), 0.0);
    for (std::size_t b = 0; b < 4; ++b) EXPECT_EQ(r.pairwise(a, b), r.pairwise(b, a));
  }
}

TEST(Lambda, SupportIsCapped) {
  std::vector<Dataset> cs(2, from(Matrix(1500, 1, 0.5)));
  EXPECT_EQ(shared_support(cs).rows(), kMaxSupport);
}

TEST(Lambda, GrowsWithClientSpecificShare) {
  const double taus[] = {0.0, 0.25, 0.5, 0.75, 1.0};
  std::vector<double> mean(5, 0.0);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    for (int t = 0; t < 5; ++t) {
      Rng rng(seed * 10 + t);
      mean[t] += non_icd_degree(fixture::mixing_clients(taus[t], 4, 80, rng)).lambda;
    }
  }
  for (int t = 1; t < 5; ++t) EXPECT_LE(mean[t - 1], mean[t]);
}
