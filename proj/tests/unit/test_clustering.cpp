#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "adaclust/clustering.hpp"

using namespace adaclust;

namespace {

Matrix blobs(const std::vector<std::pair<double, double>>& centers, std::size_t per, double radius,
             std::uint64_t seed) {
  Rng rng(seed);
  Matrix out(centers.size() * per, 2);
  for (std::size_t c = 0; c < centers.size(); ++c)
    for (std::size_t i = 0; i < per; ++i) {
      out(c * per + i, 0) = centers[c].first + radius * rng.normal();
      out(c * per + i, 1) = centers[c].second + radius * rng.normal();
    }
  return out;
}

double sse_of(const Matrix& points, const Matrix& centroids) {
  double s = 0.0;
  for (std::size_t i = 0; i < points.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < centroids.rows(); ++k) best = std::min(best, squared_distance(points.row(i), centroids.row(k)));
    s += best;
  }
  return s;
}

// Entropy from raw counts, written out independently of the library.
double h(std::initializer_list<double> counts) {
  double total = 0.0;
  for (double c : counts) total += c;
  double out = 0.0;
  for (double c : counts) out -= c / total * std::log(c / total);
  return out;
}

}  // namespace

TEST(KMeansPP, SingleSeedIsADataPoint) {
  const Matrix pts = blobs({{0, 0}}, 10, 1.0, 1);
  const Matrix s = kmeanspp_seed(pts, 1, 5);
  bool found = false;
  for (std::size_t i = 0; i < pts.rows(); ++i) found |= squared_distance(pts.row(i), s.row(0)) == 0.0;
  EXPECT_TRUE(found);
}

TEST(KMeansPP, FirstSeedIsUniform) {
  const Matrix pts = blobs({{0, 0}}, 5, 1.0, 2);
  std::vector<int> hits(5, 0);
  const int trials = 5000;
  for (int t = 0; t < trials; ++t) {
    const Matrix s = kmeanspp_seed(pts, 1, static_cast<std::uint64_t>(t));
    for (std::size_t i = 0; i < 5; ++i)
      if (squared_distance(pts.row(i), s.row(0)) == 0.0) ++hits[i];
  }
  double chi2 = 0.0;
  for (int v : hits) chi2 += (v - 1000.0) * (v - 1000.0) / 1000.0;
  EXPECT_LT(chi2, 18.47);  // 99.9% quantile, 4 dof
}

TEST(KMeansPP, KEqualsMSelectsEveryPoint) {
  const Matrix pts = blobs({{0, 0}}, 7, 1.0, 3);
  const Matrix s = kmeanspp_seed(pts, 7, 1);
  std::set<std::size_t> picked;
  for (std::size_t c = 0; c < 7; ++c)
    for (std::size_t i = 0; i < 7; ++i)
      if (squared_distance(pts.row(i), s.row(c)) == 0.0) picked.insert(i);
  EXPECT_EQ(picked.size(), 7u);
}

TEST(KMeansPP, ThreeBlobsOneSeedEach) {
  const Matrix pts = blobs({{0, 0}, {20, 0}, {0, 20}}, 10, 0.5, 4);
  int good = 0;
  for (std::uint64_t t = 0; t < 100; ++t) {
    const Matrix s = kmeanspp_seed(pts, 3, t);
    std::set<int> which;
    for (std::size_t c = 0; c < 3; ++c) which.insert(s(c, 0) > 10 ? 1 : (s(c, 1) > 10 ? 2 : 0));
    good += which.size() == 3 ? 1 : 0;
  }
  EXPECT_GE(good, 95);
}

TEST(KMeansPP, SecondSeedFollowsSquaredDistance) {
  // Four points on a line; the first seed is found by running K=1 with the same seed.
  const Matrix pts{{0.0}, {1.0}, {3.0}, {7.0}};
  std::vector<std::vector<double>> counts(4, std::vector<double>(4, 0.0));
  std::vector<double> first_counts(4, 0.0);
  const int trials = 20000;
  for (int t = 0; t < trials; ++t) {
    const Matrix s = kmeanspp_seed(pts, 2, static_cast<std::uint64_t>(t));
    const auto first = static_cast<std::size_t>(s(0, 0) == 0 ? 0 : s(0, 0) == 1 ? 1 : s(0, 0) == 3 ? 2 : 3);
    const auto second = static_cast<std::size_t>(s(1, 0) == 0 ? 0 : s(1, 0) == 1 ? 1 : s(1, 0) == 3 ? 2 : 3);
    ++first_counts[first];
    ++counts[first][second];
  }
  for (std::size_t f = 0; f < 4; ++f) {
    double total = 0.0;
    for (std::size_t i = 0; i < 4; ++i) total += (pts(i, 0) - pts(f, 0)) * (pts(i, 0) - pts(f, 0));
    for (std::size_t i = 0; i < 4; ++i) {
      const double p = (pts(i, 0) - pts(f, 0)) * (pts(i, 0) - pts(f, 0)) / total;
      const double n = first_counts[f];
      const double se = std::sqrt(std::max(p * (1 - p), 1e-9) / n);
      EXPECT_NEAR(counts[f][i] / n, p, 4.0 * se + 1e-9) << "first " << f << " second " << i;
    }
  }
}

TEST(KMeansPP, Errors) {
  const Matrix pts = blobs({{0, 0}}, 3, 1.0, 1);
  try {
    kmeanspp_seed(pts, 4, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::fewer_points_than_clusters);
    EXPECT_STREQ(e.what(), "fewer points than clusters");
  }
  EXPECT_THROW(kmeanspp_seed(pts, 0, 0), Error);
}

TEST(KMeansFit, SingleClusterIsMean) {
  const Matrix pts = blobs({{2, -1}}, 25, 1.0, 6);
  const auto r = kmeans_fit(pts, 1, 0);
  for (std::size_t j = 0; j < 2; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < 25; ++i) mean += pts(i, j);
    EXPECT_NEAR(r.centroids.psi(0, j), mean / 25.0, 1e-12);
  }
}

TEST(KMeansFit, SeparatedBlobsRecovered) {
  const Matrix pts = blobs({{-10, 0}, {10, 0}}, 20, 0.1, 7);
  std::vector<int> planted(40);
  for (std::size_t i = 0; i < 40; ++i) planted[i] = i < 20 ? 0 : 1;
  const auto r = kmeans_fit(pts, 2, 3);
  EXPECT_DOUBLE_EQ(nmi(r.assignment.cluster_of, planted), 1.0);
}

namespace {

// Exhaustive minimum of the Lloyd objective over all 2-partitions of 8 points.
double best_two_partition_sse(const Matrix& pts) {
  double best = std::numeric_limits<double>::infinity();
  for (unsigned mask = 1; mask < (1u << 8) - 1; ++mask) {
    double sums[2][2] = {{0, 0}, {0, 0}};
    double n[2] = {0, 0};
    for (std::size_t i = 0; i < 8; ++i) {
      const unsigned side = (mask >> i) & 1u;
      n[side] += 1;
      sums[side][0] += pts(i, 0);
      sums[side][1] += pts(i, 1);
    }
    double sse = 0.0;
    for (std::size_t i = 0; i < 8; ++i) {
      const unsigned side = (mask >> i) & 1u;
      for (int j = 0; j < 2; ++j) sse += std::pow(pts(i, j) - sums[side][j] / n[side], 2);
    }
    best = std::min(best, sse);
  }
  return best;
}

}  // namespace

TEST(KMeansFit, NearGlobalOptimumOnEightPoints) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Matrix pts = blobs({{-3, 0}, {3, 0}}, 4, 1.0, 100 + seed);
    const auto r = kmeans_fit(pts, 2, seed);
    EXPECT_LE(sse_of(pts, r.centroids.psi), 1.05 * best_two_partition_sse(pts) + 1e-12) << "seed " << seed;
  }
}

TEST(KMeansFit, NearGlobalOptimumOnUnstructuredPoints) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    Matrix pts(8, 2);
    for (double& v : pts.data()) v = rng.normal();
    const auto r = kmeans_fit(pts, 2, seed);
    EXPECT_LE(sse_of(pts, r.centroids.psi), 1.05 * best_two_partition_sse(pts) + 1e-12) << "seed " << seed;
  }
}

TEST(KMeansFit, KeepsLowestObjectiveRun) {
  Rng rng(21);
  Matrix pts(40, 2);
  for (double& v : pts.data()) v = rng.normal();
  KMeansOptions one;
  one.n_init = 1;
  double lowest = sse_of(pts, kmeans_fit(pts, 4, 3, one).centroids.psi);
  EXPECT_EQ(kmeans_fit(pts, 4, 3, one).centroids.psi, detail::lloyd_run(pts, 4, 3, one).centroids.psi);
  for (std::uint64_t r = 1; r < 10; ++r)
    lowest = std::min(lowest, sse_of(pts, kmeans_fit(pts, 4, split_seed(3, r), one).centroids.psi));
  EXPECT_NEAR(sse_of(pts, kmeans_fit(pts, 4, 3).centroids.psi), lowest, 1e-12);
  KMeansOptions none;
  none.n_init = 0;
  EXPECT_THROW(kmeans_fit(pts, 4, 3, none), Error);
}

TEST(KMeansFit, InvariantsHold) {
  const Matrix pts = blobs({{0, 0}, {5, 5}, {-5, 5}, {5, -5}}, 30, 1.5, 8);
  const auto r = kmeans_fit(pts, 4, 11);
  const auto& hist = r.centroids.sse_history;
  for (std::size_t i = 1; i < hist.size(); ++i) EXPECT_LE(hist[i], hist[i - 1]);
  EXPECT_NEAR(r.centroids.final_cost, empirical_cost(pts, r.centroids.psi), 1e-9);
  for (std::size_t a = 0; a < 4; ++a)
    for (std::size_t b = a + 1; b < 4; ++b) EXPECT_GT(distance(r.centroids.psi.row(a), r.centroids.psi.row(b)), 0.0);
  for (std::size_t i = 0; i < pts.rows(); ++i)
    EXPECT_EQ(static_cast<int>(nearest_centroid(pts.row(i), r.centroids.psi).index), r.assignment.cluster_of[i]);
  EXPECT_EQ(r.centroids.source_fingerprint, fingerprint(pts));
}

TEST(KMeansFit, DeterministicAndPermutationCost) {
  const Matrix pts = blobs({{0, 0}, {8, 0}, {0, 8}}, 15, 0.5, 9);
  const auto a = kmeans_fit(pts, 3, 2), b = kmeans_fit(pts, 3, 2);
  EXPECT_EQ(a.centroids.psi, b.centroids.psi);
  std::vector<std::size_t> perm(pts.rows());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::reverse(perm.begin(), perm.end());
  const auto c = kmeans_fit(pts.select_rows(perm), 3, 2);
  EXPECT_NEAR(c.centroids.final_cost, a.centroids.final_cost, 1e-9);
}

TEST(KMeansFit, DuplicatePointsKeepKClusters) {
  Matrix pts(6, 1);
  pts(5, 0) = 1.0;
  const auto r = kmeans_fit(pts, 3, 0);
  EXPECT_EQ(r.centroids.K(), 3u);
  EXPECT_EQ(r.assignment.cluster_of.size(), 6u);
}

TEST(NearestCentroid, ExactHitAndTies) {
  const Matrix c{{0, 0}, {2, 0}, {5, 5}};
  const auto hit = nearest_centroid(std::vector<double>{5, 5}, c);
  EXPECT_EQ(hit.index, 2u);
  EXPECT_EQ(hit.distance, 0.0);
  const auto tie = nearest_centroid(std::vector<double>{1, 0}, c);
  EXPECT_EQ(tie.index, 0u);
  EXPECT_THROW(nearest_centroid(std::vector<double>{1, 0, 0}, c), Error);
}

TEST(NearestCentroid, MatchesLinearScan) {
  Rng rng(12);
  Matrix c(5, 3);
  for (double& v : c.data()) v = rng.normal();
  for (int t = 0; t < 200; ++t) {
    std::vector<double> x{rng.normal(), rng.normal(), rng.normal()};
    std::size_t best = 0;
    for (std::size_t k = 1; k < 5; ++k)
      if (distance(x, c.row(k)) < distance(x, c.row(best))) best = k;
    EXPECT_EQ(nearest_centroid(x, c).index, best);
  }
}

TEST(EmpiricalCost, Examples) {
  const Matrix c{{0.0, 0.0}};
  EXPECT_EQ(empirical_cost(Matrix{{0.0, 0.0}, {0.0, 0.0}}, c), 0.0);
  EXPECT_DOUBLE_EQ(empirical_cost(Matrix{{3.0, 0.0}}, c), 3.0);
  EXPECT_THROW(empirical_cost(Matrix(0, 2), c), Error);

  Rng rng(13);
  Matrix pts(30, 2), cents(3, 2);
  for (double& v : pts.data()) v = rng.normal();
  for (double& v : cents.data()) v = rng.normal();
  double total = 0.0;
  for (std::size_t i = 0; i < 30; ++i) {
    double best = 1e300;
    for (std::size_t k = 0; k < 3; ++k)
      best = std::min(best, std::hypot(pts(i, 0) - cents(k, 0), pts(i, 1) - cents(k, 1)));
    total += best;
  }
  EXPECT_NEAR(empirical_cost(pts, cents), total / 30.0, 1e-12);
}

TEST(Nmi, Examples) {
  const std::vector<int> a{0, 0, 1, 1}, b{0, 1, 0, 1};
  EXPECT_NEAR(nmi(a, b), 0.0, 1e-15);
  EXPECT_DOUBLE_EQ(nmi(a, a), 1.0);
  const std::vector<int> relabeled{7, 7, 3, 3};
  EXPECT_DOUBLE_EQ(nmi(a, relabeled), 1.0);
  const std::vector<int> single{0, 0, 0, 0};
  EXPECT_EQ(nmi(a, single), 0.0);
  EXPECT_THROW(nmi(a, std::vector<int>{0, 1}), Error);
}

TEST(Nmi, HandComputedValue) {
  const std::vector<int> a{0, 0, 1, 1}, b{0, 0, 0, 1};
  const double ha = h({2, 2}), hb = h({3, 1}), hab = h({2, 1, 1});
  EXPECT_NEAR(nmi(a, b), (ha + hb - hab) / std::sqrt(ha * hb), 1e-12);
}

TEST(Nmi, SymmetricExactly) {
  Rng rng(14);
  for (int t = 0; t < 20; ++t) {
    std::vector<int> a(50), b(50);
    for (auto& v : a) v = static_cast<int>(rng.below(4));
    for (auto& v : b) v = static_cast<int>(rng.below(3));
    EXPECT_EQ(nmi(a, b), nmi(b, a));
  }
}

TEST(Nmi, IndependentPartitionsNearZero) {
  Rng rng(15);
  std::vector<int> a(20000), b(20000);
  for (auto& v : a) v = static_cast<int>(rng.below(4));
  for (auto& v : b) v = static_cast<int>(rng.below(4));
  EXPECT_LT(nmi(a, b), 1e-3);
}

TEST(RenormalizedNmi, Examples) {
  const std::vector<int> clusters{0, 0, 1, 1}, classes{0, 1, 0, 1};
  const std::span<const int> c(clusters);
  EXPECT_GT(renormalized_nmi(c, c, std::span<const int>(classes)), 1e6);
  EXPECT_DOUBLE_EQ(renormalized_nmi(c, c, c), 1.0);

  // clusters {0,0,1,1,2,2}, domains {0,0,1,1,1,1}, classes {0,1,0,1,0,0}
  const std::vector<int> k{0, 0, 1, 1, 2, 2}, d{0, 0, 1, 1, 1, 1}, y{0, 1, 0, 1, 0, 0};
  const double hk = h({2, 2, 2}), hd = h({2, 4}), hy = h({4, 2});
  const double i_kd = hk + hd - h({2, 2, 2});
  const double i_ky = hk + hy - h({1, 1, 1, 1, 2});
  const double expected = (i_kd / std::sqrt(hk * hd)) / (i_ky / std::sqrt(hk * hy));
  EXPECT_NEAR(renormalized_nmi(std::span<const int>(k), std::span<const int>(d), std::span<const int>(y)), expected,
              1e-12);
}
