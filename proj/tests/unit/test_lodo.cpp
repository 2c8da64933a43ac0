#include <gtest/gtest.h>

#include <map>
#include <set>

#include "adaclust/lodo.hpp"

using namespace adaclust;

namespace {

LodoSetup tiny_setup(Variant v) {
  LodoSetup s;
  s.num_domains = 3;
  s.per_domain = 40;
  s.pretrain.hidden = 16;
  s.pretrain.feature_dim = 8;
  s.pretrain.per_domain = 40;
  s.pretrain.sgd.epochs = 1;
  s.train.variant = v;
  s.train.d_start = 0;
  s.train.d_end = 4;
  s.train.sgd.epochs = 3;
  return s;
}

}  // namespace

TEST(SplitPerDomain, ProportionalDisjointDeterministic) {
  std::vector<std::int64_t> domains;
  for (int d = 0; d < 3; ++d)
    for (int i = 0; i < 10; ++i) domains.push_back(d);
  std::vector<std::size_t> rows(30);
  for (std::size_t i = 0; i < 30; ++i) rows[i] = i;
  const auto [train, val] = split_per_domain(domains, rows, 0.8, 4);
  EXPECT_EQ(train.size(), 24u);
  EXPECT_EQ(val.size(), 6u);
  std::set<std::size_t> all(train.begin(), train.end());
  for (auto v : val) EXPECT_TRUE(all.insert(v).second);
  EXPECT_EQ(all.size(), 30u);
  std::map<std::int64_t, int> per;
  for (auto v : val) ++per[domains[v]];
  for (auto& [d, c] : per) EXPECT_EQ(c, 2);
  EXPECT_EQ(split_per_domain(domains, rows, 0.8, 4), split_per_domain(domains, rows, 0.8, 4));
}

TEST(Lodo, RowsPerSeedAndDomain) {
  const std::vector<std::uint64_t> seeds{1, 2};
  const auto rows = evaluate_lodo(tiny_setup(Variant::adaclust), seeds);
  ASSERT_EQ(rows.size(), 6u);
  for (const auto& r : rows) {
    EXPECT_GE(r.test_accuracy, 0.0);
    EXPECT_LE(r.test_accuracy, 1.0);
    EXPECT_EQ(r.train_points, 64u);  // two domains, 80% of 40 each
    EXPECT_EQ(r.clustering_rounds, 2u);
    EXPECT_GE(r.cluster_domain_nmi, 0.0);
  }
  EXPECT_EQ(rows[0].seed, 1u);
  EXPECT_EQ(rows[5].heldout_domain, 2u);
}

TEST(Lodo, ErmHasNoRoundsAndNanNmi) {
  const std::vector<std::uint64_t> seeds{3};
  for (const auto& r : evaluate_lodo(tiny_setup(Variant::erm), seeds)) {
    EXPECT_EQ(r.clustering_rounds, 0u);
    EXPECT_TRUE(std::isnan(r.cluster_domain_nmi));
  }
}

TEST(Lodo, Deterministic) {
  const std::vector<std::uint64_t> seeds{5};
  const auto a = evaluate_lodo(tiny_setup(Variant::adaclust), seeds);
  const auto b = evaluate_lodo(tiny_setup(Variant::adaclust), seeds);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].test_accuracy, b[i].test_accuracy);
}

TEST(Lodo, NeedsTwoDomains) {
  LodoSetup s = tiny_setup(Variant::erm);
  s.num_domains = 1;
  const std::vector<std::uint64_t> seeds{1};
  EXPECT_THROW(evaluate_lodo(s, seeds), Error);
}

TEST(Summarize, MeanAndSeedStddev) {
  std::vector<LodoRow> rows(4);
  rows[0].seed = rows[1].seed = 1;
  rows[2].seed = rows[3].seed = 2;
  rows[0].test_accuracy = 0.5;
  rows[1].test_accuracy = 0.7;  // seed 1 mean 0.6
  rows[2].test_accuracy = 0.8;
  rows[3].test_accuracy = 1.0;  // seed 2 mean 0.9
  const auto s = summarize(rows);
  EXPECT_NEAR(s.mean, 0.75, 1e-15);
  EXPECT_NEAR(s.stddev_over_seeds, 0.15, 1e-15);
  EXPECT_EQ(summarize(std::span<const LodoRow>{}).mean, 0.0);
}
