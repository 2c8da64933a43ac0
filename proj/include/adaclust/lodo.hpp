#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "adaclust/clustering.hpp"
#include "adaclust/datagen.hpp"
#include "adaclust/train.hpp"

namespace adaclust {

struct LodoSetup {
  MotherConfig mother;       // seed is overridden per run
  PretrainConfig pretrain;   // sgd.seed is overridden per run
  TrainConfig train;         // sgd.seed is overridden per run
  std::size_t num_domains = 6;
  std::size_t per_domain = 200;
  double train_fraction = 0.8;
};

/// Harder variant of the default mother used for variant comparisons: noisier
/// blobs, larger shifts, a longer SGD budget, and a window past the class
/// directions so clusters follow domains.
inline LodoSetup rotated_domain_fixture() {
  LodoSetup s;
  s.mother.noise_scale = 0.4;
  s.mother.shift_scale = 1.0;
  s.mother.rotated_planes = 1;
  s.train.sgd.epochs = 20;
  s.train.sgd.learning_rate = 0.05;
  s.train.d_start = 4;
  s.train.d_end = 8;
  return s;
}

struct LodoRow {
  std::uint64_t seed = 0;
  Variant variant = Variant::adaclust;
  std::size_t heldout_domain = 0;
  double test_accuracy = 0.0;
  double val_accuracy = 0.0;
  std::size_t selected_epoch = 0;
  std::size_t clustering_rounds = 0;
  /// NMI between the final clustering round and the true training domains;
  /// NaN for ERM.
  double cluster_domain_nmi = std::numeric_limits<double>::quiet_NaN();
  std::size_t train_points = 0;
};

struct LodoSummary {
  double mean = 0.0;
  double stddev_over_seeds = 0.0;  // population stddev of per-seed means
};

/// Splits every domain of `data` into train/validation parts at random.
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_per_domain(
    std::span<const std::int64_t> domains, std::span<const std::size_t> rows, double train_fraction,
    std::uint64_t seed) {
  std::map<std::int64_t, std::vector<std::size_t>> by_domain;
  for (std::size_t r : rows) by_domain[domains[r]].push_back(r);
  std::vector<std::size_t> train_rows, val_rows;
  for (auto& [domain, members] : by_domain) {
    Rng rng(split_seed(seed, static_cast<std::uint64_t>(domain)));
    for (std::size_t i = members.size(); i > 1; --i) std::swap(members[i - 1], members[rng.below(i)]);
    const auto cut = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(members.size())));
    train_rows.insert(train_rows.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(cut));
    val_rows.insert(val_rows.end(), members.begin() + static_cast<std::ptrdiff_t>(cut), members.end());
  }
  std::sort(train_rows.begin(), train_rows.end());
  std::sort(val_rows.begin(), val_rows.end());
  return {train_rows, val_rows};
}

/// Leave-one-domain-out: for every seed, sample N domains, pretrain, then for
/// each domain i train on the other N-1 (80/20 train/validation inside each
/// domain, best validation epoch kept) and test on domain i.
inline std::vector<LodoRow> evaluate_lodo(const LodoSetup& setup, std::span<const std::uint64_t> seeds) {
  detail::require(setup.num_domains >= 2, ErrorCode::invalid_argument, "LODO needs at least two domains");
  detail::require(setup.per_domain >= 2, ErrorCode::invalid_argument, "LODO needs at least two points per domain");
  std::vector<LodoRow> rows;
  for (std::uint64_t seed : seeds) {
    MotherConfig mc = setup.mother;
    mc.seed = seed;
    const MotherDistribution mother = make_mother(mc);
    const AggregatedDataset all = sample_training_set(mother, setup.num_domains, setup.per_domain);
    PretrainConfig pc = setup.pretrain;
    pc.sgd.seed = split_seed(seed, 7);
    const ExtractorWeights omega0 = pretrain_extractor(mother, pc);
    const auto domains = all.evaluator_domains();

    for (std::size_t held = 0; held < setup.num_domains; ++held) {
      std::vector<std::size_t> rest, test;
      for (std::size_t r = 0; r < all.size(); ++r)
        (static_cast<std::size_t>(domains[r]) == held ? test : rest).push_back(r);
      const auto [train_rows, val_rows] = split_per_domain(domains, rest, setup.train_fraction, split_seed(seed, held));
      const AggregatedDataset train_set = all.subset(train_rows);
      const AggregatedDataset val_set = all.subset(val_rows);
      const AggregatedDataset test_set = all.subset(test);

      TrainConfig tc = setup.train;
      tc.sgd.seed = split_seed(seed, 100 + held);
      TrainOptions opts;
      if (!val_rows.empty()) opts.validation.emplace(val_set.learner_view());
      const TrainResult tr = train(train_set.learner_view(), tc, omega0, opts);

      LodoRow row;
      row.seed = seed;
      row.variant = tc.variant;
      row.heldout_domain = held;
      row.test_accuracy = accuracy(tr.model, test_set.features(), test_set.labels());
      row.selected_epoch = tr.log.selected_epoch;
      for (const auto& e : tr.log.epochs)
        if (e.epoch == row.selected_epoch) row.val_accuracy = e.val_accuracy;
      row.clustering_rounds = tr.log.rounds.size();
      if (!tr.log.rounds.empty())
        row.cluster_domain_nmi = nmi(std::span<const int>(tr.log.rounds.back().cluster_of), train_set.evaluator_domains());
      row.train_points = train_set.size();
      rows.push_back(row);
    }
  }
  return rows;
}

inline LodoSummary summarize(std::span<const LodoRow> rows) {
  std::map<std::uint64_t, std::pair<double, std::size_t>> per_seed;
  double total = 0.0;
  for (const auto& r : rows) {
    total += r.test_accuracy;
    auto& [sum, count] = per_seed[r.seed];
    sum += r.test_accuracy;
    ++count;
  }
  LodoSummary s;
  if (rows.empty()) return s;
  s.mean = total / static_cast<double>(rows.size());
  double var = 0.0;
  for (const auto& [seed, acc] : per_seed) {
    const double m = acc.first / static_cast<double>(acc.second);
    var += (m - s.mean) * (m - s.mean);
  }
  s.stddev_over_seeds = std::sqrt(var / static_cast<double>(per_seed.size()));
  return s;
}

}  // namespace adaclust
