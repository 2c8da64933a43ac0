#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "adaclust/clustering.hpp"
#include "adaclust/error.hpp"
#include "adaclust/net.hpp"
#include "adaclust/spectral.hpp"

namespace adaclust {

/// Epochs (1-based) at which pseudo-domains are recomputed.
struct ClusteringSchedule {
  enum class Kind { logarithmic, every_epoch, constant_set };

  Kind kind = Kind::logarithmic;
  std::vector<std::size_t> explicit_epochs;  // used by constant_set

  static ClusteringSchedule logarithmic() { return {Kind::logarithmic, {}}; }
  static ClusteringSchedule every_epoch() { return {Kind::every_epoch, {}}; }
  static ClusteringSchedule at(std::vector<std::size_t> epochs) {
    std::sort(epochs.begin(), epochs.end());
    epochs.erase(std::unique(epochs.begin(), epochs.end()), epochs.end());
    return {Kind::constant_set, std::move(epochs)};
  }
  /// Three rounds: start, halfway, end.
  static ClusteringSchedule start_middle_end(std::size_t total_epochs) {
    return at({1, std::max<std::size_t>(1, (total_epochs + 1) / 2), std::max<std::size_t>(1, total_epochs)});
  }

  /// {1, 2, 4, 8, ...} within [1, T] for logarithmic; all of [1, T] for every_epoch.
  std::set<std::size_t> epochs(std::size_t total_epochs) const {
    std::set<std::size_t> out;
    switch (kind) {
      case Kind::logarithmic:
        for (std::size_t e = 1; e <= total_epochs; e *= 2) out.insert(e);
        break;
      case Kind::every_epoch:
        for (std::size_t e = 1; e <= total_epochs; ++e) out.insert(e);
        break;
      case Kind::constant_set:
        for (std::size_t e : explicit_epochs)
          if (e >= 1 && e <= total_epochs) out.insert(e);
        break;
    }
    return out;
  }

  friend bool operator==(const ClusteringSchedule&, const ClusteringSchedule&) = default;
};

enum class Variant { adaclust, erm, adaclust_random, adaclust_nopca };

inline std::string to_string(Variant v) {
  switch (v) {
    case Variant::adaclust: return "adaclust";
    case Variant::erm: return "erm";
    case Variant::adaclust_random: return "random";
    case Variant::adaclust_nopca: return "nopca";
  }
  return "?";
}

inline Variant parse_variant(const std::string& s) {
  if (s == "adaclust") return Variant::adaclust;
  if (s == "erm") return Variant::erm;
  if (s == "random" || s == "adaclust_random") return Variant::adaclust_random;
  if (s == "nopca" || s == "adaclust_nopca") return Variant::adaclust_nopca;
  throw Error(ErrorCode::invalid_argument, "unknown variant '" + s + "'");
}

struct TrainConfig {
  /// K = clusters_per_class * n_c.
  std::size_t clusters_per_class = 1;
  std::size_t d_start = 0;
  std::size_t d_end = 16;
  ClusteringSchedule schedule = ClusteringSchedule::logarithmic();
  SgdConfig sgd{0.01, 1e-4, 32, 10, 0};
  Variant variant = Variant::adaclust;
  /// Fine-tuning epochs with a throwaway head before the first clustering round.
  std::size_t finetune_epochs = 1;
  bool center_spectrum = false;
  KMeansOptions kmeans{};

  std::size_t num_clusters(int num_classes) const { return clusters_per_class * static_cast<std::size_t>(num_classes); }

  /// Width of the embedding appended to the features (0 for ERM).
  std::size_t embedding_dim(std::size_t feature_dim) const {
    switch (variant) {
      case Variant::erm: return 0;
      case Variant::adaclust_nopca: return feature_dim;
      default: return d_end - d_start;
    }
  }
};

inline void validate(const TrainConfig& c, std::size_t feature_dim) {
  detail::require(c.clusters_per_class >= 1, ErrorCode::invalid_argument, "clusters per class must be positive");
  detail::require(c.sgd.epochs >= 1, ErrorCode::invalid_argument, "epochs must be positive");
  validate(c.sgd);
  if (c.variant == Variant::adaclust || c.variant == Variant::adaclust_random)
    validate_window({c.d_start, c.d_end}, feature_dim);
  if (c.variant != Variant::erm)
    detail::require(c.schedule.epochs(c.sgd.epochs).contains(1), ErrorCode::invalid_argument,
                    "clustering schedule must include epoch 1");
}

/// Centroids in projected space together with the basis that produced them.
struct PseudoDomainModel {
  Centroids centroids;
  SpectralBasis basis;
  std::size_t created_at_epoch = 0;
};

struct AdaptiveClassifier {
  ExtractorWeights omega;
  HeadWeights head;
  std::optional<PseudoDomainModel> pseudo;  // empty for ERM
  TrainConfig config;
  std::string fingerprint;

  std::size_t embedding_dim() const noexcept { return pseudo ? pseudo->centroids.dim() : 0; }
};

}  // namespace adaclust
