#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include "adaclust/clustering.hpp"
#include "adaclust/datagen.hpp"
#include "adaclust/model.hpp"
#include "adaclust/net.hpp"
#include "adaclust/serialize.hpp"
#include "adaclust/spectral.hpp"

namespace adaclust {

struct ReclusterResult {
  PseudoDomainModel model;
  Assignment assignment;  // centroid index whose embedding each point receives
  Matrix embeddings;      // M x p, row i = centroid assigned to point i
};

/// One clustering round: features under the current extractor, spectral
/// filtering, k-means, and the per-point embedding table.
inline ReclusterResult recluster(const LearnerView& data, const ExtractorWeights& omega, const TrainConfig& config,
                                 std::uint64_t round_seed, std::size_t epoch = 0) {
  detail::require(data.size() >= 1, ErrorCode::invalid_argument, "recluster: empty dataset");
  const std::size_t k = config.num_clusters(data.num_classes);
  detail::require(data.size() >= k, ErrorCode::fewer_points_than_clusters, "fewer points than clusters");
  const Matrix features = extract_all(data.features, omega);

  ReclusterResult out;
  if (config.variant == Variant::adaclust_nopca)
    out.model.basis = identity_basis(features.cols());
  else
    out.model.basis = covariance_eigenbasis(features, {config.d_start, config.d_end}, {config.center_spectrum});
  const Matrix projected = project(features, out.model.basis);

  KMeansResult fit = kmeans_fit(projected, k, split_seed(round_seed, 1), config.kmeans);
  out.model.centroids = std::move(fit.centroids);
  out.model.created_at_epoch = epoch;
  out.assignment = std::move(fit.assignment);
  if (config.variant == Variant::adaclust_random) {
    Rng rng(split_seed(round_seed, 2));
    for (int& c : out.assignment.cluster_of) c = static_cast<int>(rng.below(k));
  }

  const Matrix& psi = out.model.centroids.psi;
  out.embeddings = Matrix(data.size(), psi.cols());
  for (std::size_t i = 0; i < data.size(); ++i) {
    auto src = psi.row(static_cast<std::size_t>(out.assignment.cluster_of[i]));
    std::copy(src.begin(), src.end(), out.embeddings.row(i).begin());
  }
  return out;
}

struct Prediction {
  int label = 0;
  Vector logits;
  int matched_cluster = -1;  // -1 when the model has no pseudo-domains
};

/// Single-sample inference: features, projection with the stored basis,
/// nearest stored centroid, then the joint head.
inline Prediction predict(std::span<const double> x, const AdaptiveClassifier& model) {
  Prediction p;
  const Vector features = extract(x, model.omega);
  if (model.pseudo) {
    const Vector phi = project_single(features, model.pseudo->basis);
    const NearestCentroid nc = nearest_centroid(phi, model.pseudo->centroids.psi);
    p.matched_cluster = static_cast<int>(nc.index);
    p.logits = detail::head_logits(features, model.pseudo->centroids.psi.row(nc.index), model.head);
  } else {
    p.logits = detail::head_logits(features, {}, model.head);
  }
  p.label = argmax(p.logits);
  return p;
}

inline double accuracy(const AdaptiveClassifier& model, const Matrix& inputs, std::span<const int> labels) {
  detail::require(inputs.rows() == labels.size() && !labels.empty(), ErrorCode::invalid_argument,
                  "accuracy: need matching, non-empty inputs and labels");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < inputs.rows(); ++i)
    if (predict(inputs.row(i), model).label == labels[i]) ++correct;
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

struct EpochLog {
  std::size_t epoch = 0;  // 0 is the fine-tuning phase
  bool clustered = false;
  double train_loss = 0.0;
  double cluster_cost = std::numeric_limits<double>::quiet_NaN();
  double val_accuracy = std::numeric_limits<double>::quiet_NaN();
};

struct ClusterRound {
  std::size_t epoch = 0;
  double cost = 0.0;
  std::size_t lloyd_iterations = 0;
  std::vector<int> cluster_of;
};

struct TrainLog {
  std::vector<EpochLog> epochs;
  std::vector<ClusterRound> rounds;
  std::size_t selected_epoch = 0;
};

/// Read-only view of the training state handed to an observer at the end of
/// every epoch.
struct EpochState {
  std::size_t epoch;
  const ExtractorWeights& omega;
  const HeadWeights& head;
  const PseudoDomainModel* pseudo;
  const Matrix& embeddings;
};

struct TrainOptions {
  /// Held-out split used to pick the best epoch; without it the final epoch wins.
  std::optional<LearnerView> validation;
  std::function<void(const EpochState&)> on_epoch_end;
};

struct TrainResult {
  AdaptiveClassifier model;
  TrainLog log;
};

namespace seeds {
inline constexpr std::uint64_t finetune = 1000;
inline constexpr std::uint64_t temp_head = 1001;
inline constexpr std::uint64_t head = 1002;
inline constexpr std::uint64_t epoch = 2000;
inline constexpr std::uint64_t round = 3000;
}  // namespace seeds

/// Full training loop. `initial_omega` is the pretrained extractor.
inline TrainResult train(const LearnerView& data, const TrainConfig& config, const ExtractorWeights& initial_omega,
                         const TrainOptions& options = {}) {
  const std::size_t d = initial_omega.feature_dim();
  validate(config, d);
  detail::require(data.features.cols() == initial_omega.input_dim(), ErrorCode::dimension_mismatch,
                  "train: dataset width does not match the extractor input");
  const std::uint64_t seed = config.sgd.seed;
  const auto nc = static_cast<std::size_t>(data.num_classes);

  TrainResult result;
  ExtractorWeights omega = initial_omega;

  {
    HeadWeights temp = init_head(nc, d, split_seed(seed, seeds::temp_head));
    const Matrix none(data.size(), 0);
    double loss = 0.0;
    for (std::size_t e = 0; e < config.finetune_epochs; ++e)
      loss = sgd_epoch(omega, temp, data.features, none, data.labels, config.sgd,
                       split_seed(seed, seeds::finetune + 10 * e));
    result.log.epochs.push_back({0, false, loss});
  }

  const bool clusters = config.variant != Variant::erm;
  const std::size_t p = config.embedding_dim(d);
  HeadWeights head = init_head(nc, d + p, split_seed(seed, seeds::head));
  const auto clustering_epochs = clusters ? config.schedule.epochs(config.sgd.epochs) : std::set<std::size_t>{};

  Matrix embeddings(data.size(), 0);
  std::optional<PseudoDomainModel> pseudo;
  double last_cost = std::numeric_limits<double>::quiet_NaN();

  AdaptiveClassifier candidate;
  std::optional<AdaptiveClassifier> best;
  double best_val = -1.0;

  for (std::size_t t = 1; t <= config.sgd.epochs; ++t) {
    EpochLog row;
    row.epoch = t;
    if (clustering_epochs.contains(t)) {
      ReclusterResult rc = recluster(data, omega, config, split_seed(seed, seeds::round + t), t);
      last_cost = rc.model.centroids.final_cost;
      result.log.rounds.push_back(
          {t, last_cost, rc.model.centroids.iteration_count, rc.assignment.cluster_of});
      embeddings = std::move(rc.embeddings);
      pseudo = std::move(rc.model);
      row.clustered = true;
    }
    row.cluster_cost = last_cost;
    try {
      row.train_loss = sgd_epoch(omega, head, data.features, embeddings, data.labels, config.sgd,
                                 split_seed(seed, seeds::epoch + t));
    } catch (const Error& e) {
      throw Error(e.code(), "epoch " + std::to_string(t) + ": " + e.what());
    }

    if (options.on_epoch_end) options.on_epoch_end({t, omega, head, pseudo ? &*pseudo : nullptr, embeddings});

    candidate.omega = omega;
    candidate.head = head;
    candidate.pseudo = pseudo;
    if (options.validation) {
      row.val_accuracy = accuracy(candidate, options.validation->features, options.validation->labels);
      if (row.val_accuracy >= best_val) {
        best_val = row.val_accuracy;
        best = candidate;
        result.log.selected_epoch = t;
      }
    }
    result.log.epochs.push_back(row);
  }

  result.model = best ? std::move(*best) : std::move(candidate);
  if (!best) result.log.selected_epoch = config.sgd.epochs;
  result.model.config = config;
  result.model.fingerprint = config_fingerprint(config);
  return result;
}

}  // namespace adaclust
