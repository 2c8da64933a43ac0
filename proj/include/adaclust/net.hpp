#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "adaclust/datagen.hpp"
#include "adaclust/error.hpp"
#include "adaclust/matrix.hpp"
#include "adaclust/rng.hpp"

namespace adaclust {

/// One-hidden-layer feature extractor: W2 * relu(W1 x + b1) + b2.
struct ExtractorWeights {
  Matrix W1;  // h x d_raw
  Vector b1;  // h
  Matrix W2;  // d x h
  Vector b2;  // d

  std::size_t input_dim() const noexcept { return W1.cols(); }
  std::size_t hidden_dim() const noexcept { return W1.rows(); }
  std::size_t feature_dim() const noexcept { return W2.rows(); }

  friend bool operator==(const ExtractorWeights&, const ExtractorWeights&) = default;
};

/// Linear classifier over concat(features, embedding).
struct HeadWeights {
  Matrix W;  // n_c x (d + p)
  Vector b;  // n_c

  std::size_t num_classes() const noexcept { return W.rows(); }
  std::size_t input_dim() const noexcept { return W.cols(); }

  friend bool operator==(const HeadWeights&, const HeadWeights&) = default;
};

struct Gradients {
  ExtractorWeights omega;
  HeadWeights head;
};

struct SgdConfig {
  double learning_rate = 0.01;
  double weight_decay = 1e-4;
  std::size_t batch_size = 32;
  std::size_t epochs = 1;
  std::uint64_t seed = 0;
};

inline void validate(const SgdConfig& c) {
  detail::require(c.learning_rate > 0.0 && std::isfinite(c.learning_rate), ErrorCode::invalid_argument,
                  "learning_rate must be positive");
  detail::require(c.weight_decay >= 0.0, ErrorCode::invalid_argument, "weight_decay must be nonnegative");
  detail::require(c.batch_size >= 1, ErrorCode::invalid_argument, "batch_size must be positive");
}

namespace detail {

inline void fill_uniform(std::span<double> values, double bound, Rng& rng) {
  for (double& v : values) v = rng.uniform(-bound, bound);
}

}  // namespace detail

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for every weight and bias.
inline ExtractorWeights init_extractor(std::size_t d_raw, std::size_t hidden, std::size_t feature_dim,
                                       std::uint64_t seed) {
  Rng rng(split_seed(seed, 0x6578));
  ExtractorWeights w{Matrix(hidden, d_raw), Vector(hidden), Matrix(feature_dim, hidden), Vector(feature_dim)};
  const double b1 = 1.0 / std::sqrt(static_cast<double>(d_raw));
  const double b2 = 1.0 / std::sqrt(static_cast<double>(hidden));
  detail::fill_uniform(w.W1.data(), b1, rng);
  detail::fill_uniform(w.b1, b1, rng);
  detail::fill_uniform(w.W2.data(), b2, rng);
  detail::fill_uniform(w.b2, b2, rng);
  return w;
}

inline HeadWeights init_head(std::size_t num_classes, std::size_t input_dim, std::uint64_t seed) {
  Rng rng(split_seed(seed, 0x6864));
  HeadWeights h{Matrix(num_classes, input_dim), Vector(num_classes)};
  const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(input_dim, 1)));
  detail::fill_uniform(h.W.data(), bound, rng);
  detail::fill_uniform(h.b, bound, rng);
  return h;
}

namespace detail {

struct ForwardTrace {
  Vector pre_activation;  // W1 x + b1
  Vector hidden;          // relu(...)
  Vector features;        // W2 hidden + b2
};

inline ForwardTrace forward_extractor(std::span<const double> x, const ExtractorWeights& w) {
  require(x.size() == w.input_dim(), ErrorCode::dimension_mismatch,
          "extract: input has " + std::to_string(x.size()) + " entries, extractor expects " +
              std::to_string(w.input_dim()));
  ForwardTrace t{Vector(w.hidden_dim()), Vector(w.hidden_dim()), Vector(w.feature_dim())};
  for (std::size_t i = 0; i < w.hidden_dim(); ++i) {
    double z = w.b1[i];
    auto wi = w.W1.row(i);
    for (std::size_t j = 0; j < x.size(); ++j) z += wi[j] * x[j];
    t.pre_activation[i] = z;
    t.hidden[i] = z > 0.0 ? z : 0.0;
  }
  for (std::size_t i = 0; i < w.feature_dim(); ++i) {
    double f = w.b2[i];
    auto wi = w.W2.row(i);
    for (std::size_t j = 0; j < t.hidden.size(); ++j) f += wi[j] * t.hidden[j];
    t.features[i] = f;
  }
  for (double f : t.features) require(std::isfinite(f), ErrorCode::non_finite, "extract: non-finite activation");
  return t;
}

inline Vector head_logits(std::span<const double> features, std::span<const double> embedding, const HeadWeights& head) {
  require(features.size() + embedding.size() == head.input_dim(), ErrorCode::dimension_mismatch,
          "head expects input width " + std::to_string(head.input_dim()) + ", got " +
              std::to_string(features.size()) + " + " + std::to_string(embedding.size()));
  Vector logits(head.num_classes());
  const std::size_t d = features.size();
  for (std::size_t c = 0; c < head.num_classes(); ++c) {
    double z = head.b[c];
    auto wc = head.W.row(c);
    for (std::size_t j = 0; j < d; ++j) z += wc[j] * features[j];
    for (std::size_t j = 0; j < embedding.size(); ++j) z += wc[d + j] * embedding[j];
    logits[c] = z;
  }
  return logits;
}

inline double squared_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

}  // namespace detail

inline Vector extract(std::span<const double> x, const ExtractorWeights& omega) {
  return detail::forward_extractor(x, omega).features;
}

inline Matrix extract_all(const Matrix& inputs, const ExtractorWeights& omega) {
  Matrix out(inputs.rows(), omega.feature_dim());
  for (std::size_t i = 0; i < inputs.rows(); ++i) {
    const Vector f = extract(inputs.row(i), omega);
    std::copy(f.begin(), f.end(), out.row(i).begin());
  }
  return out;
}

inline Vector forward_joint(std::span<const double> x, std::span<const double> embedding,
                            const ExtractorWeights& omega, const HeadWeights& head) {
  return detail::head_logits(extract(x, omega), embedding, head);
}

/// Index of the largest logit; ties go to the smallest index.
inline int argmax(std::span<const double> logits) {
  return static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin());
}

struct LossAndGrads {
  double loss = 0.0;
  Gradients grads;
};

inline double weights_squared_norm(const ExtractorWeights& omega, const HeadWeights& head) {
  using detail::squared_norm;
  return squared_norm(omega.W1.data()) + squared_norm(omega.b1) + squared_norm(omega.W2.data()) +
         squared_norm(omega.b2) + squared_norm(head.W.data()) + squared_norm(head.b);
}

/// Mean softmax cross-entropy over `rows` plus (weight_decay / 2) * ||all
/// weights||^2, with exact gradients. Embeddings are inputs only: no gradient
/// flows into them.
inline LossAndGrads loss_and_grads(const Matrix& inputs, const Matrix& embeddings, std::span<const int> labels,
                                   std::span<const std::size_t> rows, const ExtractorWeights& omega,
                                   const HeadWeights& head, double weight_decay) {
  detail::require(!rows.empty(), ErrorCode::invalid_argument, "loss_and_grads: empty batch");
  detail::require(embeddings.rows() == inputs.rows() && labels.size() == inputs.rows(),
                  ErrorCode::dimension_mismatch, "loss_and_grads: inputs, embeddings and labels disagree");
  const std::size_t nc = head.num_classes(), d = omega.feature_dim(), h = omega.hidden_dim();
  LossAndGrads out;
  Gradients& g = out.grads;
  g.omega = {Matrix(h, omega.input_dim()), Vector(h), Matrix(d, h), Vector(d)};
  g.head = {Matrix(nc, head.input_dim()), Vector(nc)};
  const double inv_batch = 1.0 / static_cast<double>(rows.size());

  Vector dlogits(nc), dfeat(d), dhidden(h);
  for (std::size_t r : rows) {
    const int y = labels[r];
    detail::require(y >= 0 && static_cast<std::size_t>(y) < nc, ErrorCode::invalid_argument,
                    "loss_and_grads: label out of range");
    auto x = inputs.row(r);
    auto emb = embeddings.row(r);
    const auto trace = detail::forward_extractor(x, omega);
    const Vector logits = detail::head_logits(trace.features, emb, head);

    const double zmax = *std::max_element(logits.begin(), logits.end());
    double denom = 0.0;
    for (std::size_t c = 0; c < nc; ++c) denom += std::exp(logits[c] - zmax);
    const double log_denom = std::log(denom);
    out.loss += (log_denom - (logits[y] - zmax)) * inv_batch;
    for (std::size_t c = 0; c < nc; ++c)
      dlogits[c] = (std::exp(logits[c] - zmax - log_denom) - (static_cast<int>(c) == y ? 1.0 : 0.0)) * inv_batch;

    std::fill(dfeat.begin(), dfeat.end(), 0.0);
    for (std::size_t c = 0; c < nc; ++c) {
      const double dz = dlogits[c];
      g.head.b[c] += dz;
      auto gw = g.head.W.row(c);
      auto wc = head.W.row(c);
      for (std::size_t j = 0; j < d; ++j) {
        gw[j] += dz * trace.features[j];
        dfeat[j] += dz * wc[j];
      }
      for (std::size_t j = 0; j < emb.size(); ++j) gw[d + j] += dz * emb[j];
    }

    std::fill(dhidden.begin(), dhidden.end(), 0.0);
    for (std::size_t i = 0; i < d; ++i) {
      const double df = dfeat[i];
      g.omega.b2[i] += df;
      auto gw = g.omega.W2.row(i);
      auto wi = omega.W2.row(i);
      for (std::size_t j = 0; j < h; ++j) {
        gw[j] += df * trace.hidden[j];
        dhidden[j] += df * wi[j];
      }
    }
    for (std::size_t i = 0; i < h; ++i) {
      if (trace.pre_activation[i] <= 0.0) continue;
      const double dz = dhidden[i];
      g.omega.b1[i] += dz;
      auto gw = g.omega.W1.row(i);
      for (std::size_t j = 0; j < x.size(); ++j) gw[j] += dz * x[j];
    }
  }

  if (weight_decay > 0.0) {
    out.loss += 0.5 * weight_decay * weights_squared_norm(omega, head);
    auto decay = [weight_decay](std::span<double> grad, std::span<const double> w) {
      for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += weight_decay * w[i];
    };
    decay(g.omega.W1.data(), omega.W1.data());
    decay(g.omega.b1, omega.b1);
    decay(g.omega.W2.data(), omega.W2.data());
    decay(g.omega.b2, omega.b2);
    decay(g.head.W.data(), head.W.data());
    decay(g.head.b, head.b);
  }
  return out;
}

/// Whole-dataset convenience overload.
inline LossAndGrads loss_and_grads(const Matrix& inputs, const Matrix& embeddings, std::span<const int> labels,
                                   const ExtractorWeights& omega, const HeadWeights& head, double weight_decay) {
  std::vector<std::size_t> rows(inputs.rows());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return loss_and_grads(inputs, embeddings, labels, rows, omega, head, weight_decay);
}

/// w <- w - lr * grad. Weight decay already lives inside the gradients.
inline void sgd_step(ExtractorWeights& omega, HeadWeights& head, const Gradients& grads, double learning_rate) {
  auto check = [](std::span<const double> g, const char* name) {
    for (std::size_t i = 0; i < g.size(); ++i)
      detail::require(std::isfinite(g[i]), ErrorCode::non_finite,
                      std::string("sgd_step: non-finite gradient in ") + name + " at flat index " +
                          std::to_string(i));
  };
  check(grads.omega.W1.data(), "W1");
  check(grads.omega.b1, "b1");
  check(grads.omega.W2.data(), "W2");
  check(grads.omega.b2, "b2");
  check(grads.head.W.data(), "head.W");
  check(grads.head.b, "head.b");
  auto step = [learning_rate](std::span<double> w, std::span<const double> g) {
    detail::require(w.size() == g.size(), ErrorCode::dimension_mismatch, "sgd_step: gradient shape mismatch");
    for (std::size_t i = 0; i < w.size(); ++i) w[i] -= learning_rate * g[i];
  };
  step(omega.W1.data(), grads.omega.W1.data());
  step(omega.b1, grads.omega.b1);
  step(omega.W2.data(), grads.omega.W2.data());
  step(omega.b2, grads.omega.b2);
  step(head.W.data(), grads.head.W.data());
  step(head.b, grads.head.b);
}

/// One pass over the data in a seeded shuffled order; the last partial batch
/// is kept. Returns the mean of the per-batch losses.
inline double sgd_epoch(ExtractorWeights& omega, HeadWeights& head, const Matrix& inputs, const Matrix& embeddings,
                        std::span<const int> labels, const SgdConfig& sgd, std::uint64_t epoch_seed) {
  std::vector<std::size_t> order(inputs.rows());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(epoch_seed);
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  double total = 0.0;
  std::size_t batches = 0;
  for (std::size_t start = 0; start < order.size(); start += sgd.batch_size) {
    const std::size_t end = std::min(order.size(), start + sgd.batch_size);
    const auto rows = std::span<const std::size_t>(order).subspan(start, end - start);
    const LossAndGrads lg = loss_and_grads(inputs, embeddings, labels, rows, omega, head, sgd.weight_decay);
    detail::require(std::isfinite(lg.loss), ErrorCode::non_finite, "training diverged: non-finite loss");
    sgd_step(omega, head, lg.grads, sgd.learning_rate);
    total += lg.loss;
    ++batches;
  }
  return batches == 0 ? 0.0 : total / static_cast<double>(batches);
}

struct PretrainConfig {
  std::size_t hidden = 64;
  std::size_t feature_dim = 32;
  std::size_t num_domains = 8;
  std::size_t per_domain = 200;
  SgdConfig sgd{0.01, 1e-4, 32, 5, 0};
};

/// Stand-in for a backbone pretrained on a large external corpus: trains the
/// extractor with a temporary head on domains drawn from the pretraining
/// range of the mother distribution, then drops the head.
inline ExtractorWeights pretrain_extractor(const MotherDistribution& mother, const PretrainConfig& config) {
  ExtractorWeights omega = init_extractor(static_cast<std::size_t>(mother.d_raw()), config.hidden, config.feature_dim,
                                          config.sgd.seed);
  if (config.sgd.epochs == 0) return omega;
  validate(config.sgd);
  std::vector<std::uint64_t> draws(config.num_domains);
  for (std::size_t i = 0; i < draws.size(); ++i) draws[i] = kPretrainDrawBase + i;
  const AggregatedDataset pool = aggregate_domains(mother, draws, config.per_domain);
  HeadWeights head = init_head(static_cast<std::size_t>(mother.num_classes()), config.feature_dim,
                               split_seed(config.sgd.seed, 1));
  const Matrix no_embedding(pool.size(), 0);
  for (std::size_t e = 0; e < config.sgd.epochs; ++e)
    sgd_epoch(omega, head, pool.features(), no_embedding, pool.labels(), config.sgd,
              split_seed(config.sgd.seed, 100 + e));
  return omega;
}

}  // namespace adaclust
