#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <numeric>

#include "adaclust/clustering.hpp"
#include "adaclust/datagen.hpp"
#include "adaclust/net.hpp"
#include "adaclust/spectral.hpp"

using namespace adaclust;

namespace {

Matrix random_inputs(std::size_t m, std::size_t d, std::uint64_t seed) {
  Rng rng(seed);
  Matrix out(m, d);
  for (double& v : out.data()) v = rng.normal();
  return out;
}

// Straight-line forward pass written without the library's helpers.
Vector oracle_logits(const Vector& x, const Vector& psi, const ExtractorWeights& w, const HeadWeights& head) {
  const std::size_t h = w.W1.rows(), d = w.W2.rows();
  Vector hidden(h), feat(d), z(head.W.rows());
  for (std::size_t i = 0; i < h; ++i) {
    double s = w.b1[i];
    for (std::size_t j = 0; j < x.size(); ++j) s += w.W1(i, j) * x[j];
    hidden[i] = std::max(s, 0.0);
  }
  for (std::size_t i = 0; i < d; ++i) {
    double s = w.b2[i];
    for (std::size_t j = 0; j < h; ++j) s += w.W2(i, j) * hidden[j];
    feat[i] = s;
  }
  for (std::size_t c = 0; c < z.size(); ++c) {
    double s = head.b[c];
    for (std::size_t j = 0; j < d; ++j) s += head.W(c, j) * feat[j];
    for (std::size_t j = 0; j < psi.size(); ++j) s += head.W(c, d + j) * psi[j];
    z[c] = s;
  }
  return z;
}

std::vector<std::pair<std::span<double>, std::span<const double>>> params_and_grads(ExtractorWeights& w,
                                                                                     HeadWeights& hd,
                                                                                     const Gradients& g) {
  return {{w.W1.data(), g.omega.W1.data()}, {w.b1, g.omega.b1},       {w.W2.data(), g.omega.W2.data()},
          {w.b2, g.omega.b2},               {hd.W.data(), g.head.W.data()}, {hd.b, g.head.b}};
}

void finite_difference_check(ExtractorWeights w, HeadWeights hd, double weight_decay, std::uint64_t seed) {
  const Matrix x = random_inputs(9, w.input_dim(), seed);
  const Matrix psi = random_inputs(9, hd.input_dim() - w.feature_dim(), seed + 1);
  std::vector<int> y(9);
  for (std::size_t i = 0; i < 9; ++i) y[i] = static_cast<int>(i % hd.num_classes());
  const auto analytic = loss_and_grads(x, psi, y, w, hd, weight_decay);
  const double step = 1e-5;
  double worst = 0.0;
  for (auto [param, grad] : params_and_grads(w, hd, analytic.grads)) {
    ASSERT_EQ(param.size(), grad.size());
    for (std::size_t i = 0; i < param.size(); ++i) {
      const double saved = param[i];
      param[i] = saved + step;
      const double up = loss_and_grads(x, psi, y, w, hd, weight_decay).loss;
      param[i] = saved - step;
      const double down = loss_and_grads(x, psi, y, w, hd, weight_decay).loss;
      param[i] = saved;
      const double numeric = (up - down) / (2 * step);
      const double rel = std::abs(numeric - grad[i]) / std::max({std::abs(numeric), std::abs(grad[i]), 1e-6});
      worst = std::max(worst, rel);
    }
  }
  EXPECT_LE(worst, 1e-4);
}

}  // namespace

TEST(Extract, ZeroWeightsGiveBias) {
  ExtractorWeights w{Matrix(4, 3), Vector(4, 0.0), Matrix(2, 4), Vector{0.5, -1.5}};
  EXPECT_EQ(extract(Vector{1, 2, 3}, w), (Vector{0.5, -1.5}));
}

TEST(Extract, ZeroFirstLayerIsConstant) {
  ExtractorWeights w{Matrix(2, 3), Vector{1.0, 2.0}, Matrix{{1, 0}, {0, 1}}, Vector(2, 0.0)};
  EXPECT_EQ(extract(Vector{1, 2, 3}, w), extract(Vector{-7, 0, 9}, w));
  EXPECT_EQ(extract(Vector{1, 2, 3}, w), (Vector{1.0, 2.0}));
}

TEST(ForwardJoint, MatchesOracle) {
  const auto w = init_extractor(5, 7, 6, 3);
  const auto hd = init_head(3, 6 + 2, 4);
  Rng rng(5);
  for (int t = 0; t < 20; ++t) {
    Vector x(5), psi(2);
    for (double& v : x) v = rng.normal();
    for (double& v : psi) v = rng.normal();
    const Vector got = forward_joint(x, psi, w, hd);
    const Vector want = oracle_logits(x, psi, w, hd);
    for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(got[c], want[c], 1e-12);
  }
}

TEST(ForwardJoint, EmptyEmbeddingIsPlainHead) {
  const auto w = init_extractor(5, 7, 6, 3);
  const auto hd = init_head(3, 6, 4);
  const Vector x{1, 2, 3, 4, 5};
  EXPECT_EQ(forward_joint(x, Vector{}, w, hd), oracle_logits(x, Vector{}, w, hd));
  EXPECT_THROW(forward_joint(x, Vector{1.0}, w, hd), Error);
  EXPECT_THROW(forward_joint(Vector{1, 2}, Vector{}, w, hd), Error);
}

TEST(Loss, UniformLogitsGiveLogClasses) {
  const auto w = init_extractor(3, 4, 2, 1);
  HeadWeights hd{Matrix(4, 2), Vector(4, 0.0)};
  const Matrix x = random_inputs(6, 3, 2);
  const std::vector<int> y{0, 1, 2, 3, 0, 1};
  const auto r = loss_and_grads(x, Matrix(6, 0), y, w, hd, 0.0);
  EXPECT_NEAR(r.loss, std::log(4.0), 1e-12);
}

TEST(Loss, GradientsMatchFiniteDifferences) {
  finite_difference_check(init_extractor(5, 7, 6, 11), init_head(3, 6 + 2, 12), 0.0, 13);
  finite_difference_check(init_extractor(5, 7, 6, 21), init_head(3, 6, 22), 0.01, 23);
}

TEST(Loss, ZeroWeightGradientsMatchFiniteDifferences) {
  ExtractorWeights w = init_extractor(5, 7, 6, 31);
  // Zero the head and second layer; the first layer stays random so ReLUs are active.
  for (double& v : w.W2.data()) v = 0.0;
  finite_difference_check(w, HeadWeights{Matrix(3, 8), Vector(3, 0.0)}, 0.0, 32);
}

TEST(Loss, EmbeddingHasNoGradientButAffectsLoss) {
  const auto w = init_extractor(4, 5, 3, 1);
  const auto hd = init_head(2, 3 + 2, 2);
  const Matrix x = random_inputs(4, 4, 3);
  Matrix psi = random_inputs(4, 2, 4);
  const std::vector<int> y{0, 1, 0, 1};
  const auto a = loss_and_grads(x, psi, y, w, hd, 0.0);
  psi(0, 0) += 1.0;
  const auto b = loss_and_grads(x, psi, y, w, hd, 0.0);
  EXPECT_NE(a.loss, b.loss);
  // Gradients mirror weight shapes exactly; nothing is sized like the embeddings.
  EXPECT_EQ(a.grads.head.W.cols(), hd.input_dim());
  EXPECT_EQ(a.grads.omega.W1.rows(), w.W1.rows());
}

TEST(Loss, Errors) {
  const auto w = init_extractor(2, 3, 2, 1);
  const auto hd = init_head(2, 2, 1);
  const Matrix x = random_inputs(2, 2, 1);
  EXPECT_THROW(loss_and_grads(x, Matrix(2, 0), std::vector<int>{0, 2}, w, hd, 0.0), Error);
  EXPECT_THROW(loss_and_grads(x, Matrix(2, 0), std::vector<int>{0, 1}, std::vector<std::size_t>{}, w, hd, 0.0), Error);
}

TEST(Loss, BoundsAndDecayTerm) {
  const auto w = init_extractor(3, 4, 2, 1);
  const auto hd = init_head(3, 2, 2);
  const Matrix x = random_inputs(5, 3, 3);
  const std::vector<int> y{0, 1, 2, 0, 1};
  const auto plain = loss_and_grads(x, Matrix(5, 0), y, w, hd, 0.0);
  const auto decayed = loss_and_grads(x, Matrix(5, 0), y, w, hd, 0.1);
  EXPECT_GE(plain.loss, 0.0);
  EXPECT_NEAR(decayed.loss - plain.loss, 0.05 * weights_squared_norm(w, hd), 1e-12);
}

TEST(Sgd, ZeroLearningRateLeavesWeightsUnchanged) {
  auto w = init_extractor(3, 4, 2, 1);
  auto hd = init_head(2, 2, 2);
  const auto w0 = w;
  const auto h0 = hd;
  const Matrix x = random_inputs(4, 3, 3);
  const auto r = loss_and_grads(x, Matrix(4, 0), std::vector<int>{0, 1, 0, 1}, w, hd, 0.0);
  sgd_step(w, hd, r.grads, 0.0);
  EXPECT_EQ(w, w0);
  EXPECT_EQ(hd, h0);
}

TEST(Sgd, SingleParameterClosedForm) {
  // Head-only model: one bias on two classes with zero features. Loss depends on b0 - b1.
  ExtractorWeights w{Matrix(1, 1), Vector(1, 0.0), Matrix(1, 1), Vector(1, 0.0)};
  HeadWeights hd{Matrix(2, 1), Vector{0.0, 0.0}};
  const Matrix x(1, 1);
  const auto r = loss_and_grads(x, Matrix(1, 0), std::vector<int>{0}, w, hd, 0.0);
  // d/db0 of -log softmax_0 at equal logits is p0 - 1 = -0.5.
  EXPECT_NEAR(r.grads.head.b[0], -0.5, 1e-15);
  sgd_step(w, hd, r.grads, 0.2);
  EXPECT_NEAR(hd.b[0], 0.1, 1e-15);
  EXPECT_NEAR(hd.b[1], -0.1, 1e-15);
}

TEST(Sgd, NonFiniteGradientRejected) {
  auto w = init_extractor(2, 2, 2, 1);
  auto hd = init_head(2, 2, 1);
  Gradients g{{Matrix(2, 2), Vector(2, 0.0), Matrix(2, 2), Vector(2, 0.0)}, {Matrix(2, 2), Vector(2, 0.0)}};
  g.omega.b1[1] = NAN;
  EXPECT_THROW(sgd_step(w, hd, g, 0.1), Error);
}

TEST(Sgd, SeparableToyLossDecreases) {
  Rng rng(8);
  Matrix x(40, 2);
  std::vector<int> y(40);
  for (std::size_t i = 0; i < 40; ++i) {
    y[i] = static_cast<int>(i % 2);
    x(i, 0) = (y[i] == 0 ? -2.0 : 2.0) + 0.3 * rng.normal();
    x(i, 1) = rng.normal();
  }
  auto w = init_extractor(2, 8, 4, 1);
  auto hd = init_head(2, 4, 2);
  const SgdConfig sgd{0.05, 0.0, 8, 1, 0};
  double previous = std::numeric_limits<double>::infinity();
  for (std::uint64_t e = 0; e < 10; ++e) {
    // 50 steps total: 5 batches per epoch.
    const double loss = sgd_epoch(w, hd, x, Matrix(40, 0), y, sgd, e);
    EXPECT_LT(loss, previous) << "epoch " << e;
    previous = loss;
  }
}

TEST(Pretrain, ZeroEpochsReturnsInit) {
  const auto mother = make_mother(MotherConfig{});
  PretrainConfig c;
  c.sgd.epochs = 0;
  c.sgd.seed = 5;
  EXPECT_EQ(pretrain_extractor(mother, c), init_extractor(16, c.hidden, c.feature_dim, 5));
}

TEST(Pretrain, Deterministic) {
  const auto mother = make_mother(MotherConfig{});
  PretrainConfig c;
  c.sgd.epochs = 1;
  c.per_domain = 40;
  EXPECT_EQ(pretrain_extractor(mother, c), pretrain_extractor(mother, c));
}

TEST(Pretrain, WindowedFeaturesClusterByDomainBetterThanRandomInit) {
  // Clustering happens past the n_c leading (class) directions, as in training.
  double pretrained_total = 0.0, random_total = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    MotherConfig mc;
    mc.seed = seed;
    const auto mother = make_mother(mc);
    const auto data = sample_training_set(mother, 6, 200);
    const auto domains = data.evaluator_domains();
    PretrainConfig pc;
    pc.sgd.seed = seed;
    PretrainConfig rc = pc;
    rc.sgd.epochs = 0;
    for (auto [config, total] : {std::pair{&pc, &pretrained_total}, std::pair{&rc, &random_total}}) {
      const Matrix feats = extract_all(data.features(), pretrain_extractor(mother, *config));
      const Matrix window = project(feats, covariance_eigenbasis(feats, {4, 8}));
      const auto km = kmeans_fit(window, 6, seed);
      *total += nmi(std::span<const int>(km.assignment.cluster_of), domains);
    }
  }
  EXPECT_GT(pretrained_total / 5.0, random_total / 5.0);
}
