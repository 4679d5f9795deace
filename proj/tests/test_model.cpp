#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "oracles.hpp"
#include "spbs/model.hpp"

using namespace spbs;

namespace {

Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, Rng* rng, double scale = 0.5) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = rng->normal(0.0, scale);
  return m;
}

Eigen::VectorXd random_vector(Eigen::Index n, Rng* rng, double scale = 0.5) {
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = rng->normal(0.0, scale);
  return v;
}

}  // namespace

TEST_CASE("attention on a single image is the identity") {
  Eigen::VectorXd b_t(2);
  b_t << 1.0, -0.5;
  Eigen::MatrixXd projected(1, 2);
  projected << 0.3, 0.7;
  AttentionResult out = attend_images(b_t, projected);
  REQUIRE(out.weights.size() == 1);
  CHECK(out.weights(0) == doctest::Approx(1.0));
  CHECK((out.image_representation - projected.row(0).transpose()).norm() < 1e-12);
}

TEST_CASE("attention weights follow the softmax of dot products") {
  Eigen::VectorXd b_t(2);
  b_t << 1.0, 0.0;
  Eigen::MatrixXd projected(2, 2);
  projected << 1.0, 0.0, 0.0, 1.0;
  AttentionResult out = attend_images(b_t, projected);
  CHECK(out.weights(0) == doctest::Approx(0.7310585786).epsilon(1e-9));
  CHECK(out.weights(1) == doctest::Approx(0.2689414214).epsilon(1e-9));
  CHECK(out.image_representation(0) == doctest::Approx(0.7310585786).epsilon(1e-9));
  CHECK(out.image_representation(1) == doctest::Approx(0.2689414214).epsilon(1e-9));
}

TEST_CASE("identical images get uniform attention") {
  Eigen::VectorXd b_t(3);
  b_t << 0.2, -1.0, 0.4;
  Eigen::MatrixXd projected(4, 3);
  for (int i = 0; i < 4; ++i) projected.row(i) << 0.5, 0.25, -0.125;
  AttentionResult out = attend_images(b_t, projected);
  for (int i = 0; i < 4; ++i) CHECK(out.weights(i) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK((out.image_representation - projected.row(0).transpose()).norm() < 1e-12);
}

TEST_CASE("no images yields the zero vector and empty weights") {
  Eigen::VectorXd b_t = Eigen::VectorXd::Ones(5);
  AttentionResult out = attend_images(b_t, Eigen::MatrixXd(0, 0));
  CHECK(out.weights.size() == 0);
  CHECK(out.image_representation.isZero(0.0));
  CHECK(out.image_representation.size() == 5);
}

TEST_CASE("attention contract violations") {
  Eigen::VectorXd b_t = Eigen::VectorXd::Ones(3);
  CHECK_THROWS_AS(attend_images(b_t, Eigen::MatrixXd::Ones(2, 4)), ContractError);
  Eigen::VectorXd bad = b_t;
  bad(0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(attend_images(bad, Eigen::MatrixXd::Ones(2, 3)), ContractError);
}

TEST_CASE("attention properties over random cases") {
  Rng rng(99);
  for (int trial = 0; trial < 300; ++trial) {
    int d = 2 + static_cast<int>(rng.below(6));
    int m = 1 + static_cast<int>(rng.below(7));
    Eigen::VectorXd b_t = random_vector(d, &rng, 1.0);
    Eigen::MatrixXd projected = random_matrix(m, d, &rng, 1.0);
    AttentionResult out = attend_images(b_t, projected);
    CHECK(std::abs(out.weights.sum() - 1.0) < 1e-6);
    CHECK(out.weights.minCoeff() >= 0.0);

    // Permutation equivariance of the weights, invariance of the sum.
    std::vector<int> perm(static_cast<std::size_t>(m));
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    Eigen::MatrixXd permuted(m, d);
    for (int i = 0; i < m; ++i) permuted.row(i) = projected.row(perm[static_cast<std::size_t>(i)]);
    AttentionResult out_p = attend_images(b_t, permuted);
    for (int i = 0; i < m; ++i)
      CHECK(out_p.weights(i) ==
            doctest::Approx(out.weights(perm[static_cast<std::size_t>(i)])).epsilon(1e-9));
    CHECK((out_p.image_representation - out.image_representation).norm() < 1e-9);

    // Adding a constant to every logit leaves the weights unchanged.
    double shift = rng.normal(0.0, 2.0);
    double norm_sq = b_t.squaredNorm();
    if (norm_sq > 1e-9) {
      Eigen::MatrixXd shifted = projected;
      shifted.rowwise() += (shift / norm_sq) * b_t.transpose();
      AttentionResult out_s = attend_images(b_t, shifted);
      for (int i = 0; i < m; ++i)
        CHECK(out_s.weights(i) == doctest::Approx(out.weights(i)).epsilon(1e-6));
    }
  }
}

TEST_CASE("classifier scores reduce to sigmoid of the affine map") {
  Rng rng(5);
  int d = 3, n = 2;
  ClassifierParams params(d, n, &rng);
  SUBCASE("zero parameters give 0.5 everywhere") {
    params.weight.value.setZero();
    params.bias.value.setZero();
    Eigen::VectorXd p =
        predict_scores(random_vector(d, &rng), random_vector(d, &rng), params);
    for (int i = 0; i < n; ++i) CHECK(p(i) == doctest::Approx(0.5));
  }
  SUBCASE("large bias saturates") {
    params.weight.value.setZero();
    params.bias.value.setZero();
    params.bias.value(0, 1) = 20.0;
    Eigen::VectorXd p = predict_scores(Eigen::VectorXd::Zero(d), Eigen::VectorXd::Zero(d), params);
    CHECK(p(1) > 0.999);
    CHECK(p(0) == doctest::Approx(0.5));
  }
  SUBCASE("random case matches a hand-evaluated sigmoid") {
    Eigen::VectorXd b_t = random_vector(d, &rng);
    Eigen::VectorXd b_i = random_vector(d, &rng);
    Eigen::VectorXd p = predict_scores(b_t, b_i, params);
    for (int s = 0; s < n; ++s) {
      double z = params.bias.value(0, s);
      for (int j = 0; j < d; ++j) {
        z += params.weight.value(j, s) * b_t(j);
        z += params.weight.value(d + j, s) * b_i(j);
      }
      CHECK(p(s) == doctest::Approx(1.0 / (1.0 + std::exp(-z))).epsilon(1e-12));
      CHECK(p(s) > 0.0);
      CHECK(p(s) < 1.0);
    }
  }
}

TEST_CASE("spbs loss hand values") {
  Eigen::VectorXd half = Eigen::VectorXd::Constant(4, 0.5);
  CHECK(spbs_loss(half, {1}, 4) == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  Eigen::VectorXd sharp(3);
  sharp << 1.0 - 1e-12, 1e-12, 1e-12;
  CHECK(spbs_loss(sharp, {0}, 3) < 1e-5);  // perfect-prediction limit

  // Empty gold: only the log(1-p) terms remain.
  Eigen::VectorXd p(2);
  p << 0.25, 0.75;
  double expected = -(std::log(0.75) + std::log(0.25)) / 2.0;
  CHECK(spbs_loss(p, {}, 2) == doctest::Approx(expected).epsilon(1e-12));

  // Scores at exactly 0/1 are clamped, not infinite.
  Eigen::VectorXd extreme(2);
  extreme << 1.0, 0.0;
  CHECK(std::isfinite(spbs_loss(extreme, {0}, 2)));
  CHECK(spbs_loss(extreme, {0}, 2) < 1e-5);

  // Raising a gold score strictly decreases the loss.
  Rng rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::VectorXd scores(5);
    for (int i = 0; i < 5; ++i) scores(i) = rng.uniform(0.05, 0.95);
    double before = spbs_loss(scores, {2}, 5);
    scores(2) = std::min(0.999, scores(2) + 0.01);
    CHECK(spbs_loss(scores, {2}, 5) < before);
  }
}

TEST_CASE("mcsp loss reduces to the spbs hand case") {
  Rng rng(41);
  int d = 4, n = 4;
  McspHeadParams head(d, n, &rng);
  head.weight.value.setZero();
  head.bias.value.setZero();
  Eigen::MatrixXd one_state = Eigen::MatrixXd::Ones(1, d);
  CHECK(mcsp_loss(one_state, {{1}}, head, n) == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  Eigen::MatrixXd two_states(2, d);
  two_states << one_state, one_state;
  CHECK(mcsp_loss(two_states, {{1}, {1}}, head, n) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));

  // A saturating head drives the loss to ~0.
  head.bias.value = Eigen::MatrixXd::Constant(1, n, -20.0);
  head.bias.value(0, 2) = 20.0;
  CHECK(mcsp_loss(one_state, {{2}}, head, n) < 0.01);

  CHECK_THROWS_AS(mcsp_loss(one_state, {{}}, head, n), ContractError);
  CHECK_THROWS_AS(mcsp_loss(Eigen::MatrixXd(0, d), {}, head, n), ContractError);
}

TEST_CASE("threshold selection is strict and monotone") {
  Eigen::VectorXd p(3);
  p << 0.50, 0.42, 0.43;
  CHECK(select_sememes(p, 0.42) == std::set<int>{0, 2});
  CHECK(select_sememes(p, 0.6) == std::set<int>{});
  CHECK_THROWS_AS(select_sememes(p, 0.0), ContractError);
  CHECK_THROWS_AS(select_sememes(p, 1.0), ContractError);

  Rng rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    Eigen::VectorXd scores(6);
    for (int i = 0; i < 6; ++i) scores(i) = rng.uniform(0.0, 1.0) * 0.98 + 0.01;
    double lo = rng.uniform(0.05, 0.5);
    double hi = lo + rng.uniform(0.0, 0.45);
    auto wide = select_sememes(scores, lo);
    auto narrow = select_sememes(scores, hi);
    for (int s : narrow) CHECK(wide.count(s) == 1);
  }
}

TEST_CASE("graph forward agrees with the plain inference path") {
  Rng rng(61);
  int d_t = 6, d_img = 3, n = 5, m = 4;
  ProjectionParams projection(d_img, d_t, &rng);
  ClassifierParams classifier(d_t, n, &rng);
  Eigen::MatrixXd hidden = random_matrix(7, d_t, &rng, 1.0);
  Eigen::MatrixXd raw = random_matrix(m, d_img, &rng, 1.0);
  std::set<int> gold{0, 3};

  ad::Graph graph;
  auto hidden_var = graph.input(hidden);
  auto loss_var = build_spbs_loss(graph, hidden_var, raw, gold, projection, classifier, n, true);

  Eigen::VectorXd b_t = hidden.row(0).transpose();
  Eigen::MatrixXd projected = project_images(raw, projection);
  Eigen::VectorXd b_i = attend_images(b_t, projected).image_representation;
  Eigen::VectorXd p = predict_scores(b_t, b_i, classifier);
  CHECK(graph.value(loss_var)(0, 0) == doctest::Approx(spbs_loss(p, gold, n)).epsilon(1e-12));
}

TEST_CASE("image ablation zeroes the image half without changing shapes") {
  Rng rng(71);
  int d_t = 4, d_img = 3, n = 3;
  ProjectionParams projection(d_img, d_t, &rng);
  ClassifierParams classifier(d_t, n, &rng);
  Eigen::MatrixXd hidden = random_matrix(2, d_t, &rng);
  Eigen::MatrixXd images_a = random_matrix(5, d_img, &rng);
  Eigen::MatrixXd images_b = random_matrix(2, d_img, &rng);

  auto scores_with = [&](const Eigen::MatrixXd& raw, bool use_images) {
    ad::Graph graph;
    auto logits = build_fusion_scores(graph, graph.input(hidden), raw, projection, classifier,
                                      use_images);
    return Eigen::VectorXd(graph.value(logits).row(0).transpose());
  };
  // With images off, the scores ignore the image bag entirely.
  CHECK((scores_with(images_a, false) - scores_with(images_b, false)).norm() == 0.0);
  CHECK((scores_with(images_a, true) - scores_with(images_b, true)).norm() > 1e-8);

  // The classifier input stays 2*d_t in both modes.
  CHECK(classifier.weight.value.rows() == 2 * d_t);
}

TEST_CASE("end-to-end gradient check through projection, attention and classifier") {
  Rng rng(83);
  for (int trial = 0; trial < 5; ++trial) {
    int d_t = 4, d_img = 3, n = 4, m = 3;
    ProjectionParams projection(d_img, d_t, &rng);
    ClassifierParams classifier(d_t, n, &rng);
    Eigen::MatrixXd hidden = random_matrix(3, d_t, &rng, 0.8);
    Eigen::MatrixXd raw = random_matrix(m, d_img, &rng, 0.8);
    std::set<int> gold{1, 2};

    std::vector<ad::Tensor*> params;
    for (ad::Tensor* t : projection.tensors()) params.push_back(t);
    for (ad::Tensor* t : classifier.tensors()) params.push_back(t);
    auto eval = [&]() {
      ad::Graph graph;
      auto loss = build_spbs_loss(graph, graph.input(hidden), raw, gold, projection, classifier,
                                  n, true);
      return graph.value(loss)(0, 0);
    };
    for (ad::Tensor* t : params) t->zero_grad();
    {
      ad::Graph graph;
      auto loss = build_spbs_loss(graph, graph.input(hidden), raw, gold, projection, classifier,
                                  n, true);
      graph.backward(loss);
    }
    auto numeric = oracles::finite_difference(eval, params);
    for (std::size_t i = 0; i < params.size(); ++i)
      CHECK(oracles::gradient_relative_error(params[i]->grad, numeric[i]) < 1e-4);
  }
}
