#include "mrkp/model.hpp"

#include "support/oracles.hpp"

#include <doctest.h>

#include <numeric>

using namespace mrkp;

namespace {

EncoderConfig small_encoder(Eigen::Index k) {
  EncoderConfig c;
  c.keypoints = k;
  c.sa1_centers = 32;
  c.sa1_group = 8;
  c.sa2_centers = 8;
  c.sa2_group = 8;
  c.global_width = 16;
  return c;
}

PointCloud random_cloud(Eigen::Index n, oracle::Rng& rng) {
  PointCloud c;
  c.points = oracle::random_points(n, rng, -0.5, 0.5);
  c.id = "r";
  return c;
}

PointCloud permuted(const PointCloud& cloud, oracle::Rng& rng, std::vector<Eigen::Index>* order_out = nullptr) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(cloud.size()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::shuffle(order.begin(), order.end(), rng);
  if (order_out) *order_out = order;
  return select(cloud, order);
}

}  // namespace

TEST_CASE("uniform rows give the centroid; one-hot rows pick points") {
  oracle::Rng rng(1);
  const Points<double> p = oracle::random_points(7, rng);
  Matrix<double> uniform = Matrix<double>::Constant(2, 7, 1.0 / 7);
  const Points<double> kp = predict_keypoints(uniform, p);
  for (Eigen::Index k = 0; k < 2; ++k) CHECK((kp.row(k) - p.colwise().mean()).norm() < 1e-12);
  Matrix<double> onehot = Matrix<double>::Zero(2, 7);
  onehot(0, 3) = 1;
  onehot(1, 6) = 1;
  const Points<double> picked = predict_keypoints(onehot, p);
  CHECK(picked.row(0) == p.row(3));
  CHECK(picked.row(1) == p.row(6));
}

TEST_CASE("predict_keypoints equals an explicit weighted sum") {
  oracle::Rng rng(2);
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 50; ++trial) {
    Matrix<double> w(3, 5);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = u(rng);
    for (Eigen::Index r = 0; r < 3; ++r) w.row(r) /= w.row(r).sum();
    const Points<double> p = oracle::random_points(5, rng);
    const Points<double> kp = predict_keypoints(w, p);
    for (Eigen::Index k = 0; k < 3; ++k) {
      for (int c = 0; c < 3; ++c) {
        double s = 0;
        for (Eigen::Index n = 0; n < 5; ++n) s += w(k, n) * p(n, c);
        CHECK(kp(k, c) == doctest::Approx(s).epsilon(1e-14));
      }
    }
  }
}

TEST_CASE("predict_keypoints rejects mismatched shapes") {
  oracle::Rng rng(3);
  CHECK_THROWS_AS(predict_keypoints(Matrix<double>::Constant(2, 4, 0.25), oracle::random_points(5, rng)), Error);
}

TEST_CASE("saliency: uniform, one-hot and column-sum identity") {
  ScoreMatrix uniform{Matrix<double>::Constant(4, 8, 1.0 / 8)};
  const Vector<double> s = pointwise_saliency(uniform);
  for (Eigen::Index i = 0; i < 8; ++i) CHECK(s(i) == doctest::Approx(0.5));

  ScoreMatrix onehot{Matrix<double>::Zero(2, 5)};
  onehot.weights(0, 1) = 1;
  onehot.weights(1, 4) = 1;
  const Vector<double> h = pointwise_saliency(onehot);
  CHECK(h(1) == 1.0);
  CHECK(h(4) == 1.0);
  CHECK(h(0) + h(2) + h(3) == 0.0);

  oracle::Rng rng(4);
  std::uniform_real_distribution<double> u(0, 1);
  ScoreMatrix big{Matrix<double>(10, 2048)};
  for (Eigen::Index i = 0; i < big.weights.size(); ++i) big.weights.data()[i] = u(rng);
  for (Eigen::Index r = 0; r < 10; ++r) big.weights.row(r) /= big.weights.row(r).sum();
  CHECK(std::abs(pointwise_saliency(big).sum() - 10.0) < 1e-4);
}

TEST_CASE("score validation catches rows that do not sum to one") {
  ScoreMatrix bad{Matrix<double>::Constant(2, 4, 0.3)};
  CHECK_THROWS_AS(validate(bad), Error);
  ScoreMatrix good{Matrix<double>::Constant(2, 4, 0.25)};
  CHECK_NOTHROW(validate(good));
}

TEST_CASE("ball_group: nearest first within the radius, padded with the nearest") {
  Points<double> source(5, 3);
  source << 0, 0, 0, 0.1, 0, 0, 0.3, 0, 0, 0.05, 0, 0, 2, 0, 0;
  Points<double> centers(2, 3);
  centers << 0, 0, 0, 5, 0, 0;
  const auto g = ball_group(source, centers, 0.2, 4);
  REQUIRE(g.size() == 8);
  CHECK(g[0] == 0);
  CHECK(g[1] == 3);
  CHECK(g[2] == 1);
  CHECK(g[3] == 0);
  // nothing inside the radius: the single nearest point fills the group
  for (int k = 4; k < 8; ++k) CHECK(g[static_cast<std::size_t>(k)] == 4);
}

TEST_CASE("ball_group members lie within the radius") {
  oracle::Rng rng(5);
  const Points<double> source = oracle::random_points(200, rng);
  const Points<double> centers = oracle::random_points(20, rng);
  const auto g = ball_group(source, centers, 0.4, 16);
  for (Eigen::Index c = 0; c < 20; ++c) {
    const double nearest = oracle::nearest_distance(centers, c, source);
    for (Eigen::Index k = 0; k < 16; ++k) {
      const double d = oracle::distance(centers, c, source, g[static_cast<std::size_t>(c * 16 + k)]);
      CHECK((d <= 0.4 + 1e-12 || d == nearest));
    }
  }
}

TEST_CASE("three_nn weights are normalized inverse distances") {
  oracle::Rng rng(6);
  const Points<double> source = oracle::random_points(30, rng);
  const Points<double> target = oracle::random_points(10, rng);
  ad::IndexMatrix idx;
  ad::Matrix w;
  three_nn_weights(source, target, idx, w);
  for (Eigen::Index t = 0; t < 10; ++t) {
    CHECK(w.row(t).sum() == doctest::Approx(1.0));
    std::vector<double> d;
    for (Eigen::Index i = 0; i < 30; ++i) d.push_back(oracle::distance(target, t, source, i));
    std::vector<double> sorted = d;
    std::sort(sorted.begin(), sorted.end());
    for (int k = 0; k < 3; ++k) CHECK(d[static_cast<std::size_t>(idx(t, k))] == sorted[static_cast<std::size_t>(k)]);
    CHECK(w(t, 0) >= w(t, 1));
    CHECK(w(t, 1) >= w(t, 2));
  }
}

TEST_CASE("encoder config validation") {
  EncoderConfig c = small_encoder(1);
  CHECK_THROWS_AS(validate(c), Error);
  c = small_encoder(4);
  c.sa1_radius = 0;
  CHECK_THROWS_AS(validate(c), Error);
}

TEST_CASE("forward pass: shapes, row-stochastic scores, activations in (0, 1)") {
  oracle::Rng rng(7);
  const Model model(ModelConfig{small_encoder(10), {}, 3});
  const PointCloud cloud = random_cloud(128, rng);
  const EncodedCloud e = model.encode(cloud);
  CHECK(e.scores.keypoint_count() == 10);
  CHECK(e.scores.point_count() == 128);
  CHECK_NOTHROW(validate(e.scores));
  CHECK(e.feature.activations.size() == 45);
  CHECK((e.feature.activations.array() > 0).all());
  CHECK((e.feature.activations.array() < 1).all());
  CHECK(e.feature.offset_coefficients.rows() == 45 * kOffsetBasisSize);
  CHECK(e.feature.offset_coefficients.isZero(0));
  // keypoints are convex combinations, so they stay inside the bounding box
  for (int c = 0; c < 3; ++c) {
    CHECK(e.keypoints.keypoints.col(c).minCoeff() >= cloud.points.col(c).minCoeff() - 1e-12);
    CHECK(e.keypoints.keypoints.col(c).maxCoeff() <= cloud.points.col(c).maxCoeff() + 1e-12);
  }
}

TEST_CASE("forward pass is deterministic") {
  oracle::Rng rng(8);
  const Model model(ModelConfig{small_encoder(4), {}, 11});
  const PointCloud cloud = random_cloud(96, rng);
  const EncodedCloud a = model.encode(cloud), b = model.encode(cloud);
  CHECK(a.scores.weights == b.scores.weights);
  CHECK(a.keypoints.keypoints == b.keypoints.keypoints);
  CHECK(a.feature.activations == b.feature.activations);
}

TEST_CASE("permuting input points permutes scores and keeps keypoints") {
  oracle::Rng rng(9);
  const Model model(ModelConfig{small_encoder(5), {}, 2});
  for (int trial = 0; trial < 3; ++trial) {
    const PointCloud cloud = random_cloud(150, rng);
    std::vector<Eigen::Index> order;
    const PointCloud shuffled = permuted(cloud, rng, &order);
    const EncodedCloud a = model.encode(cloud), b = model.encode(shuffled);
    CHECK((a.keypoints.keypoints - b.keypoints.keypoints).cwiseAbs().maxCoeff() < 1e-5);
    for (std::size_t n = 0; n < order.size(); ++n) {
      CHECK((b.scores.weights.col(static_cast<Eigen::Index>(n)) - a.scores.weights.col(order[n])).cwiseAbs().maxCoeff() <
            1e-9);
    }
    CHECK((a.feature.activations - b.feature.activations).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("too few points for K is an argument error") {
  oracle::Rng rng(10);
  const Model model(ModelConfig{small_encoder(10), {}, 0});
  CHECK_THROWS_AS(model.encode(random_cloud(8, rng)), Error);
}

TEST_CASE("global feature validation") {
  GlobalFeature gf;
  gf.activations = Vector<double>::Constant(6, 0.5);
  gf.offset_coefficients = Matrix<double>::Zero(6 * kOffsetBasisSize, 3);
  CHECK_NOTHROW(validate(gf, 4));
  CHECK_THROWS_AS(validate(gf, 5), Error);
  gf.activations(2) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(validate(gf, 4), Error);
}

TEST_CASE("head parameter gradients match central differences") {
  oracle::Rng rng(11);
  const Model model(ModelConfig{small_encoder(4), {}, 5});
  const PointCloud cloud = random_cloud(64, rng);
  const EncoderPlan plan = plan_encoder(cloud.points, model.encoder().config());
  nn::ParameterSet params = model.parameters();
  // Give the zero-initialized offset head something to differentiate through.
  const std::size_t offset_w = params.index_of("decoder.offset_head.weight");
  params[offset_w].value = Matrix<double>::Random(params[offset_w].value.rows(), params[offset_w].value.cols()) * 0.1;

  const Matrix<double> w_kp = Matrix<double>::Random(4, 3);
  auto loss_on = [&](ad::Tape& t, nn::Binder& b) {
    const EncoderOutput out = model.encoder()(b, plan, cloud.points);
    const ad::Var kp = ad::sum_squares(ad::add(out.keypoints, t.constant(w_kp)));
    const ad::Var act = ad::sum_squares(out.activations);
    const ad::Var off = ad::sum_squares(out.offset_coefficients);
    return ad::linear_combination({kp, act, off}, {1.0, 0.3, 2.0});
  };
  ad::Tape tape;
  nn::Binder bind(tape, params, true);
  tape.backward(loss_on(tape, bind));
  const auto grads = bind.gradients();
  for (const std::string name : {"encoder.head.weight", "encoder.head.bias", "encoder.activation_head.weight",
                                 "decoder.offset_head.weight"}) {
    const std::size_t i = params.index_of(name);
    nn::ParameterSet probe = params;
    const Matrix<double> numeric = oracle::numeric_gradient<Matrix<double>>(
        [&](const Matrix<double>& v) {
          probe[i].value = v;
          ad::Tape t;
          nn::Binder b(t, probe, false);
          return loss_on(t, b).scalar();
        },
        params[i].value, 1e-5);
    INFO(name);
    CHECK(oracle::relative_error(grads[i], numeric) < 1e-3);
  }
}
