#include "mrkp/losses.hpp"

#include "support/oracles.hpp"

#include <doctest.h>

using namespace mrkp;

namespace {

PointCloud as_cloud(const Points<double>& p) {
  PointCloud c;
  c.points = p;
  return c;
}

SkeletonReconstruction single_segment(const Points<double>& points, double activation) {
  SkeletonReconstruction rec;
  rec.layout.keypoint_count = 2;
  rec.layout.endpoints.emplace_back(0, 1);
  rec.layout.segment_begin = {0, points.rows()};
  for (Eigen::Index m = 0; m < points.rows(); ++m) rec.layout.arc.push_back(0);
  rec.points = points;
  rec.activations = Vector<double>::Constant(1, activation);
  return rec;
}

}  // namespace

TEST_CASE("fidelity: reconstruction inside the target costs nothing") {
  oracle::Rng rng(1);
  const Points<double> target = oracle::random_points(12, rng);
  auto rec = oracle::toy_reconstruction({3, 4}, rng);
  for (Eigen::Index p = 0; p < rec.points.rows(); ++p) rec.points.row(p) = target.row((p * 5) % 12);
  CHECK(fidelity_loss(rec, target) == 0.0);
}

TEST_CASE("fidelity: a zero-activation segment contributes nothing") {
  oracle::Rng rng(2);
  auto rec = single_segment(oracle::random_points(5, rng), 0.0);
  CHECK(fidelity_loss(rec, oracle::random_points(6, rng)) == 0.0);
}

TEST_CASE("fidelity matches the double-loop oracle") {
  oracle::Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const auto rec = oracle::toy_reconstruction({3, 3}, rng);
    const Points<double> target = oracle::random_points(4, rng);
    CHECK(std::abs(fidelity_loss(rec, target) - oracle::fidelity(rec, target)) < 1e-6);
  }
}

TEST_CASE("coverage: exact reconstruction with unit activation costs nothing") {
  oracle::Rng rng(4);
  const Points<double> target = oracle::random_points(7, rng);
  CHECK(coverage_loss(single_segment(target, 1.0), target) == 0.0);
}

TEST_CASE("coverage: two equidistant half-weight segments give the distance") {
  SkeletonReconstruction rec;
  rec.layout.keypoint_count = 3;
  rec.layout.endpoints = {{0, 1}, {0, 2}};
  rec.layout.segment_begin = {0, 2, 4};
  rec.layout.arc = {0, 1, 0, 1};
  rec.points.resize(4, 3);
  rec.points << 0.3, 0, 0, 0.3, 0, 0, 0, 0.3, 0, 0, 0.3, 0;
  rec.activations = Vector<double>::Constant(2, 0.5);
  Points<double> target(1, 3);
  target << 0, 0, 0;
  CHECK(coverage_loss(rec, target) == doctest::Approx(0.3));
}

TEST_CASE("coverage matches the prefix-walk oracle") {
  oracle::Rng rng(5);
  std::uniform_int_distribution<int> size(2, 4);
  for (int trial = 0; trial < 200; ++trial) {
    const auto rec = oracle::toy_reconstruction({size(rng), size(rng), size(rng)}, rng);
    const Points<double> target = oracle::random_points(5, rng);
    CHECK(std::abs(coverage_loss(rec, target) - oracle::coverage(rec, target)) < 1e-6);
  }
}

TEST_CASE("coverage with low total activation weighs every segment fully") {
  oracle::Rng rng(6);
  auto rec = oracle::toy_reconstruction({2, 3, 2}, rng);
  rec.activations << 0.1, 0.2, 0.3;
  const Points<double> target = oracle::random_points(4, rng);
  double expect = 0;
  for (Eigen::Index j = 0; j < 4; ++j) {
    for (Eigen::Index s = 0; s < 3; ++s) {
      expect += rec.activations(s) *
                oracle::nearest_distance(target, j, rec.points, rec.layout.segment_begin[s], rec.layout.segment_begin[s + 1]);
    }
  }
  CHECK(coverage_loss(rec, target) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("empty inputs are argument errors") {
  oracle::Rng rng(7);
  const auto rec = oracle::toy_reconstruction({2, 2}, rng);
  const Points<double> empty(0, 3);
  CHECK_THROWS_AS(fidelity_loss(rec, empty), Error);
  CHECK_THROWS_AS(coverage_loss(rec, empty), Error);
  SkeletonReconstruction none;
  none.layout.segment_begin = {0};
  CHECK_THROWS_AS(coverage_loss(none, oracle::random_points(3, rng)), Error);
}

TEST_CASE("ccd: identical single segment gives zero") {
  oracle::Rng rng(8);
  const Points<double> p = oracle::random_points(9, rng);
  CHECK(ccd(single_segment(p, 1.0), p) == 0.0);
}

TEST_CASE("ccd with one unit segment is the symmetric chamfer sum") {
  oracle::Rng rng(9);
  std::uniform_int_distribution<int> n(1, 10);
  for (int trial = 0; trial < 200; ++trial) {
    const Points<double> a = oracle::random_points(n(rng), rng);
    const Points<double> b = oracle::random_points(n(rng), rng);
    CHECK(std::abs(ccd(single_segment(a, 1.0), b) - oracle::chamfer_sum(a, b)) < 1e-6);
  }
}

TEST_CASE("ccd is homogeneous in a common scale") {
  oracle::Rng rng(10);
  std::uniform_real_distribution<double> scale(0.1, 10);
  for (int trial = 0; trial < 50; ++trial) {
    auto rec = oracle::toy_reconstruction({3, 2, 4}, rng);
    const Points<double> target = oracle::random_points(6, rng);
    const double s = scale(rng);
    const double base = ccd(rec, target);
    rec.points *= s;
    CHECK(ccd(rec, Points<double>(target * s)) == doctest::Approx(s * base).epsilon(1e-9));
  }
}

TEST_CASE("fidelity never decreases when one activation grows") {
  oracle::Rng rng(11);
  std::uniform_int_distribution<int> pick(0, 3);
  std::uniform_real_distribution<double> bump(0, 0.5);
  for (int trial = 0; trial < 200; ++trial) {
    auto rec = oracle::toy_reconstruction({2, 3, 2, 4}, rng);
    const Points<double> target = oracle::random_points(5, rng);
    const double before = fidelity_loss(rec, target);
    rec.activations(pick(rng)) += bump(rng);
    CHECK(fidelity_loss(rec, target) >= before);
  }
}

TEST_CASE("both terms are non-negative") {
  oracle::Rng rng(12);
  for (int trial = 0; trial < 100; ++trial) {
    const auto rec = oracle::toy_reconstruction({2, 3}, rng);
    const Points<double> target = oracle::random_points(4, rng);
    const auto t = ccd_terms(rec, target);
    CHECK(t.fidelity >= 0);
    CHECK(t.coverage >= 0);
  }
}

TEST_CASE("analytic ccd gradients match central differences away from ties") {
  oracle::Rng rng(13);
  int checked = 0;
  for (int trial = 0; trial < 400 && checked < 30; ++trial) {
    auto rec = oracle::toy_reconstruction({2, 3, 2}, rng);
    const Points<double> target = oracle::random_points(3, rng);
    if (!oracle::well_separated(rec, target, 1e-3)) continue;
    ++checked;
    ReconstructionGradient<double> g;
    ccd_terms(rec, target, &g);
    const Matrix<double> x = rec.points;
    const Matrix<double> numeric = oracle::numeric_gradient<Matrix<double>>(
        [&](const Matrix<double>& v) {
          auto r = rec;
          r.points = v;
          return ccd(r, target);
        },
        x);
    CHECK(oracle::relative_error(Matrix<double>(g.points), numeric) < 1e-3);
    const Matrix<double> a = rec.activations;
    const Matrix<double> numeric_a = oracle::numeric_gradient<Matrix<double>>(
        [&](const Matrix<double>& v) {
          auto r = rec;
          r.activations = v;
          return ccd(r, target);
        },
        a);
    CHECK(oracle::relative_error(Matrix<double>(g.activations), numeric_a) < 1e-3);
  }
  CHECK(checked == 30);
}

TEST_CASE("tape ccd op agrees with the direct terms and gradients") {
  oracle::Rng rng(14);
  for (int trial = 0; trial < 20; ++trial) {
    const auto rec = oracle::toy_reconstruction({3, 2, 3}, rng);
    const Points<double> target = oracle::random_points(5, rng);
    ReconstructionGradient<double> g;
    const auto direct = ccd_terms(rec, target, &g);
    ad::Tape t;
    const ad::Var pts = t.variable(rec.points);
    const ad::Var act = t.variable(rec.activations.transpose());
    const ad::Var terms = ccd_terms(pts, act, rec.layout, target);
    CHECK(terms.value()(0, 0) == direct.fidelity);
    CHECK(terms.value()(0, 1) == direct.coverage);
    t.backward(ad::linear_combination({ad::element(terms, 0, 0), ad::element(terms, 0, 1)}, {1.0, 1.0}));
    CHECK((pts.grad() - Matrix<double>(g.points)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((act.grad().transpose() - g.activations).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("self and mutual losses sum two ccd evaluations and are swap symmetric") {
  oracle::Rng rng(15);
  const auto r1 = oracle::toy_reconstruction({3, 2}, rng);
  const auto r2 = oracle::toy_reconstruction({2, 4}, rng);
  const PointCloud p1 = as_cloud(oracle::random_points(6, rng));
  const PointCloud p2 = as_cloud(oracle::random_points(5, rng));
  const double expect = oracle::fidelity(r1, p1.points) + oracle::coverage(r1, p1.points) +
                        oracle::fidelity(r2, p2.points) + oracle::coverage(r2, p2.points);
  CHECK(self_loss(p1, r1, p2, r2) == doctest::Approx(expect).epsilon(1e-12));
  CHECK(mutual_loss(p1, r1, p2, r2) == doctest::Approx(expect).epsilon(1e-12));
  CHECK(self_loss(p1, r1, p2, r2) == doctest::Approx(self_loss(p2, r2, p1, r1)).epsilon(1e-15));
  CHECK(mutual_loss(p1, r1, p2, r2) == doctest::Approx(mutual_loss(p2, r2, p1, r1)).epsilon(1e-15));
}

TEST_CASE("perfect reconstructions give zero self and mutual loss") {
  oracle::Rng rng(16);
  const PointCloud p1 = as_cloud(oracle::random_points(6, rng));
  const PointCloud p2 = as_cloud(oracle::random_points(6, rng));
  CHECK(self_loss(p1, single_segment(p1.points, 1), p2, single_segment(p2.points, 1)) == 0.0);
  CHECK(mutual_loss(p1, single_segment(p1.points, 1), p2, single_segment(p2.points, 1)) == 0.0);
}

TEST_CASE("total loss combinations") {
  const LossWeights defaults;
  CHECK(defaults.lambda_self == 0.5);
  CHECK(defaults.lambda_mutual == 0.5);
  const auto equal = total_loss(1, 2, 3.0, 5.0, 0, 0, defaults);
  CHECK(equal.total == doctest::Approx(4.0));

  LossWeights self_only{0.5, 0.0, 0.0, 0.0};
  const auto ablated = total_loss(1, 2, 3.0, 5.0, 7.0, 11.0, self_only);
  CHECK(ablated.total == doctest::Approx(1.5));

  const auto zero = total_loss(0, 0, 0, 0, 0, 0, defaults);
  CHECK(zero.total == 0.0);

  const auto reg = total_loss(0, 0, 2.0, 4.0, 100.0, 10.0, defaults);
  CHECK(reg.reg_skeleton_offsets == doctest::Approx(1.0));
  CHECK(reg.reg_keypoint_offsets == doctest::Approx(0.1));
  CHECK(reg.total == doctest::Approx(0.5 * 2 + 0.5 * 4 + 1.0 + 0.1));
}

TEST_CASE("negative weights are argument errors") {
  CHECK_THROWS_AS(total_loss(0, 0, 0, 0, 0, 0, LossWeights{-0.1, 0.5, 0.01, 0.01}), Error);
  CHECK_THROWS_AS(total_loss(0, 0, 0, 0, 0, 0, LossWeights{0.5, 0.5, 0.01, -1}), Error);
}

TEST_CASE("first non-finite component is named") {
  LossBreakdown l;
  CHECK(first_non_finite(l).empty());
  l.mutual_loss = std::numeric_limits<double>::quiet_NaN();
  l.total = std::numeric_limits<double>::infinity();
  CHECK(first_non_finite(l) == "mutual");
}
