#include <gtest/gtest.h>

#include <cmath>

#include "dctmpc/dc_fit.hpp"

using namespace dctmpc;

namespace {

Box unit_box(int n) { return Box::symmetric(Vec::Ones(n)); }

SampleSet sample_1d(const std::function<double(double)>& f, int n, unsigned long long seed) {
  return sample_dynamics([&](const Vec& x) { return Vec::Constant(1, f(x[0])); }, unit_box(1), n, seed);
}

}  // namespace

TEST(Sampling, DegenerateBoxAndDeterminism) {
  const Vec p = (Vec(2) << 0.5, -2.0).finished();
  auto oracle = [](const Vec& x) { return Vec::Constant(1, x[0] * x[1]); };
  const SampleSet one = sample_dynamics(oracle, Box{p, p}, 1, 4);
  ASSERT_EQ(one.size(), 1);
  EXPECT_EQ(Vec(one.inputs.row(0).transpose()), p);
  EXPECT_DOUBLE_EQ(one.targets(0, 0), -1.0);

  const SampleSet a = sample_dynamics(oracle, unit_box(2), 50, 9), b = sample_dynamics(oracle, unit_box(2), 50, 9);
  EXPECT_EQ(a.inputs, b.inputs);
  EXPECT_EQ(a.targets, b.targets);
  EXPECT_THROW(sample_dynamics([](const Vec&) { return Vec::Constant(1, NAN); }, unit_box(1), 3, 1), DataError);
}

TEST(GramFit, SquareIsExact) {
  const GramFit g = fit_gram_ls(sample_1d([](double x) { return x * x; }, 40, 1), 2);
  ASSERT_EQ(g.F.size(), 1u);
  const Mat expect = (Mat(2, 2) << 0, 0, 0, 1).finished();
  EXPECT_LT((g.F[0] - expect).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_FALSE(g.warning);
}

TEST(GramFit, ConstantGoesToCorner) {
  const GramFit g = fit_gram_ls(sample_1d([](double) { return 5.0; }, 40, 2), 4);
  Mat expect = Mat::Zero(3, 3);
  expect(0, 0) = 5.0;
  EXPECT_LT((g.F[0] - expect).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(GramFit, CoefficientRoundTrip) {
  MonomialBasis b(2, 2);
  Vec c = Vec::Random(MonomialBasis(2, 4).size());
  const Mat F = coefficients_to_gram(b, c);
  EXPECT_LT((gram_to_coefficients(b, F) - c).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LT((F - F.transpose()).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(SplitDc, ConvexQuarticNeedsNoConcavePart) {
  MonomialBasis b(1, 2);
  Mat F = Mat::Zero(3, 3);
  F(2, 2) = 1.0;  // x^4
  const PolyDcModel m = split_dc_sdp(b, {F});
  const DcFunction f(m);
  for (double x : {-1.5, -0.3, 0.0, 0.8, 2.0}) EXPECT_NEAR(f.eval_f(Vec::Constant(1, x))[0], std::pow(x, 4), 1e-7);
  EXPECT_GE(certificate_min_eigenvalue(m), -1e-7);
  EXPECT_LT(certificate_mismatch(m), 1e-7);
  EXPECT_LE(midpoint_convexity_violation(f, Part::H, unit_box(1), 1000, 3), 1e-8);
}

TEST(SplitDc, NegativeSquareIsSplit) {
  MonomialBasis b(1, 1);
  const Mat F = (Mat(2, 2) << 0, 0, 0, -1).finished();
  const DcFunction f(split_dc_sdp(b, {F}));
  for (int i = 0; i < 100; ++i) {
    const Vec x = 3.0 * Vec::Random(1);
    EXPECT_NEAR(f.eval_f(x)[0], -x[0] * x[0], 1e-6);
  }
  for (Part p : {Part::G, Part::H}) EXPECT_LE(midpoint_convexity_violation(f, p, Box::symmetric(Vec::Constant(1, 3.0)), 1000, 1), 1e-8);
}

TEST(SplitDc, RandomBivariateSexticPassesAudits) {
  MonomialBasis b(2, 3);
  Mat A = Mat::Random(b.size(), b.size());
  const Mat F = 0.5 * (A + A.transpose());
  const PolyDcModel m = split_dc_sdp(b, {F});
  const DcFunction f(m);
  const Polynomial target = gram_to_polynomial(b, F);
  for (int i = 0; i < 50; ++i) {
    const Vec x = Vec::Random(2);
    EXPECT_NEAR(f.eval_f(x)[0], target.value(x), 1e-6 * (1 + std::abs(target.value(x))));
  }
  EXPECT_GE(certificate_min_eigenvalue(m), -1e-7);
  for (Part p : {Part::G, Part::H}) {
    EXPECT_LE(midpoint_convexity_violation(f, p, unit_box(2), 1000, 5), 1e-8);
    EXPECT_LE(tangent_violation(f, p, unit_box(2), 1000, 6), 1e-8);
  }
}

TEST(Dcnn, AbsoluteValueIsLearned) {
  const SampleSet s = sample_1d([](double x) { return std::abs(x); }, 2000, 3);
  auto [train, test] = split_train_test(s, 200);
  TrainHyper h;
  h.epochs = 150;
  h.step_size = 1e-2;
  TrainResult tr;
  const DcnnModel m = train_dcnn(train, DcnnArch{1, 8}, h, 4, &tr);
  const DcFunction f(m);
  EXPECT_LE(report_mae(f, test).mae, 0.05);
  EXPECT_GE(dcnn_min_constrained_weight(m), 0.0);
  double hmax = 0.0;
  for (int i = 0; i < test.size(); ++i) hmax = std::max(hmax, std::abs(f.eval_h(test.inputs.row(i).transpose())[0]));
  EXPECT_LE(hmax, 0.1);
  EXPECT_LT(tr.epoch_loss.back(), tr.epoch_loss.front());
}

TEST(Dcnn, TwoLayerWeightsStayNonnegative) {
  const SampleSet s = sample_dynamics([](const Vec& x) { return Vec::Constant(1, std::sin(2 * x[0]) * x[1]); },
                                      unit_box(2), 500, 8);
  const DcnnModel m = train_dcnn(s, DcnnArch{2, 6}, TrainHyper{20, 32, 1e-2, 0.9, 1e-7}, 2);
  EXPECT_GE(dcnn_min_constrained_weight(m), 0.0);
  const DcFunction f(m);
  for (Part p : {Part::G, Part::H}) EXPECT_LE(midpoint_convexity_violation(f, p, unit_box(2), 1000, 4), 1e-8);
}

TEST(Rbf, SingleTermRecoveredWithKnownCentre) {
  const Vec c = (Vec(2) << 0.2, -0.4).finished();
  const double rho = 1.5, w = -2.0;
  const SampleSet s = sample_dynamics(
      [&](const Vec& x) { return Vec::Constant(1, w * std::sqrt(1 + rho * rho * (x - c).squaredNorm())); }, unit_box(2),
      200, 5);
  RbfOptions o;
  o.mode = RbfMode::WeightsOnly;
  o.centers = c.transpose();
  o.rho = Vec::Constant(1, rho);
  const RbfDcModel m = fit_rbf(s, 1, o, 1);
  EXPECT_NEAR(m.alpha()(0, 0), w, 1e-8);
  EXPECT_LT(report_mae(DcFunction(m), s).mae, 1e-8);
}

TEST(Rbf, JointFitKeepsPositiveScales) {
  const SampleSet s = sample_dynamics([](const Vec& x) { return Vec::Constant(1, std::cos(2 * x[0]) + x[1]); },
                                      unit_box(2), 600, 6);
  RbfOptions o;
  o.hyper.epochs = 20;
  const RbfDcModel m = fit_rbf(s, 9, o, 3);
  EXPECT_TRUE((m.rho().array() > 0).all());
  const DcFunction f(m);
  for (Part p : {Part::G, Part::H}) EXPECT_LE(midpoint_convexity_violation(f, p, unit_box(2), 1000, 4), 1e-8);
}

TEST(ReportMae, ExactAndConstantModels) {
  MonomialBasis b(1, 1);
  const Mat F = (Mat(2, 2) << 0, 0, 0, 1).finished();
  const DcFunction sq(PolyDcModel(b, {F}, {Mat::Zero(2, 2)}));
  EXPECT_NEAR(report_mae(sq, sample_1d([](double x) { return x * x; }, 100, 1)).mae, 0.0, 1e-14);
  const DcFunction zero(PolyDcModel(b, {Mat::Zero(2, 2)}, {Mat::Zero(2, 2)}));
  EXPECT_DOUBLE_EQ(report_mae(zero, sample_1d([](double) { return 1.0; }, 100, 1)).mae, 1.0);
}

TEST(ModellingError, ExactAndShiftedOracles) {
  const Mat A = (Mat(2, 2) << 1, 0.1, 0, 1).finished();
  const Mat B = (Mat(2, 1) << 0, 0.1).finished();
  const DcModel m = DcModel::linear(A, B);
  const Box xu = unit_box(3);
  auto exact = [&](const Vec& x, const Vec& u) { return Vec(A * x + B * u); };
  EXPECT_LT(modelling_error_box(m, exact, xu, 200, 1).cwiseAbs().maxCoeff(), 1e-14);
  auto shifted = [&](const Vec& x, const Vec& u) {
    Vec y = A * x + B * u;
    y[1] += 0.1;
    return y;
  };
  const Vec eps = modelling_error_box(m, shifted, xu, 200, 1, 1.5);
  EXPECT_NEAR(eps[0], 0.0, 1e-14);
  EXPECT_NEAR(eps[1], 0.15, 1e-12);
}
