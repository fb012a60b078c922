#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "dctmpc/terminal.hpp"

using namespace dctmpc;

namespace {

Vec v1(double a) { return Vec::Constant(1, a); }

// Exhaustive active-set search: least squares on every support, keep nonnegative ones.
double nnls_brute_force(const Mat& A, const Vec& b) {
  const int n = static_cast<int>(A.cols());
  double best = b.norm();
  for (int mask = 1; mask < (1 << n); ++mask) {
    std::vector<int> idx;
    for (int j = 0; j < n; ++j)
      if (mask >> j & 1) idx.push_back(j);
    Mat S(A.rows(), idx.size());
    for (size_t k = 0; k < idx.size(); ++k) S.col(k) = A.col(idx[k]);
    const Vec z = S.completeOrthogonalDecomposition().solve(b);
    if ((z.array() >= 0).all()) best = std::min(best, (S * z - b).norm());
  }
  return best;
}

LdiModel scalar_ldi(double a, double b, double box = 1e3) {
  LdiModel l;
  l.A = {Mat::Constant(1, 1, a)};
  l.B = {Mat::Constant(1, 1, b)};
  l.xr = l.ur = Vec::Zero(1);
  l.dx = l.du = v1(box);
  return l;
}

Dynamics scalar_linear(double a, double b) {
  return Dynamics::from_function(1, 1, [a, b](const Vec& x, const Vec& u) { return Vec(a * x + b * u); });
}

}  // namespace

TEST(Nnls, MatchesBruteForce) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n01;
  for (int rep = 0; rep < 200; ++rep) {
    const int m = 3 + rep % 4, n = 2 + rep % 5;
    Mat A(m, n);
    Vec b(m);
    for (int i = 0; i < A.size(); ++i) A.data()[i] = n01(rng);
    for (int i = 0; i < m; ++i) b[i] = n01(rng);
    const Vec x = nnls(A, b);
    EXPECT_TRUE((x.array() >= 0).all());
    EXPECT_NEAR((A * x - b).norm(), nnls_brute_force(A, b), 1e-9);
  }
}

TEST(Ldi, LinearModelGivesOneExactVertex) {
  const Mat A = (Mat(2, 2) << 1, 0.5, 0, 1).finished(), B = (Mat(2, 1) << 0, 0.5).finished();
  const DcModel m = DcModel::linear(A, B);
  LdiOptions o;
  o.inflation = 1.0;
  const LdiModel l = build_ldi({Dynamics::from_model(m)}, Vec::Zero(2), Vec::Zero(1), Vec::Ones(2), Vec::Ones(1),
                               LdiMode::CornerJacobians, o);
  ASSERT_EQ(l.size(), 1);
  EXPECT_LT((l.A[0] - A).cwiseAbs().maxCoeff(), 1e-9);
  const LdiAudit a = audit_ldi(l, Dynamics::from_model(m), 1000, 3);
  EXPECT_TRUE(a.ok());
  EXPECT_LT(a.worst, 1e-9);
}

TEST(Ldi, SineSlopesSpanUnitInterval) {
  const Dynamics sf = Dynamics::from_function(1, 1, [](const Vec& x, const Vec&) { return Vec(x.array().sin()); });
  LdiOptions o;
  o.inflation = 1.0;
  const LdiModel l = build_ldi({sf}, Vec::Zero(1), Vec::Zero(1), v1(M_PI / 2), Vec::Zero(1), LdiMode::CornerJacobians, o);
  double lo = INFINITY, hi = -INFINITY;
  for (const Mat& A : l.A) {
    lo = std::min(lo, A(0, 0));
    hi = std::max(hi, A(0, 0));
  }
  EXPECT_NEAR(lo, 0.0, 1e-6);
  EXPECT_NEAR(hi, 1.0, 1e-6);
  // Dense secant sampling: (sin x - sin 0) / x must lie in the hull [lo, hi].
  for (int i = 1; i <= 2000; ++i) {
    const double x = -M_PI / 2 + M_PI * i / 2001.0;
    if (std::abs(x) < 1e-9) continue;
    const double s = std::sin(x) / x;
    EXPECT_GE(s, lo - 1e-9);
    EXPECT_LE(s, hi + 1e-9);
  }
}

TEST(Ldi, WrongUserVertexFailsAudit) {
  const Dynamics f = scalar_linear(2.0, 0.0);
  EXPECT_THROW(build_ldi({f}, Vec::Zero(1), Vec::Zero(1), v1(1.0), v1(1.0), LdiMode::UserSupplied, {},
                         {Mat::Constant(1, 1, 1.0)}, {Mat::Zero(1, 1)}),
               LdiError);
}

TEST(Terminal, ScalarLyapunovBound) {
  const TerminalIngredients t = compute_terminal(scalar_ldi(0.5, 0.0), Mat::Identity(1, 1), Mat::Identity(1, 1), 1.0);
  EXPECT_GE(t.Q_hat(0, 0), 4.0 / 3.0 - 1e-5);
  EXPECT_GT(t.gamma, 0.0);
  EXPECT_LT((t.S * t.Q_hat - Mat::Identity(1, 1)).norm(), 1e-8);
  const DescentAudit a = audit_descent(t, scalar_linear(0.5, 0.0), 2000, 1);
  EXPECT_LE(a.worst_residual, 1e-6);
}

TEST(Terminal, ZeroStageCostStaysFinite) {
  const TerminalIngredients t = compute_terminal(scalar_ldi(0.5, 0.0), Mat::Zero(1, 1), Mat::Identity(1, 1), 1.0);
  EXPECT_TRUE(std::isfinite(t.Q_hat(0, 0)));
  EXPECT_GT(t.Q_hat(0, 0), 0.0);
}

TEST(Terminal, ScalarRiccatiFeasibilityVerdict) {
  // With B = 0 a contraction needs |A| < 1; with B = 1 a gain always exists.
  EXPECT_THROW(compute_terminal(scalar_ldi(1.2, 0.0), Mat::Identity(1, 1), Mat::Identity(1, 1)), TerminalDesignError);
  const TerminalIngredients t = compute_terminal(scalar_ldi(1.2, 1.0), Mat::Identity(1, 1), Mat::Identity(1, 1));
  EXPECT_LT(std::abs(1.2 + t.K(0, 0)), 1.0);
  EXPECT_LE(audit_descent(t, scalar_linear(1.2, 1.0), 2000, 2).worst_residual, 1e-6);
}

TEST(Terminal, PolytopicDescentHoldsAtEveryVertex) {
  LdiModel l = scalar_ldi(0.9, 1.0, 2.0);
  l.A.push_back(Mat::Constant(1, 1, 1.3));
  l.B.push_back(Mat::Constant(1, 1, 0.6));
  const TerminalIngredients t = compute_terminal(l, Mat::Identity(1, 1), 0.1 * Mat::Identity(1, 1));
  for (int i = 0; i < 2; ++i) {
    const Dynamics f = scalar_linear(l.A[i](0, 0), l.B[i](0, 0));
    EXPECT_LE(audit_descent(t, f, 1000, 5).worst_residual, 1e-6);
  }
  // Terminal set inside the validity box.
  EXPECT_LE(std::sqrt(t.gamma / t.Q_hat(0, 0)), 2.0 + 1e-6);
  EXPECT_LE(std::abs(t.K(0, 0)) * std::sqrt(t.gamma / t.Q_hat(0, 0)), 2.0 + 1e-6);
}

TEST(Terminal, DescentResidualFormula) {
  const TerminalIngredients t = compute_terminal(scalar_ldi(0.5, 1.0), Mat::Identity(1, 1), Mat::Identity(1, 1));
  const double x = 0.3, k = t.K(0, 0), q = t.Q_hat(0, 0), w = 0.05;
  const double xn = 0.5 * x + k * x + w;
  const double expect = q * xn * xn + x * x + k * x * k * x - q * x * x;
  EXPECT_NEAR(descent_residual(t, scalar_linear(0.5, 1.0), v1(x), v1(w)), expect, 1e-12);
}

TEST(Beta, ZeroAndMonotone) {
  const TerminalIngredients t = compute_terminal(scalar_ldi(0.5, 1.0), Mat::Identity(1, 1), Mat::Identity(1, 1));
  const Dynamics f = scalar_linear(0.5, 1.0);
  EXPECT_DOUBLE_EQ(estimate_beta(t, f, {v1(0.0)}, 500, 1), 0.0);
  const double b1 = estimate_beta(t, f, {v1(-0.1), v1(0.1)}, 500, 1);
  const double b2 = estimate_beta(t, f, {v1(-0.2), v1(0.2)}, 500, 1);
  EXPECT_GT(b1, 0.0);
  EXPECT_GE(b2, b1);
}

TEST(Terminal, JsonRoundTrip) {
  const TerminalIngredients t = compute_terminal(scalar_ldi(0.5, 1.0), Mat::Identity(1, 1), Mat::Identity(1, 1));
  const TerminalIngredients u = terminal_from_json(json::parse(to_json(t).dump()));
  EXPECT_DOUBLE_EQ(u.gamma, t.gamma);
  EXPECT_EQ(u.K, t.K);
  EXPECT_EQ(u.Q_hat, t.Q_hat);
}
