#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "dctmpc/dc_core.hpp"
#include "dctmpc/model_io.hpp"

using namespace dctmpc;

namespace {

Vec v1(double a) { return Vec::Constant(1, a); }

DcFunction poly_1d(const Mat& G, const Mat& H) {
  return DcFunction(PolyDcModel(MonomialBasis(1, 1), {G}, {H}));
}

// Random 2-input, 2-output models of each kind, with convex parts.
// A PSD Gram over the degree-1 basis is a convex quadratic.
DcFunction random_poly(std::mt19937_64& rng) {
  MonomialBasis b(2, 1);
  std::normal_distribution<double> n01;
  std::vector<Mat> G, H;
  for (int l = 0; l < 2; ++l) {
    Mat A(b.size(), b.size()), C(b.size(), b.size());
    for (int i = 0; i < A.size(); ++i) {
      A.data()[i] = n01(rng);
      C.data()[i] = n01(rng);
    }
    G.push_back(A * A.transpose());
    H.push_back(C * C.transpose());
  }
  return DcFunction(PolyDcModel(b, G, H));
}

DcFunction random_dcnn(std::mt19937_64& rng) {
  std::normal_distribution<double> n01;
  auto rnd = [&](int r, int c) {
    Mat M(r, c);
    for (int i = 0; i < M.size(); ++i) M.data()[i] = n01(rng);
    return M;
  };
  DcnnLayer l0{Mat(), rnd(5, 2), rnd(5, 1).col(0)};
  DcnnLayer l1{rnd(4, 5).cwiseAbs(), rnd(4, 2), rnd(4, 1).col(0)};
  return DcFunction(DcnnModel({l0, l1}, rnd(2, 4), rnd(2, 2), rnd(2, 1).col(0)));
}

DcFunction random_rbf(std::mt19937_64& rng) {
  std::normal_distribution<double> n01;
  Mat c(6, 2), a(6, 2);
  Vec rho(6);
  for (int i = 0; i < 6; ++i) {
    c.row(i) << n01(rng), n01(rng);
    a.row(i) << n01(rng), n01(rng);
    rho[i] = 0.5 + std::abs(n01(rng));
  }
  return DcFunction(RbfDcModel(c, rho, a));
}

// Straightforward evaluators written from the raw parameters.
Vec naive_f(const DcFunction& fn, const Vec& x) {
  Vec f;
  if (auto p = std::get_if<PolyDcModel>(&fn.rep())) {
    const auto& ex = p->basis().exponents();
    Vec y(ex.size());
    for (size_t i = 0; i < ex.size(); ++i) {
      y[i] = 1.0;
      for (size_t d = 0; d < ex[i].size(); ++d) y[i] *= std::pow(x[d], ex[i][d]);
    }
    f.resize(p->output_dim());
    for (int l = 0; l < p->output_dim(); ++l) f[l] = y.dot((p->G()[l] - p->H()[l]) * y);
  } else if (auto r = std::get_if<RbfDcModel>(&fn.rep())) {
    f = Vec::Zero(r->output_dim());
    for (int j = 0; j < r->terms(); ++j) {
      const double d2 = (x - r->centers().row(j).transpose()).squaredNorm();
      const double phi = std::sqrt(1.0 + r->rho()[j] * r->rho()[j] * d2);
      f += phi * r->alpha().row(j).transpose();
    }
  } else {
    const auto& n = std::get<DcnnModel>(fn.rep());
    Vec a;
    for (size_t l = 0; l < n.hidden().size(); ++l) {
      const DcnnLayer& L = n.hidden()[l];
      Vec pre = L.phi * x + L.bias;
      if (l > 0) pre += L.theta * a;
      a = pre.cwiseMax(0.0);
    }
    f = n.out_theta() * a + n.out_phi() * x + n.out_bias();
  }
  return f;
}

// n_x = outputs; the DC inputs are (x_0, u_0) for 2-input functions or the whole state otherwise.
DcModel wrap(const DcFunction& f, int nx, int nu, std::vector<int> idx) {
  return DcModel(nx, nu, f, std::move(idx), Mat::Identity(nx, f.output_dim()), Mat::Zero(nx, nx), Mat::Zero(nx, nu),
                 Vec::Zero(nx));
}

Mat fd_jacobian(const std::function<Vec(const Vec&)>& f, const Vec& x, double h) {
  const Vec f0 = f(x);
  Mat J(f0.size(), x.size());
  for (int j = 0; j < x.size(); ++j) {
    Vec a = x, b = x;
    a[j] += h;
    b[j] -= h;
    J.col(j) = (f(a) - f(b)) / (2 * h);
  }
  return J;
}

}  // namespace

TEST(MonomialBasis, SizeIsBinomial) {
  for (int n = 1; n <= 3; ++n)
    for (int d = 0; d <= 4; ++d) {
      long long c = 1;
      for (int i = 1; i <= n; ++i) c = c * (d + i) / i;
      EXPECT_EQ(MonomialBasis(n, d).size(), c);
    }
}

TEST(MonomialBasis, DiffOperatorMatchesDerivative) {
  MonomialBasis b(2, 3);
  const Vec x = (Vec(2) << 0.7, -1.3).finished();
  for (int j = 0; j < 2; ++j) {
    const Mat J = fd_jacobian([&](const Vec& z) { return b.evaluate(z); }, x, 1e-6);
    EXPECT_LT((b.diff_op(j) * b.evaluate(x) - J.col(j)).cwiseAbs().maxCoeff(), 1e-6);
  }
}

TEST(Polynomial, GramExpansionMatchesQuadraticForm) {
  MonomialBasis b(2, 2);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n01;
  Mat A(b.size(), b.size());
  for (int i = 0; i < A.size(); ++i) A.data()[i] = n01(rng);
  const Mat G = A + A.transpose();
  const Polynomial p = gram_to_polynomial(b, G);
  for (int t = 0; t < 20; ++t) {
    const Vec x = Vec::Random(2);
    const Vec y = b.evaluate(x);
    EXPECT_NEAR(p.value(x), y.dot(G * y), 1e-10);
    const Mat H = fd_jacobian([&](const Vec& z) { return p.gradient(z); }, x, 1e-5);
    EXPECT_LT((p.hessian(x) - H).cwiseAbs().maxCoeff(), 1e-5);
  }
}

TEST(Polynomial, HessianGramBlocksRepresentHessian) {
  MonomialBasis b(2, 2);
  Mat A = Mat::Random(b.size(), b.size());
  const Mat G = A + A.transpose();
  const Polynomial p = gram_to_polynomial(b, G);
  const Vec x = (Vec(2) << 0.3, -0.8).finished();
  const Vec y = b.evaluate(x);
  const Mat H = p.hessian(x);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) EXPECT_NEAR(y.dot(hessian_gram_block(b, G, i, j) * y), H(i, j), 1e-9);
}

TEST(EvalG, Examples) {
  RbfDcModel rbf(Mat::Zero(1, 1), v1(1.0), Mat::Constant(1, 1, 1.0));
  EXPECT_DOUBLE_EQ(DcFunction(rbf).eval_g(v1(0.0))[0], 1.0);

  Mat G = Mat::Zero(2, 2);
  G(1, 1) = 1.0;
  EXPECT_DOUBLE_EQ(poly_1d(G, Mat::Zero(2, 2)).eval_g(v1(2.0))[0], 4.0);

  DcnnLayer l0{Mat(), Mat::Constant(1, 1, 1.0), Vec::Zero(1)};
  DcFunction net(DcnnModel({l0}, Mat::Constant(1, 1, 1.0), Mat::Zero(1, 1), Vec::Zero(1)));
  EXPECT_DOUBLE_EQ(net.eval_g(v1(-3.0))[0], 0.0);
  EXPECT_DOUBLE_EQ(net.eval_g(v1(3.0))[0], 3.0);
  EXPECT_DOUBLE_EQ(net.eval_h(v1(3.0))[0], 0.0);
}

TEST(EvalH, NegativeRbfWeightGoesToH) {
  DcFunction f(RbfDcModel(Mat::Zero(1, 1), v1(1.0), Mat::Constant(1, 1, -1.0)));
  EXPECT_DOUBLE_EQ(f.eval_h(v1(0.0))[0], 1.0);
  EXPECT_DOUBLE_EQ(f.eval_g(v1(0.0))[0], 0.0);
  EXPECT_TRUE(poly_1d(Mat::Identity(2, 2), Mat::Zero(2, 2)).eval_h(v1(1.7)).isZero(0));
}

TEST(EvalF, EqualPartsGiveZero) {
  Mat G = Mat::Identity(2, 2);
  EXPECT_NEAR(poly_1d(G, G).eval_f(v1(1.3))[0], 0.0, 1e-15);
}

TEST(EvalF, MatchesNaiveEvaluatorAfterSerialization) {
  std::mt19937_64 rng(11);
  for (int rep = 0; rep < 3; ++rep) {
    for (const DcFunction& f : {random_poly(rng), random_dcnn(rng), random_rbf(rng)}) {
      const DcFunction g = dc_function_from_json(json::parse(to_json(f).dump()));
      for (int t = 0; t < 10; ++t) {
        const Vec x = 2.0 * Vec::Random(2);
        const Vec a = f.eval_f(x), b = naive_f(g, x);
        EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-9 * (1 + b.cwiseAbs().maxCoeff())) << kind_name(f.kind());
      }
    }
  }
}

TEST(JacobianH, SquareAtOne) {
  Mat H = Mat::Zero(2, 2);
  H(1, 1) = 1.0;
  DcModel m = DcModel::direct(1, 0, poly_1d(Mat::Zero(2, 2), H));
  EXPECT_NEAR(m.jacobian_h(v1(1.0), Vec()).first(0, 0), 2.0, 1e-12);
}

TEST(JacobianH, NegativeMultiquadricMatchesFiniteDifference) {
  DcFunction f(RbfDcModel(Mat::Zero(1, 3), v1(1.0), Mat::Constant(1, 1, -1.0)));
  DcModel m = wrap(f, 3, 0, {0, 1, 2});
  const Vec x0 = (Vec(3) << 1, 0, 0).finished();
  const Mat A = m.jacobian_h(x0, Vec()).first;
  const Mat fd = fd_jacobian([&](const Vec& x) { return m.eval_h(x, Vec()); }, x0, 1e-5);
  EXPECT_NEAR(A(0, 0), 1.0 / std::sqrt(2.0), 1e-6);
  EXPECT_LT((A - fd).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(JacobianH, RandomModelsMatchFiniteDifference) {
  std::mt19937_64 rng(5);
  for (int rep = 0; rep < 3; ++rep)
    for (const DcFunction& f : {random_poly(rng), random_dcnn(rng), random_rbf(rng)}) {
      DcModel m = wrap(f, 2, 1, {0, 2});
      const Vec x = Vec::Random(2), u = Vec::Random(1);
      for (Part p : {Part::G, Part::H}) {
        auto [A, B] = m.jacobian_part(p, x, u);
        Mat J(A.rows(), 3);
        J << A, B;
        const Vec z = (Vec(3) << x, u).finished();
        const Mat fd = fd_jacobian(
            [&](const Vec& zz) { return p == Part::G ? m.eval_g(zz.head(2), zz.tail(1)) : m.eval_h(zz.head(2), zz.tail(1)); },
            z, 1e-6);
        EXPECT_LT((J - fd).cwiseAbs().maxCoeff(), 1e-4 * (1 + fd.cwiseAbs().maxCoeff())) << kind_name(f.kind());
      }
    }
}

TEST(JacobianF, LinearModelReturnsResidualMatrices) {
  const Mat A = (Mat(2, 2) << 1, 2, 3, 4).finished();
  const Mat B = (Mat(2, 1) << 5, 6).finished();
  DcModel m = DcModel::linear(A, B);
  auto [Ja, Jb] = m.jacobian_f(Vec::Random(2), Vec::Random(1));
  EXPECT_EQ(Ja, A);
  EXPECT_EQ(Jb, B);
}

TEST(LinearizeConcave, TangentOfSquare) {
  Mat H = Mat::Zero(2, 2);
  H(1, 1) = 1.0;
  DcModel m = DcModel::direct(1, 0, poly_1d(Mat::Zero(2, 2), H));
  const AffineMap L = m.linearize_concave(Part::H, v1(1.0), Vec());
  EXPECT_NEAR(L(v1(0.0), Vec())[0], -1.0, 1e-12);
  EXPECT_NEAR(L(v1(1.0), Vec())[0], 1.0, 1e-12);
}

TEST(LinearizeConcave, UnderEstimatesOnRandomPoints) {
  std::mt19937_64 rng(9);
  for (const DcFunction& f : {random_poly(rng), random_dcnn(rng), random_rbf(rng)}) {
    DcModel m = wrap(f, 2, 1, {0, 2});
    for (int t = 0; t < 500; ++t) {
      const Vec x0 = Vec::Random(2), u0 = Vec::Random(1), x = Vec::Random(2), u = Vec::Random(1);
      for (Part p : {Part::G, Part::H}) {
        const AffineMap L = m.linearize_concave(p, x0, u0);
        const Vec part = p == Part::G ? m.eval_g(x, u) : m.eval_h(x, u);
        EXPECT_LE((L(x, u) - part).maxCoeff(), 1e-8 * (1 + part.cwiseAbs().maxCoeff()));
        const Vec at0 = p == Part::G ? m.eval_g(x0, u0) : m.eval_h(x0, u0);
        EXPECT_LT((L(x0, u0) - at0).cwiseAbs().maxCoeff(), 1e-9 * (1 + at0.cwiseAbs().maxCoeff()));
      }
    }
  }
}

TEST(ModelIo, RoundTripAndBadInput) {
  std::mt19937_64 rng(2);
  const Mat E = (Mat(3, 2) << 1, 0, 0, 1, 0.5, 0.5).finished();
  DcModel m(3, 1, random_rbf(rng), {0, 3}, E, Mat::Identity(3, 3), Mat::Ones(3, 1), Vec::Ones(3));
  FitReport r;
  r.mae = 0.5;
  r.mae_per_output = Vec::Ones(2);
  std::optional<FitReport> back;
  const DcModel m2 = dc_model_from_json(json::parse(to_json(m, r).dump()), &back);
  ASSERT_TRUE(back.has_value());
  EXPECT_DOUBLE_EQ(back->mae, 0.5);
  const Vec x = Vec::Random(3), u = Vec::Random(1);
  EXPECT_LT((m.eval_f(x, u) - m2.eval_f(x, u)).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_THROW(dc_model_from_json(json::parse("{\"kind\": 3}")), Error);
}
