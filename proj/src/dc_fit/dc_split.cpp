#include <limits>
#include <map>

#include "dctmpc/conic.hpp"
#include "dctmpc/dc_fit.hpp"

namespace dctmpc {

namespace {

using namespace conic;

struct HessianMaps {
  MonomialBasis full, hess, reduced;
  std::map<Exponent, int> hess_index;
  // d2[i][j] maps degree-2d coefficients to degree-(2d-2) coefficients of d^2/dx_i dx_j.
  std::vector<std::vector<Mat>> d2;

  explicit HessianMaps(const MonomialBasis& basis)
      : full(basis.dims(), 2 * basis.degree()),
        hess(basis.dims(), std::max(0, 2 * basis.degree() - 2)),
        reduced(basis.dims(), std::max(0, basis.degree() - 1)) {
    const int n = basis.dims();
    for (int k = 0; k < hess.size(); ++k) hess_index[hess.exponents()[k]] = k;
    d2.assign(n, std::vector<Mat>(n));
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        Mat D = Mat::Zero(hess.size(), full.size());
        for (int k = 0; k < full.size(); ++k) {
          Exponent e = full.exponents()[k];
          double c = e[i];
          --e[i];
          if (c == 0) continue;
          c *= e[j];
          --e[j];
          if (c == 0) continue;
          D(hess_index.at(e), k) = c;
        }
        d2[i][j] = D;
      }
  }

  // Hessian-monomial index of y_a * y_b in the reduced basis.
  int product_index(int a, int b) const {
    Exponent e = reduced.exponents()[a];
    for (size_t t = 0; t < e.size(); ++t) e[t] += reduced.exponents()[b][t];
    auto it = hess_index.find(e);
    return it == hess_index.end() ? -1 : it->second;
  }

  // Coefficients of the (i,j) block of (v (x) y)' C (v (x) y).
  Vec certificate_coeffs(const Mat& C, int i, int j) const {
    const int sr = reduced.size();
    Vec out = Vec::Zero(hess.size());
    for (int a = 0; a < sr; ++a)
      for (int b = 0; b < sr; ++b) out[product_index(a, b)] += C(i * sr + a, j * sr + b);
    return out;
  }
};

}  // namespace

PolyDcModel split_dc_sdp(const MonomialBasis& basis, const std::vector<Mat>& F, const SplitOptions& opts) {
  require(opts.sigma >= 0, "split_dc_sdp: sigma must be nonnegative");
  require(basis.degree() >= 1, "split_dc_sdp: degree must be at least 1");
  const int n = basis.dims();
  HessianMaps maps(basis);
  const int sr = maps.reduced.size();
  const int nc = n * sr;
  std::vector<Mat> G, H;
  SosCertificate cert{maps.reduced, {}, {}, opts.certificate_tolerance, opts.sigma};

  for (size_t l = 0; l < F.size(); ++l) {
    require(F[l].rows() == basis.size() && F[l].cols() == basis.size(), "split_dc_sdp: Gram size mismatch");
    require((F[l] - F[l].transpose()).cwiseAbs().maxCoeff() <= 1e-12 * (1 + F[l].cwiseAbs().maxCoeff()),
            "split_dc_sdp: F must be symmetric");
    const Vec cf = gram_to_coefficients(basis, F[l]);

    ConicProblem p;
    auto cg = p.add_variable(VarKind::Vector, maps.full.size(), "g_coeffs");
    auto Cg = p.add_variable(VarKind::SymMatrix, nc, "cert_g");
    auto Ch = p.add_variable(VarKind::SymMatrix, nc, "cert_h");
    // g carries no affine part; h = g - f.
    for (int k = 0; k < maps.full.size(); ++k) {
      int deg = 0;
      for (int v : maps.full.exponents()[k]) deg += v;
      if (deg <= 1) p.add_equality(cg(k));
    }
    const LinVec cgv = cg.vec();
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) {
        LinVec lhs_g(maps.hess.size()), lhs_h(maps.hess.size());
        for (int a = 0; a < sr; ++a)
          for (int b = 0; b < sr; ++b) {
            const int m = maps.product_index(a, b);
            lhs_g[m] += Cg(i * sr + a, j * sr + b);
            lhs_h[m] += Ch(i * sr + a, j * sr + b);
          }
        const Mat& D = maps.d2[i][j];
        const Vec df = D * cf;
        for (int m = 0; m < maps.hess.size(); ++m) {
          LinExpr rhs = dot(D.row(m).transpose(), cgv);
          p.add_equality(lhs_g[m] - rhs, "hess_g");
          p.add_equality(lhs_h[m] - rhs + LinExpr(df[m]), "hess_h");
        }
      }
    LinMat Mg = Cg.mat(), Mh = Ch.mat();
    LinExpr tr;
    for (int k = 0; k < nc; ++k) {
      tr += Mg[k][k] + Mh[k][k];
      Mg[k][k] -= LinExpr(opts.sigma);
      Mh[k][k] -= LinExpr(opts.sigma);
    }
    p.add_psd(Mg, "cert_g_psd");
    p.add_psd(Mh, "cert_h_psd");
    p.minimize(tr);
    Solution sol = solve(p);
    if (!sol.optimal())
      throw DecompositionError("split_dc_sdp: output " + std::to_string(l) + " SDP status " +
                               status_name(sol.status) + " (" + sol.diagnostic + ")");
    const Mat Gl = coefficients_to_gram(basis, sol.value(cg));
    G.push_back(Gl);
    H.push_back(Gl - F[l]);
    cert.g.push_back(sol.matrix(Cg));
    cert.h.push_back(sol.matrix(Ch));
  }
  PolyDcModel model(basis, G, H);
  model.certificate = cert;
  return model;
}

double certificate_min_eigenvalue(const PolyDcModel& m) {
  require(m.certificate.has_value(), "certificate_min_eigenvalue: model has no certificate");
  double e = std::numeric_limits<double>::infinity();
  for (const auto* list : {&m.certificate->g, &m.certificate->h})
    for (const Mat& C : *list)
      e = std::min(e, Eigen::SelfAdjointEigenSolver<Mat>(C, Eigen::EigenvaluesOnly).eigenvalues()[0]);
  return e;
}

double certificate_mismatch(const PolyDcModel& m) {
  require(m.certificate.has_value(), "certificate_mismatch: model has no certificate");
  HessianMaps maps(m.basis());
  const int n = m.basis().dims();
  double worst = 0.0;
  for (int l = 0; l < m.output_dim(); ++l)
    for (int part = 0; part < 2; ++part) {
      const Vec c = gram_to_coefficients(m.basis(), part == 0 ? m.G()[l] : m.H()[l]);
      const Mat& C = part == 0 ? m.certificate->g[l] : m.certificate->h[l];
      for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j)
          worst = std::max(worst, (maps.certificate_coeffs(C, i, j) - maps.d2[i][j] * c).cwiseAbs().maxCoeff());
    }
  return worst;
}

}  // namespace dctmpc
