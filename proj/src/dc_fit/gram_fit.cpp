#include <map>

#include "dctmpc/dc_fit.hpp"

namespace dctmpc {

namespace {

Exponent add_exp(const Exponent& a, const Exponent& b) {
  Exponent s(a.size());
  for (size_t i = 0; i < a.size(); ++i) s[i] = a[i] + b[i];
  return s;
}

}  // namespace

Mat coefficients_to_gram(const MonomialBasis& basis, const Vec& coeffs) {
  MonomialBasis full(basis.dims(), 2 * basis.degree());
  require(coeffs.size() == full.size(), "coefficients_to_gram: coefficient count mismatch");
  std::map<Exponent, int> index;
  for (int k = 0; k < full.size(); ++k) index[full.exponents()[k]] = k;
  const int s = basis.size();
  std::vector<int> count(full.size(), 0);
  std::vector<int> target(s * s);
  for (int a = 0; a < s; ++a)
    for (int b = 0; b < s; ++b) {
      const int k = index.at(add_exp(basis.exponents()[a], basis.exponents()[b]));
      target[a * s + b] = k;
      ++count[k];
    }
  Mat F(s, s);
  for (int a = 0; a < s; ++a)
    for (int b = 0; b < s; ++b) {
      const int k = target[a * s + b];
      F(a, b) = coeffs[k] / count[k];
    }
  return F;
}

Vec gram_to_coefficients(const MonomialBasis& basis, const Mat& gram) {
  return gram_to_polynomial(basis, gram).coeffs();
}

GramFit fit_gram_ls(const SampleSet& samples, int degree_2d) {
  require(degree_2d >= 0 && degree_2d % 2 == 0, "fit_gram_ls: degree must be even");
  require(samples.size() > 0, "fit_gram_ls: no samples");
  const int n = static_cast<int>(samples.inputs.cols());
  GramFit fit;
  fit.basis = MonomialBasis(n, degree_2d / 2);
  MonomialBasis full(n, degree_2d);
  const int N = samples.size(), M = full.size();
  Mat Phi(N, M);
  for (int r = 0; r < N; ++r) Phi.row(r) = full.evaluate(samples.inputs.row(r).transpose()).transpose();
  Vec colscale = Phi.colwise().norm().transpose();
  for (int k = 0; k < M; ++k)
    if (colscale[k] == 0) colscale[k] = 1.0;
  Mat Phis = Phi * colscale.cwiseInverse().asDiagonal();
  Eigen::CompleteOrthogonalDecomposition<Mat> cod(Phis);
  cod.setThreshold(1e-12);
  fit.rank = static_cast<int>(cod.rank());
  fit.warning = fit.rank < M;
  Mat C = cod.solve(samples.targets);
  C = colscale.cwiseInverse().asDiagonal() * C;
  for (int l = 0; l < C.cols(); ++l) fit.F.push_back(coefficients_to_gram(fit.basis, C.col(l)));
  return fit;
}

}  // namespace dctmpc
