#include "dctmpc/dc_core.hpp"

namespace dctmpc {

namespace {

void differentiate(const std::vector<Exponent>& e, const Vec& c, int j, std::vector<Exponent>& out_e, Vec& out_c) {
  out_e.clear();
  std::vector<double> cs;
  for (size_t k = 0; k < e.size(); ++k) {
    if (e[k][j] == 0 || c[k] == 0.0) continue;
    Exponent d = e[k];
    --d[j];
    out_e.push_back(d);
    cs.push_back(c[k] * e[k][j]);
  }
  out_c = Eigen::Map<Vec>(cs.data(), static_cast<Eigen::Index>(cs.size()));
}

}  // namespace

Polynomial::Polynomial(int dims, std::vector<Exponent> exponents, Vec coeffs)
    : dims_(dims), exps_(std::move(exponents)), coeffs_(std::move(coeffs)) {
  require(static_cast<Eigen::Index>(exps_.size()) == coeffs_.size(), "Polynomial: coefficient count mismatch");
  d1_exps_.resize(dims_);
  d1_coeffs_.resize(dims_);
  for (int j = 0; j < dims_; ++j) differentiate(exps_, coeffs_, j, d1_exps_[j], d1_coeffs_[j]);
  for (int i = 0; i < dims_; ++i)
    for (int j = i; j < dims_; ++j) {
      std::vector<Exponent> e;
      Vec c;
      differentiate(d1_exps_[i], d1_coeffs_[i], j, e, c);
      d2_exps_.push_back(std::move(e));
      d2_coeffs_.push_back(std::move(c));
    }
}

double Polynomial::eval_terms(const std::vector<Exponent>& e, const Vec& c, const Vec& x) const {
  double acc = 0.0;
  for (size_t k = 0; k < e.size(); ++k) {
    double v = c[k];
    for (int i = 0; i < dims_; ++i)
      for (int p = 0; p < e[k][i]; ++p) v *= x[i];
    acc += v;
  }
  return acc;
}

double Polynomial::value(const Vec& x) const {
  require(x.size() == dims_, "Polynomial::value: dimension mismatch");
  return eval_terms(exps_, coeffs_, x);
}

Vec Polynomial::gradient(const Vec& x) const {
  Vec g(dims_);
  for (int j = 0; j < dims_; ++j) g[j] = eval_terms(d1_exps_[j], d1_coeffs_[j], x);
  return g;
}

Mat Polynomial::hessian(const Vec& x) const {
  Mat H(dims_, dims_);
  int k = 0;
  for (int i = 0; i < dims_; ++i)
    for (int j = i; j < dims_; ++j, ++k) {
      H(i, j) = eval_terms(d2_exps_[k], d2_coeffs_[k], x);
      H(j, i) = H(i, j);
    }
  return H;
}

}  // namespace dctmpc
