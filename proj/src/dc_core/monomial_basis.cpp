#include <map>

#include "dctmpc/dc_core.hpp"

namespace dctmpc {

namespace {

void fill_degree(int dims, int pos, int remaining, Exponent& cur, std::vector<Exponent>& out) {
  if (pos == dims - 1) {
    cur[pos] = remaining;
    out.push_back(cur);
    return;
  }
  for (int k = remaining; k >= 0; --k) {
    cur[pos] = k;
    fill_degree(dims, pos + 1, remaining - k, cur, out);
  }
  cur[pos] = 0;
}

}  // namespace

std::vector<Exponent> graded_lex_exponents(int dims, int degree) {
  require(dims >= 1 && degree >= 0, "graded_lex_exponents: need dims >= 1, degree >= 0");
  std::vector<Exponent> out;
  Exponent cur(dims, 0);
  for (int d = 0; d <= degree; ++d) fill_degree(dims, 0, d, cur, out);
  return out;
}

MonomialBasis::MonomialBasis(int dims, int degree)
    : dims_(dims), degree_(degree), exponents_(graded_lex_exponents(dims, degree)) {
  const int s = size();
  diff_ops_.assign(dims, Mat::Zero(s, s));
  for (int j = 0; j < dims; ++j) {
    for (int m = 0; m < s; ++m) {
      const Exponent& e = exponents_[m];
      if (e[j] == 0) continue;
      Exponent lower = e;
      --lower[j];
      diff_ops_[j](m, index_of(lower)) = e[j];
    }
  }
}

int MonomialBasis::index_of(const Exponent& e) const {
  // Graded order: search only the block of matching total degree.
  int deg = 0;
  for (int v : e) deg += v;
  if (deg > degree_ || static_cast<int>(e.size()) != dims_) return -1;
  for (int k = 0; k < size(); ++k)
    if (exponents_[k] == e) return k;
  return -1;
}

Vec MonomialBasis::evaluate(const Vec& x) const {
  require(x.size() == dims_, "MonomialBasis::evaluate: dimension mismatch");
  Vec y(size());
  for (int k = 0; k < size(); ++k) {
    double v = 1.0;
    for (int i = 0; i < dims_; ++i)
      for (int p = 0; p < exponents_[k][i]; ++p) v *= x[i];
    y[k] = v;
  }
  return y;
}

Mat hessian_gram_block(const MonomialBasis& basis, const Mat& gram, int i, int j) {
  const Mat& Di = basis.diff_op(i);
  const Mat& Dj = basis.diff_op(j);
  Mat Dij = Di * Dj;
  Mat Dji = Dj * Di;
  return Dji.transpose() * gram + gram * Dij + Di.transpose() * gram * Dj + Dj.transpose() * gram * Di;
}

Mat hessian_gram(const MonomialBasis& basis, const Mat& gram) {
  const int n = basis.dims(), s = basis.size();
  Mat out(n * s, n * s);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) out.block(i * s, j * s, s, s) = hessian_gram_block(basis, gram, i, j);
  return out;
}

Polynomial gram_to_polynomial(const MonomialBasis& basis, const Mat& gram) {
  require(gram.rows() == basis.size() && gram.cols() == basis.size(), "gram_to_polynomial: size mismatch");
  MonomialBasis full(basis.dims(), 2 * basis.degree());
  std::map<Exponent, int> index;
  for (int k = 0; k < full.size(); ++k) index[full.exponents()[k]] = k;
  Vec c = Vec::Zero(full.size());
  const auto& e = basis.exponents();
  for (int a = 0; a < basis.size(); ++a)
    for (int b = 0; b < basis.size(); ++b) {
      Exponent sum(basis.dims());
      for (int i = 0; i < basis.dims(); ++i) sum[i] = e[a][i] + e[b][i];
      c[index.at(sum)] += gram(a, b);
    }
  return Polynomial(basis.dims(), full.exponents(), c);
}

}  // namespace dctmpc
