#include "cones.hpp"

#include <cmath>
#include <limits>

namespace dctmpc::conic::detail {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
const double kSqrt2 = std::sqrt(2.0);

double jnorm(const Eigen::Ref<const Vec>& u) {
  const double n1 = u.tail(u.size() - 1).norm();
  const double a = u[0] - n1, b = u[0] + n1;
  return (a > 0 && b > 0) ? std::sqrt(a * b) : 0.0;
}

double smallest_positive_root(double a, double b, double c) {
  // roots of a t^2 + b t + c with c > 0
  if (std::abs(a) < 1e-300) return b < 0 ? -c / b : kInf;
  const double disc = b * b - 4 * a * c;
  if (disc < 0) return kInf;
  const double sq = std::sqrt(disc);
  const double q = -0.5 * (b + (b >= 0 ? sq : -sq));
  double best = kInf;
  for (double r : {q / a, q != 0 ? c / q : kInf})
    if (r > 0 && r < best) best = r;
  return best;
}

}  // namespace

Layout::Layout(int nonneg_rows, const std::vector<int>& qq, const std::vector<int>& ss)
    : nonneg(nonneg_rows), q(qq), s(ss) {
  size = nonneg;
  degree = nonneg;
  for (int k : q) {
    q_off.push_back(size);
    size += k;
    ++degree;
  }
  for (int p : s) {
    s_off.push_back(size);
    size += svec_size(p);
    degree += p;
  }
}

int svec_size(int p) { return p * (p + 1) / 2; }

Vec svec(const Mat& M) {
  const int p = static_cast<int>(M.rows());
  Vec v(svec_size(p));
  int k = 0;
  for (int j = 0; j < p; ++j)
    for (int i = j; i < p; ++i) v[k++] = i == j ? M(i, j) : kSqrt2 * 0.5 * (M(i, j) + M(j, i));
  return v;
}

Mat smat(const Eigen::Ref<const Vec>& v, int p) {
  Mat M(p, p);
  int k = 0;
  for (int j = 0; j < p; ++j)
    for (int i = j; i < p; ++i) {
      const double val = i == j ? v[k] : v[k] / kSqrt2;
      M(i, j) = M(j, i) = val;
      ++k;
    }
  return M;
}

Vec identity(const Layout& L) {
  Vec e = Vec::Zero(L.size);
  e.head(L.nonneg).setOnes();
  for (size_t k = 0; k < L.q.size(); ++k) e[L.q_off[k]] = 1.0;
  for (size_t k = 0; k < L.s.size(); ++k) e.segment(L.s_off[k], svec_size(L.s[k])) = svec(Mat::Identity(L.s[k], L.s[k]));
  return e;
}

Vec jprod(const Layout& L, const Vec& u, const Vec& v) {
  Vec w(L.size);
  w.head(L.nonneg) = u.head(L.nonneg).cwiseProduct(v.head(L.nonneg));
  for (size_t k = 0; k < L.q.size(); ++k) {
    const int o = L.q_off[k], m = L.q[k];
    w[o] = u.segment(o, m).dot(v.segment(o, m));
    w.segment(o + 1, m - 1) = u[o] * v.segment(o + 1, m - 1) + v[o] * u.segment(o + 1, m - 1);
  }
  for (size_t k = 0; k < L.s.size(); ++k) {
    const int o = L.s_off[k], p = L.s[k], t = svec_size(p);
    Mat U = smat(u.segment(o, t), p), V = smat(v.segment(o, t), p);
    w.segment(o, t) = svec(0.5 * (U * V + V * U));
  }
  return w;
}

Vec jdiv(const Layout& L, const Vec& lambda, const Vec& r) {
  Vec x(L.size);
  x.head(L.nonneg) = r.head(L.nonneg).cwiseQuotient(lambda.head(L.nonneg));
  for (size_t k = 0; k < L.q.size(); ++k) {
    const int o = L.q_off[k], m = L.q[k];
    const double l0 = lambda[o];
    auto l1 = lambda.segment(o + 1, m - 1);
    auto r1 = r.segment(o + 1, m - 1);
    const double det = l0 * l0 - l1.squaredNorm();
    const double u = l1.dot(r1);
    x[o] = (l0 * r[o] - u) / det;
    x.segment(o + 1, m - 1) = (-r[o] * l1 + (det * r1 + u * l1) / l0) / det;
  }
  for (size_t k = 0; k < L.s.size(); ++k) {
    const int o = L.s_off[k], p = L.s[k];
    int idx = 0;
    std::vector<double> diag(p);
    for (int j = 0; j < p; ++j) {
      diag[j] = lambda[o + idx];
      idx += p - j;
    }
    idx = 0;
    for (int j = 0; j < p; ++j)
      for (int i = j; i < p; ++i, ++idx) x[o + idx] = 2.0 * r[o + idx] / (diag[i] + diag[j]);
  }
  return x;
}

double max_step(const Layout& L, const Vec& lambda, const Vec& d) {
  double a = kInf;
  for (int i = 0; i < L.nonneg; ++i)
    if (d[i] < 0) a = std::min(a, -lambda[i] / d[i]);
  for (size_t k = 0; k < L.q.size(); ++k) {
    const int o = L.q_off[k], m = L.q[k];
    auto l = lambda.segment(o, m);
    auto dd = d.segment(o, m);
    const double n1 = l.tail(m - 1).norm();
    const double c = (l[0] - n1) * (l[0] + n1);
    const double qa = dd[0] * dd[0] - dd.tail(m - 1).squaredNorm();
    const double qb = 2.0 * (l[0] * dd[0] - l.tail(m - 1).dot(dd.tail(m - 1)));
    a = std::min(a, smallest_positive_root(qa, qb, std::max(c, 0.0)));
  }
  for (size_t k = 0; k < L.s.size(); ++k) {
    const int o = L.s_off[k], p = L.s[k], t = svec_size(p);
    Mat D = smat(d.segment(o, t), p);
    Vec isq(p);
    int idx = 0;
    for (int j = 0; j < p; ++j) {
      isq[j] = 1.0 / std::sqrt(lambda[o + idx]);
      idx += p - j;
    }
    Mat M = isq.asDiagonal() * D * isq.asDiagonal();
    const double emin = Eigen::SelfAdjointEigenSolver<Mat>(M, Eigen::EigenvaluesOnly).eigenvalues()[0];
    if (emin < 0) a = std::min(a, -1.0 / emin);
  }
  return a;
}

double min_eig(const Layout& L, const Vec& u) {
  double e = kInf;
  if (L.nonneg) e = u.head(L.nonneg).minCoeff();
  for (size_t k = 0; k < L.q.size(); ++k) {
    const int o = L.q_off[k], m = L.q[k];
    e = std::min(e, u[o] - u.segment(o + 1, m - 1).norm());
  }
  for (size_t k = 0; k < L.s.size(); ++k) {
    const int o = L.s_off[k], p = L.s[k];
    Mat U = smat(u.segment(o, svec_size(p)), p);
    e = std::min(e, Eigen::SelfAdjointEigenSolver<Mat>(U, Eigen::EigenvaluesOnly).eigenvalues()[0]);
  }
  return e;
}

void shift_into(const Layout& L, Vec& u, double floor) {
  for (int i = 0; i < L.nonneg; ++i) u[i] = std::max(u[i], floor);
  for (size_t k = 0; k < L.q.size(); ++k) {
    const int o = L.q_off[k], m = L.q[k];
    const double e = u[o] - u.segment(o + 1, m - 1).norm();
    if (e < floor) u[o] += floor - e;
  }
  for (size_t k = 0; k < L.s.size(); ++k) {
    const int o = L.s_off[k], p = L.s[k], t = svec_size(p);
    Mat U = smat(u.segment(o, t), p);
    const double e = Eigen::SelfAdjointEigenSolver<Mat>(U, Eigen::EigenvaluesOnly).eigenvalues()[0];
    if (e < floor) u.segment(o, t) = svec(U + (floor - e) * Mat::Identity(p, p));
  }
}

bool compute_scaling(const Layout& L, const Vec& s, const Vec& z, Scaling& W) {
  W.d = (s.head(L.nonneg).cwiseQuotient(z.head(L.nonneg))).cwiseSqrt();
  W.lambda.resize(L.size);
  W.lambda.head(L.nonneg) = s.head(L.nonneg).cwiseProduct(z.head(L.nonneg)).cwiseSqrt();
  if (L.nonneg && !(W.lambda.head(L.nonneg).array() > 0).all()) return false;
  W.soc.clear();
  for (size_t k = 0; k < L.q.size(); ++k) {
    const int o = L.q_off[k], m = L.q[k];
    Vec sk = s.segment(o, m), zk = z.segment(o, m);
    const double aa = jnorm(sk), bb = jnorm(zk);
    if (!(aa > 0) || !(bb > 0)) return false;
    SocScale sc;
    sc.beta = std::sqrt(aa / bb);
    const double cc = std::sqrt((sk.dot(zk) / (aa * bb) + 1.0) / 2.0);
    Vec v = sk / aa;
    v[0] += zk[0] / bb;
    v.tail(m - 1) -= zk.tail(m - 1) / bb;
    v /= 2.0 * cc;
    v[0] += 1.0;
    v /= std::sqrt(2.0 * v[0]);
    sc.v = v;
    W.soc.push_back(sc);
    // lambda = W z = beta (2 v v'z - J z)
    Vec Jz = zk;
    Jz.tail(m - 1) *= -1.0;
    W.lambda.segment(o, m) = sc.beta * (2.0 * v.dot(zk) * v - Jz);
  }
  W.psd.clear();
  for (size_t k = 0; k < L.s.size(); ++k) {
    const int o = L.s_off[k], p = L.s[k], t = svec_size(p);
    Eigen::LLT<Mat> ls(smat(s.segment(o, t), p)), lz(smat(z.segment(o, t), p));
    if (ls.info() != Eigen::Success || lz.info() != Eigen::Success) return false;
    Mat Ls = ls.matrixL(), Lz = lz.matrixL();
    Eigen::JacobiSVD<Mat> svd(Lz.transpose() * Ls, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Vec sig = svd.singularValues();
    if (!(sig.minCoeff() > 0)) return false;
    Vec isq = sig.cwiseSqrt().cwiseInverse();
    PsdScale sc;
    sc.R = Ls * svd.matrixV() * isq.asDiagonal();
    sc.Rinv = isq.asDiagonal() * svd.matrixU().transpose() * Lz.transpose();
    W.psd.push_back(sc);
    W.lambda.segment(o, t) = svec(sig.asDiagonal().toDenseMatrix());
  }
  return true;
}

Vec apply(const Layout& L, const Scaling& W, Op op, const Vec& u) {
  Vec w(L.size);
  const bool inv = op == Op::Winv || op == Op::Wit;
  if (inv) w.head(L.nonneg) = u.head(L.nonneg).cwiseQuotient(W.d);
  else w.head(L.nonneg) = u.head(L.nonneg).cwiseProduct(W.d);
  for (size_t k = 0; k < L.q.size(); ++k) {
    const int o = L.q_off[k], m = L.q[k];
    const auto& sc = W.soc[k];
    Vec uk = u.segment(o, m);
    Vec Ju = uk;
    Ju.tail(m - 1) *= -1.0;
    if (!inv) {
      w.segment(o, m) = sc.beta * (2.0 * sc.v.dot(uk) * sc.v - Ju);
    } else {
      Vec Jv = sc.v;
      Jv.tail(m - 1) *= -1.0;
      w.segment(o, m) = (2.0 * Jv.dot(uk) * Jv - Ju) / sc.beta;
    }
  }
  for (size_t k = 0; k < L.s.size(); ++k) {
    const int o = L.s_off[k], p = L.s[k], t = svec_size(p);
    const auto& sc = W.psd[k];
    Mat U = smat(u.segment(o, t), p);
    Mat V;
    switch (op) {
      case Op::W: V = sc.R.transpose() * U * sc.R; break;
      case Op::Wt: V = sc.R * U * sc.R.transpose(); break;
      case Op::Winv: V = sc.Rinv.transpose() * U * sc.Rinv; break;
      case Op::Wit: V = sc.Rinv * U * sc.Rinv.transpose(); break;
    }
    w.segment(o, t) = svec(V);
  }
  return w;
}

Mat soc_wit(const SocScale& sc, int m) {
  Vec Jv = sc.v;
  Jv.tail(m - 1) *= -1.0;
  Mat J = Mat::Identity(m, m);
  J.bottomRightCorner(m - 1, m - 1) *= -1.0;
  return (2.0 * Jv * Jv.transpose() - J) / sc.beta;
}

Mat psd_wit(const PsdScale& sc, int p) {
  const int t = svec_size(p);
  Mat out(t, t);
  Vec e = Vec::Zero(t);
  for (int k = 0; k < t; ++k) {
    e.setZero();
    e[k] = 1.0;
    out.col(k) = svec(sc.Rinv * smat(e, p) * sc.Rinv.transpose());
  }
  return out;
}

}  // namespace dctmpc::conic::detail
