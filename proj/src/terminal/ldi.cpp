#include <cmath>
#include <random>
#include <sstream>

#include "dctmpc/terminal.hpp"

namespace dctmpc {

Dynamics Dynamics::from_model(const DcModel& m) {
  Dynamics d;
  d.n_x = m.n_x();
  d.n_u = m.n_u();
  d.f = [m](const Vec& x, const Vec& u) { return m.eval_f(x, u); };
  d.jacobian = [m](const Vec& x, const Vec& u) { return m.jacobian_f(x, u); };
  return d;
}

Dynamics Dynamics::from_function(int n_x, int n_u, std::function<Vec(const Vec&, const Vec&)> f, double step) {
  Dynamics d;
  d.n_x = n_x;
  d.n_u = n_u;
  d.f = f;
  d.jacobian = [f, n_x, n_u, step](const Vec& x, const Vec& u) {
    Mat A(n_x, n_x), B(n_x, n_u);
    for (int j = 0; j < n_x; ++j) {
      Vec xp = x, xm = x;
      xp[j] += step;
      xm[j] -= step;
      A.col(j) = (f(xp, u) - f(xm, u)) / (2 * step);
    }
    for (int j = 0; j < n_u; ++j) {
      Vec up = u, um = u;
      up[j] += step;
      um[j] -= step;
      B.col(j) = (f(x, up) - f(x, um)) / (2 * step);
    }
    return std::make_pair(A, B);
  };
  return d;
}

Vec nnls(const Mat& A, const Vec& b, int max_iter) {
  const int n = static_cast<int>(A.cols());
  if (max_iter <= 0) max_iter = 5 * n + 10;
  Vec x = Vec::Zero(n);
  std::vector<bool> passive(n, false), blocked(n, false);
  const double tol = 10 * std::numeric_limits<double>::epsilon() * A.cwiseAbs().maxCoeff() * std::max<Eigen::Index>(A.rows(), n);
  auto solve_passive = [&]() {
    std::vector<int> idx;
    for (int j = 0; j < n; ++j)
      if (passive[j]) idx.push_back(j);
    Mat Ap(A.rows(), idx.size());
    for (size_t k = 0; k < idx.size(); ++k) Ap.col(k) = A.col(idx[k]);
    Vec zp = Ap.colPivHouseholderQr().solve(b);
    Vec z = Vec::Zero(n);
    for (size_t k = 0; k < idx.size(); ++k) z[idx[k]] = zp[k];
    return z;
  };
  Vec w = A.transpose() * (b - A * x);
  for (int it = 0; it < max_iter; ++it) {
    int jmax = -1;
    double wmax = tol;
    for (int j = 0; j < n; ++j)
      if (!passive[j] && !blocked[j] && w[j] > wmax) {
        wmax = w[j];
        jmax = j;
      }
    if (jmax < 0) break;
    passive[jmax] = true;
    Vec z = solve_passive();
    if (z[jmax] <= tol) {
      // Degenerate entry: the new column cannot enter; try the next candidate.
      passive[jmax] = false;
      blocked[jmax] = true;
      continue;
    }
    for (int inner = 0; inner <= n; ++inner) {
      double step = 1.0;
      bool clipped = false;
      for (int j = 0; j < n; ++j)
        if (passive[j] && z[j] <= 0) {
          step = std::min(step, x[j] / (x[j] - z[j]));
          clipped = true;
        }
      if (!clipped) break;
      x += step * (z - x);
      for (int j = 0; j < n; ++j)
        if (passive[j] && x[j] <= tol) {
          passive[j] = false;
          x[j] = 0.0;
        }
      z = solve_passive();
    }
    for (int j = 0; j < n; ++j) x[j] = passive[j] ? std::max(z[j], 0.0) : 0.0;
    std::fill(blocked.begin(), blocked.end(), false);
    w = A.transpose() * (b - A * x);
  }
  return x;
}

namespace {

// Exact hull distance (infinity norm) by linear programming.
double hull_distance_lp(const Mat& P, const Vec& d) {
  const int m = static_cast<int>(P.cols());
  conic::ConicProblem p;
  auto lam = p.add_variable(conic::VarKind::Vector, m);
  auto t = p.add_variable(conic::VarKind::Scalar);
  conic::LinExpr sum;
  for (int i = 0; i < m; ++i) {
    p.add_nonneg(lam(i));
    sum += lam(i);
  }
  p.add_equality(sum - 1.0);
  for (int r = 0; r < P.rows(); ++r) {
    conic::LinExpr e = -d[r];
    for (int i = 0; i < m; ++i) e += P(r, i) * lam(i);
    p.add_leq(e, t());
    p.add_leq(-1.0 * e, t());
  }
  p.minimize(t());
  const conic::Solution sol = conic::solve(p);
  return sol.optimal() ? std::max(0.0, sol.objective) : std::numeric_limits<double>::infinity();
}


std::vector<Vec> corners(const Vec& center, const Vec& half) {
  const int d = static_cast<int>(center.size());
  if (d > 20) throw LdiError("build_ldi: too many dimensions for corner enumeration");
  std::vector<Vec> out;
  for (long long mask = 0; mask < (1LL << d); ++mask) {
    Vec c = center;
    for (int i = 0; i < d; ++i) c[i] += ((mask >> i) & 1) ? half[i] : -half[i];
    out.push_back(c);
  }
  return out;
}

Mat rounded(const Mat& M) { return (M.array() * 1e12).round().matrix() / 1e12; }

}  // namespace

LdiAudit audit_ldi(const LdiModel& ldi, const Dynamics& f, int samples, unsigned long long seed, double tol) {
  LdiAudit a;
  a.samples = samples;
  const int nx = ldi.n_x(), nu = ldi.n_u(), m = ldi.size();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  const Vec f0 = f.f(ldi.xr, ldi.ur);
  for (int s = 0; s < samples; ++s) {
    Vec x = ldi.xr, u = ldi.ur;
    for (int i = 0; i < nx; ++i) x[i] += ldi.dx[i] * U(rng);
    for (int i = 0; i < nu; ++i) u[i] += ldi.du[i] * U(rng);
    const Vec d = f.f(x, u) - f0;
    const double scale = 1.0 + d.norm();
    Mat P(nx + 1, m);
    for (int i = 0; i < m; ++i) {
      P.col(i).head(nx) = ldi.A[i] * (x - ldi.xr) + ldi.B[i] * (u - ldi.ur);
      P(nx, i) = 1e3 * scale;
    }
    Vec rhs(nx + 1);
    rhs << d, 1e3 * scale;
    Vec lam = nnls(P, rhs);
    double dist;
    if (lam.sum() <= 0) {
      dist = d.norm() / scale;
    } else {
      lam /= lam.sum();
      dist = (P.topRows(nx) * lam - d).norm() / scale;
    }
    if (dist > tol) dist = std::min(dist, hull_distance_lp(P.topRows(nx), d) / scale);
    if (dist <= tol) ++a.passed;
    if (dist > a.worst || a.worst_x.size() == 0) {
      a.worst = std::max(a.worst, dist);
      a.worst_x = x;
      a.worst_u = u;
    }
  }
  return a;
}

LdiModel build_ldi(const std::vector<Dynamics>& sources, const Vec& xr, const Vec& ur, const Vec& dx, const Vec& du,
                   LdiMode mode, const LdiOptions& opts, const std::vector<Mat>& As, const std::vector<Mat>& Bs) {
  require(!sources.empty(), "build_ldi: need at least one dynamics source");
  const int nx = static_cast<int>(xr.size()), nu = static_cast<int>(ur.size());
  require(dx.size() == nx && du.size() == nu, "build_ldi: box size mismatch");
  require((dx.array() >= 0).all() && (du.array() >= 0).all(), "build_ldi: box half-widths must be nonnegative");
  for (const auto& s : sources) require(s.n_x == nx && s.n_u == nu, "build_ldi: source dimension mismatch");
  LdiModel ldi;
  ldi.xr = xr;
  ldi.ur = ur;
  ldi.dx = dx;
  ldi.du = du;

  if (mode == LdiMode::UserSupplied) {
    require(!As.empty() && As.size() == Bs.size(), "build_ldi: user mode needs matching A and B lists");
    for (size_t i = 0; i < As.size(); ++i) {
      require(As[i].rows() == nx && As[i].cols() == nx && Bs[i].rows() == nx && Bs[i].cols() == nu,
              "build_ldi: vertex matrix shape mismatch");
    }
    ldi.A = As;
    ldi.B = Bs;
  } else {
    Vec c(nx + nu), h(nx + nu);
    c << xr, ur;
    h << dx, du;
    auto pts = corners(c, h);
    pts.push_back(c);
    std::vector<std::pair<Mat, Mat>> uniq;
    for (const auto& s : sources) {
      for (const auto& p : pts) {
        auto [A, B] = s.jacobian(p.head(nx), p.tail(nu));
        Mat Ar = rounded(A), Br = rounded(B);
        bool seen = false;
        for (const auto& [UA, UB] : uniq)
          if (UA == Ar && UB == Br) {
            seen = true;
            break;
          }
        if (!seen) uniq.emplace_back(Ar, Br);
      }
    }
    Mat Am = Mat::Zero(nx, nx), Bm = Mat::Zero(nx, nu);
    for (const auto& [A, B] : uniq) {
      Am += A;
      Bm += B;
    }
    Am /= uniq.size();
    Bm /= uniq.size();
    for (const auto& [A, B] : uniq) {
      ldi.A.push_back(Am + opts.inflation * (A - Am));
      ldi.B.push_back(Bm + opts.inflation * (B - Bm));
    }
  }

  if (opts.audit_samples > 0) {
    for (size_t k = 0; k < sources.size(); ++k) {
      LdiAudit a = audit_ldi(ldi, sources[k], opts.audit_samples, opts.seed + k, opts.audit_tol);
      if (!a.ok()) {
        std::ostringstream os;
        os << "LDI audit failed for source " << k << ": " << (a.samples - a.passed) << " of " << a.samples
           << " samples outside the hull; worst distance " << a.worst << " at x=[" << a.worst_x.transpose()
           << "] u=[" << a.worst_u.transpose() << "]";
        throw LdiError(os.str());
      }
    }
  }
  return ldi;
}

}  // namespace dctmpc
