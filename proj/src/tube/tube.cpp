#include "dctmpc/tube.hpp"

namespace dctmpc {

const char* variant_name(TubeVariant v) { return v == TubeVariant::Elementwise ? "elementwise" : "simplex"; }

TubeVariant variant_from_name(const std::string& s) {
  if (s == "elementwise") return TubeVariant::Elementwise;
  if (s == "simplex") return TubeVariant::Simplex;
  throw ArgumentError("unknown tube variant '" + s + "'");
}

int TubeParam::num_vertices() const {
  if (variant == TubeVariant::Simplex) return n_x + 1;
  require(n_x <= 20, "TubeParam: too many states for elementwise vertices");
  return 1 << n_x;
}

Mat TubeParam::gamma() const {
  Mat G = Mat::Zero(rows(), n_x);
  if (variant == TubeVariant::Elementwise) {
    G.topRows(n_x).setIdentity();
    G.bottomRows(n_x) = -Mat::Identity(n_x, n_x);
  } else {
    G.topRows(n_x) = -Mat::Identity(n_x, n_x);
    G.row(n_x).setOnes();
  }
  return G;
}

std::vector<Mat> TubeParam::vertex_maps() const {
  std::vector<Mat> maps;
  const int n = n_x;
  if (variant == TubeVariant::Elementwise) {
    for (int mask = 0; mask < num_vertices(); ++mask) {
      Mat M = Mat::Zero(n, 2 * n);
      for (int l = 0; l < n; ++l) {
        if ((mask >> l) & 1) M(l, l) = 1.0;  // upper bound q2
        else M(l, n + l) = -1.0;             // lower bound q1 = -q[n+l]
      }
      maps.push_back(M);
    }
  } else {
    Mat base = Mat::Zero(n, n + 1);
    base.leftCols(n) = -Mat::Identity(n, n);
    maps.push_back(base);
    for (int i = 0; i < n; ++i) {
      Mat M = base;
      M.row(i).setOnes();  // -alpha_i + sigma = beta + sum_{l != i} alpha_l
      M(i, i) = 0.0;
      maps.push_back(M);
    }
  }
  return maps;
}

bool TubeParam::nonempty(const Vec& q, double tol) const {
  require(q.size() == rows(), "TubeParam: q has the wrong length");
  if (variant == TubeVariant::Elementwise) return ((q.head(n_x) + q.tail(n_x)).array() >= -tol).all();
  return q[n_x] + q.head(n_x).sum() >= -tol;
}

std::vector<Vec> vertices(const Vec& q, const TubeParam& p) {
  if (!p.nonempty(q)) throw TubeError("vertices: empty cross-section");
  std::vector<Vec> out;
  for (const Mat& M : p.vertex_maps()) out.push_back(M * q);
  return out;
}

std::vector<Vec> box_vertices(const Vec& lo, const Vec& hi) {
  require(lo.size() == hi.size(), "box_vertices: size mismatch");
  const int n = static_cast<int>(lo.size());
  require(n <= 20, "box_vertices: too many dimensions");
  std::vector<Vec> out;
  for (long long mask = 0; mask < (1LL << n); ++mask) {
    Vec v(n);
    for (int i = 0; i < n; ++i) v[i] = ((mask >> i) & 1) ? hi[i] : lo[i];
    out.push_back(v);
  }
  return out;
}

Vec disturbance_offsets(const TubeParam& p, const std::vector<Vec>& w_vertices, const Vec& eps) {
  const Mat G = p.gamma();
  std::vector<Vec> ws = w_vertices;
  if (ws.empty()) ws.push_back(Vec::Zero(p.n_x));
  std::vector<Vec> es{Vec::Zero(p.n_x)};
  if (eps.size()) {
    require(eps.size() == p.n_x && (eps.array() >= 0).all(), "disturbance_offsets: bad modelling-error box");
    es = box_vertices(-eps, eps);
  }
  Vec wbar = Vec::Constant(p.rows(), -std::numeric_limits<double>::infinity());
  for (const Vec& w : ws) {
    require(w.size() == p.n_x, "disturbance_offsets: disturbance vertex has the wrong size");
    for (const Vec& e : es) wbar = wbar.cwiseMax(G * (w + e));
  }
  return wbar;
}

void NominalTrajectory::refresh_feedforward() {
  v.resize(u.size());
  for (size_t k = 0; k < u.size(); ++k) v[k] = u[k] - K[k] * x[k];
}

NominalTrajectory rollout(const DcModel& model, const Vec& x0, const std::vector<Vec>& v, const std::vector<Mat>& K) {
  require(v.size() == K.size(), "rollout: feedforward and gain counts differ");
  NominalTrajectory t;
  t.x.push_back(x0);
  t.v = v;
  t.K = K;
  for (size_t k = 0; k < v.size(); ++k) {
    t.u.push_back(v[k] + K[k] * t.x[k]);
    t.x.push_back(model.eval_f(t.x[k], t.u[k]));
  }
  return t;
}

std::vector<Mat> dp_gains(const std::vector<Mat>& A, const std::vector<Mat>& B, const Mat& Q, const Mat& R,
                          const Mat& P_N) {
  require(A.size() == B.size(), "dp_gains: A and B counts differ");
  const int N = static_cast<int>(A.size());
  std::vector<Mat> K(N);
  Mat P = P_N;
  for (int k = N - 1; k >= 0; --k) {
    const Mat BtP = B[k].transpose() * P;
    const Mat Delta = BtP * B[k] + R;
    Eigen::LLT<Mat> llt(Delta);
    if (llt.info() != Eigen::Success) throw SolverError("dp_gains: singular Delta at step " + std::to_string(k));
    const Mat BtPA = BtP * A[k];
    K[k] = -llt.solve(BtPA);
    P = Q + A[k].transpose() * P * A[k] - BtPA.transpose() * llt.solve(BtPA);
    P = 0.5 * (P + P.transpose());
  }
  return K;
}

std::vector<Mat> dp_gains(const DcModel& model, const NominalTrajectory& traj, const Mat& Q, const Mat& R,
                          const Mat& P_N) {
  std::vector<Mat> A, B;
  for (int k = 0; k < traj.N(); ++k) {
    auto [Ak, Bk] = model.jacobian_f(traj.x[k], traj.u[k]);
    A.push_back(Ak);
    B.push_back(Bk);
  }
  return dp_gains(A, B, Q, R, P_N);
}

std::vector<RowSplit> row_splits(const DcModel& model, const TubeParam& p) {
  const Mat GE = p.gamma() * model.embedding();
  const int no = model.n_out();
  std::vector<RowSplit> out(p.rows());
  for (int r = 0; r < p.rows(); ++r) {
    RowSplit& s = out[r];
    s.wg = s.wh = s.lg = s.lh = Vec::Zero(no);
    for (int l = 0; l < no; ++l) {
      const double w = GE(r, l);
      const bool gz = model.function().part_is_zero(Part::G, l);
      const bool hz = model.function().part_is_zero(Part::H, l);
      if (w > 0) {
        if (!gz) s.wg[l] = w;
        if (!hz) s.lh[l] = w;
      } else if (w < 0) {
        if (!hz) s.wh[l] = -w;
        if (!gz) s.lg[l] = -w;
      }
    }
    s.convex_zero = s.wg.isZero(0) && s.wh.isZero(0);
    s.concave_zero = s.lg.isZero(0) && s.lh.isZero(0);
  }
  return out;
}

double concave_target(const DcModel& model, const RowSplit& s, const Vec& z) {
  if (s.concave_zero) return 0.0;
  const DcFunction& f = model.function();
  return f.weighted_value(Part::G, s.lg, z, nullptr) + f.weighted_value(Part::H, s.lh, z, nullptr);
}

std::vector<std::vector<ConcaveLinearization>> concave_linearizations(const DcModel& model,
                                                                      const NominalTrajectory& traj,
                                                                      const TubeParam& p) {
  std::vector<std::vector<ConcaveLinearization>> out(traj.N());
  if (!model.has_function()) return out;
  const auto splits = row_splits(model, p);
  const DcFunction& f = model.function();
  for (int k = 0; k < traj.N(); ++k) {
    const Vec z0 = model.dc_inputs(traj.x[k], traj.u[k]);
    out[k].resize(p.rows());
    for (int r = 0; r < p.rows(); ++r) {
      ConcaveLinearization& L = out[k][r];
      L.z0 = z0;
      L.grad = Vec::Zero(z0.size());
      if (splits[r].concave_zero) continue;
      Vec g1, g2;
      L.value = f.weighted_value(Part::G, splits[r].lg, z0, &g1) + f.weighted_value(Part::H, splits[r].lh, z0, &g2);
      L.grad = g1 + g2;
    }
  }
  return out;
}

bool MpcConfig::disturbed() const {
  for (const Vec& w : W)
    if (!w.isZero(0)) return true;
  return eps.size() > 0 && !eps.isZero(0);
}

void MpcConfig::validate(const DcModel& model) const {
  const int nx = model.n_x(), nu = model.n_u();
  require(N >= 1, "MpcConfig: N must be at least 1");
  require(rho > 0 && rho < 1, "MpcConfig: rho must lie in (0, 1)");
  require(max_iters >= 1, "MpcConfig: max_iters must be at least 1");
  require(Q.rows() == nx && Q.cols() == nx && R.rows() == nu && R.cols() == nu, "MpcConfig: weight shapes");
  require(xr.size() == nx && ur.size() == nu, "MpcConfig: reference sizes");
  require(tube.n_x == nx, "MpcConfig: tube dimension");
  require(tube_slack >= 0, "MpcConfig: tube_slack must be nonnegative");
  require(X.dim() == nx && U.dim() == nu, "MpcConfig: constraint box sizes");
  Eigen::LLT<Mat> llt(R);
  require(llt.info() == Eigen::Success, "MpcConfig: R must be positive definite");
  require(Q.isApprox(Q.transpose()) || Q.isZero(0), "MpcConfig: Q must be symmetric");
  require(Eigen::SelfAdjointEigenSolver<Mat>(Q).eigenvalues().minCoeff() >= -1e-12, "MpcConfig: Q must be PSD");
}

}  // namespace dctmpc
