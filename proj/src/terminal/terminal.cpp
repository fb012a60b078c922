#include <cmath>
#include <random>

#include "dctmpc/terminal.hpp"

namespace dctmpc {

using conic::LinExpr;
using conic::LinMat;

namespace {

LinMat lm_zero(int r, int c) { return LinMat(r, std::vector<LinExpr>(c)); }

LinMat lm_mul(const Mat& M, const LinMat& X) {
  const int r = static_cast<int>(M.rows()), c = X.empty() ? 0 : static_cast<int>(X[0].size());
  LinMat out = lm_zero(r, c);
  for (int i = 0; i < r; ++i)
    for (int k = 0; k < M.cols(); ++k) {
      if (M(i, k) == 0.0) continue;
      for (int j = 0; j < c; ++j) out[i][j] += M(i, k) * X[k][j];
    }
  return out;
}

LinMat lm_mul(const LinMat& X, const Mat& M) {
  const int r = static_cast<int>(X.size()), c = static_cast<int>(M.cols());
  LinMat out = lm_zero(r, c);
  for (int i = 0; i < r; ++i)
    for (int k = 0; k < M.rows(); ++k)
      for (int j = 0; j < c; ++j)
        if (M(k, j) != 0.0) out[i][j] += M(k, j) * X[i][k];
  return out;
}

LinMat lm_add(LinMat a, const LinMat& b) {
  for (size_t i = 0; i < a.size(); ++i)
    for (size_t j = 0; j < a[i].size(); ++j) a[i][j] += b[i][j];
  return a;
}

LinMat lm_t(const LinMat& X) {
  const int r = static_cast<int>(X.size()), c = r ? static_cast<int>(X[0].size()) : 0;
  LinMat out = lm_zero(c, r);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) out[j][i] = X[i][j];
  return out;
}

LinMat lm_const(const Mat& M) {
  LinMat out = lm_zero(static_cast<int>(M.rows()), static_cast<int>(M.cols()));
  for (int i = 0; i < M.rows(); ++i)
    for (int j = 0; j < M.cols(); ++j) out[i][j] = M(i, j);
  return out;
}

// Places blocks[i][j] into one matrix; empty entries mean zero blocks.
LinMat lm_blocks(const std::vector<std::vector<LinMat>>& blocks, const std::vector<int>& sizes) {
  int total = 0;
  for (int s : sizes) total += s;
  LinMat out = lm_zero(total, total);
  int r0 = 0;
  for (size_t bi = 0; bi < sizes.size(); ++bi) {
    int c0 = 0;
    for (size_t bj = 0; bj < sizes.size(); ++bj) {
      const LinMat& B = blocks[bi][bj];
      if (!B.empty())
        for (int i = 0; i < sizes[bi]; ++i)
          for (int j = 0; j < sizes[bj]; ++j) out[r0 + i][c0 + j] = B[i][j];
      c0 += sizes[bj];
    }
    r0 += sizes[bi];
  }
  return out;
}

// L with M = L L', dropping directions with negligible eigenvalues.
Mat psd_factor(const Mat& M, const char* what) {
  require(M.rows() == M.cols() && (M - M.transpose()).norm() <= 1e-10 * (1.0 + M.norm()),
          std::string(what) + " must be symmetric");
  Eigen::SelfAdjointEigenSolver<Mat> es(M);
  const double top = std::max(es.eigenvalues().cwiseAbs().maxCoeff(), 1e-300);
  require(es.eigenvalues().minCoeff() >= -1e-10 * top, std::string(what) + " must be positive semidefinite");
  std::vector<int> keep;
  for (int i = 0; i < M.rows(); ++i)
    if (es.eigenvalues()[i] > 1e-12 * top) keep.push_back(i);
  Mat L(M.rows(), keep.size());
  for (size_t k = 0; k < keep.size(); ++k)
    L.col(k) = es.eigenvectors().col(keep[k]) * std::sqrt(es.eigenvalues()[keep[k]]);
  return L;
}

}  // namespace

TerminalIngredients compute_terminal(const LdiModel& ldi, const Mat& Q, const Mat& R, double alpha,
                                     const conic::SolverOptions& sopts) {
  const int nx = ldi.n_x(), nu = ldi.n_u();
  require(ldi.size() >= 1, "compute_terminal: empty LDI");
  require(Q.rows() == nx && R.rows() == nu, "compute_terminal: weight dimensions do not match the LDI");
  require(alpha >= 0, "compute_terminal: alpha must be nonnegative");
  const Mat Lq = psd_factor(Q, "Q");
  const Mat Lr = psd_factor(R, "R");
  require(nu == 0 || Lr.cols() == nu, "compute_terminal: R must be positive definite");

  conic::ConicProblem p;
  auto Sv = p.add_variable(conic::VarKind::SymMatrix, nx, "S");
  auto Qv = p.add_variable(conic::VarKind::SymMatrix, nx, "Qhat");
  auto Yv = p.add_variable(conic::VarKind::Vector, nu * nx, "Y");
  auto gv = p.add_variable(conic::VarKind::Scalar, 1, "gamma_inv");
  const LinMat S = Sv.mat();
  LinMat Y = lm_zero(nu, nx);
  for (int i = 0; i < nu; ++i)
    for (int j = 0; j < nx; ++j) Y[i][j] = Yv(i * nx + j);

  const int rq = static_cast<int>(Lq.cols()), rr = static_cast<int>(Lr.cols());
  for (int v = 0; v < ldi.size(); ++v) {
    LinMat M = lm_add(lm_mul(ldi.A[v], S), lm_mul(ldi.B[v], Y));
    std::vector<int> sizes{nx, nx};
    std::vector<std::vector<LinMat>> blk(4, std::vector<LinMat>(4));
    blk[0][0] = S;
    blk[0][1] = lm_t(M);
    blk[1][0] = M;
    blk[1][1] = S;
    if (rq > 0) {
      LinMat SL = lm_mul(S, Lq);
      blk[0][2] = SL;
      blk[2][0] = lm_t(SL);
      blk[2][2] = lm_const(Mat::Identity(rq, rq));
      sizes.push_back(rq);
    }
    if (rr > 0) {
      const int b = static_cast<int>(sizes.size());
      LinMat YL = lm_mul(lm_t(Y), Lr);
      blk[0][b] = YL;
      blk[b][0] = lm_t(YL);
      blk[b][b] = lm_const(Mat::Identity(rr, rr));
      sizes.push_back(rr);
    }
    blk.resize(sizes.size());
    for (auto& row : blk) row.resize(sizes.size());
    p.add_psd(lm_blocks(blk, sizes), "descent_" + std::to_string(v));
  }
  for (int i = 0; i < nx; ++i) p.add_nonneg(ldi.dx[i] * ldi.dx[i] * gv() - S[i][i], "state_bound");
  for (int i = 0; i < nu; ++i) {
    LinMat B = lm_zero(nx + 1, nx + 1);
    B[0][0] = ldi.du[i] * ldi.du[i] * gv();
    for (int j = 0; j < nx; ++j) {
      B[0][j + 1] = Y[i][j];
      B[j + 1][0] = Y[i][j];
      for (int k = 0; k < nx; ++k) B[j + 1][k + 1] = S[j][k];
    }
    p.add_psd(B, "input_bound");
  }
  {
    LinMat B = lm_zero(2 * nx, 2 * nx);
    const LinMat Qh = Qv.mat();
    for (int i = 0; i < nx; ++i)
      for (int j = 0; j < nx; ++j) {
        B[i][j] = S[i][j];
        B[nx + i][nx + j] = Qh[i][j];
      }
    for (int i = 0; i < nx; ++i) {
      B[i][nx + i] = 1.0;
      B[nx + i][i] = 1.0;
    }
    p.add_psd(B, "inverse_bound");
  }
  LinExpr obj = alpha * gv();
  for (int i = 0; i < nx; ++i) obj += Qv(i, i);
  p.minimize(obj);

  conic::Solution sol = conic::solve(p, sopts);
  if (!sol.optimal())
    throw TerminalDesignError(std::string("terminal SDP ") + conic::status_name(sol.status) + " (" + sol.diagnostic +
                              "); try shrinking the terminal box (dx, du)");
  TerminalIngredients t;
  t.S = sol.matrix(Sv);
  const Vec y = sol.value(Yv);
  Mat Ym(nu, nx);
  for (int i = 0; i < nu; ++i)
    for (int j = 0; j < nx; ++j) Ym(i, j) = y[i * nx + j];
  const double ginv = sol.value(gv)[0];
  Eigen::LLT<Mat> llt(t.S);
  if (llt.info() != Eigen::Success || ginv <= 0)
    throw TerminalDesignError("terminal SDP returned a singular S or nonpositive gamma^{-1}");
  t.Q_hat = llt.solve(Mat::Identity(nx, nx));
  t.Q_hat = 0.5 * (t.Q_hat + t.Q_hat.transpose());
  t.K = llt.solve(Ym.transpose()).transpose();
  t.gamma = 1.0 / ginv;
  t.alpha = alpha;
  t.xr = ldi.xr;
  t.ur = ldi.ur;
  t.Q = Q;
  t.R = R;
  t.stats = sol.stats;
  return t;
}

double descent_residual(const TerminalIngredients& t, const Dynamics& f, const Vec& x, const Vec& w) {
  const Vec e = x - t.xr;
  const Vec du = t.K * e;
  Vec nxt = f.f(x, du + t.ur) - t.xr;
  if (w.size()) nxt += w;
  return nxt.dot(t.Q_hat * nxt) + e.dot(t.Q * e) + du.dot(t.R * du) - e.dot(t.Q_hat * e);
}

std::vector<Vec> sample_terminal_set(const TerminalIngredients& t, int n, unsigned long long seed) {
  const int nx = static_cast<int>(t.xr.size());
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> N01;
  std::uniform_real_distribution<double> U01;
  Eigen::LLT<Mat> llt(t.Q_hat);
  const Mat Lt = Mat(llt.matrixU());  // Q_hat = Lt' Lt
  std::vector<Vec> out;
  out.reserve(n);
  for (int s = 0; s < n; ++s) {
    Vec z(nx);
    for (int i = 0; i < nx; ++i) z[i] = N01(rng);
    z *= std::pow(U01(rng), 1.0 / nx) / z.norm();
    // |x - xr|^2_Qhat = gamma |z|^2
    out.push_back(t.xr + std::sqrt(t.gamma) * Lt.triangularView<Eigen::Upper>().solve(z));
  }
  return out;
}

DescentAudit audit_descent(const TerminalIngredients& t, const Dynamics& f, int samples, unsigned long long seed,
                           const Box& X, const Box& U) {
  DescentAudit a;
  a.samples = samples;
  for (const Vec& x : sample_terminal_set(t, samples, seed)) {
    a.worst_residual = std::max(a.worst_residual, descent_residual(t, f, x));
    if (X.dim() && !X.contains(x, 1e-9)) a.in_state_box = false;
    if (U.dim() && !U.contains(t.K * (x - t.xr) + t.ur, 1e-9)) a.in_input_box = false;
  }
  return a;
}

double estimate_beta(const TerminalIngredients& t, const Dynamics& f, const std::vector<Vec>& w_vertices, int samples,
                     unsigned long long seed, double safety) {
  double worst = 0.0;
  for (const Vec& x : sample_terminal_set(t, samples, seed))
    for (const Vec& w : w_vertices) worst = std::max(worst, descent_residual(t, f, x, w));
  return safety * worst;
}

json to_json(const TerminalIngredients& t) {
  return json{{"format", "dctmpc-terminal"}, {"version", 1},     {"K", to_json(t.K)},
              {"Q_hat", to_json(t.Q_hat)},   {"S", to_json(t.S)}, {"gamma", t.gamma},
              {"beta", t.beta},              {"alpha", t.alpha},  {"xr", to_json(t.xr)},
              {"ur", to_json(t.ur)},         {"Q", to_json(t.Q)}, {"R", to_json(t.R)}};
}

TerminalIngredients terminal_from_json(const json& j) {
  if (j.value("format", "") != "dctmpc-terminal") throw DataError("not a terminal ingredients file");
  TerminalIngredients t;
  t.K = mat_from_json(j.at("K"));
  t.Q_hat = mat_from_json(j.at("Q_hat"));
  t.S = mat_from_json(j.at("S"));
  t.gamma = j.at("gamma").get<double>();
  t.beta = j.at("beta").get<double>();
  t.alpha = j.at("alpha").get<double>();
  t.xr = vec_from_json(j.at("xr"));
  t.ur = vec_from_json(j.at("ur"));
  t.Q = mat_from_json(j.at("Q"));
  t.R = mat_from_json(j.at("R"));
  return t;
}

}  // namespace dctmpc
