#include <cmath>

#include "dctmpc/tube.hpp"

namespace dctmpc {

using conic::LinExpr;
using conic::LinVec;

namespace {

// Convex part of one dynamics row as a smooth function of the DC inputs.
class RowConvex : public conic::SmoothConvexFunction {
 public:
  RowConvex(std::shared_ptr<const DcFunction> f, Vec wg, Vec wh) : f_(std::move(f)), wg_(std::move(wg)), wh_(std::move(wh)) {
    use_g_ = !wg_.isZero(0);
    use_h_ = !wh_.isZero(0);
  }
  int input_dim() const override { return f_->input_dim(); }
  double value(const Vec& x, Vec* grad) const override {
    double v = 0.0;
    if (grad) grad->setZero(x.size());
    Vec g;
    if (use_g_) {
      v += f_->weighted_value(Part::G, wg_, x, grad ? &g : nullptr);
      if (grad) *grad += g;
    }
    if (use_h_) {
      v += f_->weighted_value(Part::H, wh_, x, grad ? &g : nullptr);
      if (grad) *grad += g;
    }
    return v;
  }
  Mat hessian(const Vec& x) const override {
    Mat H = Mat::Zero(x.size(), x.size());
    if (use_g_) H += f_->weighted_hessian(Part::G, wg_, x);
    if (use_h_) H += f_->weighted_hessian(Part::H, wh_, x);
    return H;
  }
  std::string describe() const override { return std::string("dc-row:") + kind_name(f_->kind()); }

 private:
  std::shared_ptr<const DcFunction> f_;
  Vec wg_, wh_;
  bool use_g_ = false, use_h_ = false;
};

LinVec affine(const Mat& M, const LinVec& x, const Vec& c) {
  LinVec out = conic::mul(M, x);
  for (int i = 0; i < c.size(); ++i) out[i] += c[i];
  return out;
}

// Epigraph of the ReLU layers: returns variables t >= last-layer activations.
LinVec dcnn_epigraph(conic::ConicProblem& p, const DcnnModel& net, const LinVec& xi) {
  LinVec prev;
  for (size_t l = 0; l < net.hidden().size(); ++l) {
    const DcnnLayer& L = net.hidden()[l];
    const int w = static_cast<int>(L.bias.size());
    auto t = p.add_variable(conic::VarKind::Vector, w);
    LinVec pre = affine(L.phi, xi, L.bias);
    if (l > 0) pre = conic::add(pre, conic::mul(L.theta, prev));
    LinVec tv = t.vec();
    for (int i = 0; i < w; ++i) {
      p.add_nonneg(tv[i], "relu_pos");
      p.add_leq(pre[i], tv[i], "relu_lin");
    }
    prev = tv;
  }
  return prev;
}

}  // namespace

Subproblem build_subproblem(const MpcConfig& cfg, const DcModel& model, const NominalTrajectory& traj,
                            const TerminalIngredients& term, const Vec& wbar, bool gamma_relaxed) {
  const int N = cfg.N, nx = model.n_x(), nu = model.n_u();
  const TubeParam& tp = cfg.tube;
  const int nq = tp.rows();
  if (traj.N() != N || static_cast<int>(traj.x.size()) != N + 1 || static_cast<int>(traj.K.size()) != N)
    throw TubeError("build_subproblem: trajectory length does not match the horizon");
  if (wbar.size() != nq) throw TubeError("build_subproblem: disturbance offset has the wrong length");
  if (term.Q_hat.rows() != nx || term.gamma <= 0) throw TubeError("build_subproblem: terminal ingredients missing");

  Subproblem sp;
  sp.relaxed = gamma_relaxed;
  conic::ConicProblem& p = sp.problem;
  sp.v = p.add_variable(conic::VarKind::Vector, N * nu, "v");
  sp.q = p.add_variable(conic::VarKind::Vector, N * nq, "q");
  sp.theta = p.add_variable(conic::VarKind::Vector, N + 1, "theta");
  sp.chi = p.add_variable(conic::VarKind::Vector, N, "chi");

  const Mat G = tp.gamma();
  const auto maps = tp.vertex_maps();
  const bool has_fn = model.has_function();
  std::vector<RowSplit> splits;
  std::vector<std::vector<ConcaveLinearization>> lin;
  std::shared_ptr<const DcFunction> fn;
  const DcnnModel* net = nullptr;
  if (has_fn) {
    splits = row_splits(model, tp);
    lin = concave_linearizations(model, traj, tp);
    fn = std::make_shared<const DcFunction>(model.function());
    net = std::get_if<DcnnModel>(&fn->rep());
  }
  const Mat GA = G * model.A_res(), GB = G * model.B_res();
  const Vec Gc = G * model.c_res();
  const Mat GE = G * model.embedding();

  auto qvec = [&](int k) {  // k = 1..N
    LinVec out(nq);
    for (int r = 0; r < nq; ++r) out[r] = sp.q((k - 1) * nq + r);
    return out;
  };
  auto box_rows = [&](const LinVec& e, const Box& b, const char* tag) {
    for (int i = 0; i < b.dim(); ++i) {
      if (std::isfinite(b.lo[i])) p.add_leq(b.lo[i], e[i], tag);
      if (std::isfinite(b.hi[i])) p.add_leq(e[i], b.hi[i], tag);
    }
  };

  // Cross-sections must stay nonempty, otherwise the vertex maps describe no set.
  for (int k = 1; k <= N; ++k) {
    const LinVec q = qvec(k);
    if (tp.variant == TubeVariant::Elementwise) {
      for (int i = 0; i < nx; ++i) p.add_nonneg(q[i] + q[nx + i], "nonempty");
    } else {
      LinExpr sigma;
      for (const LinExpr& e : q) sigma += e;
      p.add_nonneg(sigma, "nonempty");
    }
  }

  for (int k = 0; k < N; ++k) {
    std::vector<LinVec> verts;
    if (k == 0) verts.push_back(conic::constant_vec(traj.x[0]));
    else
      for (const Mat& M : maps) verts.push_back(conic::mul(M, qvec(k)));
    LinVec vk(nu);
    for (int i = 0; i < nu; ++i) vk[i] = sp.v(k * nu + i);
    const LinVec qn = qvec(k + 1);

    for (const LinVec& xh : verts) {
      const LinVec u = conic::add(vk, conic::mul(traj.K[k], xh));
      if (!gamma_relaxed) {
        p.add_weighted_norm(sp.theta(k), affine(Mat::Identity(nx, nx), xh, -cfg.xr), cfg.Q, "stage_state");
        p.add_weighted_norm(sp.chi(k), affine(Mat::Identity(nu, nu), u, -cfg.ur), cfg.R, "stage_input");
      }
      if (k > 0) box_rows(xh, cfg.X, "state_box");
      box_rows(u, cfg.U, "input_box");

      LinVec z;
      if (has_fn)
        for (int idx : model.input_index()) z.push_back(idx < nx ? xh[idx] : u[idx - nx]);
      LinVec g_up, h_up;  // DCNN output upper bounds
      if (net && z.size()) {
        LinVec xi(z.size());
        for (size_t i = 0; i < z.size(); ++i) xi[i] = (1.0 / fn->scale()[i]) * (z[i] - fn->offset()[i]);
        const LinVec t = dcnn_epigraph(p, *net, xi);
        const Mat pos = net->out_theta().cwiseMax(0.0), neg = (-net->out_theta()).cwiseMax(0.0);
        g_up = affine(net->out_phi(), xi, net->out_bias());
        h_up.assign(net->output_dim(), LinExpr());
        if (!t.empty()) {
          g_up = conic::add(g_up, conic::mul(pos, t));
          h_up = conic::mul(neg, t);
        }
      }

      for (int r = 0; r < nq; ++r) {
        LinExpr row = conic::dot(GA.row(r).transpose(), xh) + conic::dot(GB.row(r).transpose(), u) + Gc[r] + wbar[r] -
                      qn[r] - cfg.tube_slack;
        if (!has_fn || GE.row(r).isZero(0)) {
          p.add_nonneg(-row, "dynamics_linear");
          continue;
        }
        const RowSplit& s = splits[r];
        if (!s.concave_zero) {
          const ConcaveLinearization& L = lin[k][r];
          row -= L.value;
          for (size_t i = 0; i < z.size(); ++i) row -= L.grad[i] * (z[i] - L.z0[i]);
        }
        if (s.convex_zero) {
          p.add_nonneg(-row, "dynamics_affine");
        } else if (net) {
          row += conic::dot(s.wg, g_up) + conic::dot(s.wh, h_up);
          p.add_nonneg(-row, "dynamics_dcnn");
        } else {
          p.add_convex(std::make_shared<RowConvex>(fn, s.wg, s.wh), z, row, "dynamics_dc");
        }
      }
    }
  }

  for (const Mat& M : maps) {
    const LinVec xh = conic::mul(M, qvec(N));
    p.add_weighted_norm(sp.theta(N), affine(Mat::Identity(nx, nx), xh, -cfg.xr), term.Q_hat, "terminal_cost");
    box_rows(xh, cfg.X, "state_box");
  }
  if (gamma_relaxed) {
    p.minimize(sp.theta(N));
  } else {
    p.add_leq(sp.theta(N), std::sqrt(term.gamma), "terminal_set");
    sp.s = p.add_variable(conic::VarKind::Scalar, 1, "s");
    LinVec all;
    for (int k = 0; k <= N; ++k) all.push_back(sp.theta(k));
    for (int k = 0; k < N; ++k) all.push_back(sp.chi(k));
    p.add_soc(sp.s(), all, "objective");
    p.minimize(sp.s());
  }
  return sp;
}

SubSolution solve_subproblem(const Subproblem& sp, const MpcConfig& cfg) {
  const conic::Solution sol = conic::solve(sp.problem, cfg.solver);
  SubSolution out;
  out.status = sol.status;
  out.stats = sol.stats;
  out.diagnostic = sol.diagnostic;
  if (!sol.optimal()) return out;
  const int N = cfg.N, nu = cfg.ur.size(), nq = cfg.tube.rows();
  const Vec v = sol.value(sp.v), q = sol.value(sp.q);
  for (int k = 0; k < N; ++k) out.v.push_back(v.segment(k * nu, nu));
  out.q.push_back(Vec());
  for (int k = 1; k <= N; ++k) out.q.push_back(q.segment((k - 1) * nq, nq));
  out.theta = sol.value(sp.theta);
  out.chi = sol.value(sp.chi);
  out.J = sp.relaxed ? out.theta[N] * out.theta[N] : out.theta.squaredNorm() + out.chi.squaredNorm();
  return out;
}

double relaxation_violation(const MpcConfig& cfg, const DcModel& model, const NominalTrajectory& traj,
                            const SubSolution& sol, const Vec& wbar) {
  const Mat G = cfg.tube.gamma();
  const auto maps = cfg.tube.vertex_maps();
  double worst = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < cfg.N; ++k) {
    std::vector<Vec> verts{traj.x[0]};
    if (k > 0) {
      verts.clear();
      for (const Mat& M : maps) verts.push_back(M * sol.q[k]);
    }
    for (const Vec& xh : verts) {
      const Vec u = sol.v[k] + traj.K[k] * xh;
      worst = std::max(worst, (G * model.eval_f(xh, u) + wbar - sol.q[k + 1]).maxCoeff());
    }
  }
  return worst;
}

}  // namespace dctmpc
