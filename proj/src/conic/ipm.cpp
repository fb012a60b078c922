#include <Eigen/SparseCholesky>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <optional>

#include "cones.hpp"
#include "dctmpc/conic.hpp"

namespace dctmpc::conic {

namespace {

using detail::Layout;
using detail::Op;
using detail::Scaling;
using RowMat = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using Trip = Eigen::Triplet<double>;

struct NlEntry {
  int input;
  int col;
  double val;
};

class InteriorPoint {
 public:
  InteriorPoint(const StandardForm& sf, const SolverOptions& opts) : sf_(sf), opt_(opts) {
    n_ = sf.n;
    p_ = static_cast<int>(sf.A.rows());
    mnl_ = static_cast<int>(sf.nonlinear.size());
    L_ = Layout(mnl_ + sf.dims.l, sf.dims.q, sf.dims.s);
    Grow_ = RowMat(sf.G);
    for (const auto& row : sf.nonlinear) {
      std::vector<NlEntry> ent;
      for (int k = 0; k < row.P.outerSize(); ++k)
        for (SpMat::InnerIterator it(row.P, k); it; ++it)
          ent.push_back({static_cast<int>(it.row()), static_cast<int>(it.col()), it.value()});
      nl_entries_.push_back(std::move(ent));
    }
    hfull_ = Vec::Zero(L_.size);
    hfull_.tail(sf.G.rows()) = sf.h;
  }

  Solution run() {
    auto t0 = std::chrono::steady_clock::now();
    Solution sol;
    sol.stats.n = n_;
    sol.stats.m = L_.size;
    sol.stats.p = p_;
    bool ok = iterate(sol);
    if (!ok && reduced_) {
      // Fall back to the last iterate that met the reduced tolerances.
      sol.diagnostic = "reduced accuracy after " + sol.diagnostic;
      x_ = reduced_->x;
      const int iters = sol.stats.iterations;
      sol.stats = reduced_->stats;
      sol.stats.iterations = iters;
      ok = true;
    }
    sol.stats.solve_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (ok) {
      sol.status = Status::Optimal;
      sol.x = x_;
      sol.objective = sf_.c.dot(x_) + sf_.c0;
    }
    return sol;
  }

  const Vec& x() const { return x_; }
  double pcost() const { return sf_.c.dot(x_) + sf_.c0; }

 private:
  // Nonlinear values f, Jacobian rows and Lagrangian Hessian at x.
  bool eval_nonlinear(const Vec& x, const Vec* znl, Vec& f, std::vector<Trip>* dtrip, std::vector<Trip>* htrip) const {
    f.resize(mnl_);
    for (int i = 0; i < mnl_; ++i) {
      const auto& row = sf_.nonlinear[i];
      Vec in = row.P * x + row.r;
      Vec g;
      double v = row.fn->value(in, dtrip ? &g : nullptr);
      double lin = row.b;
      for (Eigen::SparseVector<double>::InnerIterator it(row.a); it; ++it) lin += it.value() * x[it.index()];
      f[i] = v + lin;
      if (!std::isfinite(f[i])) return false;
      if (dtrip) {
        for (const auto& e : nl_entries_[i]) dtrip->emplace_back(i, e.col, e.val * g[e.input]);
        for (Eigen::SparseVector<double>::InnerIterator it(row.a); it; ++it)
          dtrip->emplace_back(i, static_cast<int>(it.index()), it.value());
      }
      if (htrip && znl && (*znl)[i] != 0.0) {
        Mat H = row.fn->hessian(in);
        const double w = (*znl)[i];
        for (const auto& a : nl_entries_[i])
          for (const auto& b : nl_entries_[i])
            if (a.col >= b.col) htrip->emplace_back(a.col, b.col, w * H(a.input, b.input) * a.val * b.val);
      }
    }
    return true;
  }

  // Scaled residual norms plus the average complementarity.
  double merit(const Vec& x, const Vec& y, const Vec& s, const Vec& z, double bnorm, double hnorm, double cnorm) const {
    Vec f;
    std::vector<Trip> dtrip;
    if (!eval_nonlinear(x, nullptr, f, &dtrip, nullptr)) return std::numeric_limits<double>::infinity();
    const RowMat G = full_G(dtrip);
    Vec rz = G * x + s - hfull_;
    rz.head(mnl_) = f + s.head(mnl_);
    const double rx = (sf_.c + G.transpose() * z + sf_.A.transpose() * y).norm() / cnorm;
    const double ry = p_ ? (sf_.A * x - sf_.b).norm() / bnorm : 0.0;
    return rx + ry + rz.norm() / hnorm + s.dot(z) / std::max(1, L_.degree);
  }

  // Stacked constraint matrix [Df; G] in row-major form.
  RowMat full_G(const std::vector<Trip>& dtrip) const {
    std::vector<Trip> t(dtrip);
    t.reserve(dtrip.size() + Grow_.nonZeros());
    for (int r = 0; r < Grow_.outerSize(); ++r)
      for (RowMat::InnerIterator it(Grow_, r); it; ++it) t.emplace_back(r + mnl_, static_cast<int>(it.col()), it.value());
    RowMat G(L_.size, n_);
    G.setFromTriplets(t.begin(), t.end());
    return G;
  }

  // Gs = W^{-T} G.
  SpMat scaled_G(const RowMat& G, const Scaling& W) const {
    std::vector<Trip> t;
    t.reserve(G.nonZeros() * 2);
    for (int r = 0; r < L_.nonneg; ++r)
      for (RowMat::InnerIterator it(G, r); it; ++it) t.emplace_back(r, static_cast<int>(it.col()), it.value() / W.d[r]);
    auto dense_block = [&](int o, int m, const Mat& op) {
      std::vector<int> cols;
      std::vector<int> pos(n_, -1);
      for (int r = o; r < o + m; ++r)
        for (RowMat::InnerIterator it(G, r); it; ++it)
          if (pos[it.col()] < 0) {
            pos[it.col()] = static_cast<int>(cols.size());
            cols.push_back(static_cast<int>(it.col()));
          }
      Mat B = Mat::Zero(m, cols.size());
      for (int r = o; r < o + m; ++r)
        for (RowMat::InnerIterator it(G, r); it; ++it) B(r - o, pos[it.col()]) += it.value();
      Mat S = op * B;
      for (int i = 0; i < m; ++i)
        for (size_t c = 0; c < cols.size(); ++c)
          if (S(i, c) != 0.0) t.emplace_back(o + i, cols[c], S(i, c));
    };
    for (size_t k = 0; k < L_.q.size(); ++k)
      dense_block(L_.q_off[k], L_.q[k], detail::soc_wit(W.soc[k], L_.q[k]));
    for (size_t k = 0; k < L_.s.size(); ++k)
      dense_block(L_.s_off[k], detail::svec_size(L_.s[k]), detail::psd_wit(W.psd[k], L_.s[k]));
    SpMat Gs(L_.size, n_);
    Gs.setFromTriplets(t.begin(), t.end());
    return Gs;
  }

  bool factor(const SpMat& Gs, const std::vector<Trip>& htrip) {
    // Adding A'A keeps the leading block definite when some variables only enter equalities;
    // kkt_solve applies the matching right-hand-side transformation.
    SpMat M = SpMat(Gs.transpose()) * Gs;
    if (p_ > 0) M += SpMat(sf_.A.transpose()) * sf_.A;
    std::vector<Trip> t;
    t.reserve(M.nonZeros() + htrip.size() + sf_.A.nonZeros() + n_ + p_);
    for (int k = 0; k < M.outerSize(); ++k)
      for (SpMat::InnerIterator it(M, k); it; ++it)
        if (it.row() >= it.col()) t.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
    for (const auto& h : htrip) t.push_back(h);
    for (int k = 0; k < sf_.A.outerSize(); ++k)
      for (SpMat::InnerIterator it(sf_.A, k); it; ++it)
        t.emplace_back(n_ + static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
    for (int i = 0; i < n_; ++i) t.emplace_back(i, i, reg_);
    for (int i = 0; i < p_; ++i) t.emplace_back(n_ + i, n_ + i, -reg_);
    K_.resize(n_ + p_, n_ + p_);
    K_.setFromTriplets(t.begin(), t.end());
    K_.makeCompressed();
    if (!analyzed_ || K_.nonZeros() != pattern_nnz_) {
      ldlt_.analyzePattern(K_);
      analyzed_ = true;
      pattern_nnz_ = K_.nonZeros();
    }
    ldlt_.factorize(K_);
    return ldlt_.info() == Eigen::Success;
  }

  Vec kkt_solve(const Vec& rhs_in) const {
    Vec rhs = rhs_in;
    if (p_ > 0) rhs.head(n_) += sf_.A.transpose() * rhs_in.tail(p_);
    Vec sol = ldlt_.solve(rhs);
    for (int it = 0; it < 5; ++it) {
      Vec Ks = K_.selfadjointView<Eigen::Lower>() * sol;
      Ks.head(n_) -= reg_ * sol.head(n_);
      Ks.tail(p_) += reg_ * sol.tail(p_);
      Vec r = rhs - Ks;
      if (r.lpNorm<Eigen::Infinity>() <= 1e-14 * (1.0 + rhs.lpNorm<Eigen::Infinity>())) break;
      sol += ldlt_.solve(r);
    }
    return sol;
  }

  struct Dir {
    Vec dx, dy, ds, dz;  // ds, dz scaled
  };

  Dir direction(const SpMat& Gs, const Scaling& W, const Vec& rx, const Vec& ry, const Vec& rz, const Vec& rc) const {
    Vec t = detail::jdiv(L_, W.lambda, rc);
    Vec wrz = detail::apply(L_, W, Op::Wit, rz) + t;
    Vec rhs(n_ + p_);
    rhs.head(n_) = -rx - Gs.transpose() * wrz;
    rhs.tail(p_) = -ry;
    Vec sol = kkt_solve(rhs);
    Dir d;
    d.dx = sol.head(n_);
    d.dy = sol.tail(p_);
    d.dz = Gs * d.dx + wrz;
    d.ds = t - d.dz;
    return d;
  }

  void initial_point() {
    x_ = Vec::Zero(n_);
    y_ = Vec::Zero(p_);
    if (p_ > 0) {
      // least-norm point of A x = b
      std::vector<Trip> t;
      for (int i = 0; i < n_; ++i) t.emplace_back(i, i, 1.0);
      for (int k = 0; k < sf_.A.outerSize(); ++k)
        for (SpMat::InnerIterator it(sf_.A, k); it; ++it)
          t.emplace_back(n_ + static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
      for (int i = 0; i < p_; ++i) t.emplace_back(n_ + i, n_ + i, -1e-8);
      SpMat K(n_ + p_, n_ + p_);
      K.setFromTriplets(t.begin(), t.end());
      Eigen::SimplicialLDLT<SpMat, Eigen::Lower> f(K);
      Vec rhs = Vec::Zero(n_ + p_);
      rhs.tail(p_) = sf_.b;
      if (f.info() == Eigen::Success) {
        Vec sol = f.solve(rhs);
        if (sol.allFinite()) x_ = sol.head(n_);
      }
    }
    Vec f;
    if (!eval_nonlinear(x_, nullptr, f, nullptr, nullptr)) x_.setZero();
    eval_nonlinear(x_, nullptr, f, nullptr, nullptr);
    s_.resize(L_.size);
    s_.head(mnl_) = -f;
    s_.tail(sf_.G.rows()) = sf_.h - sf_.G * x_;
    detail::shift_into(L_, s_, 1.0);
    z_ = detail::identity(L_);
  }

  bool iterate(Solution& sol) {
    initial_point();
    const double bnorm = std::max(1.0, sf_.b.norm());
    const double hnorm = std::max(1.0, hfull_.norm());
    const double cnorm = std::max(1.0, sf_.c.norm());
    const Vec e = detail::identity(L_);
    std::vector<double> pres_hist, gap_hist, merit_hist;
    int tiny_steps = 0;
    double best_pres = std::numeric_limits<double>::infinity();
    for (int it = 0; it <= opt_.max_iters; ++it) {
      Vec f;
      std::vector<Trip> dtrip, htrip;
      Vec znl = z_.head(mnl_);
      if (!eval_nonlinear(x_, &znl, f, &dtrip, &htrip)) {
        sol.diagnostic = "nonlinear constraint not finite";
        return false;
      }
      RowMat G = full_G(dtrip);
      Vec rx = sf_.c + G.transpose() * z_ + sf_.A.transpose() * y_;
      Vec ry = sf_.A * x_ - sf_.b;
      Vec rz = G * x_ + s_ - hfull_;
      if (mnl_) rz.head(mnl_) = f + s_.head(mnl_);
      const double gap = s_.dot(z_);
      const double mu = L_.degree ? gap / L_.degree : 0.0;
      const double pcost = sf_.c.dot(x_) + sf_.c0;
      const double pres = std::max(p_ ? ry.norm() / bnorm : 0.0, rz.norm() / hnorm);
      const double dres = rx.norm() / cnorm;
      const double relgap = gap / std::max(1e-12, std::abs(pcost));
      sol.stats.iterations = it;
      sol.stats.primal_residual = pres;
      sol.stats.dual_residual = dres;
      sol.stats.gap = gap;
      if (opt_.verbose)
        std::fprintf(stderr, "%3d pcost % .8e pres %.2e dres %.2e gap %.2e\n", it, pcost, pres, dres, gap);
      if (!std::isfinite(pres) || !std::isfinite(dres) || !std::isfinite(gap)) {
        sol.diagnostic = "non-finite iterate";
        return false;
      }
      if (pres <= opt_.feastol && dres <= opt_.feastol && (gap <= opt_.abstol || relgap <= opt_.reltol)) return true;
      if (pres <= 1e-6 && dres <= 1e-6 && (gap <= 1e-6 || relgap <= 1e-6)) reduced_ = Reduced{x_, sol.stats};
      if (reduced_ && pres > 10.0 * std::max(reduced_->stats.primal_residual, opt_.feastol)) {
        sol.diagnostic = "primal residual growing";
        return false;
      }
      if (it == opt_.max_iters) {
        sol.diagnostic = "iteration limit";
        return false;
      }
      // Stall detection: infeasible problems keep the primal residual from shrinking.
      pres_hist.push_back(pres);
      gap_hist.push_back(gap);
      best_pres = std::min(best_pres, pres);
      if (it >= 25 && pres > opt_.feastol && pres > 0.5 * pres_hist[it - 12] && gap > 0.5 * gap_hist[it - 12]) {
        sol.diagnostic = "stalled primal residual";
        return false;
      }
      if (z_.lpNorm<Eigen::Infinity>() > 1e13) {
        sol.diagnostic = "dual iterates diverging";
        return false;
      }

      Scaling W;
      if (!detail::compute_scaling(L_, s_, z_, W)) {
        sol.diagnostic = "scaling failed (iterate left the cone)";
        return false;
      }
      SpMat Gs = scaled_G(G, W);
      if (!factor(Gs, htrip)) {
        reg_ *= 100.0;
        if (!factor(Gs, htrip)) {
          sol.diagnostic = "KKT factorization failed";
          return false;
        }
      }
      const Vec ll = detail::jprod(L_, W.lambda, W.lambda);
      Dir aff = direction(Gs, W, rx, ry, rz, -ll);
      double a_aff = std::min({1.0, detail::max_step(L_, W.lambda, aff.ds), detail::max_step(L_, W.lambda, aff.dz)});
      const double sigma = std::pow(1.0 - a_aff, 3);
      Vec rc = -ll - detail::jprod(L_, aff.ds, aff.dz) + sigma * mu * e;
      Dir d = direction(Gs, W, rx, ry, rz, rc);
      double alpha = std::min(1.0, opt_.step_fraction *
                                       std::min(detail::max_step(L_, W.lambda, d.ds), detail::max_step(L_, W.lambda, d.dz)));
      if (!(alpha > 0)) alpha = 0;
      const double alpha_cone = alpha;
      if (mnl_) {
        Vec ftrial;
        for (int k = 0; k < 30 && !eval_nonlinear(x_ + alpha * d.dx, nullptr, ftrial, nullptr, nullptr); ++k) alpha *= 0.5;
        // Curved rows can make a long step increase the residuals; backtrack on a merit value.
        // Nonmonotone: compare against the worst of the last few accepted values.
        merit_hist.push_back(merit(x_, y_, s_, z_, bnorm, hnorm, cnorm));
        if (merit_hist.size() > 5) merit_hist.erase(merit_hist.begin());
        const double phi0 = *std::max_element(merit_hist.begin(), merit_hist.end());
        for (int k = 0; k < 12; ++k) {
          const Vec st = detail::apply(L_, W, Op::Wt, W.lambda + alpha * d.ds);
          const Vec zt = detail::apply(L_, W, Op::Winv, W.lambda + alpha * d.dz);
          const double phi = merit(x_ + alpha * d.dx, y_ + alpha * d.dy, st, zt, bnorm, hnorm, cnorm);
          if (std::isfinite(phi) && phi <= (1.0 - 0.01 * alpha) * phi0) break;
          alpha *= 0.5;
        }
      }
      if (opt_.verbose) std::fprintf(stderr, "    step %.3e (cone %.3e) sigma %.3e\n", alpha, alpha_cone, sigma);
      tiny_steps = alpha < 1e-10 ? tiny_steps + 1 : 0;
      if (tiny_steps >= 3) {
        sol.diagnostic = "step length collapsed";
        return false;
      }
      x_ += alpha * d.dx;
      y_ += alpha * d.dy;
      s_ = detail::apply(L_, W, Op::Wt, W.lambda + alpha * d.ds);
      z_ = detail::apply(L_, W, Op::Winv, W.lambda + alpha * d.dz);
    }
    return false;
  }

  const StandardForm& sf_;
  SolverOptions opt_;
  int n_ = 0, p_ = 0, mnl_ = 0;
  Layout L_;
  RowMat Grow_;
  Vec hfull_;
  std::vector<std::vector<NlEntry>> nl_entries_;
  Vec x_, y_, s_, z_;
  struct Reduced {
    Vec x;
    SolverStats stats;
  };
  std::optional<Reduced> reduced_;
  double reg_ = 1e-8;
  SpMat K_;
  Eigen::SimplicialLDLT<SpMat, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt_;
  bool analyzed_ = false;
  Eigen::Index pattern_nnz_ = -1;
};

// Relaxed problem: min tau with every cone and nonlinear row shifted by tau, tau >= -1.
StandardForm phase1_form(const StandardForm& sf) {
  StandardForm p;
  const int n = sf.n;
  p.n = n + 1;
  p.c = Vec::Zero(n + 1);
  p.c[n] = 1.0;
  p.A = SpMat(sf.A.rows(), n + 1);
  {
    std::vector<Trip> t;
    for (int k = 0; k < sf.A.outerSize(); ++k)
      for (SpMat::InnerIterator it(sf.A, k); it; ++it) t.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
    p.A.setFromTriplets(t.begin(), t.end());
  }
  p.b = sf.b;
  p.dims = sf.dims;
  p.dims.l += 1;
  const Layout Lo(sf.dims.l, sf.dims.q, sf.dims.s);
  const Vec e = detail::identity(Lo);
  const int m = static_cast<int>(sf.G.rows());
  std::vector<Trip> t;
  auto shifted = [&](int r) { return r < sf.dims.l ? r : r + 1; };
  for (int k = 0; k < sf.G.outerSize(); ++k)
    for (SpMat::InnerIterator it(sf.G, k); it; ++it)
      t.emplace_back(shifted(static_cast<int>(it.row())), static_cast<int>(it.col()), it.value());
  for (int r = 0; r < m; ++r)
    if (e[r] != 0.0) t.emplace_back(shifted(r), n, -e[r]);
  t.emplace_back(sf.dims.l, n, -1.0);
  p.G = SpMat(m + 1, n + 1);
  p.G.setFromTriplets(t.begin(), t.end());
  p.h = Vec(m + 1);
  for (int r = 0; r < m; ++r) p.h[shifted(r)] = sf.h[r];
  p.h[sf.dims.l] = 1.0;
  for (const auto& row : sf.nonlinear) {
    NonlinearRow nr = row;
    nr.P.conservativeResize(row.P.rows(), n + 1);
    nr.a.conservativeResize(n + 1);
    nr.a.coeffRef(n) = -1.0;
    p.nonlinear.push_back(std::move(nr));
  }
  return p;
}

}  // namespace

Solution solve(const StandardForm& sf, const SolverOptions& opts) {
  Solution sol;
  try {
    SolverOptions ov = opts;
    if (std::getenv("DCTMPC_TRACE")) ov.verbose = true;
    InteriorPoint ipm(sf, ov);
    sol = ipm.run();
    if (sol.optimal()) return sol;
    const Vec xfail = ipm.x();
    const double pfail = ipm.pcost();
    SolverOptions o1 = opts;
    o1.max_iters = opts.phase1_max_iters;
    StandardForm p1 = phase1_form(sf);
    InteriorPoint ph(p1, o1);
    Solution s1 = ph.run();
    sol.stats.phase1_iterations = s1.stats.iterations;
    if (!s1.optimal()) {
      sol.status = Status::NumericalFailure;
      sol.diagnostic += "; phase I failed (" + s1.diagnostic + ")";
      return sol;
    }
    const double tau = (*s1.x)[sf.n];
    sol.stats.phase1_value = tau;
    if (tau > opts.phase1_threshold) {
      sol.status = Status::Infeasible;
      sol.diagnostic += "; phase I optimum " + std::to_string(tau);
    } else if (pfail < -1e10 || xfail.lpNorm<Eigen::Infinity>() > 1e10) {
      sol.status = Status::Unbounded;
    } else {
      sol.status = Status::NumericalFailure;
      sol.diagnostic += "; phase I found a feasible point";
    }
  } catch (const std::exception& e) {
    sol.status = Status::NumericalFailure;
    sol.x.reset();
    sol.diagnostic = std::string("backend exception: ") + e.what();
  }
  return sol;
}

Solution solve(const ConicProblem& problem, const SolverOptions& opts) { return solve(problem.to_standard_form(), opts); }

}  // namespace dctmpc::conic
