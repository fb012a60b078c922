#include <chrono>
#include <cmath>

#include "dctmpc/pvtol.hpp"

namespace dctmpc {

Vec pvtol_vector_field(const Vec& x, const Vec& u, double g) {
  require(x.size() == 4 && u.size() == 2, "pvtol: state has 4 entries and input 2");
  Vec d(4);
  d << x[3], (u[0] + g) * std::sin(x[0]), (u[0] + g) * std::cos(x[0]) - g, u[1];
  return d;
}

Vec pvtol_step(const Vec& x, const Vec& u, double delta, const Vec& w, Integrator integ) {
  Vec next;
  if (integ == Integrator::Euler) {
    next = x + delta * pvtol_vector_field(x, u);
  } else {
    const Vec k1 = pvtol_vector_field(x, u);
    const Vec k2 = pvtol_vector_field(x + 0.5 * delta * k1, u);
    const Vec k3 = pvtol_vector_field(x + 0.5 * delta * k2, u);
    const Vec k4 = pvtol_vector_field(x + delta * k3, u);
    next = x + delta / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
  }
  if (w.size()) {
    require(w.size() == 2, "pvtol_step: disturbance acts on the two velocity rows");
    next.segment(1, 2) += w;
  }
  return next;
}

Vec pvtol_accelerations(const Vec& z) {
  require(z.size() == 2, "pvtol_accelerations: input is (alpha, u1)");
  Vec a(2);
  a << (z[1] + kGravity) * std::sin(z[0]), (z[1] + kGravity) * std::cos(z[0]) - kGravity;
  return a;
}

Box pvtol_fit_box() {
  Vec lo(2), hi(2);
  lo << -3, -10;
  hi << 3, 10;
  return {lo, hi};
}

PvtolSetup PvtolSetup::defaults(double delta) {
  PvtolSetup s;
  s.delta = delta;
  s.Q = Vec((Vec(4) << 10, 1, 1, 1).finished()).asDiagonal();
  s.R = Vec((Vec(2) << 1e-4, 1e-3).finished()).asDiagonal();
  s.dx = (Vec(4) << 3e-2, 1, 1, 1e-1).finished();
  s.du = (Vec(2) << 1, 1).finished();
  s.x0 = (Vec(4) << 0.1, 0, 0, 0).finished();
  const Vec xb = (Vec(4) << 3, 30, 10, 1).finished();
  s.X = Box::symmetric(xb);
  s.U = Box::symmetric(Vec::Constant(2, 10.0));
  s.xr = Vec::Zero(4);
  s.ur = Vec::Zero(2);
  return s;
}

DcModel pvtol_model(const DcFunction& fn, double delta, bool calibrate) {
  require(fn.input_dim() == 2 && fn.output_dim() == 2, "pvtol_model: DC function must map (alpha, u1) to 2 outputs");
  Mat E = Mat::Zero(4, 2);
  E(1, 0) = delta;
  E(2, 1) = delta;
  Mat A = Mat::Identity(4, 4);
  A(0, 3) = delta;
  Mat B = Mat::Zero(4, 2);
  B(3, 1) = delta;
  Vec c = Vec::Zero(4);
  if (calibrate) c = -E * fn.eval_f(Vec::Zero(2));
  return DcModel(4, 2, fn, {0, 4}, E, A, B, c);
}

Dynamics pvtol_dynamics(double delta, Integrator integ) {
  return Dynamics::from_function(4, 2, [delta, integ](const Vec& x, const Vec& u) {
    return pvtol_step(x, u, delta, Vec(), integ);
  });
}

FitOutcome fit_pvtol(const FitConfig& cfg) {
  require(cfg.samples >= 1 && cfg.test >= 1, "fit_pvtol: need training and test samples");
  const auto t0 = std::chrono::steady_clock::now();
  const Box box = pvtol_fit_box();
  SampleSet all = sample_dynamics(pvtol_accelerations, box, cfg.samples + cfg.test, cfg.seed);
  auto [train, test] = split_train_test(all, cfg.test);
  auto [offset, scale] = box_normalization(box);
  const SampleSet ntrain = normalized(train, offset, scale);

  FitOutcome out;
  bool warning = false;
  std::string note;
  switch (cfg.kind) {
    case DcKind::Poly: {
      GramFit gf = fit_gram_ls(ntrain, cfg.degree);
      warning = gf.warning;
      if (gf.warning) note = "design matrix rank " + std::to_string(gf.rank);
      out.fn = DcFunction(split_dc_sdp(gf.basis, gf.F), offset, scale);
      break;
    }
    case DcKind::Dcnn:
      out.fn = DcFunction(train_dcnn(ntrain, cfg.arch, cfg.dcnn, cfg.seed), offset, scale);
      break;
    case DcKind::Rbf:
      out.fn = DcFunction(fit_rbf(ntrain, cfg.rbf_terms, cfg.rbf, cfg.seed, &warning), offset, scale);
      if (warning) note = "rank-deficient kernel matrix";
      break;
  }
  out.report = report_mae(out.fn, test);
  out.report.n_train = train.size();
  out.report.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  out.report.warning = warning;
  out.report.note = note;
  return out;
}

}  // namespace dctmpc
