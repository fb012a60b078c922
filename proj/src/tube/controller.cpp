#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "dctmpc/tube.hpp"

namespace dctmpc {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Vec clamp(const Vec& u, const Box& b) {
  if (b.dim() == 0) return u;
  return u.cwiseMax(b.lo).cwiseMin(b.hi);
}

double tube_width(const SubSolution& sol, const TubeParam& tp) {
  double w = 0.0;
  for (size_t k = 1; k < sol.q.size(); ++k) {
    const Vec& q = sol.q[k];
    if (tp.variant == TubeVariant::Elementwise) w = std::max(w, (q.head(tp.n_x) + q.tail(tp.n_x)).maxCoeff());
    else w = std::max(w, q[tp.n_x] + q.head(tp.n_x).sum());
  }
  return w;
}

double terminal_distance(const TerminalIngredients& term, const Vec& x) {
  const Vec e = x - term.xr;
  return e.dot(term.Q_hat * e);
}

}  // namespace

IterationResult mpc_iteration(const MpcConfig& cfg, const DcModel& model, const TerminalIngredients& term,
                              const NominalTrajectory& traj, const Vec& wbar, bool gamma_relaxed) {
  IterationResult res;
  res.linearized = traj;
  res.linearized.K = dp_gains(model, traj, cfg.Q, cfg.R, term.Q_hat);
  res.linearized.refresh_feedforward();
  const Subproblem sp = build_subproblem(cfg, model, res.linearized, term, wbar, gamma_relaxed);
  res.sol = solve_subproblem(sp, cfg);
  if (res.ok()) {
    res.updated = rollout(model, res.linearized.x[0], res.sol.v, res.linearized.K);
    res.J = res.sol.J;
  }
  return res;
}

NominalTrajectory advance(const NominalTrajectory& traj, const MpcConfig& cfg, const DcModel& model,
                          const TerminalIngredients& term, const Vec* measured) {
  const int N = traj.N();
  require(N >= 1 && static_cast<int>(traj.K.size()) == N, "advance: incomplete trajectory");
  NominalTrajectory t;
  t.x.push_back(measured ? *measured : traj.x[1]);
  // Tube policy u = v + K x, so a measured deviation is fed back rather than replayed open loop.
  for (int k = 0; k < N - 1; ++k) {
    t.u.push_back(traj.u[k + 1] + traj.K[k + 1] * (t.x[k] - traj.x[k + 1]));
    t.K.push_back(traj.K[k + 1]);
    t.x.push_back(model.eval_f(t.x[k], t.u[k]));
  }
  t.u.push_back(term.K * (t.x[N - 1] - cfg.xr) + cfg.ur);
  t.K.push_back(term.K);
  t.x.push_back(model.eval_f(t.x[N - 1], t.u[N - 1]));
  t.refresh_feedforward();
  return t;
}

RestoreResult backtrack_restore(const NominalTrajectory& candidate, const NominalTrajectory& last_feasible,
                                const MpcConfig& cfg, const DcModel& model, const TerminalIngredients& term,
                                const Vec& wbar) {
  RestoreResult rr;
  rr.it = mpc_iteration(cfg, model, term, candidate, wbar);
  if (rr.it.ok()) return rr;

  const int N = candidate.N();
  const std::vector<Mat>& Kb = last_feasible.K;
  std::vector<Vec> vbar(N), vc(N);
  double gap = (candidate.x[0] - last_feasible.x[0]).norm();
  for (int k = 0; k < N; ++k) {
    vbar[k] = last_feasible.u[k] - Kb[k] * last_feasible.x[k];
    vc[k] = candidate.u[k] - Kb[k] * candidate.x[k];
    gap += (vc[k] - vbar[k]).norm();
  }
  if (gap == 0.0)
    throw RestorationError(std::string("subproblem ") + conic::status_name(rr.it.sol.status) +
                           " at the last feasible trajectory itself");
  double factor = 1.0;
  for (int i = 1; i <= cfg.backtrack_cap; ++i) {
    factor *= cfg.rho;
    const Vec x0 = last_feasible.x[0] + factor * (candidate.x[0] - last_feasible.x[0]);
    std::vector<Vec> v(N);
    for (int k = 0; k < N; ++k) v[k] = vbar[k] + factor * (vc[k] - vbar[k]);
    rr.it = mpc_iteration(cfg, model, term, rollout(model, x0, v, Kb), wbar);
    if (rr.it.ok()) {
      rr.steps = i;
      return rr;
    }
  }
  throw RestorationError("backtracking did not restore feasibility within " + std::to_string(cfg.backtrack_cap) +
                         " interpolation steps");
}

NominalTrajectory find_initial_trajectory(const MpcConfig& cfg, const DcModel& model, const TerminalIngredients& term,
                                          const Vec& x0, std::vector<double>* gammas) {
  cfg.validate(model);
  if (!cfg.X.contains(x0, 1e-9)) throw InitializationError("initial state lies outside the state constraints");
  const int N = cfg.N, nx = model.n_x(), nu = model.n_u();
  const Vec wbar = disturbance_offsets(cfg.tube, cfg.W, cfg.eps);

  // Warm start: terminal controller, falling back to the constant reference input.
  NominalTrajectory traj;
  bool found = false;
  for (int policy = 0; policy < 2 && !found; ++policy) {
    traj = NominalTrajectory{};
    traj.x.push_back(x0);
    bool ok = true;
    for (int k = 0; k < N; ++k) {
      const Vec u = clamp(policy == 0 ? Vec(term.K * (traj.x[k] - cfg.xr) + cfg.ur) : cfg.ur, cfg.U);
      traj.u.push_back(u);
      traj.K.push_back(Mat::Zero(nu, nx));
      traj.x.push_back(model.eval_f(traj.x[k], u));
      if (!traj.x.back().allFinite() || !cfg.X.contains(traj.x.back(), 1e-9)) {
        ok = false;
        break;
      }
    }
    found = ok;
  }
  if (!found) throw InitializationError("no warm start satisfies the state constraints");
  traj.refresh_feedforward();

  double gamma = terminal_distance(term, traj.x[N]);
  if (gammas) gammas->push_back(gamma);
  for (int it = 0; gamma > term.gamma; ++it) {
    if (it >= cfg.init_max_iters)
      throw InitializationError("terminal constraint not reached after " + std::to_string(it) +
                                " relaxed iterations (gamma " + std::to_string(gamma) + ")");
    IterationResult r = mpc_iteration(cfg, model, term, traj, wbar, true);
    if (!r.ok())
      throw InitializationError(std::string("relaxed initialization subproblem ") + conic::status_name(r.sol.status));
    traj = r.updated;
    gamma = terminal_distance(term, traj.x[N]);
    if (gammas) gammas->push_back(gamma);
  }
  return traj;
}

ClosedLoopLog run_controller(const MpcConfig& cfg, const DcModel& model, const TerminalIngredients& term,
                             const Plant& plant, const Vec& x0, int steps, const RunOptions& opts) {
  cfg.validate(model);
  const Vec wbar = disturbance_offsets(cfg.tube, cfg.W, cfg.eps);
  // With a single iteration under disturbance the reset to the measured state is skipped.
  const bool reset = !(cfg.disturbed() && cfg.max_iters == 1);
  ClosedLoopLog log;
  const auto t_init = std::chrono::steady_clock::now();
  NominalTrajectory prev = find_initial_trajectory(cfg, model, term, x0, &log.init_gammas);
  log.init_time = seconds_since(t_init);

  Vec x = x0;
  log.states.push_back(x);
  for (int n = 0; n < steps; ++n) {
    NominalTrajectory fallback = n == 0 ? prev : advance(prev, cfg, model, term, nullptr);
    NominalTrajectory current = (n > 0 && reset) ? advance(prev, cfg, model, term, &x) : fallback;
    const size_t first_row = log.rows.size();
    double J_prev = std::numeric_limits<double>::infinity();
    for (int j = 0; j < cfg.max_iters; ++j) {
      RestoreResult rr;
      if (n == 0 && j == 0) {
        rr.it = mpc_iteration(cfg, model, term, current, wbar);
        if (!rr.it.ok())
          throw SetupError(std::string("first MPC subproblem ") + conic::status_name(rr.it.sol.status) + " (" +
                           rr.it.sol.diagnostic + ")");
      } else {
        rr = backtrack_restore(current, fallback, cfg, model, term, wbar);
      }
      if (rr.steps > 0) log.restore_steps.push_back(rr.steps);
      LogRow row;
      row.n = n;
      row.j = j;
      row.J = rr.it.J;
      row.status = conic::status_name(rr.it.sol.status);
      row.backtracks = rr.steps;
      row.solve_time = rr.it.sol.stats.solve_time;
      row.solver_iters = rr.it.sol.stats.iterations;
      row.max_width = tube_width(rr.it.sol, cfg.tube);
      if (opts.audit_relaxation) row.relax_violation = relaxation_violation(cfg, model, rr.it.linearized, rr.it.sol, wbar);
      log.rows.push_back(row);
      if (opts.verbose)
        std::cerr << "n=" << n << " j=" << j << " J=" << rr.it.J << " width=" << row.max_width
                  << " backtracks=" << rr.steps << " t=" << row.solve_time << "s\n";
      fallback = rr.it.linearized;
      current = rr.it.updated;
      const double dJ = std::abs(J_prev - rr.it.J);
      J_prev = rr.it.J;
      if (dJ <= cfg.tolerance) break;
    }
    log.J_final.push_back(J_prev);
    prev = current;
    const Vec u = clamp(current.u[0] + current.K[0] * (x - current.x[0]), cfg.U);
    for (size_t r = first_row; r < log.rows.size(); ++r) {
      log.rows[r].x = x;
      log.rows[r].u = u;
    }
    log.inputs.push_back(u);
    x = plant(x, u, n);
    log.states.push_back(x);
  }
  return log;
}

void ClosedLoopLog::write_csv(const std::string& path) const {
  std::ofstream f(path);
  if (!f) throw DataError("cannot write " + path);
  const int nx = rows.empty() ? 0 : static_cast<int>(rows[0].x.size());
  const int nu = rows.empty() ? 0 : static_cast<int>(rows[0].u.size());
  f << "n,j,J,status,backtracks";
  for (int i = 0; i < nx; ++i) f << ",x[" << i << "]";
  for (int i = 0; i < nu; ++i) f << ",u[" << i << "]";
  f << ",solve_time,solver_iters,relax_violation,max_width\n";
  f << std::setprecision(17);
  for (const LogRow& r : rows) {
    f << r.n << ',' << r.j << ',' << r.J << ',' << r.status << ',' << r.backtracks;
    for (int i = 0; i < nx; ++i) f << ',' << r.x[i];
    for (int i = 0; i < nu; ++i) f << ',' << r.u[i];
    f << ',' << r.solve_time << ',' << r.solver_iters << ',' << r.relax_violation << ',' << r.max_width << '\n';
  }
}

ClosedLoopLog ClosedLoopLog::read_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot read " + path);
  std::string line;
  std::getline(f, line);
  int nx = 0, nu = 0;
  {
    std::stringstream hs(line);
    std::string col;
    while (std::getline(hs, col, ',')) {
      if (col.rfind("x[", 0) == 0) ++nx;
      if (col.rfind("u[", 0) == 0) ++nu;
    }
  }
  ClosedLoopLog log;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::vector<std::string> c;
    std::string cell;
    while (std::getline(ss, cell, ',')) c.push_back(cell);
    if (static_cast<int>(c.size()) != 9 + nx + nu) throw DataError("malformed log row: " + line);
    LogRow r;
    r.n = std::stoi(c[0]);
    r.j = std::stoi(c[1]);
    r.J = std::stod(c[2]);
    r.status = c[3];
    r.backtracks = std::stoi(c[4]);
    r.x.resize(nx);
    r.u.resize(nu);
    for (int i = 0; i < nx; ++i) r.x[i] = std::stod(c[5 + i]);
    for (int i = 0; i < nu; ++i) r.u[i] = std::stod(c[5 + nx + i]);
    r.solve_time = std::stod(c[5 + nx + nu]);
    r.solver_iters = std::stoi(c[6 + nx + nu]);
    r.relax_violation = std::stod(c[7 + nx + nu]);
    r.max_width = std::stod(c[8 + nx + nu]);
    if (r.backtracks > 0) log.restore_steps.push_back(r.backtracks);
    if (log.rows.empty() || log.rows.back().n != r.n) {
      log.states.push_back(r.x);
      log.inputs.push_back(r.u);
      log.J_final.push_back(r.J);
    } else {
      log.J_final.back() = r.J;
    }
    log.rows.push_back(r);
  }
  return log;
}

}  // namespace dctmpc
