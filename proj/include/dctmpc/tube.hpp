#pragma once

#include <functional>

#include "dctmpc/conic.hpp"
#include "dctmpc/dc_core.hpp"
#include "dctmpc/terminal.hpp"

namespace dctmpc {

enum class TubeVariant { Elementwise, Simplex };
const char* variant_name(TubeVariant v);
TubeVariant variant_from_name(const std::string& s);

// Cross-sections {x : Gamma x <= q}.
// Elementwise: Gamma = [I; -I], q = (q2, -q1). Simplex: Gamma = [-I; 1'], q = (alpha, beta).
struct TubeParam {
  TubeVariant variant = TubeVariant::Elementwise;
  int n_x = 0;

  static TubeParam elementwise(int n) { return {TubeVariant::Elementwise, n}; }
  static TubeParam simplex(int n) { return {TubeVariant::Simplex, n}; }

  int rows() const { return variant == TubeVariant::Elementwise ? 2 * n_x : n_x + 1; }
  int num_vertices() const;
  Mat gamma() const;
  // Vertex i equals maps[i] * q.
  std::vector<Mat> vertex_maps() const;
  bool nonempty(const Vec& q, double tol = 0.0) const;
};

std::vector<Vec> vertices(const Vec& q, const TubeParam& p);

// Rowwise max of Gamma w over the vertices of W (+) [-eps, eps].
Vec disturbance_offsets(const TubeParam& p, const std::vector<Vec>& w_vertices, const Vec& eps = Vec());
std::vector<Vec> box_vertices(const Vec& lo, const Vec& hi);

struct NominalTrajectory {
  std::vector<Vec> x;  // N+1
  std::vector<Vec> u;  // N
  std::vector<Vec> v;  // N
  std::vector<Mat> K;  // N

  int N() const { return static_cast<int>(u.size()); }
  // v = u - K x for the current gains.
  void refresh_feedforward();
};

// u_k = v_k + K_k x_k, x_{k+1} = f(x_k, u_k).
NominalTrajectory rollout(const DcModel& model, const Vec& x0, const std::vector<Vec>& v, const std::vector<Mat>& K);

// Backward recursion from P_N over (A_k, B_k).
std::vector<Mat> dp_gains(const std::vector<Mat>& A, const std::vector<Mat>& B, const Mat& Q, const Mat& R,
                          const Mat& P_N);
std::vector<Mat> dp_gains(const DcModel& model, const NominalTrajectory& traj, const Mat& Q, const Mat& R,
                          const Mat& P_N);

// Per Gamma row r, Gamma_r E (g - h) splits into a convex part
// sum wg.g + wh.h and a concave part -(sum lg.g + lh.h), all weights >= 0.
struct RowSplit {
  Vec wg, wh;
  Vec lg, lh;
  bool convex_zero = true;  // no convex DC terms
  bool concave_zero = true;
};
std::vector<RowSplit> row_splits(const DcModel& model, const TubeParam& p);

// First-order under-estimator of the linearized part of one row at z0.
struct ConcaveLinearization {
  Vec z0;
  double value = 0.0;
  Vec grad;
  double operator()(const Vec& z) const { return value + grad.dot(z - z0); }
};
// [k][r] for k = 0..N-1 at (x_k, u_k).
std::vector<std::vector<ConcaveLinearization>> concave_linearizations(const DcModel& model,
                                                                      const NominalTrajectory& traj,
                                                                      const TubeParam& p);
// Value of the linearized part itself (for audits).
double concave_target(const DcModel& model, const RowSplit& s, const Vec& z);

struct MpcConfig {
  int N = 50;
  double delta = 0.5;
  Mat Q, R;
  double tolerance = 1e-4;
  int max_iters = 1;
  double rho = 0.2;
  int backtrack_cap = 50;
  int init_max_iters = 50;
  TubeParam tube;
  Vec xr, ur;
  Box X, U;
  std::vector<Vec> W;  // vertices; empty means {0}
  Vec eps;             // modelling-error half widths; empty means none
  // Allowed excess on each tube-inclusion row. Box tubes wrap under the
  // feedback, so without it the feasible set around a zero-width tube has no interior.
  double tube_slack = 5e-7;
  conic::SolverOptions solver;

  bool disturbed() const;
  void validate(const DcModel& model) const;
};

struct Subproblem {
  conic::ConicProblem problem;
  conic::VariableRef v, q, theta, chi, s;
  bool relaxed = false;
};

// gamma_relaxed replaces theta_N <= sqrt(gamma_hat) by the objective theta_N.
Subproblem build_subproblem(const MpcConfig& cfg, const DcModel& model, const NominalTrajectory& traj,
                            const TerminalIngredients& term, const Vec& wbar, bool gamma_relaxed = false);

struct SubSolution {
  conic::Status status = conic::Status::NumericalFailure;
  std::vector<Vec> v;      // N
  std::vector<Vec> q;      // N+1, q[0] unused (singleton X_0)
  Vec theta, chi;
  double J = 0.0;
  conic::SolverStats stats;
  std::string diagnostic;
  bool ok() const { return status == conic::Status::Optimal; }
};

SubSolution solve_subproblem(const Subproblem& sp, const MpcConfig& cfg);

// Max over k, vertices and rows of Gamma f(x^, v + K x^) + wbar - q_{k+1} under the DC model.
double relaxation_violation(const MpcConfig& cfg, const DcModel& model, const NominalTrajectory& traj,
                            const SubSolution& sol, const Vec& wbar);

struct IterationResult {
  NominalTrajectory linearized;  // trajectory the subproblem was built around, with its gains
  NominalTrajectory updated;
  SubSolution sol;
  double J = 0.0;
  bool ok() const { return sol.ok(); }
};

IterationResult mpc_iteration(const MpcConfig& cfg, const DcModel& model, const TerminalIngredients& term,
                              const NominalTrajectory& traj, const Vec& wbar, bool gamma_relaxed = false);

// Shift with the terminal controller appended. measured == nullptr keeps x_0 = old x_1.
NominalTrajectory advance(const NominalTrajectory& traj, const MpcConfig& cfg, const DcModel& model,
                          const TerminalIngredients& term, const Vec* measured);

struct RestoreResult {
  IterationResult it;
  int steps = 0;
};

// Tries the candidate, then interpolates (x_0, v) toward last_feasible by rho
// until the subproblem solves. Throws RestorationError past the cap.
RestoreResult backtrack_restore(const NominalTrajectory& candidate, const NominalTrajectory& last_feasible,
                                const MpcConfig& cfg, const DcModel& model, const TerminalIngredients& term,
                                const Vec& wbar);

NominalTrajectory find_initial_trajectory(const MpcConfig& cfg, const DcModel& model, const TerminalIngredients& term,
                                          const Vec& x0, std::vector<double>* gammas = nullptr);

using Plant = std::function<Vec(const Vec& x, const Vec& u, int n)>;

struct LogRow {
  int n = 0;
  int j = 0;
  double J = 0.0;
  std::string status;
  int backtracks = 0;
  Vec x, u;
  double solve_time = 0.0;
  int solver_iters = 0;
  double relax_violation = 0.0;
  double max_width = 0.0;
};

struct ClosedLoopLog {
  std::vector<LogRow> rows;
  std::vector<Vec> states;  // T+1
  std::vector<Vec> inputs;  // T
  std::vector<double> J_final;  // last iteration objective per time step
  std::vector<int> restore_steps;  // one entry per infeasibility event
  std::vector<double> init_gammas;
  double init_time = 0.0;

  int infeasible_events() const { return static_cast<int>(restore_steps.size()); }
  void write_csv(const std::string& path) const;
  static ClosedLoopLog read_csv(const std::string& path);
};

struct RunOptions {
  bool audit_relaxation = false;
  bool verbose = false;
};

ClosedLoopLog run_controller(const MpcConfig& cfg, const DcModel& model, const TerminalIngredients& term,
                             const Plant& plant, const Vec& x0, int steps, const RunOptions& opts = {});

}  // namespace dctmpc
