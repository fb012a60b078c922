#pragma once

#include "dctmpc/dc_fit.hpp"
#include "dctmpc/terminal.hpp"
#include "dctmpc/tube.hpp"

namespace dctmpc {

constexpr double kGravity = 9.81;

enum class Integrator { Euler, Rk4 };

// State (alpha, ydot, zdot, alphadot), input (u1, u2).
Vec pvtol_vector_field(const Vec& x, const Vec& u, double g = kGravity);
// One discretization step plus w on the velocity rows (w has 2 entries, or is empty).
Vec pvtol_step(const Vec& x, const Vec& u, double delta, const Vec& w = Vec(), Integrator integ = Integrator::Euler);
// (yddot, zddot) as a function of (alpha, u1): the nonlinear part that gets a DC model.
Vec pvtol_accelerations(const Vec& alpha_u1);
Box pvtol_fit_box();

struct PvtolSetup {
  double delta = 0.5;
  Mat Q, R;
  Vec dx, du;  // terminal validity box
  Vec x0;
  Box X, U;
  Vec xr, ur;

  static PvtolSetup defaults(double delta = 0.5);
};

// Euler model with the DC function on the velocity rows and the rest linear.
// With calibrate, a constant residual makes the origin an exact equilibrium.
DcModel pvtol_model(const DcFunction& fn, double delta, bool calibrate = true);
Dynamics pvtol_dynamics(double delta, Integrator integ = Integrator::Euler);

struct FitConfig {
  DcKind kind = DcKind::Poly;
  int samples = 100000;
  int test = 100;
  int degree = 6;
  DcnnArch arch;
  TrainHyper dcnn;
  int rbf_terms = 49;
  RbfOptions rbf;
  unsigned long long seed = 1;
};

struct FitOutcome {
  DcFunction fn;
  FitReport report;
};

FitOutcome fit_pvtol(const FitConfig& cfg);

struct ExperimentConfig {
  std::string name = "run";
  DcKind kind = DcKind::Poly;
  TubeVariant tube = TubeVariant::Elementwise;
  int N = 50;
  double delta = 0.5;
  int max_iters = 1;
  double tolerance = 1e-4;
  int steps = 60;
  double disturbance = 0.0;    // plant sees U(-d, d) on the velocity rows
  double controller_w = 0.0;   // half width of W the controller plans with; < 0 means same as disturbance
  bool model_error = false;    // add a sampled modelling-error box to W
  double rho = 0.2;
  double alpha = 1.0;          // terminal design trade-off
  std::string plant = "model";  // "model" or "true"
  Integrator integrator = Integrator::Euler;
  unsigned long long seed = 1;
  std::string model_path;       // load if present, otherwise fit and save
  std::string output_dir;       // logs and summary; empty disables writing
  bool audit_relaxation = false;
  bool verbose = false;
  FitConfig fit;
};

json to_json(const ExperimentConfig& c);
ExperimentConfig experiment_from_json(const json& j);

MpcConfig pvtol_mpc_config(const ExperimentConfig& cfg, const PvtolSetup& s);
// LDI over both the DC model and the true dynamics, then the terminal SDP.
TerminalIngredients pvtol_terminal(const DcModel& model, const PvtolSetup& s, double alpha,
                                   Integrator integ = Integrator::Euler, int audit_samples = 10000);

struct ExperimentResult {
  DcModel model;
  std::optional<FitReport> fit;
  TerminalIngredients term;
  ClosedLoopLog log;
  json summary;
};

// Loads or fits the model, designs the terminal ingredients (unless given), and runs the loop.
ExperimentResult run_experiment(const ExperimentConfig& cfg, const DcModel* model = nullptr,
                                const TerminalIngredients* term = nullptr);
DcModel obtain_model(const ExperimentConfig& cfg, std::optional<FitReport>* report = nullptr);

json summarize(const ClosedLoopLog& log, const PvtolSetup& s);

struct TimingRow {
  std::string kind;
  int N = 0;
  double mean = 0.0;
  double stddev = 0.0;
  int count = 0;
};

// Per-iteration solve time for each horizon, over `steps` closed-loop steps.
std::vector<TimingRow> timing_sweep(const ExperimentConfig& base, const std::vector<int>& horizons, const DcModel& model,
                                    const TerminalIngredients& term);
double spearman(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace dctmpc
