#pragma once

#include <functional>
#include <limits>

#include "dctmpc/conic.hpp"
#include "dctmpc/dc_core.hpp"
#include "dctmpc/model_io.hpp"

namespace dctmpc {

// Discrete-time map x+ = f(x, u) with its Jacobians.
struct Dynamics {
  int n_x = 0;
  int n_u = 0;
  std::function<Vec(const Vec&, const Vec&)> f;
  std::function<std::pair<Mat, Mat>(const Vec&, const Vec&)> jacobian;

  static Dynamics from_model(const DcModel& m);
  // Jacobians by central differences.
  static Dynamics from_function(int n_x, int n_u, std::function<Vec(const Vec&, const Vec&)> f, double step = 1e-6);
};

struct LdiModel {
  std::vector<Mat> A;
  std::vector<Mat> B;
  Vec xr, ur;
  Vec dx, du;  // validity box half-widths

  int size() const { return static_cast<int>(A.size()); }
  int n_x() const { return static_cast<int>(xr.size()); }
  int n_u() const { return static_cast<int>(ur.size()); }
};

enum class LdiMode { CornerJacobians, UserSupplied };

struct LdiAudit {
  int samples = 0;
  int passed = 0;
  double worst = 0.0;  // largest hull distance relative to 1 + |d|
  Vec worst_x, worst_u;
  bool ok() const { return passed == samples; }
};

struct LdiOptions {
  double inflation = 1.05;
  int audit_samples = 10000;
  double audit_tol = 1e-6;
  unsigned long long seed = 7;
};

// Corner mode: Jacobians of every source at all box corners and at the
// reference, deduplicated and inflated about their mean. User mode: As/Bs
// are used as given. Both are audited against every source; failure throws
// LdiError naming the worst sample.
LdiModel build_ldi(const std::vector<Dynamics>& sources, const Vec& xr, const Vec& ur, const Vec& dx, const Vec& du,
                   LdiMode mode = LdiMode::CornerJacobians, const LdiOptions& opts = {},
                   const std::vector<Mat>& As = {}, const std::vector<Mat>& Bs = {});
LdiAudit audit_ldi(const LdiModel& ldi, const Dynamics& f, int samples, unsigned long long seed, double tol = 1e-6);

// Lawson-Hanson: min |A x - b| subject to x >= 0.
Vec nnls(const Mat& A, const Vec& b, int max_iter = 0);

struct TerminalIngredients {
  Mat K;      // u = K (x - xr) + ur
  Mat Q_hat;
  Mat S;      // Q_hat^{-1}
  double gamma = 0.0;
  double beta = 0.0;
  double alpha = 1.0;
  Vec xr, ur;
  Mat Q, R;
  conic::SolverStats stats;
};

TerminalIngredients compute_terminal(const LdiModel& ldi, const Mat& Q, const Mat& R, double alpha = 1.0,
                                     const conic::SolverOptions& sopts = {});

// Residual of the descent inequality at x with optional additive w:
// |f(x,K(x-xr)+ur)+w-xr|^2_Qhat + |x-xr|^2_Q + |K(x-xr)|^2_R - |x-xr|^2_Qhat.
double descent_residual(const TerminalIngredients& t, const Dynamics& f, const Vec& x, const Vec& w = Vec());
// Uniform samples from the terminal ellipsoid.
std::vector<Vec> sample_terminal_set(const TerminalIngredients& t, int n, unsigned long long seed);

struct DescentAudit {
  int samples = 0;
  double worst_residual = -std::numeric_limits<double>::infinity();
  bool in_state_box = true;
  bool in_input_box = true;
};
DescentAudit audit_descent(const TerminalIngredients& t, const Dynamics& f, int samples, unsigned long long seed,
                           const Box& X = {}, const Box& U = {});

// Sampled bound on the descent residual over the terminal set and the vertices of W.
double estimate_beta(const TerminalIngredients& t, const Dynamics& f, const std::vector<Vec>& w_vertices,
                     int samples, unsigned long long seed, double safety = 1.2);

json to_json(const TerminalIngredients& t);
TerminalIngredients terminal_from_json(const json& j);

}  // namespace dctmpc
