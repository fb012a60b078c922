#pragma once

#include <Eigen/Sparse>
#include <memory>
#include <optional>

#include "dctmpc/common.hpp"

namespace dctmpc::conic {

using SpMat = Eigen::SparseMatrix<double>;

// Affine expression sum_i c_i z_i + constant over the problem's scalar variables.
class LinExpr {
 public:
  LinExpr() = default;
  LinExpr(double c) : constant_(c) {}  // NOLINT: implicit constants are convenient

  static LinExpr term(int index, double coeff) {
    LinExpr e;
    e.terms_.emplace_back(index, coeff);
    return e;
  }

  const std::vector<std::pair<int, double>>& terms() const { return terms_; }
  double constant() const { return constant_; }

  LinExpr& operator+=(const LinExpr& o);
  LinExpr& operator-=(const LinExpr& o);
  LinExpr& operator*=(double s);
  double evaluate(const Vec& z) const;
  // Merges duplicate indices and drops zero coefficients.
  void compress();

 private:
  std::vector<std::pair<int, double>> terms_;
  double constant_ = 0.0;
};

inline LinExpr operator+(LinExpr a, const LinExpr& b) { return a += b; }
inline LinExpr operator-(LinExpr a, const LinExpr& b) { return a -= b; }
inline LinExpr operator*(double s, LinExpr a) { return a *= s; }
inline LinExpr operator*(LinExpr a, double s) { return a *= s; }
inline LinExpr operator-(LinExpr a) { return a *= -1.0; }

using LinVec = std::vector<LinExpr>;
using LinMat = std::vector<std::vector<LinExpr>>;

// sum_i coeffs_i * e_i
LinExpr dot(const Vec& coeffs, const LinVec& e);
// M * e for a dense matrix.
LinVec mul(const Mat& M, const LinVec& e);
LinVec add(const LinVec& a, const LinVec& b);
LinVec constant_vec(const Vec& v);

enum class VarKind { Scalar, Vector, SymMatrix };

struct VariableRef {
  int id = -1;
  VarKind kind = VarKind::Scalar;
  int offset = 0;  // first scalar index
  int size = 0;    // number of scalars
  int rows = 0;    // dimension (vector length or matrix order)

  LinExpr operator()() const;
  LinExpr operator()(int i) const;
  LinExpr operator()(int i, int j) const;
  LinVec vec() const;
  LinMat mat() const;
};

// Smooth convex function of a small input vector.
class SmoothConvexFunction {
 public:
  virtual ~SmoothConvexFunction() = default;
  virtual int input_dim() const = 0;
  virtual double value(const Vec& x, Vec* grad) const = 0;
  virtual Mat hessian(const Vec& x) const = 0;
  virtual std::string describe() const { return "smooth-convex"; }
};

enum class ConstraintKind { Equality, Nonneg, Soc, Psd, Convex };

struct Constraint {
  ConstraintKind kind;
  LinVec exprs;  // Equality/Nonneg: one row each; Soc: (t, args...); Psd: lower triangle column-major; Convex: inputs
  int order = 0;  // Psd matrix order
  std::shared_ptr<const SmoothConvexFunction> fn;
  LinExpr affine;  // Convex: fn(inputs) + affine <= 0
  std::string tag;
};

struct ConeDims {
  int l = 0;
  std::vector<int> q;
  std::vector<int> s;
  int size() const;
  int degree() const;
};

struct NonlinearRow {
  std::shared_ptr<const SmoothConvexFunction> fn;
  SpMat P;  // input_dim x n
  Vec r;
  Eigen::SparseVector<double> a;
  double b = 0.0;
};

// minimize c'x + c0 s.t. A x = b, G x + s = h, s in K, f_i(x) <= 0.
struct StandardForm {
  int n = 0;
  Vec c;
  double c0 = 0.0;
  SpMat A;
  Vec b;
  SpMat G;
  Vec h;
  ConeDims dims;
  std::vector<NonlinearRow> nonlinear;
};

class ConicProblem {
 public:
  VariableRef add_variable(VarKind kind, int dims = 1, const std::string& name = "");
  int num_scalars() const { return n_; }
  const std::vector<VariableRef>& variables() const { return vars_; }
  const std::vector<std::string>& variable_names() const { return names_; }

  void add_equality(const LinExpr& e, const std::string& tag = "");  // e == 0
  void add_nonneg(const LinExpr& e, const std::string& tag = "");    // e >= 0
  void add_leq(const LinExpr& a, const LinExpr& b, const std::string& tag = "") { add_nonneg(b - a, tag); }
  // ||args|| <= t
  void add_soc(const LinExpr& t, const LinVec& args, const std::string& tag = "");
  // ||A z + b|| <= c'z + d over all scalars z in declaration order.
  void add_soc(const Mat& A, const Vec& b, const Vec& c, double d, const std::string& tag = "");
  // ||v||_P <= t, P symmetric PSD (factored here).
  void add_weighted_norm(const LinExpr& t, const LinVec& v, const Mat& P, const std::string& tag = "");
  void add_psd(const LinMat& M, const std::string& tag = "");
  // fn(inputs) + affine <= 0
  void add_convex(std::shared_ptr<const SmoothConvexFunction> fn, const LinVec& inputs, const LinExpr& affine,
                  const std::string& tag = "");
  void minimize(const LinExpr& objective);

  const std::vector<Constraint>& constraints() const { return cons_; }
  const LinExpr& objective() const { return objective_; }
  bool has_nonlinear() const;

  StandardForm to_standard_form() const;

 private:
  void check_expr(const LinExpr& e) const;

  int n_ = 0;
  std::vector<VariableRef> vars_;
  std::vector<std::string> names_;
  std::vector<Constraint> cons_;
  LinExpr objective_;
};

enum class Status { Optimal, Infeasible, Unbounded, NumericalFailure };
const char* status_name(Status s);

struct SolverOptions {
  double feastol = 1e-8;
  double abstol = 1e-8;
  double reltol = 1e-8;
  int max_iters = 100;
  int phase1_max_iters = 80;
  double step_fraction = 0.99;
  double phase1_threshold = 1e-7;
  bool verbose = false;
};

struct SolverStats {
  int iterations = 0;
  int phase1_iterations = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double gap = 0.0;
  double solve_time = 0.0;
  double phase1_value = 0.0;
  int n = 0, m = 0, p = 0;
};

struct Solution {
  Status status = Status::NumericalFailure;
  std::optional<Vec> x;
  double objective = 0.0;
  SolverStats stats;
  std::string diagnostic;

  bool optimal() const { return status == Status::Optimal; }
  double value(const LinExpr& e) const;
  Vec value(const VariableRef& v) const;      // vector or scalar (size 1)
  Mat matrix(const VariableRef& v) const;     // symmetric matrix variables
};

Solution solve(const ConicProblem& problem, const SolverOptions& opts = {});
Solution solve(const StandardForm& sf, const SolverOptions& opts = {});

// Maximum absolute constraint violation of x (cone violations via eigenvalues).
double audit_residuals(const ConicProblem& problem, const Vec& x);

// Debug dump of the builder contents. Nonlinear constraints are stored by
// description only and cannot be rebuilt.
std::string dump(const ConicProblem& problem);
ConicProblem rebuild(const std::string& text);

}  // namespace dctmpc::conic
