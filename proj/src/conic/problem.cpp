#include <algorithm>
#include <cmath>

#include "dctmpc/conic.hpp"

namespace dctmpc::conic {

LinExpr& LinExpr::operator+=(const LinExpr& o) {
  terms_.insert(terms_.end(), o.terms_.begin(), o.terms_.end());
  constant_ += o.constant_;
  return *this;
}

LinExpr& LinExpr::operator-=(const LinExpr& o) {
  for (const auto& [i, c] : o.terms_) terms_.emplace_back(i, -c);
  constant_ -= o.constant_;
  return *this;
}

LinExpr& LinExpr::operator*=(double s) {
  for (auto& t : terms_) t.second *= s;
  constant_ *= s;
  return *this;
}

double LinExpr::evaluate(const Vec& z) const {
  double v = constant_;
  for (const auto& [i, c] : terms_) v += c * z[i];
  return v;
}

void LinExpr::compress() {
  std::sort(terms_.begin(), terms_.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<std::pair<int, double>> out;
  for (const auto& t : terms_) {
    if (!out.empty() && out.back().first == t.first) out.back().second += t.second;
    else out.push_back(t);
  }
  out.erase(std::remove_if(out.begin(), out.end(), [](const auto& t) { return t.second == 0.0; }), out.end());
  terms_ = std::move(out);
}

LinExpr dot(const Vec& coeffs, const LinVec& e) {
  require(coeffs.size() == static_cast<Eigen::Index>(e.size()), "dot: size mismatch");
  LinExpr out;
  for (size_t i = 0; i < e.size(); ++i)
    if (coeffs[i] != 0.0) out += coeffs[i] * e[i];
  return out;
}

LinVec mul(const Mat& M, const LinVec& e) {
  require(M.cols() == static_cast<Eigen::Index>(e.size()), "mul: size mismatch");
  LinVec out(M.rows());
  for (Eigen::Index i = 0; i < M.rows(); ++i) out[i] = dot(M.row(i).transpose(), e);
  return out;
}

LinVec add(const LinVec& a, const LinVec& b) {
  require(a.size() == b.size(), "add: size mismatch");
  LinVec out(a.size());
  for (size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

LinVec constant_vec(const Vec& v) {
  LinVec out(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) out[i] = LinExpr(v[i]);
  return out;
}

LinExpr VariableRef::operator()() const {
  require(size == 1, "VariableRef: not a scalar");
  return LinExpr::term(offset, 1.0);
}

LinExpr VariableRef::operator()(int i) const {
  require(kind != VarKind::SymMatrix && i >= 0 && i < size, "VariableRef: index out of range");
  return LinExpr::term(offset + i, 1.0);
}

LinExpr VariableRef::operator()(int i, int j) const {
  require(kind == VarKind::SymMatrix && i >= 0 && j >= 0 && i < rows && j < rows, "VariableRef: bad matrix index");
  if (i > j) std::swap(i, j);
  // upper triangle, row by row
  const int idx = i * rows - i * (i - 1) / 2 + (j - i);
  return LinExpr::term(offset + idx, 1.0);
}

LinVec VariableRef::vec() const {
  LinVec out;
  for (int i = 0; i < size; ++i) out.push_back(LinExpr::term(offset + i, 1.0));
  return out;
}

LinMat VariableRef::mat() const {
  LinMat M(rows, LinVec(rows));
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < rows; ++j) M[i][j] = (*this)(i, j);
  return M;
}

int ConeDims::size() const {
  int m = l;
  for (int k : q) m += k;
  for (int k : s) m += k * (k + 1) / 2;
  return m;
}

int ConeDims::degree() const {
  int d = l + static_cast<int>(q.size());
  for (int k : s) d += k;
  return d;
}

VariableRef ConicProblem::add_variable(VarKind kind, int dims, const std::string& name) {
  if (dims <= 0) throw ArgumentError("add_variable: dimension must be positive");
  VariableRef v;
  v.id = static_cast<int>(vars_.size());
  v.kind = kind;
  v.offset = n_;
  v.rows = kind == VarKind::Scalar ? 1 : dims;
  if (kind == VarKind::Scalar && dims != 1) throw ArgumentError("add_variable: scalar has dimension 1");
  v.size = kind == VarKind::SymMatrix ? dims * (dims + 1) / 2 : v.rows;
  n_ += v.size;
  vars_.push_back(v);
  names_.push_back(name.empty() ? "v" + std::to_string(v.id) : name);
  return v;
}

void ConicProblem::check_expr(const LinExpr& e) const {
  for (const auto& t : e.terms())
    if (t.first < 0 || t.first >= n_) throw ArgumentError("constraint references an undeclared variable");
}

void ConicProblem::add_equality(const LinExpr& e, const std::string& tag) {
  check_expr(e);
  Constraint c{ConstraintKind::Equality, {e}, 0, nullptr, {}, tag};
  c.exprs[0].compress();
  cons_.push_back(std::move(c));
}

void ConicProblem::add_nonneg(const LinExpr& e, const std::string& tag) {
  check_expr(e);
  Constraint c{ConstraintKind::Nonneg, {e}, 0, nullptr, {}, tag};
  c.exprs[0].compress();
  cons_.push_back(std::move(c));
}

void ConicProblem::add_soc(const LinExpr& t, const LinVec& args, const std::string& tag) {
  Constraint c{ConstraintKind::Soc, {t}, 0, nullptr, {}, tag};
  c.exprs.insert(c.exprs.end(), args.begin(), args.end());
  for (auto& e : c.exprs) {
    check_expr(e);
    e.compress();
  }
  cons_.push_back(std::move(c));
}

void ConicProblem::add_soc(const Mat& A, const Vec& b, const Vec& c, double d, const std::string& tag) {
  require(A.cols() == n_ && c.size() == n_ && b.size() == A.rows(), "add_soc: dimension mismatch");
  LinVec z;
  for (int i = 0; i < n_; ++i) z.push_back(LinExpr::term(i, 1.0));
  LinVec args = add(mul(A, z), constant_vec(b));
  add_soc(dot(c, z) + LinExpr(d), args, tag);
}

void ConicProblem::add_weighted_norm(const LinExpr& t, const LinVec& v, const Mat& P, const std::string& tag) {
  require(P.rows() == P.cols() && P.rows() == static_cast<Eigen::Index>(v.size()),
          "add_weighted_norm: weight size mismatch");
  if ((P - P.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + P.cwiseAbs().maxCoeff()))
    throw ArgumentError("add_weighted_norm: weight is not symmetric");
  Eigen::LDLT<Mat> ldlt(P);
  const Vec D = ldlt.vectorD();
  const double scale = std::max(1.0, D.cwiseAbs().maxCoeff());
  if (ldlt.info() != Eigen::Success || D.minCoeff() < -1e-12 * scale)
    throw ArgumentError("add_weighted_norm: weight is not positive semidefinite");
  // P = T' L D L' T, so ||v||_P = ||D^1/2 L' T v||.
  Mat Lt = ldlt.matrixU();
  Mat F = D.cwiseMax(0.0).cwiseSqrt().asDiagonal() * Lt * (ldlt.transpositionsP() * Mat::Identity(P.rows(), P.cols()));
  LinVec args;
  for (Eigen::Index i = 0; i < F.rows(); ++i)
    if (D[i] > 1e-14 * scale) args.push_back(dot(F.row(i).transpose(), v));
  add_soc(t, args, tag);
}

void ConicProblem::add_psd(const LinMat& M, const std::string& tag) {
  const size_t p = M.size();
  if (p == 0) throw ArgumentError("add_psd: empty matrix");
  for (const auto& row : M)
    if (row.size() != p) throw ArgumentError("add_psd: matrix is not square");
  Constraint c{ConstraintKind::Psd, {}, static_cast<int>(p), nullptr, {}, tag};
  for (size_t j = 0; j < p; ++j)
    for (size_t i = j; i < p; ++i) {
      LinExpr a = M[i][j], b = M[j][i];
      check_expr(a);
      a.compress();
      LinExpr d = a - b;
      d.compress();
      double worst = std::abs(d.constant());
      for (const auto& t : d.terms()) worst = std::max(worst, std::abs(t.second));
      if (worst > 1e-12) throw ArgumentError("add_psd: expression is not symmetric");
      c.exprs.push_back(a);
    }
  cons_.push_back(std::move(c));
}

void ConicProblem::add_convex(std::shared_ptr<const SmoothConvexFunction> fn, const LinVec& inputs,
                              const LinExpr& affine, const std::string& tag) {
  require(fn && fn->input_dim() == static_cast<int>(inputs.size()), "add_convex: input size mismatch");
  Constraint c{ConstraintKind::Convex, inputs, 0, std::move(fn), affine, tag};
  for (auto& e : c.exprs) {
    check_expr(e);
    e.compress();
  }
  check_expr(c.affine);
  c.affine.compress();
  cons_.push_back(std::move(c));
}

void ConicProblem::minimize(const LinExpr& objective) {
  check_expr(objective);
  objective_ = objective;
  objective_.compress();
}

bool ConicProblem::has_nonlinear() const {
  return std::any_of(cons_.begin(), cons_.end(), [](const auto& c) { return c.kind == ConstraintKind::Convex; });
}

StandardForm ConicProblem::to_standard_form() const {
  StandardForm sf;
  sf.n = n_;
  sf.c = Vec::Zero(n_);
  for (const auto& [i, v] : objective_.terms()) sf.c[i] += v;
  sf.c0 = objective_.constant();

  std::vector<Eigen::Triplet<double>> at, gt;
  std::vector<double> b, h;
  auto push_cone_row = [&](const LinExpr& e, double scale) {
    const int row = static_cast<int>(h.size());
    for (const auto& [i, v] : e.terms()) gt.emplace_back(row, i, -scale * v);
    h.push_back(scale * e.constant());
  };
  for (const auto& c : cons_) {
    if (c.kind == ConstraintKind::Equality) {
      const int row = static_cast<int>(b.size());
      for (const auto& [i, v] : c.exprs[0].terms()) at.emplace_back(row, i, v);
      b.push_back(-c.exprs[0].constant());
    } else if (c.kind == ConstraintKind::Nonneg) {
      push_cone_row(c.exprs[0], 1.0);
      ++sf.dims.l;
    }
  }
  for (const auto& c : cons_) {
    if (c.kind != ConstraintKind::Soc) continue;
    for (const auto& e : c.exprs) push_cone_row(e, 1.0);
    sf.dims.q.push_back(static_cast<int>(c.exprs.size()));
  }
  const double r2 = std::sqrt(2.0);
  for (const auto& c : cons_) {
    if (c.kind != ConstraintKind::Psd) continue;
    size_t k = 0;
    for (int j = 0; j < c.order; ++j)
      for (int i = j; i < c.order; ++i) push_cone_row(c.exprs[k++], i == j ? 1.0 : r2);
    sf.dims.s.push_back(c.order);
  }
  for (const auto& c : cons_) {
    if (c.kind != ConstraintKind::Convex) continue;
    NonlinearRow row;
    row.fn = c.fn;
    std::vector<Eigen::Triplet<double>> pt;
    row.r = Vec::Zero(c.exprs.size());
    for (size_t k = 0; k < c.exprs.size(); ++k) {
      for (const auto& [i, v] : c.exprs[k].terms()) pt.emplace_back(static_cast<int>(k), i, v);
      row.r[k] = c.exprs[k].constant();
    }
    row.P.resize(static_cast<int>(c.exprs.size()), n_);
    row.P.setFromTriplets(pt.begin(), pt.end());
    row.a.resize(n_);
    for (const auto& [i, v] : c.affine.terms()) row.a.coeffRef(i) += v;
    row.b = c.affine.constant();
    sf.nonlinear.push_back(std::move(row));
  }
  sf.A.resize(static_cast<int>(b.size()), n_);
  sf.A.setFromTriplets(at.begin(), at.end());
  sf.b = Eigen::Map<Vec>(b.data(), static_cast<Eigen::Index>(b.size()));
  sf.G.resize(static_cast<int>(h.size()), n_);
  sf.G.setFromTriplets(gt.begin(), gt.end());
  sf.h = Eigen::Map<Vec>(h.data(), static_cast<Eigen::Index>(h.size()));
  return sf;
}

const char* status_name(Status s) {
  switch (s) {
    case Status::Optimal: return "optimal";
    case Status::Infeasible: return "infeasible";
    case Status::Unbounded: return "unbounded";
    case Status::NumericalFailure: return "numerical_failure";
  }
  return "?";
}

double Solution::value(const LinExpr& e) const {
  if (!x) throw SolverError("Solution: no primal values (status " + std::string(status_name(status)) + ")");
  return e.evaluate(*x);
}

Vec Solution::value(const VariableRef& v) const {
  if (!x) throw SolverError("Solution: no primal values (status " + std::string(status_name(status)) + ")");
  return x->segment(v.offset, v.size);
}

Mat Solution::matrix(const VariableRef& v) const {
  require(v.kind == VarKind::SymMatrix, "Solution::matrix: not a matrix variable");
  Mat M(v.rows, v.rows);
  for (int i = 0; i < v.rows; ++i)
    for (int j = 0; j < v.rows; ++j) M(i, j) = value(v(i, j));
  return M;
}

double audit_residuals(const ConicProblem& problem, const Vec& x) {
  double worst = 0.0;
  for (const auto& c : problem.constraints()) {
    switch (c.kind) {
      case ConstraintKind::Equality: worst = std::max(worst, std::abs(c.exprs[0].evaluate(x))); break;
      case ConstraintKind::Nonneg: worst = std::max(worst, -c.exprs[0].evaluate(x)); break;
      case ConstraintKind::Soc: {
        double s = 0.0;
        for (size_t k = 1; k < c.exprs.size(); ++k) s += std::pow(c.exprs[k].evaluate(x), 2);
        worst = std::max(worst, std::sqrt(s) - c.exprs[0].evaluate(x));
        break;
      }
      case ConstraintKind::Psd: {
        Mat M(c.order, c.order);
        size_t k = 0;
        for (int j = 0; j < c.order; ++j)
          for (int i = j; i < c.order; ++i) M(i, j) = M(j, i) = c.exprs[k++].evaluate(x);
        worst = std::max(worst, -Eigen::SelfAdjointEigenSolver<Mat>(M, Eigen::EigenvaluesOnly).eigenvalues()[0]);
        break;
      }
      case ConstraintKind::Convex: {
        Vec in(c.exprs.size());
        for (size_t k = 0; k < c.exprs.size(); ++k) in[k] = c.exprs[k].evaluate(x);
        worst = std::max(worst, c.fn->value(in, nullptr) + c.affine.evaluate(x));
        break;
      }
    }
  }
  return worst;
}

}  // namespace dctmpc::conic
