#pragma once

#include <optional>
#include <variant>

#include "dctmpc/common.hpp"

namespace dctmpc {

using Exponent = std::vector<int>;

// Monomials of total degree <= degree in graded lexicographic order.
class MonomialBasis {
 public:
  MonomialBasis() = default;
  MonomialBasis(int dims, int degree);

  int dims() const { return dims_; }
  int degree() const { return degree_; }
  int size() const { return static_cast<int>(exponents_.size()); }
  const std::vector<Exponent>& exponents() const { return exponents_; }

  Vec evaluate(const Vec& x) const;
  // Index of an exponent, or -1 if it is not part of the basis.
  int index_of(const Exponent& e) const;
  // dy/dx_j = D_j y.
  const Mat& diff_op(int j) const { return diff_ops_.at(j); }
  Mat second_diff_op(int i, int j) const { return diff_ops_.at(i) * diff_ops_.at(j); }

 private:
  int dims_ = 0;
  int degree_ = 0;
  std::vector<Exponent> exponents_;
  std::vector<Mat> diff_ops_;
};

// Enumerates exponents of total degree <= degree, graded lex (x1 > x2 > ...).
std::vector<Exponent> graded_lex_exponents(int dims, int degree);

// Sparse polynomial sum_a c_a x^a with cached derivative tables.
class Polynomial {
 public:
  Polynomial() = default;
  Polynomial(int dims, std::vector<Exponent> exponents, Vec coeffs);

  int dims() const { return dims_; }
  const std::vector<Exponent>& exponents() const { return exps_; }
  const Vec& coeffs() const { return coeffs_; }

  double value(const Vec& x) const;
  Vec gradient(const Vec& x) const;
  Mat hessian(const Vec& x) const;
  bool is_zero() const { return coeffs_.size() == 0 || coeffs_.cwiseAbs().maxCoeff() == 0.0; }

 private:
  double eval_terms(const std::vector<Exponent>& e, const Vec& c, const Vec& x) const;

  int dims_ = 0;
  std::vector<Exponent> exps_;
  Vec coeffs_;
  std::vector<std::vector<Exponent>> d1_exps_;
  std::vector<Vec> d1_coeffs_;
  std::vector<std::vector<Exponent>> d2_exps_;  // upper triangle, row-major (i <= j)
  std::vector<Vec> d2_coeffs_;
};

// Polynomial y' M y expanded into monomial coefficients over the degree-2d basis.
Polynomial gram_to_polynomial(const MonomialBasis& basis, const Mat& gram);

// Hessian Gram blocks G_ij = D_ij' G + G D_ij + D_i' G D_j + D_j' G D_i.
// y' G_ij y equals d^2 (y' G y) / dx_i dx_j.
Mat hessian_gram_block(const MonomialBasis& basis, const Mat& gram, int i, int j);
// Full block matrix [G_ij] of size (n*s) x (n*s).
Mat hessian_gram(const MonomialBasis& basis, const Mat& gram);

struct SosCertificate {
  MonomialBasis basis;  // reduced basis of degree d-1
  std::vector<Mat> g;   // PSD matrix on v (x) y_red per output, for g
  std::vector<Mat> h;
  double tolerance = 1e-7;
  double sigma = 0.0;
};

class PolyDcModel {
 public:
  PolyDcModel() = default;
  PolyDcModel(MonomialBasis basis, std::vector<Mat> G, std::vector<Mat> H);

  const MonomialBasis& basis() const { return basis_; }
  const std::vector<Mat>& G() const { return G_; }
  const std::vector<Mat>& H() const { return H_; }
  int input_dim() const { return basis_.dims(); }
  int output_dim() const { return static_cast<int>(G_.size()); }

  const Polynomial& g_poly(int l) const { return gp_.at(l); }
  const Polynomial& h_poly(int l) const { return hp_.at(l); }

  std::optional<SosCertificate> certificate;

 private:
  MonomialBasis basis_;
  std::vector<Mat> G_, H_;
  std::vector<Polynomial> gp_, hp_;
};

struct DcnnLayer {
  Mat theta;  // width x previous width; empty for the first layer
  Mat phi;    // width x n_in
  Vec bias;
};

// ReLU network convex in its inputs up to the final layer; the final layer is
// split by sign into g (positive part plus passthrough) and h (negative part).
class DcnnModel {
 public:
  DcnnModel() = default;
  DcnnModel(std::vector<DcnnLayer> hidden, Mat out_theta, Mat out_phi, Vec out_bias);

  int input_dim() const { return static_cast<int>(out_phi_.cols()); }
  int output_dim() const { return static_cast<int>(out_theta_.rows()); }
  const std::vector<DcnnLayer>& hidden() const { return hidden_; }
  const Mat& out_theta() const { return out_theta_; }
  const Mat& out_phi() const { return out_phi_; }
  const Vec& out_bias() const { return out_bias_; }

  // Hidden activations per layer.
  std::vector<Vec> activations(const Vec& xi) const;
  void eval(const Vec& xi, Vec* g, Vec* h) const;
  // d(activation of last layer)/d xi, using H(0) = 0.
  Mat last_layer_jacobian(const Vec& xi) const;

 private:
  std::vector<DcnnLayer> hidden_;
  Mat out_theta_, out_phi_;
  Vec out_bias_;
};

// Multiquadric expansion sum_j alpha_j sqrt(1 + rho_j^2 |xi - c_j|^2).
class RbfDcModel {
 public:
  RbfDcModel() = default;
  RbfDcModel(Mat centers, Vec rho, Mat alpha);

  int input_dim() const { return static_cast<int>(centers_.cols()); }
  int output_dim() const { return static_cast<int>(alpha_.cols()); }
  int terms() const { return static_cast<int>(centers_.rows()); }
  const Mat& centers() const { return centers_; }  // m x n
  const Vec& rho() const { return rho_; }          // m
  const Mat& alpha() const { return alpha_; }      // m x n_out

  Vec kernels(const Vec& xi) const;

 private:
  Mat centers_;
  Vec rho_;
  Mat alpha_;
};

enum class DcKind { Poly, Dcnn, Rbf };
enum class Part { G, H };

const char* kind_name(DcKind k);
DcKind kind_from_name(const std::string& s);

// A DC representation together with an affine input normalisation
// xi = (raw - offset) ./ scale, which preserves convexity.
class DcFunction {
 public:
  using Rep = std::variant<PolyDcModel, DcnnModel, RbfDcModel>;

  DcFunction() = default;
  explicit DcFunction(Rep rep, Vec offset = Vec(), Vec scale = Vec());

  DcKind kind() const;
  int input_dim() const;
  int output_dim() const;
  const Rep& rep() const { return rep_; }
  const Vec& offset() const { return offset_; }
  const Vec& scale() const { return scale_; }

  Vec eval(Part p, const Vec& raw) const;
  Vec eval_g(const Vec& raw) const { return eval(Part::G, raw); }
  Vec eval_h(const Vec& raw) const { return eval(Part::H, raw); }
  Vec eval_f(const Vec& raw) const;
  // n_out x n_in Jacobian with respect to raw inputs.
  Mat jacobian(Part p, const Vec& raw) const;
  // Hessian of sum_l w_l part_l with respect to raw inputs (zero a.e. for DCNN).
  Mat weighted_hessian(Part p, const Vec& w, const Vec& raw) const;
  // Value and gradient of sum_l w_l part_l.
  double weighted_value(Part p, const Vec& w, const Vec& raw, Vec* grad) const;
  // True when output l of the part is identically zero.
  bool part_is_zero(Part p, int l) const;
  bool smooth() const { return kind() != DcKind::Dcnn; }

  Vec normalize(const Vec& raw) const;

 private:
  Rep rep_;
  Vec offset_, scale_;
};

struct AffineMap {
  Vec value;  // at the anchor
  Mat A, B;
  Vec x0, u0;
  Vec operator()(const Vec& x, const Vec& u) const { return value + A * (x - x0) + B * (u - u0); }
};

// Dynamics x+ = E (g - h)(sel(x,u)) + A_r x + B_r u + c_r.
class DcModel {
 public:
  DcModel() = default;
  DcModel(int n_x, int n_u, std::optional<DcFunction> fn, std::vector<int> input_index, Mat embedding,
          Mat A_res, Mat B_res, Vec c_res);
  // Model whose DC function outputs are the full state update, inputs z = (x,u).
  static DcModel direct(int n_x, int n_u, DcFunction fn);
  static DcModel linear(const Mat& A, const Mat& B, const Vec& c = Vec());

  int n_x() const { return n_x_; }
  int n_u() const { return n_u_; }
  int n_out() const { return fn_ ? fn_->output_dim() : 0; }
  bool has_function() const { return fn_.has_value(); }
  const DcFunction& function() const;
  const std::vector<int>& input_index() const { return input_index_; }
  const Mat& embedding() const { return embed_; }
  const Mat& A_res() const { return A_res_; }
  const Mat& B_res() const { return B_res_; }
  const Vec& c_res() const { return c_res_; }

  Vec dc_inputs(const Vec& x, const Vec& u) const;
  Vec eval_g(const Vec& x, const Vec& u) const;
  Vec eval_h(const Vec& x, const Vec& u) const;
  Vec eval_f(const Vec& x, const Vec& u) const;
  std::pair<Mat, Mat> jacobian_part(Part p, const Vec& x, const Vec& u) const;
  std::pair<Mat, Mat> jacobian_g(const Vec& x, const Vec& u) const { return jacobian_part(Part::G, x, u); }
  std::pair<Mat, Mat> jacobian_h(const Vec& x, const Vec& u) const { return jacobian_part(Part::H, x, u); }
  std::pair<Mat, Mat> jacobian_f(const Vec& x, const Vec& u) const;
  AffineMap linearize_concave(Part p, const Vec& x0, const Vec& u0) const;

 private:
  void check_xu(const Vec& x, const Vec& u) const;
  // Scatters an n_out x n_in Jacobian into (x, u) blocks.
  std::pair<Mat, Mat> scatter(const Mat& J) const;

  int n_x_ = 0, n_u_ = 0;
  std::optional<DcFunction> fn_;
  std::vector<int> input_index_;
  Mat embed_, A_res_, B_res_;
  Vec c_res_;
};

}  // namespace dctmpc
