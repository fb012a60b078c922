#include <numeric>

#include "dctmpc/dc_core.hpp"

namespace dctmpc {

DcModel::DcModel(int n_x, int n_u, std::optional<DcFunction> fn, std::vector<int> input_index, Mat embedding,
                 Mat A_res, Mat B_res, Vec c_res)
    : n_x_(n_x), n_u_(n_u), fn_(std::move(fn)), input_index_(std::move(input_index)), embed_(std::move(embedding)),
      A_res_(std::move(A_res)), B_res_(std::move(B_res)), c_res_(std::move(c_res)) {
  require(n_x >= 1 && n_u >= 0, "DcModel: need n_x >= 1 and n_u >= 0");
  const int no = n_out();
  if (fn_) {
    require(static_cast<int>(input_index_.size()) == fn_->input_dim(), "DcModel: input index count mismatch");
    for (int i : input_index_) require(i >= 0 && i < n_x + n_u, "DcModel: input index out of range");
  }
  if (embed_.size() == 0) {
    require(no == n_x || no == 0, "DcModel: embedding required when n_out != n_x");
    embed_ = no ? Mat(Mat::Identity(n_x, no)) : Mat(Mat::Zero(n_x, 0));
  }
  if (A_res_.size() == 0) A_res_ = Mat::Zero(n_x, n_x);
  if (B_res_.size() == 0) B_res_ = Mat::Zero(n_x, n_u);
  if (c_res_.size() == 0) c_res_ = Vec::Zero(n_x);
  require(embed_.rows() == n_x && embed_.cols() == no, "DcModel: embedding shape mismatch");
  require(A_res_.rows() == n_x && A_res_.cols() == n_x, "DcModel: residual A shape mismatch");
  require(B_res_.rows() == n_x && B_res_.cols() == n_u, "DcModel: residual B shape mismatch");
  require(c_res_.size() == n_x, "DcModel: residual c size mismatch");
}

DcModel DcModel::direct(int n_x, int n_u, DcFunction fn) {
  std::vector<int> idx(n_x + n_u);
  std::iota(idx.begin(), idx.end(), 0);
  return DcModel(n_x, n_u, std::move(fn), idx, Mat(), Mat(), Mat(), Vec());
}

DcModel DcModel::linear(const Mat& A, const Mat& B, const Vec& c) {
  return DcModel(static_cast<int>(A.rows()), static_cast<int>(B.cols()), std::nullopt, {}, Mat(), A, B, c);
}

const DcFunction& DcModel::function() const {
  if (!fn_) throw ArgumentError("DcModel: model has no DC part");
  return *fn_;
}

void DcModel::check_xu(const Vec& x, const Vec& u) const {
  if (x.size() != n_x_ || u.size() != n_u_)
    throw ArgumentError("DcModel: expected x of size " + std::to_string(n_x_) + " and u of size " +
                        std::to_string(n_u_) + ", got " + std::to_string(x.size()) + " and " +
                        std::to_string(u.size()));
}

Vec DcModel::dc_inputs(const Vec& x, const Vec& u) const {
  check_xu(x, u);
  Vec z(input_index_.size());
  for (size_t i = 0; i < input_index_.size(); ++i) {
    const int k = input_index_[i];
    z[i] = k < n_x_ ? x[k] : u[k - n_x_];
  }
  return z;
}

Vec DcModel::eval_g(const Vec& x, const Vec& u) const {
  if (!fn_) { check_xu(x, u); return Vec(); }
  return fn_->eval_g(dc_inputs(x, u));
}

Vec DcModel::eval_h(const Vec& x, const Vec& u) const {
  if (!fn_) { check_xu(x, u); return Vec(); }
  return fn_->eval_h(dc_inputs(x, u));
}

Vec DcModel::eval_f(const Vec& x, const Vec& u) const {
  check_xu(x, u);
  Vec residual = A_res_ * x + B_res_ * u + c_res_;
  if (!fn_) return residual;
  Vec g = eval_g(x, u);
  Vec h = eval_h(x, u);
  Vec d = g - h;
  return embed_ * d + residual;
}

std::pair<Mat, Mat> DcModel::scatter(const Mat& J) const {
  Mat A = Mat::Zero(J.rows(), n_x_), B = Mat::Zero(J.rows(), n_u_);
  for (size_t i = 0; i < input_index_.size(); ++i) {
    const int k = input_index_[i];
    if (k < n_x_) A.col(k) += J.col(i);
    else B.col(k - n_x_) += J.col(i);
  }
  return {A, B};
}

std::pair<Mat, Mat> DcModel::jacobian_part(Part p, const Vec& x, const Vec& u) const {
  if (!fn_) { check_xu(x, u); return {Mat::Zero(0, n_x_), Mat::Zero(0, n_u_)}; }
  return scatter(fn_->jacobian(p, dc_inputs(x, u)));
}

std::pair<Mat, Mat> DcModel::jacobian_f(const Vec& x, const Vec& u) const {
  check_xu(x, u);
  if (!fn_) return {A_res_, B_res_};
  auto [Ag, Bg] = jacobian_g(x, u);
  auto [Ah, Bh] = jacobian_h(x, u);
  Mat A = embed_ * (Ag - Ah) + A_res_;
  Mat B = embed_ * (Bg - Bh) + B_res_;
  return {A, B};
}

AffineMap DcModel::linearize_concave(Part p, const Vec& x0, const Vec& u0) const {
  AffineMap m;
  m.value = p == Part::G ? eval_g(x0, u0) : eval_h(x0, u0);
  std::tie(m.A, m.B) = jacobian_part(p, x0, u0);
  m.x0 = x0;
  m.u0 = u0;
  return m;
}

}  // namespace dctmpc
