#include <cmath>

#include "dctmpc/dc_core.hpp"

namespace dctmpc {

namespace {

Vec relu(const Vec& v) { return v.cwiseMax(0.0); }
Vec heaviside(const Vec& v) { return (v.array() > 0.0).cast<double>(); }
Mat pos_part(const Mat& m) { return m.cwiseMax(0.0); }
Mat neg_part(const Mat& m) { return (-m).cwiseMax(0.0); }

}  // namespace

PolyDcModel::PolyDcModel(MonomialBasis basis, std::vector<Mat> G, std::vector<Mat> H)
    : basis_(std::move(basis)), G_(std::move(G)), H_(std::move(H)) {
  require(G_.size() == H_.size(), "PolyDcModel: G and H output counts differ");
  const int s = basis_.size();
  for (size_t l = 0; l < G_.size(); ++l) {
    require(G_[l].rows() == s && G_[l].cols() == s && H_[l].rows() == s && H_[l].cols() == s,
            "PolyDcModel: Gram size does not match basis");
    G_[l] = 0.5 * (G_[l] + G_[l].transpose()).eval();
    H_[l] = 0.5 * (H_[l] + H_[l].transpose()).eval();
    gp_.push_back(gram_to_polynomial(basis_, G_[l]));
    hp_.push_back(gram_to_polynomial(basis_, H_[l]));
  }
}

DcnnModel::DcnnModel(std::vector<DcnnLayer> hidden, Mat out_theta, Mat out_phi, Vec out_bias)
    : hidden_(std::move(hidden)), out_theta_(std::move(out_theta)), out_phi_(std::move(out_phi)),
      out_bias_(std::move(out_bias)) {
  const Eigen::Index n_in = out_phi_.cols();
  Eigen::Index prev = 0;
  for (size_t l = 0; l < hidden_.size(); ++l) {
    const auto& L = hidden_[l];
    require(L.phi.cols() == n_in && L.bias.size() == L.phi.rows(), "DcnnModel: layer shape mismatch");
    if (l == 0) {
      require(L.theta.size() == 0, "DcnnModel: first layer has no hidden-to-hidden weights");
    } else {
      require(L.theta.rows() == L.phi.rows() && L.theta.cols() == prev, "DcnnModel: theta shape mismatch");
    }
    prev = L.phi.rows();
  }
  require(out_theta_.cols() == prev && out_theta_.rows() == out_phi_.rows() &&
              out_bias_.size() == out_phi_.rows(),
          "DcnnModel: output layer shape mismatch");
}

std::vector<Vec> DcnnModel::activations(const Vec& xi) const {
  std::vector<Vec> z;
  for (size_t l = 0; l < hidden_.size(); ++l) {
    Vec pre = hidden_[l].phi * xi + hidden_[l].bias;
    if (l > 0) pre += hidden_[l].theta * z.back();
    z.push_back(relu(pre));
  }
  return z;
}

void DcnnModel::eval(const Vec& xi, Vec* g, Vec* h) const {
  auto z = activations(xi);
  Vec last = z.empty() ? Vec() : z.back();
  if (g) {
    *g = out_phi_ * xi + out_bias_;
    if (last.size()) *g += pos_part(out_theta_) * last;
  }
  if (h) {
    *h = Vec::Zero(output_dim());
    if (last.size()) *h = neg_part(out_theta_) * last;
  }
}

Mat DcnnModel::last_layer_jacobian(const Vec& xi) const {
  Mat J;
  Vec z;
  for (size_t l = 0; l < hidden_.size(); ++l) {
    Vec pre = hidden_[l].phi * xi + hidden_[l].bias;
    Mat Jpre = hidden_[l].phi;
    if (l > 0) {
      pre += hidden_[l].theta * z;
      Jpre += hidden_[l].theta * J;
    }
    J = heaviside(pre).asDiagonal() * Jpre;
    z = relu(pre);
  }
  return J;
}

RbfDcModel::RbfDcModel(Mat centers, Vec rho, Mat alpha)
    : centers_(std::move(centers)), rho_(std::move(rho)), alpha_(std::move(alpha)) {
  require(centers_.rows() == rho_.size() && alpha_.rows() == rho_.size(), "RbfDcModel: term count mismatch");
  require(rho_.size() == 0 || rho_.minCoeff() > 0.0, "RbfDcModel: scales must be positive");
}

Vec RbfDcModel::kernels(const Vec& xi) const {
  Vec phi(terms());
  for (int j = 0; j < terms(); ++j) {
    const double r2 = (xi.transpose() - centers_.row(j)).squaredNorm();
    phi[j] = std::sqrt(1.0 + rho_[j] * rho_[j] * r2);
  }
  return phi;
}

const char* kind_name(DcKind k) {
  switch (k) {
    case DcKind::Poly: return "poly";
    case DcKind::Dcnn: return "dcnn";
    case DcKind::Rbf: return "rbf";
  }
  return "?";
}

DcKind kind_from_name(const std::string& s) {
  if (s == "poly") return DcKind::Poly;
  if (s == "dcnn") return DcKind::Dcnn;
  if (s == "rbf") return DcKind::Rbf;
  throw ArgumentError("unknown model kind '" + s + "'");
}

DcFunction::DcFunction(Rep rep, Vec offset, Vec scale)
    : rep_(std::move(rep)), offset_(std::move(offset)), scale_(std::move(scale)) {
  const int n = input_dim();
  if (offset_.size() == 0) offset_ = Vec::Zero(n);
  if (scale_.size() == 0) scale_ = Vec::Ones(n);
  require(offset_.size() == n && scale_.size() == n, "DcFunction: normalisation size mismatch");
  require(scale_.minCoeff() > 0.0, "DcFunction: normalisation scale must be positive");
}

DcKind DcFunction::kind() const { return static_cast<DcKind>(rep_.index()); }

int DcFunction::input_dim() const {
  return std::visit([](const auto& r) { return r.input_dim(); }, rep_);
}

int DcFunction::output_dim() const {
  return std::visit([](const auto& r) { return r.output_dim(); }, rep_);
}

Vec DcFunction::normalize(const Vec& raw) const {
  if (raw.size() != input_dim()) throw ArgumentError("DcFunction: input dimension mismatch");
  return (raw - offset_).cwiseQuotient(scale_);
}

Vec DcFunction::eval(Part p, const Vec& raw) const {
  const Vec xi = normalize(raw);
  const int no = output_dim();
  Vec out(no);
  if (auto* m = std::get_if<PolyDcModel>(&rep_)) {
    for (int l = 0; l < no; ++l) out[l] = (p == Part::G ? m->g_poly(l) : m->h_poly(l)).value(xi);
  } else if (auto* m = std::get_if<DcnnModel>(&rep_)) {
    if (p == Part::G) m->eval(xi, &out, nullptr);
    else m->eval(xi, nullptr, &out);
  } else {
    const auto& r = std::get<RbfDcModel>(rep_);
    Vec phi = r.kernels(xi);
    out = (p == Part::G ? pos_part(r.alpha()) : neg_part(r.alpha())).transpose() * phi;
  }
  return out;
}

Vec DcFunction::eval_f(const Vec& raw) const {
  Vec g = eval_g(raw);
  Vec h = eval_h(raw);
  return g - h;
}

Mat DcFunction::jacobian(Part p, const Vec& raw) const {
  const Vec xi = normalize(raw);
  const int no = output_dim(), n = input_dim();
  Mat J(no, n);
  if (auto* m = std::get_if<PolyDcModel>(&rep_)) {
    for (int l = 0; l < no; ++l)
      J.row(l) = (p == Part::G ? m->g_poly(l) : m->h_poly(l)).gradient(xi).transpose();
  } else if (auto* m = std::get_if<DcnnModel>(&rep_)) {
    Mat Jz = m->last_layer_jacobian(xi);
    if (p == Part::G) {
      J = m->out_phi();
      if (Jz.size()) J += pos_part(m->out_theta()) * Jz;
    } else {
      J = Mat::Zero(no, n);
      if (Jz.size()) J = neg_part(m->out_theta()) * Jz;
    }
  } else {
    const auto& r = std::get<RbfDcModel>(rep_);
    Vec phi = r.kernels(xi);
    Mat dphi(r.terms(), n);
    for (int j = 0; j < r.terms(); ++j)
      dphi.row(j) = r.rho()[j] * r.rho()[j] * (xi.transpose() - r.centers().row(j)) / phi[j];
    J = (p == Part::G ? pos_part(r.alpha()) : neg_part(r.alpha())).transpose() * dphi;
  }
  return J * scale_.cwiseInverse().asDiagonal();
}

double DcFunction::weighted_value(Part p, const Vec& w, const Vec& raw, Vec* grad) const {
  if (auto* m = std::get_if<PolyDcModel>(&rep_)) {
    const Vec xi = normalize(raw);
    double v = 0.0;
    if (grad) grad->setZero(input_dim());
    for (int l = 0; l < output_dim(); ++l) {
      if (w[l] == 0.0) continue;
      const Polynomial& poly = p == Part::G ? m->g_poly(l) : m->h_poly(l);
      v += w[l] * poly.value(xi);
      if (grad) *grad += w[l] * poly.gradient(xi);
    }
    if (grad) *grad = grad->cwiseQuotient(scale_);
    return v;
  }
  if (auto* r = std::get_if<RbfDcModel>(&rep_)) {
    const Vec xi = normalize(raw);
    Vec coef = (p == Part::G ? pos_part(r->alpha()) : neg_part(r->alpha())) * w;
    Vec phi = r->kernels(xi);
    if (grad) {
      grad->setZero(input_dim());
      for (int j = 0; j < r->terms(); ++j) {
        if (coef[j] == 0.0) continue;
        *grad += coef[j] * r->rho()[j] * r->rho()[j] / phi[j] * (xi - r->centers().row(j).transpose());
      }
      *grad = grad->cwiseQuotient(scale_);
    }
    return coef.dot(phi);
  }
  if (grad) *grad = jacobian(p, raw).transpose() * w;
  return w.dot(eval(p, raw));
}

Mat DcFunction::weighted_hessian(Part p, const Vec& w, const Vec& raw) const {
  const Vec xi = normalize(raw);
  const int n = input_dim();
  Mat Hs = Mat::Zero(n, n);
  if (auto* m = std::get_if<PolyDcModel>(&rep_)) {
    for (int l = 0; l < output_dim(); ++l) {
      if (w[l] == 0.0) continue;
      Hs += w[l] * (p == Part::G ? m->g_poly(l) : m->h_poly(l)).hessian(xi);
    }
  } else if (auto* r = std::get_if<RbfDcModel>(&rep_)) {
    Vec coef = (p == Part::G ? pos_part(r->alpha()) : neg_part(r->alpha())) * w;
    Vec phi = r->kernels(xi);
    for (int j = 0; j < r->terms(); ++j) {
      if (coef[j] == 0.0) continue;
      const double r2 = r->rho()[j] * r->rho()[j];
      Vec d = xi - r->centers().row(j).transpose();
      Hs += coef[j] * (r2 / phi[j] * Mat::Identity(n, n) - r2 * r2 / std::pow(phi[j], 3) * d * d.transpose());
    }
  }
  const Vec inv = scale_.cwiseInverse();
  return inv.asDiagonal() * Hs * inv.asDiagonal();
}

bool DcFunction::part_is_zero(Part p, int l) const {
  if (auto* m = std::get_if<PolyDcModel>(&rep_)) {
    const Mat& M = p == Part::G ? m->G()[l] : m->H()[l];
    return M.size() == 0 || M.cwiseAbs().maxCoeff() == 0.0;
  }
  if (auto* m = std::get_if<DcnnModel>(&rep_)) {
    if (p == Part::H) return m->out_theta().cols() == 0 || neg_part(m->out_theta().row(l)).maxCoeff() == 0.0;
    bool zero = m->out_bias()[l] == 0.0 && (m->out_phi().cols() == 0 || m->out_phi().row(l).cwiseAbs().maxCoeff() == 0.0);
    return zero && (m->out_theta().cols() == 0 || pos_part(m->out_theta().row(l)).maxCoeff() == 0.0);
  }
  const auto& r = std::get<RbfDcModel>(rep_);
  if (r.terms() == 0) return true;
  const Vec col = r.alpha().col(l);
  return (p == Part::G ? col.maxCoeff() <= 0.0 : col.minCoeff() >= 0.0);
}

}  // namespace dctmpc
