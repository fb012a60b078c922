#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "dctmpc/dc_fit.hpp"

namespace dctmpc {

namespace {

double softplus(double r) { return r > 30 ? r : std::log1p(std::exp(r)); }
double softplus_inv(double p) { return p > 30 ? p : std::log(std::expm1(p)); }
double sigmoid(double r) { return 1.0 / (1.0 + std::exp(-r)); }

Mat kernel_matrix(const Mat& X, const Mat& C, const Vec& rho) {
  Mat Phi(X.rows(), C.rows());
  for (Eigen::Index j = 0; j < C.rows(); ++j) {
    Vec d2 = (X.rowwise() - C.row(j)).rowwise().squaredNorm();
    Phi.col(j) = (1.0 + rho[j] * rho[j] * d2.array()).sqrt().matrix();
  }
  return Phi;
}

Mat ls_weights(const Mat& Phi, const Mat& Y, bool* warning) {
  Eigen::CompleteOrthogonalDecomposition<Mat> cod(Phi);
  cod.setThreshold(1e-12);
  if (warning) *warning = cod.rank() < Phi.cols();
  return cod.solve(Y);
}

}  // namespace

RbfDcModel fit_rbf(const SampleSet& samples, int m, const RbfOptions& opts, unsigned long long seed, bool* warning,
                   TrainResult* result) {
  require(m >= 1, "fit_rbf: need at least one term");
  require(samples.size() > 0, "fit_rbf: no samples");
  const int n = static_cast<int>(samples.inputs.cols());
  const Mat& X = samples.inputs;
  const Mat& Y = samples.targets;
  bool warn = false;

  if (opts.mode == RbfMode::WeightsOnly) {
    require(opts.centers.rows() == m && opts.centers.cols() == n && opts.rho.size() == m,
            "fit_rbf: weights_only needs m centers and scales");
    Mat alpha = ls_weights(kernel_matrix(X, opts.centers, opts.rho), Y, &warn);
    if (warning) *warning = warn;
    return RbfDcModel(opts.centers, opts.rho, alpha);
  }

  std::mt19937_64 rng(seed);
  Vec lo = samples.box.lo.size() == n ? samples.box.lo : Vec(X.colwise().minCoeff().transpose());
  Vec hi = samples.box.hi.size() == n ? samples.box.hi : Vec(X.colwise().maxCoeff().transpose());
  Mat C(m, n);
  Vec rho(m);
  const int k = static_cast<int>(std::lround(std::pow(m, 1.0 / n)));
  long long grid = 1;
  for (int i = 0; i < n; ++i) grid *= k;
  if (k >= 2 && grid == m) {
    // tensor grid over the sample box
    for (int j = 0; j < m; ++j) {
      int r = j;
      for (int i = n - 1; i >= 0; --i) {
        C(j, i) = lo[i] + (hi[i] - lo[i]) * (r % k) / (k - 1);
        r /= k;
      }
    }
    rho.setConstant((k - 1) / (hi - lo).mean());
  } else {
    std::uniform_int_distribution<int> pick(0, samples.size() - 1);
    for (int j = 0; j < m; ++j) C.row(j) = X.row(pick(rng));
    rho.setConstant(2.0 / (hi - lo).mean());
  }
  Mat alpha = ls_weights(kernel_matrix(X, C, rho), Y, &warn);

  const TrainHyper& h = opts.hyper;
  const int no = static_cast<int>(Y.cols());
  Vec r = rho.unaryExpr([](double p) { return softplus_inv(p); });
  Mat sqC = Mat::Zero(m, n), sqA = Mat::Zero(m, no);
  Vec sqR = Vec::Zero(m);
  auto rms = [&](auto& value, const auto& grad, auto& sq) {
    sq = h.decay * sq + (1.0 - h.decay) * grad.cwiseProduct(grad);
    value -= h.step_size * grad.cwiseQuotient((sq.cwiseSqrt().array() + h.eps).matrix());
  };
  const int N = samples.size();
  std::vector<int> order(N);
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < h.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (int start = 0; start < N; start += h.batch) {
      const int B = std::min(h.batch, N - start);
      Mat Xb(B, n), Yb(B, no);
      for (int b = 0; b < B; ++b) {
        Xb.row(b) = X.row(order[start + b]);
        Yb.row(b) = Y.row(order[start + b]);
      }
      for (int j = 0; j < m; ++j) rho[j] = softplus(r[j]);
      Mat Phi = kernel_matrix(Xb, C, rho);  // B x m
      Mat E = Phi * alpha - Yb;
      loss_sum += E.squaredNorm();
      Mat dP = (2.0 / (B * no)) * E;         // B x no
      Mat gA = Phi.transpose() * dP;         // m x no
      Mat dPhi = dP * alpha.transpose();     // B x m
      Mat gC = Mat::Zero(m, n);
      Vec gR = Vec::Zero(m);
      for (int j = 0; j < m; ++j) {
        const double r2 = rho[j] * rho[j];
        for (int b = 0; b < B; ++b) {
          const double w = dPhi(b, j) / Phi(b, j);
          Eigen::RowVectorXd d = Xb.row(b) - C.row(j);
          gR[j] += w * rho[j] * d.squaredNorm();
          gC.row(j) -= w * r2 * d;
        }
        gR[j] *= sigmoid(r[j]);
      }
      rms(alpha, gA, sqA);
      rms(C, gC, sqC);
      rms(r, gR, sqR);
    }
    const double loss = loss_sum / (static_cast<double>(N) * no);
    if (!std::isfinite(loss)) throw TrainingError("fit_rbf: non-finite loss at epoch " + std::to_string(epoch));
    if (result) result->epoch_loss.push_back(loss);
  }
  for (int j = 0; j < m; ++j) rho[j] = softplus(r[j]);
  // Final least-squares pass on the output weights with the learned centers and scales.
  alpha = ls_weights(kernel_matrix(X, C, rho), Y, &warn);
  if (warning) *warning = warn;
  return RbfDcModel(C, rho, alpha);
}

}  // namespace dctmpc
