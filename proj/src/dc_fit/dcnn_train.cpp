#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "dctmpc/dc_fit.hpp"

namespace dctmpc {

namespace {

struct RmsParam {
  Mat* value;
  Mat grad;
  Mat sq;
  bool nonneg;
};

Mat glorot(int rows, int cols, std::mt19937_64& rng) {
  const double lim = std::sqrt(6.0 / (rows + cols));
  std::uniform_real_distribution<double> u(-lim, lim);
  Mat m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = u(rng);
  return m;
}

void rmsprop_step(std::vector<RmsParam>& ps, const TrainHyper& h) {
  for (auto& p : ps) {
    p.sq = h.decay * p.sq + (1.0 - h.decay) * p.grad.cwiseProduct(p.grad);
    *p.value -= h.step_size * p.grad.cwiseQuotient((p.sq.cwiseSqrt().array() + h.eps).matrix());
    if (p.nonneg) *p.value = p.value->cwiseMax(0.0);
  }
}

}  // namespace

DcnnModel train_dcnn(const SampleSet& samples, const DcnnArch& arch, const TrainHyper& hyper,
                     unsigned long long seed, TrainResult* result) {
  require(arch.width >= 1 && arch.hidden_layers >= 1, "train_dcnn: need width >= 1 and at least one layer");
  require(samples.size() > 0, "train_dcnn: no samples");
  require(hyper.batch >= 1 && hyper.epochs >= 0, "train_dcnn: bad hyperparameters");
  const int n = static_cast<int>(samples.inputs.cols());
  const int no = static_cast<int>(samples.targets.cols());
  const int w = arch.width, L = arch.hidden_layers;
  std::mt19937_64 rng(seed);

  // Parameter storage: per hidden layer (theta, phi, bias), output (theta, phi, bias).
  std::vector<Mat> theta(L), phi(L), bias(L);
  for (int l = 0; l < L; ++l) {
    phi[l] = glorot(w, n, rng);
    bias[l] = Mat::Zero(w, 1);
    if (l > 0) theta[l] = glorot(w, w, rng).cwiseAbs();
  }
  Mat out_theta = glorot(no, w, rng), out_phi = glorot(no, n, rng), out_bias = Mat::Zero(no, 1);

  std::vector<RmsParam> ps;
  auto reg = [&](Mat& m, bool nonneg) { ps.push_back({&m, Mat::Zero(m.rows(), m.cols()), Mat::Zero(m.rows(), m.cols()), nonneg}); };
  for (int l = 0; l < L; ++l) {
    if (l > 0) reg(theta[l], true);
    reg(phi[l], false);
    reg(bias[l], false);
  }
  reg(out_theta, false);
  reg(out_phi, false);
  reg(out_bias, false);

  const int N = samples.size();
  std::vector<int> order(N);
  std::iota(order.begin(), order.end(), 0);
  std::vector<Mat> pre(L), act(L);
  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (int start = 0; start < N; start += hyper.batch) {
      const int B = std::min(hyper.batch, N - start);
      Mat X(n, B), Y(no, B);
      for (int b = 0; b < B; ++b) {
        X.col(b) = samples.inputs.row(order[start + b]).transpose();
        Y.col(b) = samples.targets.row(order[start + b]).transpose();
      }
      for (int l = 0; l < L; ++l) {
        pre[l] = phi[l] * X;
        pre[l].colwise() += bias[l].col(0);
        if (l > 0) pre[l] += theta[l] * act[l - 1];
        act[l] = pre[l].cwiseMax(0.0);
      }
      Mat P = out_theta * act[L - 1] + out_phi * X;
      P.colwise() += out_bias.col(0);
      Mat E = P - Y;
      loss_sum += E.squaredNorm();
      Mat dP = (2.0 / (B * no)) * E;
      size_t k = ps.size() - 3;
      ps[k].grad = dP * act[L - 1].transpose();
      ps[k + 1].grad = dP * X.transpose();
      ps[k + 2].grad = dP.rowwise().sum();
      Mat dA = out_theta.transpose() * dP;
      for (int l = L - 1; l >= 0; --l) {
        Mat dpre = dA.cwiseProduct((pre[l].array() > 0.0).cast<double>().matrix());
        // parameter slots for layer l: l==0 -> (phi,bias); else (theta,phi,bias)
        const size_t base = l == 0 ? 0 : 2 + 3 * (l - 1);
        if (l > 0) {
          ps[base].grad = dpre * act[l - 1].transpose();
          ps[base + 1].grad = dpre * X.transpose();
          ps[base + 2].grad = dpre.rowwise().sum();
          dA = theta[l].transpose() * dpre;
        } else {
          ps[base].grad = dpre * X.transpose();
          ps[base + 1].grad = dpre.rowwise().sum();
        }
      }
      rmsprop_step(ps, hyper);
    }
    const double loss = loss_sum / (static_cast<double>(N) * no);
    if (!std::isfinite(loss)) throw TrainingError("train_dcnn: non-finite loss at epoch " + std::to_string(epoch));
    if (result) result->epoch_loss.push_back(loss);
  }

  std::vector<DcnnLayer> layers;
  for (int l = 0; l < L; ++l) layers.push_back({l == 0 ? Mat() : theta[l], phi[l], bias[l].col(0)});
  return DcnnModel(std::move(layers), out_theta, out_phi, out_bias.col(0));
}

double dcnn_min_constrained_weight(const DcnnModel& m) {
  double v = std::numeric_limits<double>::infinity();
  for (size_t l = 1; l < m.hidden().size(); ++l) v = std::min(v, m.hidden()[l].theta.minCoeff());
  return v;
}

}  // namespace dctmpc
