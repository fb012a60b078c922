#include <limits>
#include <random>

#include "dctmpc/dc_fit.hpp"

namespace dctmpc {

namespace {

Vec uniform_point(const Box& box, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Vec x(box.dim());
  for (int k = 0; k < box.dim(); ++k) x[k] = box.lo[k] + (box.hi[k] - box.lo[k]) * unit(rng);
  return x;
}

}  // namespace

FitReport report_mae(const DcFunction& f, const SampleSet& test) {
  require(test.size() > 0, "report_mae: empty test set");
  require(test.targets.cols() == f.output_dim(), "report_mae: output dimension mismatch");
  Vec err = Vec::Zero(f.output_dim());
  for (int r = 0; r < test.size(); ++r)
    err += (f.eval_f(test.inputs.row(r).transpose()) - test.targets.row(r).transpose()).cwiseAbs();
  FitReport rep;
  rep.mae_per_output = err / test.size();
  rep.mae = rep.mae_per_output.mean();
  rep.n_test = test.size();
  return rep;
}

Vec modelling_error_box(const DcModel& model, const XuOracle& oracle, const Box& box_xu, int n_probe,
                        unsigned long long seed, double safety) {
  require(box_xu.dim() == model.n_x() + model.n_u(), "modelling_error_box: box dimension mismatch");
  require(n_probe >= 1 && safety >= 1.0, "modelling_error_box: need n_probe >= 1 and safety >= 1");
  std::mt19937_64 rng(seed);
  Vec eps = Vec::Zero(model.n_x());
  for (int i = 0; i < n_probe; ++i) {
    Vec z = uniform_point(box_xu, rng);
    Vec x = z.head(model.n_x()), u = z.tail(model.n_u());
    eps = eps.cwiseMax((model.eval_f(x, u) - oracle(x, u)).cwiseAbs());
  }
  return safety * eps;
}

double midpoint_convexity_violation(const DcFunction& f, Part p, const Box& box, int pairs, unsigned long long seed) {
  std::mt19937_64 rng(seed);
  double worst = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < pairs; ++i) {
    Vec a = uniform_point(box, rng), b = uniform_point(box, rng);
    Vec v = f.eval(p, 0.5 * (a + b)) - 0.5 * (f.eval(p, a) + f.eval(p, b));
    worst = std::max(worst, v.maxCoeff());
  }
  return worst;
}

double tangent_violation(const DcFunction& f, Part p, const Box& box, int pairs, unsigned long long seed) {
  std::mt19937_64 rng(seed);
  double worst = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < pairs; ++i) {
    Vec a = uniform_point(box, rng), x = uniform_point(box, rng);
    Vec lin = f.eval(p, a) + f.jacobian(p, a) * (x - a);
    worst = std::max(worst, (lin - f.eval(p, x)).maxCoeff());
  }
  return worst;
}

}  // namespace dctmpc
