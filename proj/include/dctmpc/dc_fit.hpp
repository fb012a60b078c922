#pragma once

#include <functional>

#include "dctmpc/dc_core.hpp"
#include "dctmpc/model_io.hpp"

namespace dctmpc {

using Oracle = std::function<Vec(const Vec&)>;
using XuOracle = std::function<Vec(const Vec&, const Vec&)>;

// One sample per row.
struct SampleSet {
  Mat inputs;
  Mat targets;
  Box box;
  std::vector<std::string> input_names;
  std::vector<std::string> target_names;

  int size() const { return static_cast<int>(inputs.rows()); }
  SampleSet rows(int begin, int count) const;
};

SampleSet sample_dynamics(const Oracle& oracle, const Box& box, int n, unsigned long long seed);
// Last n_test rows become the test set.
std::pair<SampleSet, SampleSet> split_train_test(const SampleSet& s, int n_test);

void write_csv(const std::string& path, const SampleSet& s);
SampleSet read_csv(const std::string& path, int n_inputs);

// Affine map of the box onto [-1,1]^n, returned as (offset, scale).
std::pair<Vec, Vec> box_normalization(const Box& box);
SampleSet normalized(const SampleSet& s, const Vec& offset, const Vec& scale);

struct GramFit {
  MonomialBasis basis;
  std::vector<Mat> F;
  bool warning = false;
  int rank = 0;
};

GramFit fit_gram_ls(const SampleSet& samples, int degree_2d);
// Minimum-Frobenius symmetric Gram matrix representing the given coefficients
// (coefficients over the degree-2d graded-lex basis).
Mat coefficients_to_gram(const MonomialBasis& basis, const Vec& coeffs);
Vec gram_to_coefficients(const MonomialBasis& basis, const Mat& gram);

struct SplitOptions {
  double sigma = 0.0;
  double certificate_tolerance = 1e-7;
};

PolyDcModel split_dc_sdp(const MonomialBasis& basis, const std::vector<Mat>& F, const SplitOptions& opts = {});
// Smallest eigenvalue over all stored certificate matrices.
double certificate_min_eigenvalue(const PolyDcModel& m);
// Checks that the certificate reproduces the Hessian polynomial of g and h; returns max coefficient error.
double certificate_mismatch(const PolyDcModel& m);

struct DcnnArch {
  int hidden_layers = 1;
  int width = 64;
};

struct TrainHyper {
  int epochs = 200;
  int batch = 32;
  double step_size = 1e-3;
  double decay = 0.9;
  double eps = 1e-7;
};

struct TrainResult {
  std::vector<double> epoch_loss;
};

DcnnModel train_dcnn(const SampleSet& samples, const DcnnArch& arch, const TrainHyper& hyper,
                     unsigned long long seed, TrainResult* result = nullptr);
// Smallest entry of the sign-constrained hidden-to-hidden weights (+inf if none).
double dcnn_min_constrained_weight(const DcnnModel& m);

enum class RbfMode { WeightsOnly, Joint };

struct RbfOptions {
  RbfMode mode = RbfMode::Joint;
  Mat centers;  // required for WeightsOnly
  Vec rho;      // required for WeightsOnly
  TrainHyper hyper{100, 64, 1e-3, 0.9, 1e-7};
};

RbfDcModel fit_rbf(const SampleSet& samples, int m, const RbfOptions& opts, unsigned long long seed,
                   bool* warning = nullptr, TrainResult* result = nullptr);

FitReport report_mae(const DcFunction& f, const SampleSet& test);

Vec modelling_error_box(const DcModel& model, const XuOracle& oracle, const Box& box_xu, int n_probe,
                        unsigned long long seed, double safety = 1.5);

// Midpoint convexity audit of one part over the box; returns the worst violation
// max(part((a+b)/2) - (part(a)+part(b))/2).
double midpoint_convexity_violation(const DcFunction& f, Part p, const Box& box, int pairs, unsigned long long seed);
// Worst tangent under-estimation violation max(lin(x) - part(x)) over random anchor/point pairs.
double tangent_violation(const DcFunction& f, Part p, const Box& box, int pairs, unsigned long long seed);

}  // namespace dctmpc
