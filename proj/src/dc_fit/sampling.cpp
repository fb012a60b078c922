#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>

#include "dctmpc/dc_fit.hpp"

namespace dctmpc {

SampleSet SampleSet::rows(int begin, int count) const {
  SampleSet s;
  s.inputs = inputs.middleRows(begin, count);
  s.targets = targets.middleRows(begin, count);
  s.box = box;
  s.input_names = input_names;
  s.target_names = target_names;
  return s;
}

SampleSet sample_dynamics(const Oracle& oracle, const Box& box, int n, unsigned long long seed) {
  require(n >= 1, "sample_dynamics: n must be >= 1");
  require(box.lo.size() == box.hi.size() && box.lo.size() > 0 && (box.hi - box.lo).minCoeff() >= 0.0,
          "sample_dynamics: box is empty");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int d = box.dim();
  SampleSet s;
  s.box = box;
  s.inputs.resize(n, d);
  for (int i = 0; i < n; ++i) {
    Vec x(d);
    for (int k = 0; k < d; ++k) x[k] = box.lo[k] + (box.hi[k] - box.lo[k]) * unit(rng);
    Vec y = oracle(x);
    if (!y.allFinite()) {
      std::ostringstream msg;
      msg << "sample_dynamics: oracle returned a non-finite value at [" << x.transpose() << "]";
      throw DataError(msg.str());
    }
    if (i == 0) s.targets.resize(n, y.size());
    s.inputs.row(i) = x.transpose();
    s.targets.row(i) = y.transpose();
  }
  for (int k = 0; k < d; ++k) s.input_names.push_back("x" + std::to_string(k));
  for (int k = 0; k < s.targets.cols(); ++k) s.target_names.push_back("f" + std::to_string(k));
  return s;
}

std::pair<SampleSet, SampleSet> split_train_test(const SampleSet& s, int n_test) {
  require(n_test >= 1 && n_test < s.size(), "split_train_test: invalid test count");
  return {s.rows(0, s.size() - n_test), s.rows(s.size() - n_test, n_test)};
}

void write_csv(const std::string& path, const SampleSet& s) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  std::vector<std::string> names = s.input_names;
  names.insert(names.end(), s.target_names.begin(), s.target_names.end());
  for (size_t i = 0; i < names.size(); ++i) out << (i ? "," : "") << names[i];
  out << "\n" << std::setprecision(17);
  for (int r = 0; r < s.size(); ++r) {
    for (int k = 0; k < s.inputs.cols(); ++k) out << (k ? "," : "") << s.inputs(r, k);
    for (int k = 0; k < s.targets.cols(); ++k) out << "," << s.targets(r, k);
    out << "\n";
  }
}

SampleSet read_csv(const std::string& path, int n_inputs) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::string line;
  std::getline(in, line);
  std::vector<std::string> names;
  {
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) names.push_back(tok);
  }
  const int cols = static_cast<int>(names.size());
  require(n_inputs >= 1 && n_inputs < cols, "read_csv: bad input column count");
  std::vector<double> vals;
  int rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string tok;
    int c = 0;
    while (std::getline(ss, tok, ',')) {
      vals.push_back(std::stod(tok));
      ++c;
    }
    if (c != cols) throw DataError(path + ": row " + std::to_string(rows + 1) + " has wrong column count");
    ++rows;
  }
  Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> M(vals.data(), rows, cols);
  SampleSet s;
  s.inputs = M.leftCols(n_inputs);
  s.targets = M.rightCols(cols - n_inputs);
  s.input_names.assign(names.begin(), names.begin() + n_inputs);
  s.target_names.assign(names.begin() + n_inputs, names.end());
  s.box = {s.inputs.colwise().minCoeff().transpose(), s.inputs.colwise().maxCoeff().transpose()};
  return s;
}

std::pair<Vec, Vec> box_normalization(const Box& box) {
  Vec scale = box.half_width();
  for (Eigen::Index i = 0; i < scale.size(); ++i)
    if (scale[i] <= 0) scale[i] = 1.0;
  return {box.center(), scale};
}

SampleSet normalized(const SampleSet& s, const Vec& offset, const Vec& scale) {
  SampleSet out = s;
  out.inputs = (s.inputs.rowwise() - offset.transpose()).array().rowwise() / scale.transpose().array();
  out.box = {(s.box.lo - offset).cwiseQuotient(scale), (s.box.hi - offset).cwiseQuotient(scale)};
  return out;
}

}  // namespace dctmpc
