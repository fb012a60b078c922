#include <fstream>

#include "dctmpc/model_io.hpp"

namespace dctmpc {

json to_json(const Mat& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json r = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
    rows.push_back(r);
  }
  return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", rows}};
}

json to_json(const Vec& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Mat mat_from_json(const json& j) {
  const auto r = j.at("rows").get<Eigen::Index>(), c = j.at("cols").get<Eigen::Index>();
  Mat m(r, c);
  const json& d = j.at("data");
  if (static_cast<Eigen::Index>(d.size()) != r) throw DataError("matrix: row count mismatch");
  for (Eigen::Index i = 0; i < r; ++i) {
    if (static_cast<Eigen::Index>(d[i].size()) != c) throw DataError("matrix: column count mismatch");
    for (Eigen::Index k = 0; k < c; ++k) m(i, k) = d[i][k].get<double>();
  }
  return m;
}

Vec vec_from_json(const json& j) {
  Vec v(j.size());
  for (size_t i = 0; i < j.size(); ++i) v[i] = j[i].get<double>();
  return v;
}

json to_json(const FitReport& r) {
  return json{{"mae", r.mae},           {"mae_per_output", to_json(r.mae_per_output)},
              {"n_train", r.n_train},   {"n_test", r.n_test},
              {"wall_time", r.wall_time}, {"warning", r.warning},
              {"note", r.note}};
}

FitReport fit_report_from_json(const json& j) {
  FitReport r;
  r.mae = j.at("mae").get<double>();
  if (j.contains("mae_per_output")) r.mae_per_output = vec_from_json(j.at("mae_per_output"));
  r.n_train = j.value("n_train", 0);
  r.n_test = j.at("n_test").get<int>();
  r.wall_time = j.value("wall_time", 0.0);
  r.warning = j.value("warning", false);
  r.note = j.value("note", std::string());
  return r;
}

namespace {

json mats_to_json(const std::vector<Mat>& ms) {
  json a = json::array();
  for (const auto& m : ms) a.push_back(to_json(m));
  return a;
}

std::vector<Mat> mats_from_json(const json& j) {
  std::vector<Mat> out;
  for (const auto& e : j) out.push_back(mat_from_json(e));
  return out;
}

json basis_to_json(const MonomialBasis& b) {
  return json{{"dims", b.dims()}, {"degree", b.degree()}, {"order", "graded-lex"}, {"exponents", b.exponents()}};
}

MonomialBasis basis_from_json(const json& j) {
  MonomialBasis b(j.at("dims").get<int>(), j.at("degree").get<int>());
  if (j.contains("exponents") && j.at("exponents").get<std::vector<Exponent>>() != b.exponents())
    throw DataError("model file: basis exponents do not match graded-lex order");
  return b;
}

}  // namespace

json to_json(const DcFunction& f) {
  json j;
  j["kind"] = kind_name(f.kind());
  j["n_in"] = f.input_dim();
  j["n_out"] = f.output_dim();
  j["normalization"] = {{"offset", to_json(f.offset())}, {"scale", to_json(f.scale())}};
  json p;
  if (auto* m = std::get_if<PolyDcModel>(&f.rep())) {
    j["basis"] = basis_to_json(m->basis());
    p["G"] = mats_to_json(m->G());
    p["H"] = mats_to_json(m->H());
    if (m->certificate) {
      const auto& c = *m->certificate;
      j["certificate"] = {{"basis", basis_to_json(c.basis)}, {"g", mats_to_json(c.g)}, {"h", mats_to_json(c.h)},
                          {"tolerance", c.tolerance},      {"sigma", c.sigma}};
    }
  } else if (auto* m = std::get_if<DcnnModel>(&f.rep())) {
    json layers = json::array();
    for (const auto& L : m->hidden())
      layers.push_back({{"theta", to_json(L.theta)}, {"phi", to_json(L.phi)}, {"bias", to_json(L.bias)}});
    p["hidden"] = layers;
    p["activation"] = "relu";
    p["out_theta"] = to_json(m->out_theta());
    p["out_phi"] = to_json(m->out_phi());
    p["out_bias"] = to_json(m->out_bias());
  } else {
    const auto& r = std::get<RbfDcModel>(f.rep());
    p["kernel"] = "multiquadric";
    p["centers"] = to_json(r.centers());
    p["rho"] = to_json(r.rho());
    p["alpha"] = to_json(r.alpha());
  }
  j["parameters"] = p;
  return j;
}

DcFunction dc_function_from_json(const json& j) {
  const DcKind kind = kind_from_name(j.at("kind").get<std::string>());
  const json& p = j.at("parameters");
  Vec offset = vec_from_json(j.at("normalization").at("offset"));
  Vec scale = vec_from_json(j.at("normalization").at("scale"));
  if (kind == DcKind::Poly) {
    PolyDcModel m(basis_from_json(j.at("basis")), mats_from_json(p.at("G")), mats_from_json(p.at("H")));
    if (j.contains("certificate")) {
      const json& c = j.at("certificate");
      m.certificate = SosCertificate{basis_from_json(c.at("basis")), mats_from_json(c.at("g")),
                                     mats_from_json(c.at("h")), c.at("tolerance").get<double>(),
                                     c.at("sigma").get<double>()};
    }
    return DcFunction(std::move(m), offset, scale);
  }
  if (kind == DcKind::Dcnn) {
    std::vector<DcnnLayer> hidden;
    for (const auto& L : p.at("hidden"))
      hidden.push_back({mat_from_json(L.at("theta")), mat_from_json(L.at("phi")), vec_from_json(L.at("bias"))});
    return DcFunction(DcnnModel(std::move(hidden), mat_from_json(p.at("out_theta")), mat_from_json(p.at("out_phi")),
                                vec_from_json(p.at("out_bias"))),
                      offset, scale);
  }
  return DcFunction(RbfDcModel(mat_from_json(p.at("centers")), vec_from_json(p.at("rho")), mat_from_json(p.at("alpha"))),
                    offset, scale);
}

json to_json(const DcModel& m, const std::optional<FitReport>& report) {
  json j;
  j["format"] = "dctmpc-model";
  j["version"] = 1;
  j["kind"] = m.has_function() ? kind_name(m.function().kind()) : "linear";
  j["dims"] = {{"n_x", m.n_x()}, {"n_u", m.n_u()}, {"n_out", m.n_out()}};
  if (m.has_function()) {
    j["dc"] = to_json(m.function());
    j["inputs"] = m.input_index();
  }
  j["embedding"] = to_json(m.embedding());
  j["residual"] = {{"A", to_json(m.A_res())}, {"B", to_json(m.B_res())}, {"c", to_json(m.c_res())}};
  if (report) j["fit_report"] = to_json(*report);
  return j;
}

DcModel dc_model_from_json(const json& j, std::optional<FitReport>* report) {
  if (j.value("format", std::string()) != "dctmpc-model") throw DataError("not a dctmpc model file");
  const int n_x = j.at("dims").at("n_x").get<int>();
  const int n_u = j.at("dims").at("n_u").get<int>();
  std::optional<DcFunction> fn;
  std::vector<int> idx;
  if (j.contains("dc")) {
    fn = dc_function_from_json(j.at("dc"));
    idx = j.at("inputs").get<std::vector<int>>();
  }
  const json& r = j.at("residual");
  DcModel m(n_x, n_u, std::move(fn), idx, mat_from_json(j.at("embedding")), mat_from_json(r.at("A")),
            mat_from_json(r.at("B")), vec_from_json(r.at("c")));
  if (report) {
    if (j.contains("fit_report")) *report = fit_report_from_json(j.at("fit_report"));
    else report->reset();
  }
  return m;
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw DataError(path + ": " + e.what());
  }
}

void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << j.dump(1) << "\n";
}

void save_model(const std::string& path, const DcModel& m, const std::optional<FitReport>& report) {
  write_json_file(path, to_json(m, report));
}

DcModel load_model(const std::string& path, std::optional<FitReport>* report) {
  return dc_model_from_json(read_json_file(path), report);
}

}  // namespace dctmpc
