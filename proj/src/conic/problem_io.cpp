#include <json.hpp>

#include "dctmpc/conic.hpp"

namespace dctmpc::conic {

namespace {

using json = nlohmann::json;

json expr_json(const LinExpr& e) {
  json t = json::array();
  for (const auto& [i, c] : e.terms()) t.push_back({i, c});
  return json{{"terms", t}, {"const", e.constant()}};
}

LinExpr expr_from(const json& j) {
  LinExpr e(j.at("const").get<double>());
  for (const auto& t : j.at("terms")) e += LinExpr::term(t[0].get<int>(), t[1].get<double>());
  return e;
}

const char* kind_str(ConstraintKind k) {
  switch (k) {
    case ConstraintKind::Equality: return "eq";
    case ConstraintKind::Nonneg: return "nonneg";
    case ConstraintKind::Soc: return "soc";
    case ConstraintKind::Psd: return "psd";
    case ConstraintKind::Convex: return "convex";
  }
  return "?";
}

const char* var_str(VarKind k) {
  switch (k) {
    case VarKind::Scalar: return "scalar";
    case VarKind::Vector: return "vector";
    case VarKind::SymMatrix: return "symmetric";
  }
  return "?";
}

}  // namespace

std::string dump(const ConicProblem& problem) {
  json j;
  j["format"] = "dctmpc-conic";
  json vars = json::array();
  for (size_t k = 0; k < problem.variables().size(); ++k) {
    const auto& v = problem.variables()[k];
    vars.push_back({{"name", problem.variable_names()[k]}, {"kind", var_str(v.kind)}, {"dims", v.rows}});
  }
  j["variables"] = vars;
  json cons = json::array();
  for (const auto& c : problem.constraints()) {
    json cj{{"kind", kind_str(c.kind)}, {"tag", c.tag}};
    json ex = json::array();
    for (const auto& e : c.exprs) ex.push_back(expr_json(e));
    cj["exprs"] = ex;
    if (c.kind == ConstraintKind::Psd) cj["order"] = c.order;
    if (c.kind == ConstraintKind::Convex) {
      cj["affine"] = expr_json(c.affine);
      cj["function"] = c.fn->describe();
    }
    cons.push_back(cj);
  }
  j["constraints"] = cons;
  j["objective"] = expr_json(problem.objective());
  return j.dump(1);
}

ConicProblem rebuild(const std::string& text) {
  const json j = json::parse(text);
  ConicProblem p;
  for (const auto& v : j.at("variables")) {
    const std::string k = v.at("kind");
    const VarKind kind = k == "scalar" ? VarKind::Scalar : k == "vector" ? VarKind::Vector : VarKind::SymMatrix;
    p.add_variable(kind, v.at("dims").get<int>(), v.at("name").get<std::string>());
  }
  for (const auto& c : j.at("constraints")) {
    const std::string k = c.at("kind");
    const std::string tag = c.value("tag", std::string());
    LinVec ex;
    for (const auto& e : c.at("exprs")) ex.push_back(expr_from(e));
    if (k == "eq") p.add_equality(ex.at(0), tag);
    else if (k == "nonneg") p.add_nonneg(ex.at(0), tag);
    else if (k == "soc") p.add_soc(ex.at(0), LinVec(ex.begin() + 1, ex.end()), tag);
    else if (k == "psd") {
      const int order = c.at("order").get<int>();
      LinMat M(order, LinVec(order));
      size_t idx = 0;
      for (int col = 0; col < order; ++col)
        for (int row = col; row < order; ++row) M[row][col] = M[col][row] = ex.at(idx++);
      p.add_psd(M, tag);
    } else {
      throw DataError("rebuild: constraint kind '" + k + "' cannot be reconstructed from a dump");
    }
  }
  p.minimize(expr_from(j.at("objective")));
  return p;
}

}  // namespace dctmpc::conic
