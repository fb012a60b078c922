#include <gtest/gtest.h>

#include <cmath>

#include "dctmpc/pvtol.hpp"

using namespace dctmpc;

namespace {

Vec vec4(double a, double b, double c, double d) { return (Vec(4) << a, b, c, d).finished(); }
Vec vec2(double a, double b) { return (Vec(2) << a, b).finished(); }

}  // namespace

TEST(PvtolStep, EquilibriumOnlyIntegratesAngle) {
  const Vec x = vec4(0, 1.0, -2.0, 0.3);
  const Vec xn = pvtol_step(x, Vec::Zero(2), 0.5);
  EXPECT_LT((xn - vec4(0.15, 1.0, -2.0, 0.3)).norm(), 1e-15);
  const Vec xw = pvtol_step(x, Vec::Zero(2), 0.5, vec2(0.1, -0.2));
  EXPECT_LT((xw - vec4(0.15, 1.1, -2.2, 0.3)).norm(), 1e-15);
}

TEST(PvtolStep, SidewaysThrustGivesGravityAcceleration) {
  const Vec a = pvtol_accelerations(vec2(M_PI / 2, 0.0));
  EXPECT_NEAR(a[0], 9.81, 1e-12);
  EXPECT_NEAR(a[1], -9.81, 1e-12);
  const Vec f = pvtol_vector_field(vec4(M_PI / 2, 0, 0, 0), Vec::Zero(2));
  EXPECT_NEAR(f[1], 9.81, 1e-12);
}

TEST(PvtolStep, DifferenceQuotientConvergesToVectorField) {
  const Vec x = vec4(0.4, 1.0, -0.5, 0.2), u = vec2(1.5, -0.7);
  const Vec f = pvtol_vector_field(x, u);
  // Euler is exact by construction; RK4 is first order in the quotient.
  EXPECT_LT(((pvtol_step(x, u, 1e-2) - x) / 1e-2 - f).norm(), 1e-12);
  const double e2 = ((pvtol_step(x, u, 1e-2, Vec(), Integrator::Rk4) - x) / 1e-2 - f).norm();
  const double e3 = ((pvtol_step(x, u, 1e-3, Vec(), Integrator::Rk4) - x) / 1e-3 - f).norm();
  EXPECT_NEAR(e2 / e3, 10.0, 0.5);
}

TEST(PvtolModel, LinearRowsAndCalibration) {
  MonomialBasis b(2, 1);
  Mat G = Mat::Zero(3, 3);
  G(0, 0) = 2.0;  // constant output 2
  const DcFunction fn(PolyDcModel(b, {G, G}, {Mat::Zero(3, 3), Mat::Zero(3, 3)}));
  const DcModel m = pvtol_model(fn, 0.5);
  EXPECT_LT(m.eval_f(Vec::Zero(4), Vec::Zero(2)).norm(), 1e-12);
  const Vec xn = m.eval_f(vec4(0.1, 0.2, 0.3, 0.4), vec2(0.0, 1.0));
  EXPECT_NEAR(xn[0], 0.1 + 0.5 * 0.4, 1e-12);
  EXPECT_NEAR(xn[3], 0.4 + 0.5 * 1.0, 1e-12);
}

TEST(Config, JsonRoundTripAndValidation) {
  ExperimentConfig c;
  c.name = "x";
  c.kind = DcKind::Rbf;
  c.tube = TubeVariant::Simplex;
  c.N = 7;
  c.disturbance = 0.3;
  c.integrator = Integrator::Rk4;
  c.fit.samples = 1234;
  const ExperimentConfig d = experiment_from_json(to_json(c));
  EXPECT_EQ(to_json(d), to_json(c));
  json bad = to_json(c);
  bad["horizon"] = 3;
  EXPECT_THROW(experiment_from_json(bad), ArgumentError);
  json neg = to_json(c);
  neg["N"] = 0;
  EXPECT_THROW(experiment_from_json(neg), ArgumentError);
  json plant = to_json(c);
  plant["plant"] = "hardware";
  EXPECT_THROW(experiment_from_json(plant), ArgumentError);
}

TEST(Config, ControllerDisturbanceSet) {
  const PvtolSetup s = PvtolSetup::defaults();
  ExperimentConfig c;
  c.disturbance = 0.1;
  EXPECT_FALSE(pvtol_mpc_config(c, s).disturbed());
  c.controller_w = -1;
  const MpcConfig m = pvtol_mpc_config(c, s);
  ASSERT_EQ(m.W.size(), 4u);
  for (const Vec& w : m.W) {
    EXPECT_DOUBLE_EQ(std::abs(w[1]), 0.1);
    EXPECT_DOUBLE_EQ(std::abs(w[2]), 0.1);
    EXPECT_EQ(w[0], 0.0);
    EXPECT_EQ(w[3], 0.0);
  }
}

TEST(Spearman, RanksAndTies) {
  EXPECT_DOUBLE_EQ(spearman({1, 2, 3, 4}, {10, 20, 35, 90}), 1.0);
  EXPECT_DOUBLE_EQ(spearman({1, 2, 3, 4}, {4, 3, 2, 1}), -1.0);
  // Tied pair gets rank 2.5: 4.5 / sqrt(4.5 * 5).
  EXPECT_NEAR(spearman({1, 2, 2, 3}, {1, 2, 3, 4}), 4.5 / std::sqrt(22.5), 1e-12);
}

TEST(Summary, SyntheticLog) {
  const PvtolSetup s = PvtolSetup::defaults();
  ClosedLoopLog log;
  log.states = {vec4(1, 0, 0, 0), vec4(0.1, 0, 0, 0), vec4(0.005, 0, 0, 0)};
  log.inputs = {vec2(0, 11.0), vec2(0, 0)};
  auto row = [](int n, int j, double J, int bt, double t) {
    LogRow r;
    r.n = n;
    r.j = j;
    r.J = J;
    r.backtracks = bt;
    r.solve_time = t;
    return r;
  };
  log.rows = {row(0, 0, 5.0, 0, 1.0), row(0, 1, 4.0, 0, 2.0), row(1, 0, 4.5, 2, 3.0)};
  log.J_final = {4.0, 4.5};
  log.restore_steps = {2};
  const json j = summarize(log, s);
  EXPECT_DOUBLE_EQ(j["final_error"].get<double>(), 0.005);
  EXPECT_EQ(j["steps_to_1e-2"].get<int>(), 2);
  EXPECT_DOUBLE_EQ(j["max_constraint_violation"].get<double>(), 1.0);
  EXPECT_DOUBLE_EQ(j["within_step_increase"].get<double>(), 0.0);
  EXPECT_DOUBLE_EQ(j["across_step_increase"].get<double>(), 0.5);
  EXPECT_DOUBLE_EQ(j["mean_solve_time"].get<double>(), 2.0);
  EXPECT_EQ(j["infeasible_events"].get<int>(), 1);
  EXPECT_EQ(j["max_restore_steps"].get<int>(), 2);

  // Recomputable from the raw rows alone.
  ClosedLoopLog raw;
  raw.rows = log.rows;
  for (size_t i = 0; i < raw.rows.size(); ++i) {
    raw.rows[i].x = log.states[raw.rows[i].n];
    raw.rows[i].u = log.inputs[raw.rows[i].n];
  }
  const json r = summarize(raw, s);
  EXPECT_EQ(r["objective_trace"], j["objective_trace"]);
  EXPECT_EQ(r["infeasible_events"], j["infeasible_events"]);
  EXPECT_EQ(r["max_restore_steps"], j["max_restore_steps"]);
}

TEST(Experiment, SmallRunIsDeterministicAndNamesStages) {
  ExperimentConfig c;
  c.N = 4;
  c.steps = 3;
  c.fit.samples = 3000;
  c.fit.degree = 4;
  c.fit.test = 100;
  const DcModel m = obtain_model(c);
  const ExperimentResult a = run_experiment(c, &m), b = run_experiment(c, &m);
  ASSERT_EQ(a.log.rows.size(), b.log.rows.size());
  for (size_t i = 0; i < a.log.rows.size(); ++i) EXPECT_EQ(a.log.rows[i].solver_iters, b.log.rows[i].solver_iters);
  EXPECT_LE(a.summary["max_constraint_violation"].get<double>(), 1e-6);

  TerminalIngredients broken = a.term;
  broken.gamma = 0.0;
  try {
    run_experiment(c, &m, &broken);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(std::string(e.what()).rfind("closed loop: ", 0), 0u) << e.what();
  }
}
