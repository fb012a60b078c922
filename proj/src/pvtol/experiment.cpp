#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <random>

#include "dctmpc/pvtol.hpp"

namespace dctmpc {

namespace {

const char* integrator_name(Integrator i) { return i == Integrator::Euler ? "euler" : "rk4"; }

Integrator integrator_from_name(const std::string& s) {
  if (s == "euler") return Integrator::Euler;
  if (s == "rk4") return Integrator::Rk4;
  throw ArgumentError("unknown integrator '" + s + "'");
}

// Runs fn, prefixing any library error with the stage name while keeping its type.
template <class F>
auto stage(const std::string& name, F&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const SetupError& e) {
    throw SetupError(name + ": " + e.what());
  } catch (const InitializationError& e) {
    throw InitializationError(name + ": " + e.what());
  } catch (const RestorationError& e) {
    throw RestorationError(name + ": " + e.what());
  } catch (const TerminalDesignError& e) {
    throw TerminalDesignError(name + ": " + e.what());
  } catch (const LdiError& e) {
    throw LdiError(name + ": " + e.what());
  } catch (const SolverError& e) {
    throw SolverError(name + ": " + e.what());
  } catch (const TubeError& e) {
    throw TubeError(name + ": " + e.what());
  } catch (const TrainingError& e) {
    throw TrainingError(name + ": " + e.what());
  } catch (const DecompositionError& e) {
    throw DecompositionError(name + ": " + e.what());
  } catch (const DataError& e) {
    throw DataError(name + ": " + e.what());
  } catch (const ArgumentError& e) {
    throw ArgumentError(name + ": " + e.what());
  } catch (const Error& e) {
    throw Error(name + ": " + e.what());
  }
}

// Vertices of [-w, w]^2 on the velocity rows.
std::vector<Vec> velocity_box(double w) {
  if (w <= 0) return {};
  std::vector<Vec> out;
  for (int a = -1; a <= 1; a += 2)
    for (int b = -1; b <= 1; b += 2) {
      Vec v = Vec::Zero(4);
      v[1] = a * w;
      v[2] = b * w;
      out.push_back(v);
    }
  return out;
}

// Half widths of the sampled one-step error between the true dynamics and the model.
Vec model_error_box(const DcModel& model, const PvtolSetup& s, Integrator integ, int samples, unsigned long long seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  Vec eps = Vec::Zero(4);
  for (int i = 0; i < samples; ++i) {
    Vec x(4), u(2);
    for (int r = 0; r < 4; ++r) x[r] = s.xr[r] + s.dx[r] * unit(rng);
    for (int r = 0; r < 2; ++r) u[r] = s.ur[r] + s.du[r] * unit(rng);
    eps = eps.cwiseMax((pvtol_step(x, u, s.delta, Vec(), integ) - model.eval_f(x, u)).cwiseAbs());
  }
  return eps;
}

}  // namespace

json to_json(const ExperimentConfig& c) {
  json j;
  j["name"] = c.name;
  j["kind"] = kind_name(c.kind);
  j["tube"] = variant_name(c.tube);
  j["N"] = c.N;
  j["delta"] = c.delta;
  j["max_iters"] = c.max_iters;
  j["tolerance"] = c.tolerance;
  j["steps"] = c.steps;
  j["disturbance"] = c.disturbance;
  j["controller_w"] = c.controller_w;
  j["model_error"] = c.model_error;
  j["rho"] = c.rho;
  j["alpha"] = c.alpha;
  j["plant"] = c.plant;
  j["integrator"] = integrator_name(c.integrator);
  j["seed"] = c.seed;
  j["model_path"] = c.model_path;
  j["output_dir"] = c.output_dir;
  j["audit_relaxation"] = c.audit_relaxation;
  j["verbose"] = c.verbose;
  json f;
  f["samples"] = c.fit.samples;
  f["test"] = c.fit.test;
  f["degree"] = c.fit.degree;
  f["hidden_layers"] = c.fit.arch.hidden_layers;
  f["width"] = c.fit.arch.width;
  f["epochs"] = c.fit.dcnn.epochs;
  f["rbf_terms"] = c.fit.rbf_terms;
  f["seed"] = c.fit.seed;
  j["fit"] = f;
  return j;
}

ExperimentConfig experiment_from_json(const json& j) {
  if (!j.is_object()) throw ArgumentError("experiment config must be a JSON object");
  static const std::vector<std::string> known{"name",   "kind",        "tube",       "N",     "delta",
                                              "max_iters", "tolerance", "steps",      "disturbance",
                                              "controller_w", "model_error", "rho",   "alpha", "plant",
                                              "integrator", "seed",      "model_path", "output_dir",
                                              "audit_relaxation", "verbose", "fit"};
  for (auto it = j.begin(); it != j.end(); ++it)
    if (std::find(known.begin(), known.end(), it.key()) == known.end())
      throw ArgumentError("unknown experiment config key '" + it.key() + "'");
  ExperimentConfig c;
  try {
    c.name = j.value("name", c.name);
    if (j.contains("kind")) c.kind = kind_from_name(j.at("kind").get<std::string>());
    if (j.contains("tube")) c.tube = variant_from_name(j.at("tube").get<std::string>());
    c.N = j.value("N", c.N);
    c.delta = j.value("delta", c.delta);
    c.max_iters = j.value("max_iters", c.max_iters);
    c.tolerance = j.value("tolerance", c.tolerance);
    c.steps = j.value("steps", c.steps);
    c.disturbance = j.value("disturbance", c.disturbance);
    c.controller_w = j.value("controller_w", c.controller_w);
    c.model_error = j.value("model_error", c.model_error);
    c.rho = j.value("rho", c.rho);
    c.alpha = j.value("alpha", c.alpha);
    c.plant = j.value("plant", c.plant);
    if (j.contains("integrator")) c.integrator = integrator_from_name(j.at("integrator").get<std::string>());
    c.seed = j.value("seed", c.seed);
    c.model_path = j.value("model_path", c.model_path);
    c.output_dir = j.value("output_dir", c.output_dir);
    c.audit_relaxation = j.value("audit_relaxation", c.audit_relaxation);
    c.verbose = j.value("verbose", c.verbose);
    if (j.contains("fit")) {
      const json& f = j.at("fit");
      c.fit.samples = f.value("samples", c.fit.samples);
      c.fit.test = f.value("test", c.fit.test);
      c.fit.degree = f.value("degree", c.fit.degree);
      c.fit.arch.hidden_layers = f.value("hidden_layers", c.fit.arch.hidden_layers);
      c.fit.arch.width = f.value("width", c.fit.arch.width);
      c.fit.dcnn.epochs = f.value("epochs", c.fit.dcnn.epochs);
      c.fit.rbf_terms = f.value("rbf_terms", c.fit.rbf_terms);
      c.fit.seed = f.value("seed", c.fit.seed);
    }
  } catch (const json::exception& e) {
    throw ArgumentError(std::string("experiment config: ") + e.what());
  }
  c.fit.kind = c.kind;
  if (c.plant != "model" && c.plant != "true") throw ArgumentError("plant must be 'model' or 'true'");
  if (c.steps < 1 || c.N < 1 || c.max_iters < 1 || c.delta <= 0 || c.disturbance < 0)
    throw ArgumentError("experiment config: N, steps, max_iters, delta must be positive and disturbance nonnegative");
  return c;
}

MpcConfig pvtol_mpc_config(const ExperimentConfig& cfg, const PvtolSetup& s) {
  MpcConfig m;
  m.N = cfg.N;
  m.delta = cfg.delta;
  m.Q = s.Q;
  m.R = s.R;
  m.tolerance = cfg.tolerance;
  m.max_iters = cfg.max_iters;
  m.rho = cfg.rho;
  m.tube = cfg.tube == TubeVariant::Elementwise ? TubeParam::elementwise(4) : TubeParam::simplex(4);
  m.xr = s.xr;
  m.ur = s.ur;
  m.X = s.X;
  m.U = s.U;
  m.W = velocity_box(cfg.controller_w < 0 ? cfg.disturbance : cfg.controller_w);
  return m;
}

TerminalIngredients pvtol_terminal(const DcModel& model, const PvtolSetup& s, double alpha, Integrator integ,
                                   int audit_samples) {
  LdiOptions lo;
  lo.inflation = 1.25;
  lo.audit_samples = audit_samples;
  const LdiModel ldi = build_ldi({Dynamics::from_model(model), pvtol_dynamics(s.delta, integ)}, s.xr, s.ur, s.dx, s.du,
                                 LdiMode::CornerJacobians, lo);
  return compute_terminal(ldi, s.Q, s.R, alpha);
}

DcModel obtain_model(const ExperimentConfig& cfg, std::optional<FitReport>* report) {
  namespace fs = std::filesystem;
  if (!cfg.model_path.empty() && fs::exists(cfg.model_path)) {
    DcModel m = load_model(cfg.model_path, report);
    if (m.n_x() != 4 || m.n_u() != 2) throw DataError("model file " + cfg.model_path + " is not a PVTOL model");
    return m;
  }
  FitConfig fc = cfg.fit;
  fc.kind = cfg.kind;
  FitOutcome fo = fit_pvtol(fc);
  DcModel m = pvtol_model(fo.fn, cfg.delta);
  if (report) *report = fo.report;
  if (!cfg.model_path.empty()) {
    const fs::path parent = fs::path(cfg.model_path).parent_path();
    if (!parent.empty()) fs::create_directories(parent);
    save_model(cfg.model_path, m, fo.report);
  }
  return m;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, const DcModel* model, const TerminalIngredients* term) {
  const PvtolSetup s = PvtolSetup::defaults(cfg.delta);
  ExperimentResult res;
  res.model = model ? *model : stage("fit", [&] { return obtain_model(cfg, &res.fit); });
  MpcConfig mc = pvtol_mpc_config(cfg, s);
  if (cfg.model_error) mc.eps = model_error_box(res.model, s, cfg.integrator, 2000, cfg.seed + 11);
  res.term = term ? *term : stage("terminal", [&] { return pvtol_terminal(res.model, s, cfg.alpha, cfg.integrator); });
  if (mc.disturbed() && res.term.beta == 0.0) {
    std::vector<Vec> wv = mc.W.empty() ? std::vector<Vec>{Vec::Zero(4)} : mc.W;
    if (mc.eps.size())
      for (Vec& w : wv) w += mc.eps;
    res.term.beta = estimate_beta(res.term, Dynamics::from_model(res.model), wv, 2000, cfg.seed + 13);
  }

  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unif(-cfg.disturbance, cfg.disturbance);
  const DcModel& m = res.model;
  Plant plant = [&](const Vec& x, const Vec& u, int) {
    Vec w = Vec::Zero(2);
    if (cfg.disturbance > 0) {
      w[0] = unif(rng);
      w[1] = unif(rng);
    }
    if (cfg.plant == "true") return pvtol_step(x, u, cfg.delta, w, cfg.integrator);
    Vec next = m.eval_f(x, u);
    next.segment(1, 2) += w;
    return next;
  };
  RunOptions ro;
  ro.audit_relaxation = cfg.audit_relaxation;
  ro.verbose = cfg.verbose;
  res.log = stage("closed loop", [&] { return run_controller(mc, m, res.term, plant, s.x0, cfg.steps, ro); });
  res.summary = summarize(res.log, s);
  res.summary["config"] = to_json(cfg);
  if (res.fit) res.summary["fit"] = to_json(*res.fit);
  res.summary["terminal"] = {{"gamma", res.term.gamma}, {"beta", res.term.beta}, {"trace_Q_hat", res.term.Q_hat.trace()}};

  if (!cfg.output_dir.empty()) {
    namespace fs = std::filesystem;
    fs::create_directories(cfg.output_dir);
    const fs::path dir(cfg.output_dir);
    res.log.write_csv((dir / (cfg.name + "_log.csv")).string());
    {
      std::ofstream f(dir / (cfg.name + "_states.csv"));
      f << "n,alpha,ydot,zdot,alphadot\n";
      f.precision(17);
      for (size_t n = 0; n < res.log.states.size(); ++n) {
        f << n;
        for (int i = 0; i < res.log.states[n].size(); ++i) f << ',' << res.log.states[n][i];
        f << '\n';
      }
    }
    write_json_file((dir / (cfg.name + "_summary.json")).string(), res.summary);
    std::ofstream t(dir / (cfg.name + "_summary.txt"));
    t << "run " << cfg.name << " (" << kind_name(cfg.kind) << ", " << variant_name(cfg.tube) << ", N=" << cfg.N
      << ", max_iters=" << cfg.max_iters << ")\n";
    for (const char* k : {"final_error", "min_error", "steps_to_1e-2", "max_constraint_violation", "infeasible_events",
                          "max_restore_steps", "mean_solve_time", "total_solve_time", "within_step_increase",
                          "across_step_increase"})
      t << "  " << k << ": " << res.summary[k].dump() << '\n';
  }
  return res;
}

json summarize(const ClosedLoopLog& log, const PvtolSetup& s) {
  json j;
  std::vector<Vec> states = log.states;
  if (states.empty())
    for (const LogRow& r : log.rows)
      if (r.j == 0) states.push_back(r.x);
  std::vector<Vec> inputs = log.inputs;
  if (inputs.empty())
    for (const LogRow& r : log.rows)
      if (r.j == 0) inputs.push_back(r.u);

  std::vector<double> err;
  for (const Vec& x : states) err.push_back((x - s.xr).norm());
  j["error_trace"] = err;
  j["final_error"] = err.empty() ? 0.0 : err.back();
  j["min_error"] = err.empty() ? 0.0 : *std::min_element(err.begin(), err.end());
  int reach = -1;
  for (size_t n = 0; n < err.size(); ++n)
    if (err[n] <= 1e-2) {
      reach = static_cast<int>(n);
      break;
    }
  j["steps_to_1e-2"] = reach;

  double viol = 0.0;
  for (const Vec& x : states) viol = std::max(viol, s.X.violation(x));
  for (const Vec& u : inputs) viol = std::max(viol, s.U.violation(u));
  j["max_constraint_violation"] = viol;

  // Objective per time step (last iteration) and its monotonicity.
  std::vector<double> Jf = log.J_final;
  if (Jf.empty())
    for (size_t i = 0; i < log.rows.size(); ++i)
      if (i + 1 == log.rows.size() || log.rows[i + 1].n != log.rows[i].n) Jf.push_back(log.rows[i].J);
  j["objective_trace"] = Jf;
  double within = 0.0, across = 0.0;
  for (size_t i = 1; i < log.rows.size(); ++i)
    if (log.rows[i].n == log.rows[i - 1].n) within = std::max(within, log.rows[i].J - log.rows[i - 1].J);
  for (size_t n = 1; n < Jf.size(); ++n) across = std::max(across, Jf[n] - Jf[n - 1]);
  j["within_step_increase"] = within;
  j["across_step_increase"] = across;

  std::vector<double> times;
  double relax = -std::numeric_limits<double>::infinity();
  int restore_max = 0, events = 0;
  for (const LogRow& r : log.rows) {
    times.push_back(r.solve_time);
    relax = std::max(relax, r.relax_violation);
    if (r.backtracks > 0) {
      ++events;
      restore_max = std::max(restore_max, r.backtracks);
    }
  }
  if (!log.restore_steps.empty()) {
    events = log.infeasible_events();
    restore_max = *std::max_element(log.restore_steps.begin(), log.restore_steps.end());
  }
  const double total = std::accumulate(times.begin(), times.end(), 0.0);
  j["iterations"] = static_cast<int>(log.rows.size());
  j["mean_solve_time"] = times.empty() ? 0.0 : total / times.size();
  j["total_solve_time"] = total;
  j["init_time"] = log.init_time;
  j["infeasible_events"] = events;
  j["max_restore_steps"] = restore_max;
  j["restore_steps"] = log.restore_steps;
  j["max_relax_violation"] = log.rows.empty() ? 0.0 : relax;
  return j;
}

std::vector<TimingRow> timing_sweep(const ExperimentConfig& base, const std::vector<int>& horizons, const DcModel& model,
                                    const TerminalIngredients& term) {
  const PvtolSetup s = PvtolSetup::defaults(base.delta);
  std::vector<TimingRow> out;
  for (int N : horizons) {
    ExperimentConfig c = base;
    c.N = N;
    MpcConfig mc = pvtol_mpc_config(c, s);
    Plant plant = [&](const Vec& x, const Vec& u, int) { return model.eval_f(x, u); };
    const ClosedLoopLog log = stage("sweep N=" + std::to_string(N),
                                    [&] { return run_controller(mc, model, term, plant, s.x0, c.steps); });
    std::vector<double> t;
    for (const LogRow& r : log.rows) t.push_back(r.solve_time);
    TimingRow row;
    row.kind = kind_name(base.kind);
    row.N = N;
    row.count = static_cast<int>(t.size());
    row.mean = std::accumulate(t.begin(), t.end(), 0.0) / std::max<size_t>(1, t.size());
    double var = 0.0;
    for (double v : t) var += (v - row.mean) * (v - row.mean);
    row.stddev = t.size() > 1 ? std::sqrt(var / (t.size() - 1)) : 0.0;
    out.push_back(row);
  }
  return out;
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  require(a.size() == b.size() && a.size() >= 2, "spearman: need two equal-length samples of size >= 2");
  auto ranks = [](const std::vector<double>& v) {
    std::vector<size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](size_t i, size_t k) { return v[i] < v[k]; });
    std::vector<double> r(v.size());
    for (size_t i = 0; i < idx.size();) {
      size_t e = i;
      while (e + 1 < idx.size() && v[idx[e + 1]] == v[idx[i]]) ++e;
      for (size_t k = i; k <= e; ++k) r[idx[k]] = 0.5 * (i + e) + 1.0;  // ties share the mean rank
      i = e + 1;
    }
    return r;
  };
  const std::vector<double> ra = ranks(a), rb = ranks(b);
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / ra.size();
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / rb.size();
  double num = 0, da = 0, db = 0;
  for (size_t i = 0; i < ra.size(); ++i) {
    num += (ra[i] - ma) * (rb[i] - mb);
    da += (ra[i] - ma) * (ra[i] - ma);
    db += (rb[i] - mb) * (rb[i] - mb);
  }
  if (da == 0 || db == 0) return 0.0;
  return num / std::sqrt(da * db);
}

}  // namespace dctmpc
