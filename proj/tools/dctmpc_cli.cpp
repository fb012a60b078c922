#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>

#include "dctmpc/pvtol.hpp"

using namespace dctmpc;

namespace {

// 0 success, 1 bad input, 2 infeasible setup, 3 restoration failure, 4 solver failure.
int exit_code(const std::exception& e) {
  if (dynamic_cast<const RestorationError*>(&e)) return 3;
  if (dynamic_cast<const SetupError*>(&e) || dynamic_cast<const InitializationError*>(&e) ||
      dynamic_cast<const TerminalDesignError*>(&e) || dynamic_cast<const LdiError*>(&e))
    return 2;
  if (dynamic_cast<const ArgumentError*>(&e) || dynamic_cast<const DataError*>(&e)) return 1;
  return 4;
}

void print_summary(const json& s) {
  std::printf("final error        %.3e\n", s.value("final_error", 0.0));
  std::printf("steps to 1e-2      %d\n", s.value("steps_to_1e-2", -1));
  std::printf("constraint viol.   %.3e\n", s.value("max_constraint_violation", 0.0));
  std::printf("infeasible events  %d (max restore steps %d)\n", s.value("infeasible_events", 0),
              s.value("max_restore_steps", 0));
  std::printf("solve time         %.3f s mean, %.1f s total\n", s.value("mean_solve_time", 0.0),
              s.value("total_solve_time", 0.0));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DC tube MPC tools for the PVTOL benchmark"};
  app.require_subcommand(1);

  FitConfig fit;
  double alpha = 1.0, delta = 0.5;
  std::string kind = "poly", model_out = "model.json";
  auto* fit_cmd = app.add_subcommand("fit", "Fit a DC model of the PVTOL accelerations and save it");
  fit_cmd->add_option("--kind", kind, "poly, dcnn or rbf")->check(CLI::IsMember({"poly", "dcnn", "rbf"}));
  fit_cmd->add_option("--samples", fit.samples, "training samples");
  fit_cmd->add_option("--test", fit.test, "held-out samples");
  fit_cmd->add_option("--degree", fit.degree, "polynomial degree 2d");
  fit_cmd->add_option("--width", fit.arch.width, "DCNN hidden width");
  fit_cmd->add_option("--epochs", fit.dcnn.epochs, "DCNN epochs");
  fit_cmd->add_option("--rbf-terms", fit.rbf_terms, "number of RBF centres");
  fit_cmd->add_option("--seed", fit.seed);
  fit_cmd->add_option("--delta", delta, "time step of the model");
  fit_cmd->add_option("-o,--out", model_out, "model file");

  std::string model_in, term_out = "terminal.json";
  auto* term_cmd = app.add_subcommand("terminal", "Design terminal ingredients for a saved model");
  term_cmd->add_option("-m,--model", model_in, "model file")->required()->check(CLI::ExistingFile);
  term_cmd->add_option("--alpha", alpha, "trade-off weight on 1/gamma");
  term_cmd->add_option("--delta", delta, "time step the model was built for");
  term_cmd->add_option("-o,--out", term_out, "ingredients file");

  std::string config_path, run_model, run_term, out_dir;
  int steps = 0;
  auto* run_cmd = app.add_subcommand("run", "Run a closed-loop experiment from a JSON config");
  run_cmd->add_option("-c,--config", config_path, "experiment config")->required()->check(CLI::ExistingFile);
  run_cmd->add_option("-m,--model", run_model, "use this model instead of the config's")->check(CLI::ExistingFile);
  run_cmd->add_option("-t,--terminal", run_term, "precomputed terminal ingredients")->check(CLI::ExistingFile);
  run_cmd->add_option("-o,--output-dir", out_dir, "override the output directory");
  run_cmd->add_option("--steps", steps, "override the number of closed-loop steps");

  std::string sweep_config, sweep_model, sweep_out = "timing.csv";
  std::vector<int> horizons{10, 20, 30, 40, 50};
  int sweep_steps = 3;
  auto* sweep_cmd = app.add_subcommand("sweep", "Per-iteration solve time against the horizon");
  sweep_cmd->add_option("-c,--config", sweep_config, "base experiment config")->check(CLI::ExistingFile);
  sweep_cmd->add_option("-m,--model", sweep_model, "model file")->required()->check(CLI::ExistingFile);
  sweep_cmd->add_option("-N,--horizons", horizons, "horizons")->delimiter(',');
  sweep_cmd->add_option("--steps", sweep_steps, "closed-loop steps per horizon");
  sweep_cmd->add_option("-o,--out", sweep_out, "CSV table");

  std::vector<std::string> summaries;
  auto* cmp_cmd = app.add_subcommand("compare", "Tabulate several run summaries");
  cmp_cmd->add_option("summaries", summaries, "summary JSON files")->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*fit_cmd) {
      fit.kind = kind_from_name(kind);
      FitOutcome fo = fit_pvtol(fit);
      save_model(model_out, pvtol_model(fo.fn, delta), fo.report);
      std::printf("%s fit: MAE", kind.c_str());
      for (int i = 0; i < fo.report.mae_per_output.size(); ++i) std::printf(" %.4f", fo.report.mae_per_output[i]);
      std::printf(" (%.1f s)%s\n", fo.report.wall_time, fo.report.warning ? " [warning]" : "");
      if (!fo.report.note.empty()) std::printf("note: %s\n", fo.report.note.c_str());
      std::printf("wrote %s\n", model_out.c_str());
    } else if (*term_cmd) {
      const DcModel m = load_model(model_in);
      const PvtolSetup s = PvtolSetup::defaults(delta);
      const TerminalIngredients t = pvtol_terminal(m, s, alpha);
      const DescentAudit a = audit_descent(t, pvtol_dynamics(delta), 10000, 3, s.X, s.U);
      write_json_file(term_out, to_json(t));
      std::printf("gamma %.6g  tr(Q_hat) %.6g  descent audit worst %.3e%s\n", t.gamma, t.Q_hat.trace(),
                  a.worst_residual, a.worst_residual <= 1e-6 ? "" : " [FAILED]");
      std::printf("wrote %s\n", term_out.c_str());
    } else if (*run_cmd) {
      ExperimentConfig cfg = experiment_from_json(read_json_file(config_path));
      if (!out_dir.empty()) cfg.output_dir = out_dir;
      if (steps > 0) cfg.steps = steps;
      std::optional<DcModel> m;
      std::optional<TerminalIngredients> t;
      if (!run_model.empty()) m = load_model(run_model);
      if (!run_term.empty()) t = terminal_from_json(read_json_file(run_term));
      const ExperimentResult r = run_experiment(cfg, m ? &*m : nullptr, t ? &*t : nullptr);
      std::printf("run %s\n", cfg.name.c_str());
      print_summary(r.summary);
    } else if (*sweep_cmd) {
      ExperimentConfig cfg;
      if (!sweep_config.empty()) cfg = experiment_from_json(read_json_file(sweep_config));
      cfg.steps = sweep_steps;
      const DcModel m = load_model(sweep_model);
      const TerminalIngredients t = pvtol_terminal(m, PvtolSetup::defaults(cfg.delta), cfg.alpha, cfg.integrator);
      const auto rows = timing_sweep(cfg, horizons, m, t);
      std::ofstream f(sweep_out);
      f << "kind,N,mean,stddev,count\n";
      std::vector<double> ns, means;
      for (const TimingRow& r : rows) {
        f << r.kind << ',' << r.N << ',' << r.mean << ',' << r.stddev << ',' << r.count << '\n';
        std::printf("N=%3d  %.4f s +- %.4f (%d iterations)\n", r.N, r.mean, r.stddev, r.count);
        ns.push_back(r.N);
        means.push_back(r.mean);
      }
      if (rows.size() >= 2) std::printf("spearman(N, time) = %.3f\n", spearman(ns, means));
    } else if (*cmp_cmd) {
      std::printf("%-24s %12s %8s %12s %8s %10s\n", "run", "final_err", "t_1e-2", "viol", "infeas", "mean_t");
      for (const std::string& p : summaries) {
        const json s = read_json_file(p);
        const std::string name = s.contains("config") ? s["config"].value("name", p) : p;
        std::printf("%-24s %12.3e %8d %12.3e %8d %10.4f\n", name.c_str(), s.value("final_error", 0.0),
                    s.value("steps_to_1e-2", -1), s.value("max_constraint_violation", 0.0),
                    s.value("infeasible_events", 0), s.value("mean_solve_time", 0.0));
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e);
  }
  return 0;
}
