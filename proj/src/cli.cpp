#include "ctap/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "ctap/error.hpp"
#include "ctap/pipeline.hpp"
#include "json.hpp"

namespace ctap {

namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

struct Manifest {
  std::string command;
  std::string sweep_mode;
  std::string net_path;
  std::string trips_path;
  int k = 8;
  std::optional<double> tau;
  std::optional<double> quantile;
  Eigen::Index rank = 50;
  std::vector<Eigen::Index> ranks{50, 100, 150, 200};
  SolverConfig solver;
  std::string strategy = "mixed";
  std::string nominal = "ref";
  bool warm_start = false;
  int max_iters = ReferenceConfig{}.max_iterations;
  std::string out = ".";
};

ordered_json manifest_json(const Manifest& m) {
  ordered_json j;
  j["schema"] = "ctap.manifest.v1";
  j["command"] = m.command;
  if (!m.sweep_mode.empty()) j["sweep_mode"] = m.sweep_mode;
  j["network_path"] = m.net_path;
  j["trips_path"] = m.trips_path;
  j["k"] = m.k;
  j["tau"] = m.tau ? ordered_json(*m.tau) : ordered_json();
  j["quantile"] = m.quantile ? ordered_json(*m.quantile) : ordered_json();
  j["rank"] = m.rank;
  if (m.command == "sweep" && m.sweep_mode == "rank") j["ranks"] = m.ranks;
  j["strategy"] = m.strategy;
  j["nominal"] = m.nominal;
  j["warm_start"] = m.warm_start;
  j["max_iters"] = m.max_iters;
  ordered_json s;
  s["beta"] = m.solver.beta;
  s["gamma"] = m.solver.gamma;
  s["c0_eq"] = m.solver.c1_initial;
  s["c0_ineq"] = m.solver.c2_initial;
  s["tol"] = m.solver.tol;
  s["max_outer"] = m.solver.max_outer;
  s["max_inner"] = m.solver.max_inner_per_outer;
  j["solver"] = s;
  j["output_directory"] = m.out;
  return j;
}

void prepare_output(const Manifest& m) {
  std::error_code ec;
  fs::create_directories(m.out, ec);
  if (ec || !fs::is_directory(m.out)) throw InputError("output directory '" + m.out + "' is not writable");
  write_text_file((fs::path(m.out) / "manifest.json").string(), manifest_json(m).dump(2) + "\n");
}

std::string out_file(const Manifest& m, const std::string& name) { return (fs::path(m.out) / name).string(); }

Instance load_instance(const Manifest& m) {
  InstanceOptions opt;
  opt.k = m.k;
  opt.reference.max_iterations = m.max_iters;
  opt.nominal = parse_nominal(m.nominal);
  return make_instance(load_network(m.net_path), load_trips(m.trips_path), opt);
}

RunOptions run_options(const Manifest& m) {
  RunOptions opt;
  opt.solver = m.solver;
  opt.solver.rank = m.rank;
  opt.solver.strategy = parse_strategy(m.strategy);
  opt.solver.validate();
  return opt;
}

/// tau from --tau or --quantile (default quantile when neither was given).
double resolve_tau(const Manifest& m, const Instance& inst, double* quantile_out, std::optional<double> fallback_q) {
  if (m.tau && m.quantile) throw InputError("give exactly one of --tau and --quantile");
  if (m.tau) {
    if (*m.tau < 0.0) throw InputError("--tau must be >= 0");
    *quantile_out = -1.0;
    return *m.tau;
  }
  std::optional<double> q = m.quantile ? m.quantile : fallback_q;
  if (!q) throw InputError("give exactly one of --tau and --quantile");
  *quantile_out = *q;
  return tau_for_quantile(inst, *q);
}

int cmd_reference(const Manifest& m) {
  prepare_output(m);
  Network net = load_network(m.net_path);
  DemandTable demand = load_trips(m.trips_path);
  const auto diagnostics = validate_network(net, demand);
  if (!diagnostics.empty()) throw InputError(diagnostics.front());
  const IncidenceSystem sys = build_incidence_system(net, demand, m.k);
  ReferenceConfig cfg;
  cfg.max_iterations = m.max_iters;
  const ReferenceSolution sol = solve_reference_ue(sys, net, cfg);
  write_text_file(out_file(m, "reference.json"), reference_to_json(sol));
  std::printf("reference: gap=%.3e iterations=%d objective=%.9g status=%s\n", sol.relative_gap, sol.iterations,
              beckmann_objective(net, sol.v_star), sol.converged ? "converged" : "not_converged");
  return 0;
}

int cmd_solve(const Manifest& m) {
  const RunOptions base = run_options(m);
  prepare_output(m);
  const Instance inst = load_instance(m);
  RunOptions opt = base;
  const double tau = resolve_tau(m, inst, &opt.quantile, std::nullopt);
  const RunResult res = run_compressed(inst, tau, opt);
  write_text_file(out_file(m, "compression_model.json"), compression_model_to_json(res.problem));
  write_text_file(out_file(m, "solution.json"), solution_to_json(res.solution, res.problem));
  write_text_file(out_file(m, "trace.csv"), trace_csv(res.solution));
  emit_report({res.report}, ReportFormat::csv, out_file(m, "report.csv"));
  emit_report({res.report}, ReportFormat::json, out_file(m, "report.json"));
  Eigen::VectorXd spectrum;
  if (res.problem.minor_count() > 0) spectrum = singular_values(minor_block(inst.sys, res.problem.partition));
  write_text_file(out_file(m, "spectrum.csv"), spectrum_csv(spectrum));
  const SolveReport& r = res.report;
  std::printf("solve: tau=%.6g r=%ld reduction=%.2f%% gap=%.4f%% R2=%.6f outer=%d inner=%d status=%s\n", r.tau,
              static_cast<long>(r.r), r.reduction_pct, r.bpr_gap_pct, r.link_r2, r.outer_iters, r.total_inner_iters,
              r.status.c_str());
  if (!res.solution.inner_failure.empty()) std::printf("inner solver: %s\n", res.solution.inner_failure.c_str());
  return 0;
}

std::string tuning_csv(const std::vector<std::array<double, 3>>& params, const std::vector<SolveReport>& rows) {
  std::string out = "tol,beta,c0," + reports_csv({}).substr(0);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::string line = reports_csv({rows[i]});
    line = line.substr(line.find('\n') + 1);
    char prefix[96];
    std::snprintf(prefix, sizeof prefix, "%.6g,%.6g,%.6g,", params[i][0], params[i][1], params[i][2]);
    out += prefix + line;
  }
  return out;
}

int cmd_sweep(const Manifest& m) {
  const RunOptions base = run_options(m);
  prepare_output(m);
  const Instance inst = load_instance(m);
  std::vector<SolveReport> rows;
  if (m.sweep_mode == "tau") {
    if (m.tau || m.quantile) throw InputError("tau sweep takes neither --tau nor --quantile");
    rows = sweep_thresholds(inst, default_quantiles(), base, m.warm_start);
  } else if (m.sweep_mode == "rank") {
    RunOptions opt = base;
    const double tau = resolve_tau(m, inst, &opt.quantile, 0.9);
    std::vector<std::string> diagnostics;
    rows = sweep_ranks(inst, tau, m.ranks, opt, &diagnostics);
    for (const auto& d : diagnostics) std::fprintf(stderr, "%s\n", d.c_str());
  } else {
    RunOptions opt = base;
    const double tau = resolve_tau(m, inst, &opt.quantile, 0.9);
    std::vector<std::array<double, 3>> params;
    for (double tol : {1e-4, 1e-6})
      for (double beta : {4.0, 10.0})
        for (double c0 : {10.0, 100.0, 1000.0}) {
          RunOptions run = opt;
          run.solver.tol = tol;
          run.solver.beta = beta;
          run.solver.c1_initial = run.solver.c2_initial = c0;
          params.push_back({tol, beta, c0});
          try {
            rows.push_back(run_compressed(inst, tau, run).report);
          } catch (const std::exception& e) {
            SolveReport bad;
            bad.tau = tau;
            bad.quantile = opt.quantile;
            bad.status = std::string("error: ") + e.what();
            for (char& ch : bad.status)
              if (ch == ',' || ch == '\n') ch = ';';
            rows.push_back(bad);
          }
        }
    write_text_file(out_file(m, "sweep_tuning.csv"), tuning_csv(params, rows));
    emit_report(rows, ReportFormat::json, out_file(m, "sweep_tuning.json"));
    std::printf("sweep tuning: %zu rows\n", rows.size());
    return 0;
  }
  emit_report(rows, ReportFormat::csv, out_file(m, "sweep_" + m.sweep_mode + ".csv"));
  emit_report(rows, ReportFormat::json, out_file(m, "sweep_" + m.sweep_mode + ".json"));
  std::printf("sweep %s: %zu rows\n", m.sweep_mode.c_str(), rows.size());
  return 0;
}

void add_common(CLI::App* sub, Manifest& m) {
  sub->add_option("--net", m.net_path, "TNTP network file")->required();
  sub->add_option("--trips", m.trips_path, "TNTP trips file")->required();
  sub->add_option("--k", m.k, "paths per OD pair")->check(CLI::PositiveNumber);
  sub->add_option("--out", m.out, "output directory");
  sub->add_option("--max-iters", m.max_iters, "reference solver iteration cap")->check(CLI::NonNegativeNumber);
}

void add_solver(CLI::App* sub, Manifest& m) {
  sub->add_option("--tau", m.tau, "major/minor threshold");
  sub->add_option("--quantile", m.quantile, "threshold as a quantile of nominal path flows");
  sub->add_option("--rank", m.rank, "SVD rank r");
  sub->add_option("--beta", m.solver.beta, "penalty growth factor");
  sub->add_option("--gamma", m.solver.gamma, "required violation decrease factor");
  sub->add_option("--c0-eq", m.solver.c1_initial, "initial equality penalty");
  sub->add_option("--c0-ineq", m.solver.c2_initial, "initial inequality penalty");
  sub->add_option("--tol", m.solver.tol, "outer feasibility tolerance");
  sub->add_option("--max-outer", m.solver.max_outer, "outer iteration cap");
  sub->add_option("--max-inner", m.solver.max_inner_per_outer, "inner iterations per outer iteration");
  sub->add_option("--strategy", m.strategy, "direct | chain | factored | mixed");
  sub->add_option("--nominal", m.nominal, "ref | file:<reference.json> | early:<sweeps>");
  sub->add_flag("--warm-start", m.warm_start, "warm-start consecutive sweep runs");
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"ctap: path-compressed traffic assignment"};
  app.require_subcommand(1);
  Manifest m;

  auto* ref = app.add_subcommand("reference", "solve the uncompressed problem by gradient projection");
  add_common(ref, m);
  auto* solve = app.add_subcommand("solve", "compress and solve with the augmented Lagrangian method");
  add_common(solve, m);
  add_solver(solve, m);
  auto* sweep = app.add_subcommand("sweep", "threshold, rank or tuning sweep");
  add_common(sweep, m);
  add_solver(sweep, m);
  sweep->add_option("mode", m.sweep_mode, "tau | rank | tuning")
      ->required()
      ->check(CLI::IsMember({"tau", "rank", "tuning"}));
  sweep->add_option("--ranks", m.ranks, "ranks for the rank sweep (comma separated)")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*ref) {
      m.command = "reference";
      return cmd_reference(m);
    }
    if (*solve) {
      m.command = "solve";
      return cmd_solve(m);
    }
    m.command = "sweep";
    return cmd_sweep(m);
  } catch (const InputError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numeric failure: %s\n", e.what());
    return 3;
  } catch (const InvariantError& e) {
    std::fprintf(stderr, "invariant violation: %s\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "numeric failure: %s\n", e.what());
    return 3;
  }
}

}  // namespace ctap
