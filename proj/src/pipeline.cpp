#include "ctap/pipeline.hpp"

#include <chrono>
#include <fstream>
#include <sstream>

#include "ctap/error.hpp"

namespace ctap {

NominalSpec parse_nominal(const std::string& text) {
  NominalSpec spec;
  if (text.empty() || text == "ref" || text == "reference") return spec;
  if (text.rfind("file:", 0) == 0) {
    spec.kind = NominalSource::file;
    spec.path = text.substr(5);
    if (spec.path.empty()) throw InputError("--nominal file: needs a path");
    return spec;
  }
  if (text.rfind("early:", 0) == 0) {
    spec.kind = NominalSource::early;
    try {
      spec.early_iterations = std::stoi(text.substr(6));
    } catch (const std::exception&) {
      throw InputError("--nominal early:<sweeps> needs an integer");
    }
    if (spec.early_iterations < 0) throw InputError("--nominal early:<sweeps> must be >= 0");
    return spec;
  }
  throw InputError("unknown nominal source '" + text + "' (ref | file:<path> | early:<sweeps>)");
}

Instance make_instance(Network net, DemandTable demand, const InstanceOptions& options) {
  const auto diagnostics = validate_network(net, demand);
  if (!diagnostics.empty()) {
    std::string msg = std::to_string(diagnostics.size()) + " unreachable OD pair(s); first: " + diagnostics.front();
    throw InputError(msg);
  }
  Instance inst;
  inst.sys = build_incidence_system(net, demand, options.k);
  inst.total_demand = demand.total();
  inst.net = std::move(net);
  inst.demand = std::move(demand);
  inst.reference = solve_reference_ue(inst.sys, inst.net, options.reference);

  switch (options.nominal.kind) {
    case NominalSource::reference:
      inst.nominal = inst.reference.x_star;
      break;
    case NominalSource::early: {
      ReferenceConfig early = options.reference;
      early.max_iterations = options.nominal.early_iterations;
      inst.nominal = solve_reference_ue(inst.sys, inst.net, early).x_star;
      break;
    }
    case NominalSource::file: {
      std::ifstream in(options.nominal.path);
      if (!in) throw InputError("cannot open nominal flow file '" + options.nominal.path + "'");
      std::stringstream buf;
      buf << in.rdbuf();
      inst.nominal = reference_from_json(buf.str()).x_star;
      if (inst.nominal.size() != inst.sys.path_count())
        throw InputError("nominal flow file has " + std::to_string(inst.nominal.size()) + " path flows, expected " +
                         std::to_string(inst.sys.path_count()));
      if (inst.nominal.size() && inst.nominal.minCoeff() < 0.0) throw InputError("nominal flows must be nonnegative");
      break;
    }
  }
  return inst;
}

Eigen::Index effective_rank(Eigen::Index requested, Eigen::Index minor_count, Eigen::Index link_count) {
  if (minor_count == 0) return 0;
  return std::max<Eigen::Index>(1, std::min({requested, minor_count, link_count}));
}

WarmStart warm_start_from(const CompressedProblem& cp, const RunResult& previous) {
  const Eigen::VectorXd& x = previous.expanded.x_hat;
  WarmStart ws;
  ws.y.resize(cp.major_count());
  for (std::size_t slot = 0; slot < cp.partition.major_idx.size(); ++slot)
    ws.y[static_cast<Eigen::Index>(slot)] = std::max(0.0, x[cp.partition.major_idx[slot]]);
  ws.z = Eigen::VectorXd::Zero(cp.rank());
  if (cp.rank() > 0) {
    Eigen::VectorXd w(cp.minor_count());
    for (std::size_t slot = 0; slot < cp.partition.minor_idx.size(); ++slot)
      w[static_cast<Eigen::Index>(slot)] = x[cp.partition.minor_idx[slot]];
    ws.z = cp.factors.U.transpose() * w;
  }
  if (previous.solution.lambda.size() == cp.od_count()) ws.lambda = previous.solution.lambda;
  return ws;
}

RunResult run_compressed(const Instance& inst, double tau, const RunOptions& options, const RunResult* warm) {
  using Clock = std::chrono::steady_clock;
  const auto t0 = Clock::now();
  const Partition part = partition_paths(inst.nominal, inst.sys, tau);
  const Eigen::Index r = effective_rank(options.solver.rank, part.minor_count(), inst.sys.link_count());
  SvdFactors factors;
  if (r > 0) factors = truncated_svd(minor_block(inst.sys, part), r, options.svd);

  RunResult out{SolveReport{}, build_compressed(inst.sys, part, std::move(factors), options.solver.strategy), {}, {}};
  const CompressedProblem& cp = out.problem;
  const AugmentedLagrangian al(cp, inst.net, options.solver.strategy);

  WarmStart start;
  if (warm) {
    start = warm_start_from(cp, *warm);
  } else {
    const CertificatePoint pt = options.start == StartMode::proportional ? proportional_start(cp, inst.nominal)
                                                                          : feasibility_certificate(cp);
    start = {pt.y, pt.z, std::nullopt, std::nullopt};
  }
  out.solution = solve_al(al, options.solver, start);
  out.expanded = expand_solution(cp, out.solution.y, out.solution.z);
  const double seconds = std::chrono::duration<double>(Clock::now() - t0).count();

  SolveReport& rep = out.report;
  const auto n = inst.sys.path_count();
  rep.quantile = options.quantile;
  rep.tau = tau;
  rep.r = cp.rank();
  rep.s = cp.major_count();
  rep.n_minus_s = cp.minor_count();
  rep.reduction_pct = n > 0 ? 100.0 * static_cast<double>(rep.n_minus_s) / static_cast<double>(n) : 0.0;
  rep.bpr_gap_pct = bpr_gap(out.expanded.v_tilde, inst.reference.v_star, inst.net);
  rep.link_r2 = link_r2(out.expanded.v_tilde, inst.reference.v_star);
  rep.outer_iters = out.solution.outer_iterations;
  rep.total_inner_iters = out.solution.total_inner_iterations;
  rep.cpu_seconds = seconds;
  rep.cpu_per_inner = out.solution.seconds_per_inner;
  rep.converged_outer = out.solution.converged_outer;
  rep.converged_inner = out.solution.converged_inner;
  const FlowDistribution fd = flow_distribution(part, inst.nominal, inst.total_demand);
  rep.major_flow_share_pct = fd.major_share_pct;
  rep.minor_flow_share_pct = fd.minor_share_pct;
  rep.status = out.solution.converged_outer ? "converged" : "max_outer";
  return out;
}

double tau_for_quantile(const Instance& inst, double q) {
  std::vector<double> used;
  for (double x : inst.nominal)
    if (x > 0.0) used.push_back(x);
  if (used.empty()) return threshold_from_quantile(inst.nominal, q);
  return threshold_from_quantile(Eigen::Map<const Eigen::VectorXd>(used.data(), static_cast<Eigen::Index>(used.size())), q);
}

std::vector<double> default_quantiles() {
  std::vector<double> q;
  for (int i = 0; i < 10; ++i) q.push_back(i / 10.0);
  return q;
}

namespace {
SolveReport failed_row(double tau, double quantile, const std::string& what) {
  SolveReport rep;
  rep.tau = tau;
  rep.quantile = quantile;
  rep.status = "error: " + what;
  for (char& ch : rep.status)
    if (ch == ',' || ch == '\n') ch = ';';
  return rep;
}
}  // namespace

std::vector<SolveReport> sweep_thresholds(const Instance& inst, const std::vector<double>& quantiles,
                                          const RunOptions& options, bool warm_start) {
  std::vector<SolveReport> rows;
  std::optional<RunResult> previous;
  auto run_one = [&](double tau, double quantile) {
    RunOptions opt = options;
    opt.quantile = quantile;
    try {
      RunResult res = run_compressed(inst, tau, opt, warm_start && previous ? &*previous : nullptr);
      rows.push_back(res.report);
      if (warm_start) previous = std::move(res);
    } catch (const std::exception& e) {
      rows.push_back(failed_row(tau, quantile, e.what()));
    }
  };
  run_one(0.0, -1.0);
  for (double q : quantiles) {
    double tau = 0.0;
    try {
      tau = tau_for_quantile(inst, q);
    } catch (const std::exception& e) {
      rows.push_back(failed_row(0.0, q, e.what()));
      continue;
    }
    run_one(tau, q);
  }
  return rows;
}

std::vector<SolveReport> sweep_ranks(const Instance& inst, double tau, const std::vector<Eigen::Index>& ranks,
                                     const RunOptions& options, std::vector<std::string>* diagnostics) {
  std::vector<SolveReport> rows;
  const Partition part = partition_paths(inst.nominal, inst.sys, tau);
  const Eigen::Index limit = std::min(part.minor_count(), inst.sys.link_count());
  for (Eigen::Index r : ranks) {
    if (r < 1 || r > limit) {
      if (diagnostics)
        diagnostics->push_back("rank " + std::to_string(r) + " skipped: exceeds min(n - s, m) = " + std::to_string(limit));
      continue;
    }
    RunOptions opt = options;
    opt.solver.rank = r;
    try {
      rows.push_back(run_compressed(inst, tau, opt).report);
    } catch (const std::exception& e) {
      rows.push_back(failed_row(tau, options.quantile, e.what()));
      rows.back().r = r;
    }
  }
  return rows;
}

}  // namespace ctap
