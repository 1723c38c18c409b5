#pragma once

// End-to-end runs: network + demand -> paths -> reference -> compression ->
// augmented Lagrangian -> report, plus threshold and rank sweeps.

#include <optional>
#include <string>
#include <vector>

#include "ctap/augmented_lagrangian.hpp"
#include "ctap/compression.hpp"
#include "ctap/network.hpp"
#include "ctap/paths.hpp"
#include "ctap/reference.hpp"
#include "ctap/report.hpp"

namespace ctap {

enum class NominalSource { reference, file, early };

struct NominalSpec {
  NominalSource kind = NominalSource::reference;
  std::string path;          // reference JSON for NominalSource::file
  int early_iterations = 3;  // gradient projection sweeps for NominalSource::early
};

/// "ref", "file:<path>" or "early:<sweeps>".
NominalSpec parse_nominal(const std::string& text);

struct InstanceOptions {
  int k = 8;
  ReferenceConfig reference;
  NominalSpec nominal;
};

struct Instance {
  Network net;
  DemandTable demand;
  IncidenceSystem sys;
  ReferenceSolution reference;  // x*, v* of the uncompressed problem
  Eigen::VectorXd nominal;      // path flows that drive the partition
  double total_demand = 0.0;
};

/// Validates connectivity (InputError listing unreachable pairs), builds the
/// path set and solves the reference problem.
Instance make_instance(Network net, DemandTable demand, const InstanceOptions& options);

enum class StartMode { proportional, certificate };

struct RunOptions {
  SolverConfig solver;
  SvdOptions svd;
  StartMode start = StartMode::proportional;
  double quantile = -1.0;  // recorded in the report only
};

struct RunResult {
  SolveReport report;
  CompressedProblem problem;
  ALSolution solution;
  ExpandedSolution expanded;
};

/// Effective rank: min(requested, n - s, m), or 0 when nothing is compressed.
Eigen::Index effective_rank(Eigen::Index requested, Eigen::Index minor_count, Eigen::Index link_count);

/// Solves the compressed problem at threshold tau. `warm` (a previous run's
/// expanded path flows and OD multipliers) replaces the cold start.
RunResult run_compressed(const Instance& inst, double tau, const RunOptions& options,
                         const RunResult* warm = nullptr);

/// Maps a previous run onto a new compressed problem: y from the major slots
/// of x_hat, z = U_r' w from its minor slots, lambda carried over.
WarmStart warm_start_from(const CompressedProblem& cp, const RunResult& previous);

/// Threshold at quantile q of the positive nominal path flows. Yen path sets
/// carry many unused paths; counting their zeros would pin most quantiles to
/// tau = 0 (no compression).
double tau_for_quantile(const Instance& inst, double q);

/// 0.0, 0.1, ..., 0.9
std::vector<double> default_quantiles();

/// tau = 0 baseline followed by one row per quantile of the nominal flows.
/// Failed runs become rows with an error status.
std::vector<SolveReport> sweep_thresholds(const Instance& inst, const std::vector<double>& quantiles,
                                          const RunOptions& options, bool warm_start = false);

/// One row per admissible rank at fixed tau; ranks above min(n - s, m) are
/// skipped and reported in `diagnostics`.
std::vector<SolveReport> sweep_ranks(const Instance& inst, double tau, const std::vector<Eigen::Index>& ranks,
                                     const RunOptions& options, std::vector<std::string>* diagnostics = nullptr);

}  // namespace ctap
