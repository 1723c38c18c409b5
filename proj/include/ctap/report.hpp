#pragma once

// Solution-quality metrics and machine-readable sweep tables.

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "ctap/compression.hpp"
#include "ctap/network.hpp"

namespace ctap {

struct SolveReport {
  double quantile = -1.0;  // negative when tau was given directly
  double tau = 0.0;
  Eigen::Index r = 0;
  Eigen::Index s = 0;
  Eigen::Index n_minus_s = 0;
  double reduction_pct = 0.0;
  double bpr_gap_pct = 0.0;
  double link_r2 = 0.0;
  int outer_iters = 0;
  int total_inner_iters = 0;
  double cpu_seconds = 0.0;
  double cpu_per_inner = 0.0;
  bool converged_outer = false;
  bool converged_inner = false;
  double major_flow_share_pct = 0.0;
  double minor_flow_share_pct = 0.0;
  std::string status = "ok";
};

/// 100 * (f(v_tilde) - f(v_star)) / f(v_star); negative values are legitimate.
/// Throws InputError when f(v_star) == 0.
double bpr_gap(const Eigen::VectorXd& v_tilde, const Eigen::VectorXd& v_star, const Network& net);

/// Coefficient of determination of v_tilde against v_star over all links.
/// Throws InputError for a constant v_star.
double link_r2(const Eigen::VectorXd& v_tilde, const Eigen::VectorXd& v_star);

struct FlowDistribution {
  double major_flow = 0.0;
  double minor_flow = 0.0;
  double major_share_pct = 0.0;  // of total demand, singleton OD pairs included
  double minor_share_pct = 0.0;
};

FlowDistribution flow_distribution(const Partition& part, const Eigen::VectorXd& nominal_x, double total_demand);

enum class ReportFormat { csv, json };

/// Fixed column order; floats printed with 6 significant digits.
std::string reports_csv(const std::vector<SolveReport>& reports);
std::string reports_json(const std::vector<SolveReport>& reports);
std::vector<std::string> report_csv_columns();
/// Columns holding wall-clock measurements (excluded from determinism checks).
std::vector<std::string> report_timing_columns();

/// Writes the reports to `path`; throws InputError on I/O failure.
void emit_report(const std::vector<SolveReport>& reports, ReportFormat format, const std::string& path);

void write_text_file(const std::string& path, const std::string& content);

}  // namespace ctap
