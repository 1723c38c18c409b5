#include "ctap/report.hpp"

#include <cstdio>
#include <fstream>
#include "json.hpp"
#include <sstream>

#include "ctap/error.hpp"
#include "ctap/reference.hpp"

namespace ctap {

double bpr_gap(const Eigen::VectorXd& v_tilde, const Eigen::VectorXd& v_star, const Network& net) {
  const double f_star = beckmann_objective(net, v_star);
  if (f_star == 0.0) throw InputError("BPR gap undefined: reference objective is zero");
  return 100.0 * (beckmann_objective(net, v_tilde) - f_star) / f_star;
}

double link_r2(const Eigen::VectorXd& v_tilde, const Eigen::VectorXd& v_star) {
  if (v_tilde.size() != v_star.size() || v_star.size() == 0) throw InputError("link R^2 needs equal nonempty vectors");
  const double mean = v_star.mean();
  const double total = (v_star.array() - mean).square().sum();
  if (total == 0.0) throw InputError("link R^2 undefined: reference link flows are constant");
  return 1.0 - (v_tilde - v_star).squaredNorm() / total;
}

FlowDistribution flow_distribution(const Partition& part, const Eigen::VectorXd& nominal_x, double total_demand) {
  FlowDistribution fd;
  for (Eigen::Index p : part.major_idx) fd.major_flow += nominal_x[p];
  for (Eigen::Index p : part.minor_idx) fd.minor_flow += nominal_x[p];
  if (total_demand > 0.0) {
    fd.major_share_pct = 100.0 * fd.major_flow / total_demand;
    fd.minor_share_pct = 100.0 * fd.minor_flow / total_demand;
  }
  return fd;
}

namespace {

std::string g6(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace

std::vector<std::string> report_csv_columns() {
  return {"tau",           "reduction_pct",    "bpr_gap_pct",     "link_r2",
          "outer_iters",   "total_inner_iters", "cpu_seconds",    "quantile",
          "r",             "s",                "n_minus_s",       "cpu_per_inner",
          "converged_outer", "converged_inner", "major_flow_share_pct", "minor_flow_share_pct",
          "status"};
}

std::vector<std::string> report_timing_columns() { return {"cpu_seconds", "cpu_per_inner"}; }

std::string reports_csv(const std::vector<SolveReport>& reports) {
  std::ostringstream out;
  const auto cols = report_csv_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << '\n';
  for (const SolveReport& r : reports) {
    out << g6(r.tau) << ',' << g6(r.reduction_pct) << ',' << g6(r.bpr_gap_pct) << ',' << g6(r.link_r2) << ','
        << r.outer_iters << ',' << r.total_inner_iters << ',' << g6(r.cpu_seconds) << ','
        << (r.quantile >= 0.0 ? g6(r.quantile) : std::string()) << ',' << r.r << ',' << r.s << ',' << r.n_minus_s
        << ',' << g6(r.cpu_per_inner) << ',' << (r.converged_outer ? 'Y' : 'N') << ','
        << (r.converged_inner ? 'Y' : 'N') << ',' << g6(r.major_flow_share_pct) << ','
        << g6(r.minor_flow_share_pct) << ',' << r.status << '\n';
  }
  return out.str();
}

std::string reports_json(const std::vector<SolveReport>& reports) {
  nlohmann::ordered_json doc;
  doc["schema"] = "ctap.solve_report.v1";
  doc["reports"] = nlohmann::ordered_json::array();
  for (const SolveReport& r : reports) {
    nlohmann::ordered_json row;
    row["tau"] = r.tau;
    row["quantile"] = r.quantile >= 0.0 ? nlohmann::ordered_json(r.quantile) : nlohmann::ordered_json();
    row["r"] = r.r;
    row["s"] = r.s;
    row["n_minus_s"] = r.n_minus_s;
    row["reduction_pct"] = r.reduction_pct;
    row["bpr_gap_pct"] = r.bpr_gap_pct;
    row["link_r2"] = r.link_r2;
    row["outer_iters"] = r.outer_iters;
    row["total_inner_iters"] = r.total_inner_iters;
    row["cpu_seconds"] = r.cpu_seconds;
    row["cpu_per_inner"] = r.cpu_per_inner;
    row["converged_outer"] = r.converged_outer;
    row["converged_inner"] = r.converged_inner;
    row["major_flow_share_pct"] = r.major_flow_share_pct;
    row["minor_flow_share_pct"] = r.minor_flow_share_pct;
    row["status"] = r.status;
    doc["reports"].push_back(std::move(row));
  }
  return doc.dump(2) + "\n";
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write '" + path + "'");
  out << content;
  if (!out) throw InputError("write failed for '" + path + "'");
}

void emit_report(const std::vector<SolveReport>& reports, ReportFormat format, const std::string& path) {
  write_text_file(path, format == ReportFormat::csv ? reports_csv(reports) : reports_json(reports));
}

}  // namespace ctap
