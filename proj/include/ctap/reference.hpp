#pragma once

// Beckmann objective with BPR link costs, and a path-based gradient
// projection solver for the uncompressed assignment problem.

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "ctap/error.hpp"
#include "ctap/network.hpp"
#include "ctap/paths.hpp"

namespace ctap {

/// t(v) = fft * (1 + alpha * (v/cap)^power). Negative v (which can appear
/// transiently in compressed iterates) is charged the free-flow time.
double bpr_link_time(const Link& link, double v);
double bpr_link_time_derivative(const Link& link, double v);
/// Integral of bpr_link_time from 0 to v.
double bpr_link_integral(const Link& link, double v);

double beckmann_objective(const Network& net, const Eigen::VectorXd& v);
Eigen::VectorXd beckmann_gradient(const Network& net, const Eigen::VectorXd& v);

struct ReferenceConfig {
  double gap_tolerance = 1e-6;
  int max_iterations = 2000;
  double armijo_c = 1e-4;
  int max_backtracks = 40;
};

struct ReferenceSolution {
  Eigen::VectorXd x_star;
  Eigen::VectorXd v_star;
  double relative_gap = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> objective_trace;  // f at the start of each sweep, then final
};

class DivergenceError : public NumericError {
 public:
  DivergenceError(const std::string& what, Eigen::VectorXd x, Eigen::VectorXd v)
      : NumericError(what), x_(std::move(x)), v_(std::move(v)) {}
  const Eigen::VectorXd& x() const { return x_; }
  const Eigen::VectorXd& v() const { return v_; }

 private:
  Eigen::VectorXd x_;
  Eigen::VectorXd v_;
};

/// (sum_p x_p c_p - sum_od d_od c_min,od) / sum_od d_od c_min,od
double relative_gap(const IncidenceSystem& sys, const Network& net, const Eigen::VectorXd& x);

/// All-or-nothing start on the first (free-flow shortest) path of each OD.
Eigen::VectorXd all_or_nothing_start(const IncidenceSystem& sys);

ReferenceSolution solve_reference_ue(const IncidenceSystem& sys, const Network& net, const ReferenceConfig& cfg,
                                     std::optional<Eigen::VectorXd> start = std::nullopt);

std::string reference_to_json(const ReferenceSolution& sol);
ReferenceSolution reference_from_json(const std::string& text);

}  // namespace ctap
