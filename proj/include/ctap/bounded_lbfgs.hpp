#pragma once

// Projected limited-memory BFGS for  min f(x)  s.t.  x_i >= 0 for i < bounded_count.
//
// Variables at their bound with a positive gradient component are held fixed
// for the step; the quasi-Newton direction is computed on the remaining free
// variables and the trial point is projected back onto the bounds.

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

namespace ctap {

/// Returns f(x) and writes the gradient.
using GradientObjective = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd& grad)>;

/// Applies an initial inverse-Hessian approximation to `g` restricted to the
/// free variables (free[i] != 0); fixed components of the result must be 0.
using InverseHessianSeed = std::function<Eigen::VectorXd(const Eigen::VectorXd& g, const std::vector<char>& free)>;

struct BoundedLbfgsOptions {
  int max_iterations = 200;
  int memory = 10;
  double pg_tolerance = 1e-6;  // on ||x - P(x - g)||_inf / gradient_scale
  double gradient_scale = 0.0;  // <= 0: max(1, ||g(x0)||_inf)
  double armijo_c = 1e-4;
  int max_backtracks = 40;
};

struct BoundedLbfgsResult {
  Eigen::VectorXd x;
  double value = 0.0;
  double pg_norm = 0.0;  // unscaled projected-gradient inf-norm at x
  int iterations = 0;
  int evaluations = 0;
  int steepest_fallbacks = 0;
  bool converged = false;
  std::string failure;  // nonempty when both line searches failed
};

BoundedLbfgsResult minimize_bounded(const GradientObjective& objective, Eigen::VectorXd x0, Eigen::Index bounded_count,
                                    const BoundedLbfgsOptions& options, const InverseHessianSeed& seed = {});

}  // namespace ctap
