#pragma once

// Augmented Lagrangian solver for the compressed problem. Equality
// A1 y + M z = d carries multipliers lambda and penalty c1; the inequality
// U_r z >= 0 carries multipliers mu and penalty c2. y >= 0 stays in the
// inner bound-constrained minimization.

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ctap/bounded_lbfgs.hpp"
#include "ctap/compression.hpp"
#include "ctap/network.hpp"

namespace ctap {

struct SolverConfig {
  double beta = 10.0;
  double gamma = 0.25;
  double c1_initial = 1e3;
  double c2_initial = 1e3;
  double tol = 1e-4;
  int max_outer = 20;
  int max_inner_per_outer = 200;
  Eigen::Index rank = 50;
  GradientStrategy strategy = GradientStrategy::mixed;
  int memory = 10;
  double inner_pg_tolerance = 1e-6;  // relative to the largest major-path cost at the inner start
  bool block_seed = true;  // per-OD block initial Hessian in the inner solver

  /// Throws InputError when a parameter is outside its admissible range.
  void validate() const;
};

struct Penalties {
  double c1 = 1e3;
  double c2 = 1e3;
};

struct ALState {
  Eigen::VectorXd y, z, lambda, mu;
  Penalties c;
  int outer_k = 0;
  std::optional<double> prev_eq_viol;
  std::optional<double> prev_ineq_viol;  // ||h+||_inf of the previous outer iteration
};

/// Smooth part f^(y, z) with its gradients. The default is the Beckmann
/// objective of the compressed link flows; tests may substitute their own.
using SmoothTerm = std::function<double(const Eigen::VectorXd& y, const Eigen::VectorXd& z, Eigen::VectorXd* grad_y,
                                        Eigen::VectorXd* grad_z)>;

SmoothTerm beckmann_term(const CompressedProblem& cp, const Network& net, GradientStrategy how);

/// h+_i = max(-[U_r z]_i, -mu_i / c2), given the product U_r z.
Eigen::VectorXd h_plus(const Eigen::VectorXd& uz, const Eigen::VectorXd& mu, double c2);
Eigen::VectorXd h_plus(const CompressedProblem& cp, const Eigen::VectorXd& z, const Eigen::VectorXd& mu, double c2);

struct ALGradient {
  Eigen::VectorXd y;
  Eigen::VectorXd z;
  bool approximate = false;  // factored link term uses V_r Sigma_r in place of B2'U_r
};

/// Augmented Lagrangian L_c(y, z, lambda, mu) and its gradients.
class AugmentedLagrangian {
 public:
  AugmentedLagrangian(const CompressedProblem& cp, const Network& net, GradientStrategy how);
  AugmentedLagrangian(const CompressedProblem& cp, SmoothTerm smooth, GradientStrategy how);

  double value(const Eigen::VectorXd& y, const Eigen::VectorXd& z, const Eigen::VectorXd& lambda,
               const Eigen::VectorXd& mu, Penalties c) const;
  double value_and_gradient(const Eigen::VectorXd& y, const Eigen::VectorXd& z, const Eigen::VectorXd& lambda,
                            const Eigen::VectorXd& mu, Penalties c, ALGradient& grad) const;

  double smooth_value(const Eigen::VectorXd& y, const Eigen::VectorXd& z) const { return smooth_(y, z, nullptr, nullptr); }
  double smooth_gradient(const Eigen::VectorXd& y, const Eigen::VectorXd& z, Eigen::VectorXd& gy,
                         Eigen::VectorXd& gz) const {
    return smooth_(y, z, &gy, &gz);
  }
  const CompressedProblem& problem() const { return cp_; }
  GradientStrategy strategy() const { return how_; }
  const Network* network() const { return net_; }

 private:
  const CompressedProblem& cp_;
  const Network* net_ = nullptr;
  SmoothTerm smooth_;
  GradientStrategy how_;
};

double al_value(const CompressedProblem& cp, const Network& net, const Eigen::VectorXd& y, const Eigen::VectorXd& z,
                const Eigen::VectorXd& lambda, const Eigen::VectorXd& mu, Penalties c,
                GradientStrategy how = GradientStrategy::direct);

ALGradient al_gradients(const CompressedProblem& cp, const Network& net, const Eigen::VectorXd& y,
                        const Eigen::VectorXd& z, const Eigen::VectorXd& lambda, const Eigen::VectorXd& mu,
                        Penalties c, GradientStrategy how);

struct InnerResult {
  Eigen::VectorXd y;
  Eigen::VectorXd z;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
  double value = 0.0;
  std::string failure;
};

/// Approximately minimizes L_c over y >= 0, z free, starting at state.(y, z).
InnerResult inner_minimize(const AugmentedLagrangian& al, const ALState& state, const SolverConfig& cfg);

struct MultiplierUpdate {
  Eigen::VectorXd lambda;
  Eigen::VectorXd mu;
};

/// lambda + c1 * residual_eq and mu + c2 * h+ (the latter is max(0, mu - c2 U_r z)).
MultiplierUpdate update_multipliers(const ALState& state, const Eigen::VectorXd& residual_eq,
                                    const Eigen::VectorXd& h_plus_vec);

/// Grows c1 (c2) by beta when the equality (h+) violation failed to shrink by
/// the factor gamma relative to the previous outer iteration.
Penalties update_penalties(const ALState& state, double eq_viol, double ineq_viol, const SolverConfig& cfg);

struct OuterRecord {
  int k = 0;
  double eq_viol = 0.0;
  double ineq_viol = 0.0;     // max(0, -min U_r z)
  double h_plus_norm = 0.0;   // ||h+||_inf used by the penalty rule
  double c1 = 0.0;
  double c2 = 0.0;
  int inner_iters = 0;
  int inner_evals = 0;
  bool inner_converged = false;
  double al_value = 0.0;
  double objective = 0.0;     // f^(y, z)
  double wall_ms = 0.0;
};

struct ALSolution {
  Eigen::VectorXd y, z, lambda, mu;
  Penalties c;
  int outer_iterations = 0;
  int total_inner_iterations = 0;
  int total_inner_evaluations = 0;
  bool converged_outer = false;
  bool converged_inner = false;  // status of the final inner solve
  bool approximate_gradients = false;
  std::vector<OuterRecord> trace;
  double inner_seconds = 0.0;
  double seconds_per_inner = 0.0;
  std::string inner_failure;
};

struct WarmStart {
  Eigen::VectorXd y, z;
  std::optional<Eigen::VectorXd> lambda, mu;
};

ALSolution solve_al(const AugmentedLagrangian& al, const SolverConfig& cfg, const WarmStart& start);
/// Cold start from the feasibility certificate.
ALSolution solve_al(const AugmentedLagrangian& al, const SolverConfig& cfg);

std::string trace_csv(const ALSolution& sol);
std::string solution_to_json(const ALSolution& sol, const CompressedProblem& cp);

}  // namespace ctap
