#include "ctap/bounded_lbfgs.hpp"

#include <cmath>
#include <deque>
#include <limits>

namespace ctap {

namespace {

Eigen::VectorXd project(Eigen::VectorXd x, Eigen::Index bounded) {
  for (Eigen::Index i = 0; i < bounded; ++i)
    if (x[i] < 0.0) x[i] = 0.0;
  return x;
}

double projected_gradient_norm(const Eigen::VectorXd& x, const Eigen::VectorXd& g, Eigen::Index bounded) {
  double norm = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    double step = g[i];
    if (i < bounded && x[i] - g[i] < 0.0) step = x[i];  // x - P(x - g)
    norm = std::max(norm, std::abs(step));
  }
  return norm;
}

struct CurvaturePair {
  Eigen::VectorXd s;
  Eigen::VectorXd y;
  double rho;
};

double masked_dot(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const std::vector<char>& free) {
  double sum = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i)
    if (free[static_cast<std::size_t>(i)]) sum += a[i] * b[i];
  return sum;
}

}  // namespace

BoundedLbfgsResult minimize_bounded(const GradientObjective& objective, Eigen::VectorXd x0, Eigen::Index bounded_count,
                                    const BoundedLbfgsOptions& options, const InverseHessianSeed& seed) {
  BoundedLbfgsResult res;
  const Eigen::Index n = x0.size();
  res.x = project(std::move(x0), bounded_count);
  Eigen::VectorXd g(n);
  res.value = objective(res.x, g);
  ++res.evaluations;

  const double scale =
      options.gradient_scale > 0.0 ? options.gradient_scale : std::max(1.0, g.lpNorm<Eigen::Infinity>());
  std::deque<CurvaturePair> memory;
  std::vector<char> free(static_cast<std::size_t>(n), 1);
  Eigen::VectorXd trial_g(n);

  while (true) {
    res.pg_norm = projected_gradient_norm(res.x, g, bounded_count);
    if (!std::isfinite(res.value) || !std::isfinite(res.pg_norm)) {
      res.failure = "non-finite objective or gradient";
      return res;
    }
    if (res.pg_norm <= options.pg_tolerance * scale) {
      res.converged = true;
      return res;
    }
    if (res.iterations >= options.max_iterations) return res;

    for (Eigen::Index i = 0; i < n; ++i)
      free[static_cast<std::size_t>(i)] = !(i < bounded_count && res.x[i] <= 0.0 && g[i] > 0.0);

    auto apply_seed = [&](const Eigen::VectorXd& q) -> Eigen::VectorXd {
      if (seed) return seed(q, free);
      Eigen::VectorXd r = q;
      if (!memory.empty()) {
        const auto& last = memory.back();
        r *= last.s.dot(last.y) / last.y.squaredNorm();
      }
      return r;
    };

    // Two-loop recursion restricted to the free variables.
    Eigen::VectorXd q = g;
    for (Eigen::Index i = 0; i < n; ++i)
      if (!free[static_cast<std::size_t>(i)]) q[i] = 0.0;
    std::vector<double> alpha(memory.size());
    for (std::size_t k = memory.size(); k-- > 0;) {
      alpha[k] = memory[k].rho * masked_dot(memory[k].s, q, free);
      for (Eigen::Index i = 0; i < n; ++i)
        if (free[static_cast<std::size_t>(i)]) q[i] -= alpha[k] * memory[k].y[i];
    }
    Eigen::VectorXd dir = apply_seed(q);
    for (std::size_t k = 0; k < memory.size(); ++k) {
      const double beta = memory[k].rho * masked_dot(memory[k].y, dir, free);
      for (Eigen::Index i = 0; i < n; ++i)
        if (free[static_cast<std::size_t>(i)]) dir[i] += memory[k].s[i] * (alpha[k] - beta);
    }
    dir = -dir;
    for (Eigen::Index i = 0; i < n; ++i)
      if (!free[static_cast<std::size_t>(i)]) dir[i] = 0.0;
    if (!(g.dot(dir) < 0.0)) {
      memory.clear();
      Eigen::VectorXd masked = g;
      for (Eigen::Index i = 0; i < n; ++i)
        if (!free[static_cast<std::size_t>(i)]) masked[i] = 0.0;
      dir = -apply_seed(masked);
      if (!(g.dot(dir) < 0.0)) dir = -masked;
    }

    // Backtracking along the projected path.
    auto line_search = [&](const Eigen::VectorXd& d, double step0, Eigen::VectorXd& x_new, double& f_new) {
      double step = step0;
      for (int bt = 0; bt <= options.max_backtracks; ++bt, step *= 0.5) {
        x_new = project(res.x + step * d, bounded_count);
        const Eigen::VectorXd delta = x_new - res.x;
        const double decrease = g.dot(delta);
        if (decrease >= 0.0) continue;
        f_new = objective(x_new, trial_g);
        ++res.evaluations;
        if (std::isfinite(f_new) && f_new <= res.value + options.armijo_c * decrease) return true;
      }
      return false;
    };

    Eigen::VectorXd x_new;
    double f_new = 0.0;
    double step0 = 1.0;
    if (memory.empty() && !seed) step0 = 1.0 / std::max(1.0, dir.lpNorm<Eigen::Infinity>());
    bool ok = line_search(dir, step0, x_new, f_new);
    if (!ok) {
      ++res.steepest_fallbacks;
      memory.clear();
      Eigen::VectorXd sd = -g;
      for (Eigen::Index i = 0; i < n; ++i)
        if (!free[static_cast<std::size_t>(i)]) sd[i] = 0.0;
      ok = line_search(sd, 1.0 / std::max(1.0, sd.lpNorm<Eigen::Infinity>()), x_new, f_new);
    }
    if (!ok) {
      res.failure = "line search failed along both the quasi-Newton and steepest-descent directions "
                    "(projected gradient " + std::to_string(res.pg_norm) + ", f " + std::to_string(res.value) + ")";
      return res;
    }

    CurvaturePair pair{x_new - res.x, trial_g - g, 0.0};
    const double sy = pair.s.dot(pair.y);
    if (sy > 1e-12 * pair.s.norm() * pair.y.norm() && sy > 0.0) {
      pair.rho = 1.0 / sy;
      memory.push_back(std::move(pair));
      if (static_cast<int>(memory.size()) > options.memory) memory.pop_front();
    }
    res.x = std::move(x_new);
    res.value = f_new;
    g = trial_g;
    ++res.iterations;
  }
}

}  // namespace ctap
