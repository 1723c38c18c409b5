#include "ctap/augmented_lagrangian.hpp"

#include <Eigen/Cholesky>
#include <chrono>
#include <cmath>
#include <cstdio>
#include "json.hpp"
#include <sstream>

#include "ctap/error.hpp"
#include "ctap/reference.hpp"

namespace ctap {

void SolverConfig::validate() const {
  if (!(beta > 1.0)) throw InputError("beta must exceed 1");
  if (!(gamma > 0.0 && gamma < 1.0)) throw InputError("gamma must lie in (0, 1)");
  if (!(c1_initial > 0.0 && c2_initial > 0.0)) throw InputError("initial penalties must be positive");
  if (!(tol > 0.0)) throw InputError("tolerance must be positive");
  if (max_outer < 0 || max_inner_per_outer < 0) throw InputError("iteration limits must be nonnegative");
  if (rank < 1) throw InputError("rank must be >= 1");
  if (memory < 1) throw InputError("quasi-Newton memory must be >= 1");
}

Eigen::VectorXd h_plus(const Eigen::VectorXd& uz, const Eigen::VectorXd& mu, double c2) {
  Eigen::VectorXd h(uz.size());
  for (Eigen::Index i = 0; i < uz.size(); ++i) h[i] = std::max(-uz[i], -mu[i] / c2);
  return h;
}

Eigen::VectorXd h_plus(const CompressedProblem& cp, const Eigen::VectorXd& z, const Eigen::VectorXd& mu, double c2) {
  if (cp.rank() == 0) return Eigen::VectorXd::Zero(cp.minor_count());
  return h_plus(Eigen::VectorXd(cp.factors.U * z), mu, c2);
}

SmoothTerm beckmann_term(const CompressedProblem& cp, const Network& net, GradientStrategy how) {
  return [&cp, &net, how](const Eigen::VectorXd& y, const Eigen::VectorXd& z, Eigen::VectorXd* gy,
                          Eigen::VectorXd* gz) {
    const Eigen::VectorXd v = cp.link_flows(y, z, how);
    if (gy || gz) {
      const Eigen::VectorXd t = beckmann_gradient(net, v);
      if (gy) *gy = cp.B1 * t;
      if (gz) {
        if (cp.rank() == 0) {
          gz->resize(0);
        } else {
          switch (how) {
            case GradientStrategy::direct: *gz = cp.D->transpose() * t; break;
            case GradientStrategy::chain: *gz = cp.factors.U.transpose() * (cp.B2 * t); break;
            default: *gz = cp.factors.sigma.cwiseProduct(cp.factors.V.transpose() * t); break;
          }
        }
      }
    }
    return beckmann_objective(net, v);
  };
}

AugmentedLagrangian::AugmentedLagrangian(const CompressedProblem& cp, const Network& net, GradientStrategy how)
    : cp_(cp), net_(&net), smooth_(beckmann_term(cp, net, how)), how_(how) {
  if (how == GradientStrategy::direct && cp.rank() > 0 && !cp.D)
    throw InputError("direct strategy needs a compressed problem built with the direct strategy");
}

AugmentedLagrangian::AugmentedLagrangian(const CompressedProblem& cp, SmoothTerm smooth, GradientStrategy how)
    : cp_(cp), smooth_(std::move(smooth)), how_(how) {
  if (how == GradientStrategy::direct && cp.rank() > 0 && !cp.D)
    throw InputError("direct strategy needs a compressed problem built with the direct strategy");
}

namespace {

bool uses_chain_od_term(GradientStrategy how) {
  return how == GradientStrategy::chain || how == GradientStrategy::mixed;
}

// Everything except the smooth term; adds gradients onto grad when non-null.
double penalty_terms(const CompressedProblem& cp, GradientStrategy how, const Eigen::VectorXd& y,
                     const Eigen::VectorXd& z, const Eigen::VectorXd& lambda, const Eigen::VectorXd& mu, Penalties c,
                     ALGradient* grad) {
  const bool compressed = cp.rank() > 0;
  Eigen::VectorXd uz;
  if (compressed) uz = cp.factors.U * z;

  Eigen::VectorXd rho = -cp.d;
  rho.noalias() += cp.A1 * y;
  if (compressed) {
    if (uses_chain_od_term(how))
      rho.noalias() += cp.A2 * uz;
    else
      rho.noalias() += cp.M * z;
  }
  double value = lambda.dot(rho) + 0.5 * c.c1 * rho.squaredNorm();

  Eigen::VectorXd slack;  // max(0, mu - c2 U z) = mu + c2 h+
  if (compressed) {
    slack = (mu - c.c2 * uz).cwiseMax(0.0);
    value += (slack.squaredNorm() - mu.squaredNorm()) / (2.0 * c.c2);
  }

  if (grad) {
    const Eigen::VectorXd q = lambda + c.c1 * rho;
    grad->y.noalias() += cp.A1.transpose() * q;
    if (compressed) {
      if (uses_chain_od_term(how)) {
        Eigen::VectorXd back = cp.A2.transpose() * q;
        back -= slack;
        grad->z.noalias() += cp.factors.U.transpose() * back;
      } else {
        grad->z.noalias() += cp.M.transpose() * q;
        grad->z.noalias() -= cp.factors.U.transpose() * slack;
      }
    }
  }
  return value;
}

}  // namespace

double AugmentedLagrangian::value(const Eigen::VectorXd& y, const Eigen::VectorXd& z, const Eigen::VectorXd& lambda,
                                  const Eigen::VectorXd& mu, Penalties c) const {
  return smooth_(y, z, nullptr, nullptr) + penalty_terms(cp_, how_, y, z, lambda, mu, c, nullptr);
}

double AugmentedLagrangian::value_and_gradient(const Eigen::VectorXd& y, const Eigen::VectorXd& z,
                                               const Eigen::VectorXd& lambda, const Eigen::VectorXd& mu, Penalties c,
                                               ALGradient& grad) const {
  double v = smooth_(y, z, &grad.y, &grad.z);
  if (grad.z.size() != z.size()) grad.z = Eigen::VectorXd::Zero(z.size());
  v += penalty_terms(cp_, how_, y, z, lambda, mu, c, &grad);
  grad.approximate = how_ == GradientStrategy::factored || how_ == GradientStrategy::mixed;
  return v;
}

double al_value(const CompressedProblem& cp, const Network& net, const Eigen::VectorXd& y, const Eigen::VectorXd& z,
                const Eigen::VectorXd& lambda, const Eigen::VectorXd& mu, Penalties c, GradientStrategy how) {
  return AugmentedLagrangian(cp, net, how).value(y, z, lambda, mu, c);
}

ALGradient al_gradients(const CompressedProblem& cp, const Network& net, const Eigen::VectorXd& y,
                        const Eigen::VectorXd& z, const Eigen::VectorXd& lambda, const Eigen::VectorXd& mu,
                        Penalties c, GradientStrategy how) {
  ALGradient g;
  AugmentedLagrangian(cp, net, how).value_and_gradient(y, z, lambda, mu, c, g);
  return g;
}

namespace {

// Initial inverse Hessian for the inner solver: per-OD blocks
// diag(B1 t') + c1 * 11' on y (inverted by Sherman-Morrison over the free
// paths of each OD) and a dense r x r block on z.
class BlockSeed {
 public:
  BlockSeed(const AugmentedLagrangian& al, const ALState& state) : cp_(al.problem()) {
    const auto& cp = cp_;
    const Eigen::Index s = cp.major_count();
    c1_ = state.c.c1;
    diag_ = Eigen::VectorXd::Zero(s);
    Eigen::VectorXd tprime;
    if (al.network()) {
      const Network& net = *al.network();
      const Eigen::VectorXd v = cp.link_flows(state.y, state.z, al.strategy());
      tprime.resize(v.size());
      for (const Link& l : net.links()) tprime[l.id] = bpr_link_time_derivative(l, v[l.id]);
      diag_ = cp.B1 * tprime;
    }
    const double floor = 1e-8 * c1_ + 1e-12;
    diag_ = diag_.cwiseMax(floor);
    members_.assign(static_cast<std::size_t>(cp.od_count()), {});
    for (Eigen::Index j = 0; j < s; ++j) members_[static_cast<std::size_t>(cp.od_of_major[static_cast<std::size_t>(j)])].push_back(j);

    const Eigen::Index r = cp.rank();
    if (r > 0) {
      Eigen::MatrixXd H = c1_ * cp.M.transpose() * cp.M;
      if (tprime.size() > 0) {
        const Eigen::MatrixXd D = cp.factors.V * cp.factors.sigma.asDiagonal();
        H.noalias() += D.transpose() * tprime.asDiagonal() * D;
      }
      const Eigen::VectorXd uz = cp.factors.U * state.z;
      for (Eigen::Index i = 0; i < uz.size(); ++i) {
        if (state.mu[i] - state.c.c2 * uz[i] > 0.0) H.noalias() += state.c.c2 * cp.factors.U.row(i).transpose() * cp.factors.U.row(i);
      }
      double shift = 1e-10 * std::max(1.0, H.diagonal().maxCoeff());
      for (int attempt = 0; attempt < 20; ++attempt) {
        z_factor_.compute(H + shift * Eigen::MatrixXd::Identity(r, r));
        if (z_factor_.info() == Eigen::Success) break;
        shift *= 100.0;
      }
    }
  }

  Eigen::VectorXd operator()(const Eigen::VectorXd& g, const std::vector<char>& free) const {
    const Eigen::Index s = cp_.major_count();
    Eigen::VectorXd out = Eigen::VectorXd::Zero(g.size());
    for (const auto& group : members_) {
      double sum_inv = 0.0;
      double sum_q = 0.0;
      for (Eigen::Index j : group) {
        if (!free[static_cast<std::size_t>(j)]) continue;
        const double inv = 1.0 / diag_[j];
        out[j] = inv * g[j];
        sum_inv += inv;
        sum_q += out[j];
      }
      if (sum_inv == 0.0) continue;
      const double coef = c1_ * sum_q / (1.0 + c1_ * sum_inv);
      for (Eigen::Index j : group)
        if (free[static_cast<std::size_t>(j)]) out[j] -= coef / diag_[j];
    }
    const Eigen::Index r = g.size() - s;
    if (r > 0) out.tail(r) = z_factor_.solve(g.tail(r));
    return out;
  }

 private:
  const CompressedProblem& cp_;
  double c1_ = 1.0;
  Eigen::VectorXd diag_;
  std::vector<std::vector<Eigen::Index>> members_;
  Eigen::LLT<Eigen::MatrixXd> z_factor_;
};

}  // namespace

InnerResult inner_minimize(const AugmentedLagrangian& al, const ALState& state, const SolverConfig& cfg) {
  const auto& cp = al.problem();
  const Eigen::Index s = cp.major_count();
  const Eigen::Index r = cp.rank();
  Eigen::VectorXd x0(s + r);
  x0 << state.y, state.z;

  ALGradient grad;
  GradientObjective objective = [&](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    const Eigen::VectorXd y = x.head(s);
    const Eigen::VectorXd z = x.tail(r);
    const double value = al.value_and_gradient(y, z, state.lambda, state.mu, state.c, grad);
    g.resize(s + r);
    g << grad.y, grad.z;
    return value;
  };

  BoundedLbfgsOptions opt;
  opt.max_iterations = cfg.max_inner_per_outer;
  opt.memory = cfg.memory;
  opt.pg_tolerance = cfg.inner_pg_tolerance;
  // Tolerance in travel-time units: the largest major-path cost at the start,
  // independent of the objective's magnitude and of the penalty terms.
  {
    Eigen::VectorXd gy, gz;
    al.smooth_gradient(state.y, state.z, gy, gz);
    opt.gradient_scale = std::max(1.0, gy.size() ? gy.lpNorm<Eigen::Infinity>() : 0.0);
  }

  InverseHessianSeed seed;
  std::optional<BlockSeed> block;
  if (cfg.block_seed && al.network()) {
    block.emplace(al, state);
    seed = [&block](const Eigen::VectorXd& g, const std::vector<char>& free) { return (*block)(g, free); };
  }

  const BoundedLbfgsResult res = minimize_bounded(objective, std::move(x0), s, opt, seed);
  InnerResult out;
  out.y = res.x.head(s);
  out.z = res.x.tail(r);
  out.iterations = res.iterations;
  out.evaluations = res.evaluations;
  out.converged = res.converged;
  out.value = res.value;
  out.failure = res.failure;
  return out;
}

MultiplierUpdate update_multipliers(const ALState& state, const Eigen::VectorXd& residual_eq,
                                    const Eigen::VectorXd& h_plus_vec) {
  MultiplierUpdate upd;
  upd.lambda = state.lambda + state.c.c1 * residual_eq;
  // mu + c2 * max(-Uz, -mu/c2) == max(mu - c2 Uz, 0); clamp the rounding of the second branch.
  upd.mu = (state.mu + state.c.c2 * h_plus_vec).cwiseMax(0.0);
  return upd;
}

Penalties update_penalties(const ALState& state, double eq_viol, double ineq_viol, const SolverConfig& cfg) {
  Penalties next = state.c;
  if (state.prev_eq_viol && eq_viol > cfg.gamma * *state.prev_eq_viol) next.c1 *= cfg.beta;
  if (state.prev_ineq_viol && ineq_viol > cfg.gamma * *state.prev_ineq_viol) next.c2 *= cfg.beta;
  return next;
}

ALSolution solve_al(const AugmentedLagrangian& al, const SolverConfig& cfg) {
  const CertificatePoint cert = feasibility_certificate(al.problem());
  return solve_al(al, cfg, WarmStart{cert.y, cert.z, std::nullopt, std::nullopt});
}

ALSolution solve_al(const AugmentedLagrangian& al, const SolverConfig& cfg, const WarmStart& start) {
  cfg.validate();
  const auto& cp = al.problem();
  if (start.y.size() != cp.major_count() || start.z.size() != cp.rank())
    throw InputError("warm start dimensions do not match the compressed problem");

  ALState state;
  state.y = start.y.cwiseMax(0.0);
  state.z = start.z;
  state.lambda = start.lambda ? *start.lambda : Eigen::VectorXd::Zero(cp.od_count());
  state.mu = start.mu ? start.mu->cwiseMax(0.0).eval() : Eigen::VectorXd::Zero(cp.rank() > 0 ? cp.minor_count() : 0);
  state.c = {cfg.c1_initial, cfg.c2_initial};

  ALSolution sol;
  using Clock = std::chrono::steady_clock;
  for (int k = 0; k < cfg.max_outer; ++k) {
    const auto t0 = Clock::now();
    InnerResult inner = inner_minimize(al, state, cfg);
    const double elapsed = std::chrono::duration<double>(Clock::now() - t0).count();
    sol.inner_seconds += elapsed;
    sol.total_inner_iterations += inner.iterations;
    sol.total_inner_evaluations += inner.evaluations;
    sol.converged_inner = inner.converged;
    if (!inner.failure.empty()) sol.inner_failure = inner.failure;
    state.y = std::move(inner.y);
    state.z = std::move(inner.z);

    const Eigen::VectorXd rho = cp.equality_residual(state.y, state.z, al.strategy());
    Eigen::VectorXd uz = cp.rank() > 0 ? Eigen::VectorXd(cp.factors.U * state.z) : Eigen::VectorXd::Zero(state.mu.size());
    const Eigen::VectorXd h = cp.rank() > 0 ? h_plus(uz, state.mu, state.c.c2) : Eigen::VectorXd();

    OuterRecord rec;
    rec.k = k + 1;
    rec.eq_viol = rho.size() ? rho.lpNorm<Eigen::Infinity>() : 0.0;
    rec.h_plus_norm = h.size() ? h.lpNorm<Eigen::Infinity>() : 0.0;
    rec.ineq_viol = uz.size() ? std::max(0.0, -uz.minCoeff()) : 0.0;
    rec.c1 = state.c.c1;
    rec.c2 = state.c.c2;
    rec.inner_iters = inner.iterations;
    rec.inner_evals = inner.evaluations;
    rec.inner_converged = inner.converged;
    rec.al_value = inner.value;
    rec.objective = al.smooth_value(state.y, state.z);
    rec.wall_ms = elapsed * 1e3;
    sol.trace.push_back(rec);
    sol.outer_iterations = k + 1;

    if (std::max(rec.eq_viol, rec.ineq_viol) <= cfg.tol) {
      sol.converged_outer = true;
      break;
    }

    MultiplierUpdate upd = update_multipliers(state, rho, h);
    if (upd.mu.size() && upd.mu.minCoeff() < 0.0) throw InvariantError("negative inequality multiplier after update");
    const Penalties next = update_penalties(state, rec.eq_viol, rec.h_plus_norm, cfg);
    if (next.c1 < state.c.c1 || next.c2 < state.c.c2) throw InvariantError("penalty parameter decreased");
    state.lambda = std::move(upd.lambda);
    state.mu = std::move(upd.mu);
    state.prev_eq_viol = rec.eq_viol;
    state.prev_ineq_viol = rec.h_plus_norm;
    state.c = next;
    state.outer_k = k + 1;
  }

  sol.y = state.y;
  sol.z = state.z;
  sol.lambda = state.lambda;
  sol.mu = state.mu;
  sol.c = state.c;
  sol.approximate_gradients = al.strategy() == GradientStrategy::factored || al.strategy() == GradientStrategy::mixed;
  sol.seconds_per_inner = sol.total_inner_iterations > 0 ? sol.inner_seconds / sol.total_inner_iterations : 0.0;
  return sol;
}

namespace {
std::string g6(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}
}  // namespace

std::string trace_csv(const ALSolution& sol) {
  std::ostringstream out;
  out << "k,eq_viol,ineq_viol,c1,c2,inner_iters,L_c,f_hat,wall_ms\n";
  for (const OuterRecord& r : sol.trace) {
    out << r.k << ',' << g6(r.eq_viol) << ',' << g6(r.ineq_viol) << ',' << g6(r.c1) << ',' << g6(r.c2) << ','
        << r.inner_iters << ',' << g6(r.al_value) << ',' << g6(r.objective) << ',' << g6(r.wall_ms) << '\n';
  }
  return out.str();
}

std::string solution_to_json(const ALSolution& sol, const CompressedProblem& cp) {
  auto vec = [](const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  nlohmann::json doc;
  doc["schema"] = "ctap.al_solution.v1";
  doc["strategy"] = to_string(cp.strategy);
  doc["y"] = vec(sol.y);
  doc["z"] = vec(sol.z);
  doc["lambda"] = vec(sol.lambda);
  doc["mu"] = vec(sol.mu);
  doc["link_flows"] = vec(cp.link_flows(sol.y, sol.z, cp.strategy));
  doc["c1"] = sol.c.c1;
  doc["c2"] = sol.c.c2;
  doc["outer_iterations"] = sol.outer_iterations;
  doc["total_inner_iterations"] = sol.total_inner_iterations;
  doc["total_inner_evaluations"] = sol.total_inner_evaluations;
  doc["converged_outer"] = sol.converged_outer;
  doc["converged_inner"] = sol.converged_inner;
  doc["approximate_gradients"] = sol.approximate_gradients;
  return doc.dump();
}

}  // namespace ctap
