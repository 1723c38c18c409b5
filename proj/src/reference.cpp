#include "ctap/reference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include "json.hpp"

namespace ctap {

double bpr_link_time(const Link& link, double v) {
  if (v <= 0.0) return link.free_flow_time;
  return link.free_flow_time * (1.0 + link.bpr_alpha * std::pow(v / link.capacity, link.bpr_power));
}

double bpr_link_time_derivative(const Link& link, double v) {
  if (v < 0.0) return 0.0;
  if (v == 0.0) return link.bpr_power == 1.0 ? link.free_flow_time * link.bpr_alpha / link.capacity : 0.0;
  return link.free_flow_time * link.bpr_alpha * link.bpr_power / link.capacity *
         std::pow(v / link.capacity, link.bpr_power - 1.0);
}

double bpr_link_integral(const Link& link, double v) {
  if (v <= 0.0) return link.free_flow_time * v;
  return link.free_flow_time * v *
         (1.0 + link.bpr_alpha / (link.bpr_power + 1.0) * std::pow(v / link.capacity, link.bpr_power));
}

double beckmann_objective(const Network& net, const Eigen::VectorXd& v) {
  double f = 0.0;
  for (const Link& l : net.links()) f += bpr_link_integral(l, v[l.id]);
  return f;
}

Eigen::VectorXd beckmann_gradient(const Network& net, const Eigen::VectorXd& v) {
  Eigen::VectorXd g(v.size());
  for (const Link& l : net.links()) g[l.id] = bpr_link_time(l, v[l.id]);
  return g;
}

namespace {

// Paths grouped by OD, in path index order.
std::vector<std::vector<Eigen::Index>> paths_by_od(const IncidenceSystem& sys) {
  std::vector<std::vector<Eigen::Index>> groups(static_cast<std::size_t>(sys.od_count()));
  for (Eigen::Index p = 0; p < sys.path_count(); ++p)
    groups[static_cast<std::size_t>(sys.od_of_path[static_cast<std::size_t>(p)])].push_back(p);
  return groups;
}

double path_time(const IncidenceSystem& sys, const Eigen::VectorXd& link_time, Eigen::Index p) {
  double c = 0.0;
  for (LinkId l : sys.paths[static_cast<std::size_t>(p)].links) c += link_time[l];
  return c;
}

}  // namespace

double relative_gap(const IncidenceSystem& sys, const Network& net, const Eigen::VectorXd& x) {
  if (sys.path_count() == 0) return 0.0;
  const Eigen::VectorXd t = beckmann_gradient(net, sys.link_flows(x));
  const auto groups = paths_by_od(sys);
  double total = 0.0;
  double shortest = 0.0;
  for (std::size_t od = 0; od < groups.size(); ++od) {
    double cmin = std::numeric_limits<double>::infinity();
    for (Eigen::Index p : groups[od]) {
      const double c = path_time(sys, t, p);
      cmin = std::min(cmin, c);
      total += x[p] * c;
    }
    shortest += sys.d[static_cast<Eigen::Index>(od)] * cmin;
  }
  if (shortest <= 0.0) return 0.0;
  return (total - shortest) / shortest;
}

Eigen::VectorXd all_or_nothing_start(const IncidenceSystem& sys) {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(sys.path_count());
  const auto groups = paths_by_od(sys);
  for (std::size_t od = 0; od < groups.size(); ++od) x[groups[od].front()] = sys.d[static_cast<Eigen::Index>(od)];
  return x;
}

ReferenceSolution solve_reference_ue(const IncidenceSystem& sys, const Network& net, const ReferenceConfig& cfg,
                                     std::optional<Eigen::VectorXd> start) {
  ReferenceSolution sol;
  sol.x_star = start ? *start : all_or_nothing_start(sys);
  if (sol.x_star.size() != sys.path_count()) throw InputError("reference start has wrong length");
  Eigen::VectorXd& x = sol.x_star;
  Eigen::VectorXd v = sys.link_flows(x);
  const auto groups = paths_by_od(sys);
  const auto& links = net.links();

  std::vector<char> on_shortest(net.link_count(), 0);
  std::vector<double> shift;
  std::vector<LinkId> touched;
  std::vector<double> delta_v(net.link_count(), 0.0);

  double f = beckmann_objective(net, v);
  sol.relative_gap = relative_gap(sys, net, x);
  for (sol.iterations = 0; sol.iterations < cfg.max_iterations; ++sol.iterations) {
    if (sol.relative_gap <= cfg.gap_tolerance) break;
    sol.objective_trace.push_back(f);
    const double f_sweep_start = f;

    for (std::size_t od = 0; od < groups.size(); ++od) {
      const auto& group = groups[od];
      if (group.size() < 2) continue;
      // Current path times for this OD.
      Eigen::Index best = group.front();
      double best_cost = std::numeric_limits<double>::infinity();
      std::vector<double> cost(group.size());
      for (std::size_t j = 0; j < group.size(); ++j) {
        double c = 0.0;
        for (LinkId l : sys.paths[static_cast<std::size_t>(group[j])].links) c += bpr_link_time(links[static_cast<std::size_t>(l)], v[l]);
        cost[j] = c;
        if (c < best_cost) {
          best_cost = c;
          best = group[j];
        }
      }
      for (LinkId l : sys.paths[static_cast<std::size_t>(best)].links) on_shortest[static_cast<std::size_t>(l)] = 1;

      // Newton-scaled shift from each costlier path onto the shortest one.
      shift.assign(group.size(), 0.0);
      double slope = 0.0;
      for (std::size_t j = 0; j < group.size(); ++j) {
        const Eigen::Index p = group[j];
        if (p == best || x[p] <= 0.0) continue;
        const double excess = cost[j] - best_cost;
        if (excess <= 0.0) continue;
        double curvature = 0.0;
        const auto& pl = sys.paths[static_cast<std::size_t>(p)].links;
        for (LinkId l : pl)
          if (!on_shortest[static_cast<std::size_t>(l)]) curvature += bpr_link_time_derivative(links[static_cast<std::size_t>(l)], v[l]);
        for (LinkId l : sys.paths[static_cast<std::size_t>(best)].links) {
          if (std::find(pl.begin(), pl.end(), l) == pl.end())
            curvature += bpr_link_time_derivative(links[static_cast<std::size_t>(l)], v[l]);
        }
        const double step = curvature > 0.0 ? excess / curvature : x[p];
        shift[j] = std::min(x[p], step);
        slope -= shift[j] * excess;
      }
      for (LinkId l : sys.paths[static_cast<std::size_t>(best)].links) on_shortest[static_cast<std::size_t>(l)] = 0;
      if (slope >= 0.0) continue;

      // Link-flow change for a unit step, restricted to touched links.
      touched.clear();
      for (std::size_t j = 0; j < group.size(); ++j) {
        if (shift[j] == 0.0) continue;
        for (LinkId l : sys.paths[static_cast<std::size_t>(group[j])].links) {
          if (delta_v[static_cast<std::size_t>(l)] == 0.0) touched.push_back(l);
          delta_v[static_cast<std::size_t>(l)] -= shift[j];
        }
        for (LinkId l : sys.paths[static_cast<std::size_t>(best)].links) {
          if (delta_v[static_cast<std::size_t>(l)] == 0.0) touched.push_back(l);
          delta_v[static_cast<std::size_t>(l)] += shift[j];
        }
      }
      std::sort(touched.begin(), touched.end());
      touched.erase(std::unique(touched.begin(), touched.end()), touched.end());
      double f_local = 0.0;
      for (LinkId l : touched) f_local += bpr_link_integral(links[static_cast<std::size_t>(l)], v[l]);

      double alpha = 1.0;
      bool accepted = false;
      double f_local_new = 0.0;
      for (int bt = 0; bt <= cfg.max_backtracks; ++bt, alpha *= 0.5) {
        f_local_new = 0.0;
        for (LinkId l : touched)
          f_local_new += bpr_link_integral(links[static_cast<std::size_t>(l)], v[l] + alpha * delta_v[static_cast<std::size_t>(l)]);
        if (f_local_new <= f_local + cfg.armijo_c * alpha * slope) {
          accepted = true;
          break;
        }
      }
      if (accepted) {
        double moved = 0.0;
        for (std::size_t j = 0; j < group.size(); ++j) {
          if (group[j] == best) continue;
          x[group[j]] -= alpha * shift[j];
          if (x[group[j]] < 0.0) x[group[j]] = 0.0;
          moved += x[group[j]];
        }
        // Shortest path absorbs the remainder so that Ax = d holds to rounding.
        x[best] = std::max(0.0, sys.d[static_cast<Eigen::Index>(od)] - moved);
        for (LinkId l : touched) v[l] += alpha * delta_v[static_cast<std::size_t>(l)];
        f += f_local_new - f_local;
      }
      for (LinkId l : touched) delta_v[static_cast<std::size_t>(l)] = 0.0;
    }

    // Refresh from scratch to stop drift in the incrementally updated flows.
    v = sys.link_flows(x);
    f = beckmann_objective(net, v);
    if (f > f_sweep_start + 1e-9 * std::max(1.0, std::abs(f_sweep_start))) {
      throw DivergenceError("gradient projection objective increased from " + std::to_string(f_sweep_start) + " to " +
                                std::to_string(f) + " at sweep " + std::to_string(sol.iterations),
                            x, v);
    }
    sol.relative_gap = relative_gap(sys, net, x);
  }
  sol.objective_trace.push_back(f);
  sol.converged = sol.relative_gap <= cfg.gap_tolerance;
  sol.v_star = sys.link_flows(x);
  return sol;
}

std::string reference_to_json(const ReferenceSolution& sol) {
  nlohmann::json doc;
  doc["schema"] = "ctap.reference.v1";
  doc["x"] = std::vector<double>(sol.x_star.data(), sol.x_star.data() + sol.x_star.size());
  doc["v"] = std::vector<double>(sol.v_star.data(), sol.v_star.data() + sol.v_star.size());
  doc["gap"] = sol.relative_gap;
  doc["iterations"] = sol.iterations;
  doc["converged"] = sol.converged;
  return doc.dump();
}

ReferenceSolution reference_from_json(const std::string& text) {
  try {
    const auto doc = nlohmann::json::parse(text);
    ReferenceSolution sol;
    const auto x = doc.at("x").get<std::vector<double>>();
    const auto v = doc.at("v").get<std::vector<double>>();
    sol.x_star = Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
    sol.v_star = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
    sol.relative_gap = doc.at("gap").get<double>();
    sol.iterations = doc.at("iterations").get<int>();
    sol.converged = doc.value("converged", false);
    return sol;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed reference JSON: ") + e.what());
  }
}

}  // namespace ctap
