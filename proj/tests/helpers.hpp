#pragma once

// Shared test utilities and independent oracles.

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "ctap/fixtures.hpp"
#include "ctap/network.hpp"
#include "ctap/paths.hpp"

namespace testutil {

inline std::string data_path(const std::string& rel) { return std::string(CTAP_DATA_DIR) + "/" + rel; }
inline std::string sioux_net() { return data_path("SiouxFalls/SiouxFalls_net.tntp"); }
inline std::string sioux_trips() { return data_path("SiouxFalls/SiouxFalls_trips.tntp"); }

inline ctap::Link link(int tail, int head, double cap, double fft, double alpha, double power) {
  ctap::Link l;
  l.tail = tail;
  l.head = head;
  l.capacity = cap;
  l.free_flow_time = fft;
  l.bpr_alpha = alpha;
  l.bpr_power = power;
  return l;
}

/// Incidence system from explicit (od, link list) paths; demand per OD given.
inline ctap::IncidenceSystem system_from_paths(const std::vector<std::pair<int, std::vector<int>>>& spec,
                                               const std::vector<double>& demand, std::size_t link_count) {
  ctap::SingletonSplit split;
  split.demand.zone_count = static_cast<int>(demand.size()) + 1;
  for (std::size_t i = 0; i < demand.size(); ++i) {
    split.demand.od_pairs.push_back({0, static_cast<int>(i) + 1, demand[i]});
    split.source_od.push_back(static_cast<int>(i));
  }
  for (const auto& [od, links] : spec) split.paths.push_back({od, links});
  split.v0 = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(link_count));
  return ctap::assemble_incidence(split, link_count);
}

inline Eigen::VectorXd uniform(std::mt19937_64& rng, Eigen::Index n, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = u(rng);
  return v;
}

/// Central differences of f at x, step h * max(1, |x_i|).
inline Eigen::VectorXd central_difference(const std::function<double(const Eigen::VectorXd&)>& f,
                                          const Eigen::VectorXd& x, double h) {
  Eigen::VectorXd g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double step = h * std::max(1.0, std::abs(x[i]));
    Eigen::VectorXd xp = x, xm = x;
    xp[i] += step;
    xm[i] -= step;
    g[i] = (f(xp) - f(xm)) / (2.0 * step);
  }
  return g;
}

/// Adaptive Simpson quadrature to relative tolerance rel.
inline double simpson(const std::function<double(double)>& f, double a, double b, double rel, int depth = 30) {
  std::function<double(double, double, double, double, double, double, double, int)> rec =
      [&](double lo, double hi, double flo, double fmid, double fhi, double whole, double tol, int d) {
        const double mid = 0.5 * (lo + hi);
        const double lm = 0.5 * (lo + mid), rm = 0.5 * (mid + hi);
        const double flm = f(lm), frm = f(rm);
        const double left = (mid - lo) / 6.0 * (flo + 4.0 * flm + fmid);
        const double right = (hi - mid) / 6.0 * (fmid + 4.0 * frm + fhi);
        if (d <= 0 || std::abs(left + right - whole) <= 15.0 * tol) return left + right + (left + right - whole) / 15.0;
        return rec(lo, mid, flo, flm, fmid, left, tol / 2.0, d - 1) + rec(mid, hi, fmid, frm, fhi, right, tol / 2.0, d - 1);
      };
  const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return rec(a, b, fa, fm, fb, whole, rel * std::abs(whole), depth);
}

/// Singular values via a two-sided Jacobi SVD (independent of the library's path).
inline Eigen::VectorXd jacobi_singular_values(const Eigen::MatrixXd& m) {
  return Eigen::JacobiSVD<Eigen::MatrixXd>(m).singularValues();
}

/// Random 0/1 sparse matrix with at least one nonzero per row.
inline ctap::SparseRowMatrix random_binary(std::mt19937_64& rng, int rows, int cols, double density) {
  std::bernoulli_distribution b(density);
  std::uniform_int_distribution<int> pick(0, cols - 1);
  std::vector<Eigen::Triplet<double>> trips;
  for (int i = 0; i < rows; ++i) {
    bool any = false;
    for (int j = 0; j < cols; ++j)
      if (b(rng)) {
        trips.emplace_back(i, j, 1.0);
        any = true;
      }
    if (!any) trips.emplace_back(i, pick(rng), 1.0);
  }
  ctap::SparseRowMatrix s(rows, cols);
  s.setFromTriplets(trips.begin(), trips.end());
  return s;
}

inline double r_squared(const Eigen::VectorXd& pred, const Eigen::VectorXd& truth) {
  double mean = 0.0;
  for (double t : truth) mean += t;
  mean /= static_cast<double>(truth.size());
  double ss_res = 0.0, ss_tot = 0.0;
  for (Eigen::Index i = 0; i < truth.size(); ++i) {
    ss_res += (pred[i] - truth[i]) * (pred[i] - truth[i]);
    ss_tot += (truth[i] - mean) * (truth[i] - mean);
  }
  return 1.0 - ss_res / ss_tot;
}

}  // namespace testutil
