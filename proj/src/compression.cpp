#include "ctap/compression.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include "json.hpp"
#include <random>
#include <sstream>

#include "ctap/error.hpp"

namespace ctap {

Partition partition_paths(const Eigen::VectorXd& nominal_x, const IncidenceSystem& sys, double tau) {
  if (nominal_x.size() != sys.path_count()) throw InputError("nominal flow vector length differs from path count");
  if (tau < 0.0) throw InputError("threshold tau must be nonnegative");
  Partition part;
  part.tau = tau;
  part.od_argmax.assign(static_cast<std::size_t>(sys.od_count()), -1);
  for (Eigen::Index p = 0; p < sys.path_count(); ++p) {
    auto& best = part.od_argmax[static_cast<std::size_t>(sys.od_of_path[static_cast<std::size_t>(p)])];
    if (best < 0 || nominal_x[p] > nominal_x[best]) best = p;
  }
  std::vector<char> is_argmax(static_cast<std::size_t>(sys.path_count()), 0);
  for (Eigen::Index p : part.od_argmax) {
    if (p < 0) throw InvariantError("OD without any path in partition_paths");
    is_argmax[static_cast<std::size_t>(p)] = 1;
  }
  for (Eigen::Index p = 0; p < sys.path_count(); ++p) {
    if (tau == 0.0 || is_argmax[static_cast<std::size_t>(p)] || nominal_x[p] > tau)
      part.major_idx.push_back(p);
    else
      part.minor_idx.push_back(p);
  }
  return part;
}

double threshold_from_quantile(const Eigen::VectorXd& flows, double q) {
  if (flows.size() == 0) throw InputError("quantile of an empty flow vector");
  if (!(q >= 0.0 && q < 1.0)) throw InputError("quantile must lie in [0, 1)");
  std::vector<double> sorted(flows.data(), flows.data() + flows.size());
  std::sort(sorted.begin(), sorted.end());
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

namespace {

// Flip singular vector pairs so the largest-magnitude entry of each V column
// is positive; makes factors reproducible across SVD back ends.
void normalize_signs(Eigen::MatrixXd& U, Eigen::MatrixXd& V) {
  for (Eigen::Index j = 0; j < V.cols(); ++j) {
    Eigen::Index row = 0;
    V.col(j).cwiseAbs().maxCoeff(&row);
    if (V(row, j) < 0.0) {
      V.col(j) *= -1.0;
      U.col(j) *= -1.0;
    }
  }
}

Eigen::MatrixXd thin_q(const Eigen::MatrixXd& Y) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(Y);
  return qr.householderQ() * Eigen::MatrixXd::Identity(Y.rows(), Y.cols());
}

SvdFactors dense_factors(const SparseRowMatrix& matrix, Eigen::Index r) {
  const Eigen::MatrixXd dense(matrix);
  Eigen::BDCSVD<Eigen::MatrixXd> svd(dense, Eigen::ComputeThinU | Eigen::ComputeThinV);
  SvdFactors f;
  f.U = svd.matrixU().leftCols(r);
  f.V = svd.matrixV().leftCols(r);
  f.sigma = svd.singularValues().head(r);
  f.sigma_next = svd.singularValues().size() > r ? svd.singularValues()[r] : 0.0;
  normalize_signs(f.U, f.V);
  return f;
}

// Subspace iteration with Rayleigh-Ritz extraction. Stops once every Ritz
// pair i <= r + 1 satisfies ||A v_i - sigma_i u_i|| <= tol * sigma_1, which
// bounds the error of each reported singular value by the same amount
// (A' u_i = sigma_i v_i holds exactly by construction).
SvdFactors randomized_factors(const SparseRowMatrix& A, Eigen::Index r, const SvdOptions& opt) {
  const Eigen::Index min_dim = std::min(A.rows(), A.cols());
  const Eigen::Index extra = std::max<Eigen::Index>(opt.oversampling, r);
  const Eigen::Index k = std::min<Eigen::Index>(r + 1 + extra, min_dim);
  const Eigen::Index checked = std::min<Eigen::Index>(r + 1, k);
  std::mt19937_64 rng(opt.seed);
  std::normal_distribution<double> gauss;
  Eigen::MatrixXd omega(A.cols(), k);
  for (Eigen::Index j = 0; j < k; ++j)
    for (Eigen::Index i = 0; i < A.cols(); ++i) omega(i, j) = gauss(rng);

  Eigen::MatrixXd Q = thin_q(A * omega);
  double worst = 0.0;
  for (int it = 0;; ++it) {
    if (it >= opt.power_iterations) {
      const Eigen::MatrixXd small = (A.transpose() * Q).transpose();  // k x m
      Eigen::BDCSVD<Eigen::MatrixXd> svd(small, Eigen::ComputeThinU | Eigen::ComputeThinV);
      const Eigen::MatrixXd Uk = Q * svd.matrixU().leftCols(checked);
      const Eigen::MatrixXd Vk = svd.matrixV().leftCols(checked);
      const Eigen::VectorXd sk = svd.singularValues().head(checked);
      const double scale = sk.size() > 0 && sk[0] > 0.0 ? sk[0] : 1.0;
      const Eigen::MatrixXd R = A * Vk - Uk * sk.asDiagonal();
      worst = R.colwise().norm().maxCoeff() / scale;
      if (worst <= 1e-10 || (k == min_dim && it > opt.power_iterations)) {  // full block spans range(A)
        SvdFactors f;
        f.U = Uk.leftCols(r);
        f.V = Vk.leftCols(r);
        f.sigma = sk.head(r);
        f.sigma_next = checked > r ? sk[r] : 0.0;
        normalize_signs(f.U, f.V);
        return f;
      }
      if (it >= opt.max_power_iterations)
        throw NumericError("randomized SVD did not converge: worst Ritz residual " + std::to_string(worst) +
                           " (relative) after " + std::to_string(it) + " power iterations");
    }
    Eigen::MatrixXd Z = thin_q(A.transpose() * Q);
    Q = thin_q(A * Z);
  }
}

}  // namespace

SvdFactors truncated_svd(const SparseRowMatrix& matrix, Eigen::Index r, const SvdOptions& options) {
  const Eigen::Index min_dim = std::min(matrix.rows(), matrix.cols());
  if (r < 1 || r > min_dim)
    throw InputError("rank " + std::to_string(r) + " outside [1, " + std::to_string(min_dim) + "]");
  bool dense = options.method == SvdMethod::dense ||
               (options.method == SvdMethod::automatic && min_dim <= options.dense_limit);
  return dense ? dense_factors(matrix, r) : randomized_factors(matrix, r, options);
}

Eigen::VectorXd singular_values(const SparseRowMatrix& matrix) {
  if (matrix.rows() == 0 || matrix.cols() == 0) return {};
  const Eigen::MatrixXd dense(matrix);
  Eigen::BDCSVD<Eigen::MatrixXd> svd(dense);
  return svd.singularValues();
}

const char* to_string(GradientStrategy s) {
  switch (s) {
    case GradientStrategy::direct: return "direct";
    case GradientStrategy::chain: return "chain";
    case GradientStrategy::factored: return "factored";
    case GradientStrategy::mixed: return "mixed";
  }
  return "?";
}

GradientStrategy parse_strategy(const std::string& name) {
  if (name == "direct") return GradientStrategy::direct;
  if (name == "chain") return GradientStrategy::chain;
  if (name == "factored") return GradientStrategy::factored;
  if (name == "mixed") return GradientStrategy::mixed;
  throw InputError("unknown gradient strategy '" + name + "' (direct|chain|factored|mixed)");
}

namespace {

SparseRowMatrix select_rows(const SparseRowMatrix& m, const std::vector<Eigen::Index>& rows) {
  std::vector<Eigen::Triplet<double>> entries;
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (SparseRowMatrix::InnerIterator it(m, rows[i]); it; ++it)
      entries.emplace_back(static_cast<Eigen::Index>(i), it.col(), it.value());
  SparseRowMatrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
  out.setFromTriplets(entries.begin(), entries.end());
  out.makeCompressed();
  return out;
}

SparseRowMatrix select_od_columns(const IncidenceSystem& sys, const std::vector<Eigen::Index>& cols,
                                  std::vector<int>& od_of_col) {
  std::vector<Eigen::Triplet<double>> entries;
  od_of_col.clear();
  for (std::size_t j = 0; j < cols.size(); ++j) {
    const int od = sys.od_of_path[static_cast<std::size_t>(cols[j])];
    od_of_col.push_back(od);
    entries.emplace_back(od, static_cast<Eigen::Index>(j), 1.0);
  }
  SparseRowMatrix out(sys.od_count(), static_cast<Eigen::Index>(cols.size()));
  out.setFromTriplets(entries.begin(), entries.end());
  out.makeCompressed();
  return out;
}

}  // namespace

SparseRowMatrix minor_block(const IncidenceSystem& sys, const Partition& part) {
  return select_rows(sys.B, part.minor_idx);
}

CompressedProblem build_compressed(const IncidenceSystem& sys, const Partition& part, SvdFactors factors,
                                   GradientStrategy strategy) {
  const Eigen::Index minor = part.minor_count();
  const Eigen::Index m = sys.link_count();
  if (part.major_count() + minor != sys.path_count()) throw InputError("partition does not cover the path set");
  if (minor == 0) {
    factors = SvdFactors{};
    factors.U.resize(0, 0);
    factors.V.resize(m, 0);
  }
  if (factors.U.rows() != minor || factors.V.rows() != m || factors.U.cols() != factors.rank() ||
      factors.V.cols() != factors.rank()) {
    throw InputError("SVD factors (" + std::to_string(factors.U.rows()) + "x" + std::to_string(factors.U.cols()) +
                     ", V " + std::to_string(factors.V.rows()) + "x" + std::to_string(factors.V.cols()) +
                     ") do not match the minor block " + std::to_string(minor) + "x" + std::to_string(m));
  }

  CompressedProblem cp;
  cp.strategy = strategy;
  cp.partition = part;
  cp.B1 = select_rows(sys.B, part.major_idx);
  cp.B2 = select_rows(sys.B, part.minor_idx);
  cp.A1 = select_od_columns(sys, part.major_idx, cp.od_of_major);
  cp.A2 = select_od_columns(sys, part.minor_idx, cp.od_of_minor);
  cp.v0 = sys.v0;
  cp.d = sys.d;
  cp.factors = std::move(factors);
  cp.M = cp.A2 * cp.factors.U;
  if (cp.M.rows() != sys.od_count()) cp.M.setZero(sys.od_count(), cp.factors.rank());
  if (strategy == GradientStrategy::direct) {
    Eigen::MatrixXd D = cp.B2.transpose() * cp.factors.U;
    if (D.rows() != m) D.setZero(m, cp.factors.rank());
    cp.D = std::move(D);
  }

  cp.argmax_slot.assign(static_cast<std::size_t>(sys.od_count()), -1);
  for (std::size_t slot = 0; slot < part.major_idx.size(); ++slot) {
    const Eigen::Index p = part.major_idx[slot];
    const int od = sys.od_of_path[static_cast<std::size_t>(p)];
    if (part.od_argmax[static_cast<std::size_t>(od)] == p) cp.argmax_slot[static_cast<std::size_t>(od)] = static_cast<Eigen::Index>(slot);
  }
  return cp;
}

Eigen::VectorXd CompressedProblem::minor_link_flows(const Eigen::VectorXd& z, GradientStrategy how) const {
  if (rank() == 0) return Eigen::VectorXd::Zero(link_count());
  switch (how) {
    case GradientStrategy::direct:
      if (!D) throw InvariantError("direct strategy requires the materialized D matrix");
      return *D * z;
    case GradientStrategy::chain: {
      const Eigen::VectorXd w = factors.U * z;
      return B2.transpose() * w;
    }
    case GradientStrategy::factored:
    case GradientStrategy::mixed:
      return factors.V * factors.sigma.cwiseProduct(z);
  }
  return {};
}

Eigen::VectorXd CompressedProblem::link_flows(const Eigen::VectorXd& y, const Eigen::VectorXd& z,
                                              GradientStrategy how) const {
  Eigen::VectorXd v = v0;
  v.noalias() += B1.transpose() * y;
  if (rank() > 0) v += minor_link_flows(z, how);
  return v;
}

Eigen::VectorXd CompressedProblem::equality_residual(const Eigen::VectorXd& y, const Eigen::VectorXd& z,
                                                     GradientStrategy how) const {
  Eigen::VectorXd r = -d;
  r.noalias() += A1 * y;
  if (rank() > 0) {
    if (how == GradientStrategy::chain || how == GradientStrategy::mixed) {
      const Eigen::VectorXd w = factors.U * z;
      r.noalias() += A2 * w;
    } else {
      r.noalias() += M * z;
    }
  }
  return r;
}

CertificatePoint feasibility_certificate(const CompressedProblem& cp) {
  CertificatePoint pt;
  pt.y = Eigen::VectorXd::Zero(cp.major_count());
  pt.z = Eigen::VectorXd::Zero(cp.rank());
  for (Eigen::Index od = 0; od < cp.od_count(); ++od) {
    const Eigen::Index slot = cp.argmax_slot[static_cast<std::size_t>(od)];
    if (slot < 0) throw InvariantError("OD " + std::to_string(od) + " has no major path");
    pt.y[slot] = cp.d[od];
  }
  return pt;
}

CertificatePoint proportional_start(const CompressedProblem& cp, const Eigen::VectorXd& nominal_x) {
  CertificatePoint pt = feasibility_certificate(cp);
  Eigen::VectorXd weight_sum = Eigen::VectorXd::Zero(cp.od_count());
  for (std::size_t slot = 0; slot < cp.partition.major_idx.size(); ++slot)
    weight_sum[cp.od_of_major[slot]] += std::max(0.0, nominal_x[cp.partition.major_idx[slot]]);
  for (std::size_t slot = 0; slot < cp.partition.major_idx.size(); ++slot) {
    const int od = cp.od_of_major[slot];
    if (weight_sum[od] <= 0.0) continue;
    pt.y[static_cast<Eigen::Index>(slot)] =
        cp.d[od] * std::max(0.0, nominal_x[cp.partition.major_idx[slot]]) / weight_sum[od];
  }
  return pt;
}

ExpandedSolution expand_solution(const CompressedProblem& cp, const Eigen::VectorXd& y, const Eigen::VectorXd& z) {
  ExpandedSolution out;
  out.x_hat = Eigen::VectorXd::Zero(cp.major_count() + cp.minor_count());
  for (std::size_t slot = 0; slot < cp.partition.major_idx.size(); ++slot)
    out.x_hat[cp.partition.major_idx[slot]] = y[static_cast<Eigen::Index>(slot)];
  if (cp.rank() > 0) {
    const Eigen::VectorXd w = cp.factors.U * z;
    for (std::size_t slot = 0; slot < cp.partition.minor_idx.size(); ++slot)
      out.x_hat[cp.partition.minor_idx[slot]] = w[static_cast<Eigen::Index>(slot)];
  }
  out.v_tilde = cp.link_flows(y, z, cp.strategy);
  return out;
}

namespace {
std::vector<double> row_major(const Eigen::MatrixXd& m) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) out.push_back(m(i, j));
  return out;
}

Eigen::MatrixXd from_row_major(const std::vector<double>& data, Eigen::Index rows, Eigen::Index cols) {
  if (static_cast<Eigen::Index>(data.size()) != rows * cols) throw InputError("factor array has wrong length");
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = data[static_cast<std::size_t>(i * cols + j)];
  return m;
}
}  // namespace

std::string compression_model_to_json(const CompressedProblem& cp) {
  const auto& f = cp.factors;
  nlohmann::json doc;
  doc["schema"] = "ctap.compression.v1";
  doc["tau"] = cp.partition.tau;
  doc["rank"] = f.rank();
  doc["major_idx"] = cp.partition.major_idx;
  doc["minor_idx"] = cp.partition.minor_idx;
  doc["od_argmax"] = cp.partition.od_argmax;
  doc["sigma"] = std::vector<double>(f.sigma.data(), f.sigma.data() + f.sigma.size());
  doc["sigma_next"] = f.sigma_next;
  doc["U"] = {{"rows", f.U.rows()}, {"cols", f.U.cols()}, {"data", row_major(f.U)}};
  doc["V"] = {{"rows", f.V.rows()}, {"cols", f.V.cols()}, {"data", row_major(f.V)}};
  return doc.dump();
}

std::pair<Partition, SvdFactors> compression_model_from_json(const std::string& text) {
  try {
    const auto doc = nlohmann::json::parse(text);
    Partition part;
    part.tau = doc.at("tau").get<double>();
    part.major_idx = doc.at("major_idx").get<std::vector<Eigen::Index>>();
    part.minor_idx = doc.at("minor_idx").get<std::vector<Eigen::Index>>();
    part.od_argmax = doc.at("od_argmax").get<std::vector<Eigen::Index>>();
    SvdFactors f;
    const auto sigma = doc.at("sigma").get<std::vector<double>>();
    f.sigma = Eigen::Map<const Eigen::VectorXd>(sigma.data(), static_cast<Eigen::Index>(sigma.size()));
    f.sigma_next = doc.at("sigma_next").get<double>();
    const auto& U = doc.at("U");
    const auto& V = doc.at("V");
    f.U = from_row_major(U.at("data").get<std::vector<double>>(), U.at("rows").get<Eigen::Index>(), U.at("cols").get<Eigen::Index>());
    f.V = from_row_major(V.at("data").get<std::vector<double>>(), V.at("rows").get<Eigen::Index>(), V.at("cols").get<Eigen::Index>());
    return {std::move(part), std::move(f)};
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed compression model JSON: ") + e.what());
  }
}

std::string spectrum_csv(const Eigen::VectorXd& sigma) {
  std::ostringstream out;
  out << "rank,sigma,cumulative_energy_sq,cumulative_share\n";
  const double total_sq = sigma.squaredNorm();
  const double total = sigma.sum();
  double acc_sq = 0.0;
  double acc = 0.0;
  char buf[128];
  for (Eigen::Index i = 0; i < sigma.size(); ++i) {
    acc_sq += sigma[i] * sigma[i];
    acc += sigma[i];
    std::snprintf(buf, sizeof buf, "%ld,%.6g,%.6g,%.6g\n", static_cast<long>(i + 1), sigma[i],
                  total_sq > 0 ? acc_sq / total_sq : 0.0, total > 0 ? acc / total : 0.0);
    out << buf;
  }
  return out.str();
}

}  // namespace ctap
