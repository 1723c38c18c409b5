#pragma once

// Major/minor path partition, truncated SVD of the minor path-link block and
// the compressed problem
//
//   min f(B1'y + Dz + v0)  s.t.  y >= 0,  A1 y + M z = d,  U_r z >= 0
//
// with D = B2'U_r and M = A2 U_r.

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ctap/paths.hpp"

namespace ctap {

struct Partition {
  double tau = 0.0;
  std::vector<Eigen::Index> major_idx;  // ascending path indices (size s)
  std::vector<Eigen::Index> minor_idx;  // ascending path indices (size n - s)
  std::vector<Eigen::Index> od_argmax;  // per OD: path index with the largest nominal flow

  Eigen::Index major_count() const { return static_cast<Eigen::Index>(major_idx.size()); }
  Eigen::Index minor_count() const { return static_cast<Eigen::Index>(minor_idx.size()); }
};

/// Each OD's largest-flow path is major (ties go to the lowest index); other
/// paths are major iff their flow exceeds tau. tau == 0 keeps every path major.
Partition partition_paths(const Eigen::VectorXd& nominal_x, const IncidenceSystem& sys, double tau);

/// q-quantile with linear interpolation between order statistics, q in [0, 1).
double threshold_from_quantile(const Eigen::VectorXd& flows, double q);

struct SvdFactors {
  Eigen::MatrixXd U;      // (n - s) x r, orthonormal columns
  Eigen::VectorXd sigma;  // r, nonincreasing
  Eigen::MatrixXd V;      // m x r, orthonormal columns
  double sigma_next = 0.0;  // estimate of the largest discarded singular value

  Eigen::Index rank() const { return sigma.size(); }
};

enum class SvdMethod { automatic, dense, randomized };

struct SvdOptions {
  SvdMethod method = SvdMethod::automatic;
  Eigen::Index dense_limit = 512;  // automatic uses dense when min(rows, cols) <= this
  int oversampling = 10;         // block size is r + 1 + max(oversampling, r)
  int power_iterations = 4;      // before the first convergence check
  int max_power_iterations = 2000;
  std::uint64_t seed = 0x5eed5eedULL;
};

/// Rank-r factors of a sparse matrix. Throws InputError when r is outside
/// [1, min(rows, cols)] and NumericError if the randomized iteration cannot
/// certify its Ritz residuals within the iteration budget.
SvdFactors truncated_svd(const SparseRowMatrix& matrix, Eigen::Index r, const SvdOptions& options = {});

/// All singular values of a sparse matrix (dense computation).
Eigen::VectorXd singular_values(const SparseRowMatrix& matrix);

enum class GradientStrategy { direct, chain, factored, mixed };

const char* to_string(GradientStrategy s);
GradientStrategy parse_strategy(const std::string& name);

struct CompressedProblem {
  SparseRowMatrix A1, A2, B1, B2;
  SvdFactors factors;
  std::optional<Eigen::MatrixXd> D;  // m x r, direct strategy only
  Eigen::MatrixXd M;                 // l x r
  Eigen::VectorXd v0, d;
  Partition partition;
  std::vector<int> od_of_major;
  std::vector<int> od_of_minor;
  std::vector<Eigen::Index> argmax_slot;  // per OD: slot of its argmax path within y
  GradientStrategy strategy = GradientStrategy::mixed;

  Eigen::Index major_count() const { return partition.major_count(); }
  Eigen::Index minor_count() const { return partition.minor_count(); }
  Eigen::Index rank() const { return factors.rank(); }
  Eigen::Index link_count() const { return v0.size(); }
  Eigen::Index od_count() const { return d.size(); }

  /// Minor contribution to link flows: B2'(U_r z), D z or V_r Sigma_r z
  /// depending on `how`.
  Eigen::VectorXd minor_link_flows(const Eigen::VectorXd& z, GradientStrategy how) const;
  /// B1'y + (minor term) + v0
  Eigen::VectorXd link_flows(const Eigen::VectorXd& y, const Eigen::VectorXd& z, GradientStrategy how) const;
  /// A1 y + M z - d, with the minor term as A2(U_r z) for chain and mixed.
  Eigen::VectorXd equality_residual(const Eigen::VectorXd& y, const Eigen::VectorXd& z, GradientStrategy how) const;
};

/// Throws InputError when the factors do not match the partition's minor block.
CompressedProblem build_compressed(const IncidenceSystem& sys, const Partition& part, SvdFactors factors,
                                   GradientStrategy strategy);

/// Rows of B selected by the partition's minor set.
SparseRowMatrix minor_block(const IncidenceSystem& sys, const Partition& part);

struct CertificatePoint {
  Eigen::VectorXd y;
  Eigen::VectorXd z;
};

/// Each OD's demand on its argmax major path, z = 0. Satisfies A1 y = d exactly.
CertificatePoint feasibility_certificate(const CompressedProblem& cp);

/// Each OD's demand spread over its major paths in proportion to nominal flow;
/// falls back to the certificate for ODs whose major paths carry no nominal flow.
CertificatePoint proportional_start(const CompressedProblem& cp, const Eigen::VectorXd& nominal_x);

struct ExpandedSolution {
  Eigen::VectorXd x_hat;    // length n
  Eigen::VectorXd v_tilde;  // length m
};

ExpandedSolution expand_solution(const CompressedProblem& cp, const Eigen::VectorXd& y, const Eigen::VectorXd& z);

std::string compression_model_to_json(const CompressedProblem& cp);
/// Restores partition and factors; rebuild the problem with build_compressed.
std::pair<Partition, SvdFactors> compression_model_from_json(const std::string& text);

/// rank, sigma, cumulative energy in sigma^2, cumulative share of sigma.
std::string spectrum_csv(const Eigen::VectorXd& sigma);

}  // namespace ctap
