#pragma once

// Working path sets and the sparse incidence system built from them.

#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <string>
#include <vector>

#include "ctap/network.hpp"

namespace ctap {

using SparseRowMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

struct Path {
  int od_index = 0;             // index into the owning demand table
  std::vector<LinkId> links;    // contiguous walk origin -> destination

  bool operator==(const Path&) const = default;
};

/// Up to k loopless paths per OD pair, cheapest first under free-flow times
/// (Yen). Paths with identical link sets are kept once. Throws InputError for
/// an unreachable OD pair or k < 1.
std::vector<Path> build_path_set(const Network& net, const DemandTable& demand, int k);

/// Result of folding single-path OD pairs into a fixed link-flow offset.
struct SingletonSplit {
  std::vector<Path> paths;          // od_index refers to `demand` below
  DemandTable demand;               // multi-path OD pairs only
  std::vector<int> source_od;       // index of each kept OD in the input table
  Eigen::VectorXd v0;               // length m
  double singleton_demand = 0.0;
};

SingletonSplit split_singletons(const std::vector<Path>& paths, const DemandTable& demand, std::size_t link_count);

/// OD-path matrix A (l x n), path-link matrix B (n x m), offset v0, demand d.
struct IncidenceSystem {
  SparseRowMatrix A;
  SparseRowMatrix B;
  Eigen::VectorXd v0;
  Eigen::VectorXd d;
  std::vector<Path> paths;
  std::vector<int> od_of_path;
  DemandTable demand;

  Eigen::Index od_count() const { return d.size(); }
  Eigen::Index path_count() const { return static_cast<Eigen::Index>(paths.size()); }
  Eigen::Index link_count() const { return v0.size(); }

  /// B'x + v0
  Eigen::VectorXd link_flows(const Eigen::VectorXd& x) const;
  /// Ax
  Eigen::VectorXd od_flows(const Eigen::VectorXd& x) const;
};

/// Builds A and B from an already split path set. Throws InvariantError for a
/// path that references an unknown OD pair or link.
IncidenceSystem assemble_incidence(const SingletonSplit& split, std::size_t link_count);

/// Path generation, singleton folding and assembly in one call.
IncidenceSystem build_incidence_system(const Network& net, const DemandTable& demand, int k);

/// Path set JSON: [{"od": [origin, dest], "links": [ids...]}, ...] with
/// 1-based node ids and 0-based link indices (TNTP row order).
std::string path_set_to_json(const std::vector<Path>& paths, const DemandTable& demand);
std::vector<Path> path_set_from_json(const std::string& text, const DemandTable& demand);

}  // namespace ctap
