#pragma once

// Road network and OD demand model, plus TNTP readers/writers.
//
// Node and zone ids are 1-based in TNTP files and 0-based in memory.

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace ctap {

using NodeId = int;
using LinkId = int;

struct Link {
  LinkId id = 0;
  NodeId tail = 0;
  NodeId head = 0;
  double capacity = 1.0;
  double free_flow_time = 0.0;
  double bpr_alpha = 0.15;
  double bpr_power = 4.0;
  double length = 0.0;

  bool operator==(const Link&) const = default;
};

class Network {
 public:
  Network() = default;
  Network(int node_count, std::vector<Link> links);

  int node_count() const { return node_count_; }
  std::size_t link_count() const { return links_.size(); }
  const std::vector<Link>& links() const { return links_; }
  const Link& link(LinkId id) const { return links_[static_cast<std::size_t>(id)]; }
  const std::vector<LinkId>& outgoing(NodeId node) const {
    return adjacency_[static_cast<std::size_t>(node)];
  }

  bool operator==(const Network& other) const {
    return node_count_ == other.node_count_ && links_ == other.links_;
  }

 private:
  int node_count_ = 0;
  std::vector<Link> links_;
  std::vector<std::vector<LinkId>> adjacency_;
};

struct OdPair {
  NodeId origin = 0;
  NodeId destination = 0;
  double demand = 0.0;

  bool operator==(const OdPair&) const = default;
};

struct DemandTable {
  int zone_count = 0;
  std::vector<OdPair> od_pairs;

  double total() const;
};

/// Parses a TNTP network file. Throws ParseError (with line number) on
/// malformed metadata, bad rows, non-numeric fields or count mismatches.
Network parse_network(std::string_view text);

/// Parses a TNTP trips file. Zero-demand entries are dropped.
DemandTable parse_trips(std::string_view text);

/// Writes a network in TNTP layout; parse_network(write_network(n)) == n.
std::string write_network(const Network& net);
std::string write_trips(const DemandTable& demand);

Network load_network(const std::string& path);
DemandTable load_trips(const std::string& path);

/// One human-readable line per OD pair whose destination cannot be reached
/// from its origin. Empty when every pair is connected.
std::vector<std::string> validate_network(const Network& net, const DemandTable& demand);

}  // namespace ctap
