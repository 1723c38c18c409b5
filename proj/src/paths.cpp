#include "ctap/paths.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include "json.hpp"
#include <queue>
#include <set>

#include "ctap/error.hpp"

namespace ctap {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct CandidatePath {
  double cost = 0.0;
  std::vector<LinkId> links;

  bool operator<(const CandidatePath& other) const {
    if (cost != other.cost) return cost < other.cost;
    if (links.size() != other.links.size()) return links.size() < other.links.size();
    return links < other.links;
  }
};

class ShortestPathSearch {
 public:
  explicit ShortestPathSearch(const Network& net)
      : net_(net),
        dist_(static_cast<std::size_t>(net.node_count())),
        pred_(static_cast<std::size_t>(net.node_count())),
        banned_link_(net.link_count(), 0),
        banned_node_(static_cast<std::size_t>(net.node_count()), 0) {}

  void ban_link(LinkId l) { banned_link_[static_cast<std::size_t>(l)] = 1; }
  void ban_node(NodeId n) { banned_node_[static_cast<std::size_t>(n)] = 1; }
  void clear_bans() {
    std::fill(banned_link_.begin(), banned_link_.end(), 0);
    std::fill(banned_node_.begin(), banned_node_.end(), 0);
  }

  // Dijkstra on free-flow times; returns false when `to` is unreachable.
  bool run(NodeId from, NodeId to, CandidatePath& out) {
    std::fill(dist_.begin(), dist_.end(), kInf);
    std::fill(pred_.begin(), pred_.end(), -1);
    using Item = std::pair<double, NodeId>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
    dist_[static_cast<std::size_t>(from)] = 0.0;
    heap.emplace(0.0, from);
    while (!heap.empty()) {
      auto [du, u] = heap.top();
      heap.pop();
      if (du > dist_[static_cast<std::size_t>(u)]) continue;
      if (u == to) break;
      for (LinkId lid : net_.outgoing(u)) {
        if (banned_link_[static_cast<std::size_t>(lid)]) continue;
        const Link& l = net_.link(lid);
        if (banned_node_[static_cast<std::size_t>(l.head)]) continue;
        const double dv = du + l.free_flow_time;
        if (dv < dist_[static_cast<std::size_t>(l.head)]) {
          dist_[static_cast<std::size_t>(l.head)] = dv;
          pred_[static_cast<std::size_t>(l.head)] = lid;
          heap.emplace(dv, l.head);
        }
      }
    }
    if (dist_[static_cast<std::size_t>(to)] == kInf) return false;
    out.cost = dist_[static_cast<std::size_t>(to)];
    out.links.clear();
    for (NodeId v = to; v != from;) {
      const LinkId lid = pred_[static_cast<std::size_t>(v)];
      out.links.push_back(lid);
      v = net_.link(lid).tail;
    }
    std::reverse(out.links.begin(), out.links.end());
    return true;
  }

 private:
  const Network& net_;
  std::vector<double> dist_;
  std::vector<LinkId> pred_;
  std::vector<char> banned_link_;
  std::vector<char> banned_node_;
};

double path_cost(const Network& net, const std::vector<LinkId>& links) {
  double c = 0.0;
  for (LinkId l : links) c += net.link(l).free_flow_time;
  return c;
}

std::vector<std::vector<LinkId>> yen_k_shortest(const Network& net, ShortestPathSearch& search, NodeId origin,
                                                NodeId destination, int k) {
  std::vector<CandidatePath> accepted;
  std::set<std::vector<LinkId>> accepted_sets;
  std::set<CandidatePath> candidates;

  search.clear_bans();
  CandidatePath first;
  if (!search.run(origin, destination, first)) return {};
  accepted.push_back(first);
  {
    auto key = first.links;
    std::sort(key.begin(), key.end());
    accepted_sets.insert(key);
  }

  while (static_cast<int>(accepted.size()) < k) {
    const CandidatePath& last = accepted.back();
    NodeId spur_node = origin;
    for (std::size_t i = 0; i < last.links.size(); ++i) {
      const std::vector<LinkId> root(last.links.begin(), last.links.begin() + static_cast<std::ptrdiff_t>(i));
      search.clear_bans();
      for (const CandidatePath& p : accepted) {
        if (p.links.size() > i && std::equal(root.begin(), root.end(), p.links.begin())) search.ban_link(p.links[i]);
      }
      NodeId walk = origin;
      for (LinkId l : root) {
        search.ban_node(walk);
        walk = net.link(l).head;
      }
      CandidatePath spur;
      if (search.run(spur_node, destination, spur)) {
        CandidatePath total;
        total.links = root;
        total.links.insert(total.links.end(), spur.links.begin(), spur.links.end());
        total.cost = path_cost(net, total.links);
        candidates.insert(std::move(total));
      }
      spur_node = net.link(last.links[i]).head;
    }
    bool added = false;
    while (!candidates.empty() && !added) {
      CandidatePath best = *candidates.begin();
      candidates.erase(candidates.begin());
      auto key = best.links;
      std::sort(key.begin(), key.end());
      if (accepted_sets.insert(key).second) {
        accepted.push_back(std::move(best));
        added = true;
      }
    }
    if (!added) break;
  }

  std::vector<std::vector<LinkId>> out;
  out.reserve(accepted.size());
  for (auto& p : accepted) out.push_back(std::move(p.links));
  return out;
}

}  // namespace

std::vector<Path> build_path_set(const Network& net, const DemandTable& demand, int k) {
  if (k < 1) throw InputError("paths-per-OD budget k must be >= 1");
  ShortestPathSearch search(net);
  std::vector<Path> paths;
  for (std::size_t od = 0; od < demand.od_pairs.size(); ++od) {
    const OdPair& pair = demand.od_pairs[od];
    auto found = yen_k_shortest(net, search, pair.origin, pair.destination, k);
    if (found.empty()) {
      throw InputError("OD pair (" + std::to_string(pair.origin + 1) + "," + std::to_string(pair.destination + 1) +
                       ") is unreachable");
    }
    for (auto& links : found) paths.push_back({static_cast<int>(od), std::move(links)});
  }
  return paths;
}

SingletonSplit split_singletons(const std::vector<Path>& paths, const DemandTable& demand, std::size_t link_count) {
  std::vector<int> count(demand.od_pairs.size(), 0);
  for (const Path& p : paths) {
    if (p.od_index < 0 || static_cast<std::size_t>(p.od_index) >= demand.od_pairs.size())
      throw InvariantError("path references unknown OD index " + std::to_string(p.od_index));
    ++count[static_cast<std::size_t>(p.od_index)];
  }

  SingletonSplit split;
  split.v0 = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(link_count));
  split.demand.zone_count = demand.zone_count;
  std::vector<int> remap(demand.od_pairs.size(), -1);
  for (std::size_t od = 0; od < demand.od_pairs.size(); ++od) {
    if (count[od] > 1) {
      remap[od] = static_cast<int>(split.demand.od_pairs.size());
      split.demand.od_pairs.push_back(demand.od_pairs[od]);
      split.source_od.push_back(static_cast<int>(od));
    }
  }
  for (const Path& p : paths) {
    const auto od = static_cast<std::size_t>(p.od_index);
    if (count[od] == 1) {
      const double flow = demand.od_pairs[od].demand;
      for (LinkId l : p.links) {
        if (l < 0 || static_cast<std::size_t>(l) >= link_count)
          throw InvariantError("path references unknown link " + std::to_string(l));
        split.v0[l] += flow;
      }
      split.singleton_demand += flow;
    } else {
      split.paths.push_back({remap[od], p.links});
    }
  }
  return split;
}

IncidenceSystem assemble_incidence(const SingletonSplit& split, std::size_t link_count) {
  IncidenceSystem sys;
  const auto n = static_cast<Eigen::Index>(split.paths.size());
  const auto m = static_cast<Eigen::Index>(link_count);
  const auto l = static_cast<Eigen::Index>(split.demand.od_pairs.size());

  std::vector<Eigen::Triplet<double>> a_entries;
  std::vector<Eigen::Triplet<double>> b_entries;
  std::vector<int> paths_per_od(static_cast<std::size_t>(l), 0);
  sys.od_of_path.reserve(static_cast<std::size_t>(n));
  for (Eigen::Index p = 0; p < n; ++p) {
    const Path& path = split.paths[static_cast<std::size_t>(p)];
    if (path.od_index < 0 || path.od_index >= l)
      throw InvariantError("path " + std::to_string(p) + " references unknown OD " + std::to_string(path.od_index));
    a_entries.emplace_back(path.od_index, p, 1.0);
    ++paths_per_od[static_cast<std::size_t>(path.od_index)];
    sys.od_of_path.push_back(path.od_index);
    std::set<LinkId> distinct;
    for (LinkId link : path.links) {
      if (link < 0 || link >= m) throw InvariantError("path " + std::to_string(p) + " references unknown link " + std::to_string(link));
      if (!distinct.insert(link).second) throw InvariantError("path " + std::to_string(p) + " repeats link " + std::to_string(link));
      b_entries.emplace_back(p, link, 1.0);
    }
  }
  for (Eigen::Index od = 0; od < l; ++od) {
    if (paths_per_od[static_cast<std::size_t>(od)] == 0)
      throw InvariantError("OD " + std::to_string(od) + " has no path");
  }

  sys.A.resize(l, n);
  sys.A.setFromTriplets(a_entries.begin(), a_entries.end());
  sys.B.resize(n, m);
  sys.B.setFromTriplets(b_entries.begin(), b_entries.end());
  sys.A.makeCompressed();
  sys.B.makeCompressed();
  sys.v0 = split.v0.size() == m ? split.v0 : Eigen::VectorXd::Zero(m);
  sys.d.resize(l);
  for (Eigen::Index od = 0; od < l; ++od) sys.d[od] = split.demand.od_pairs[static_cast<std::size_t>(od)].demand;
  sys.paths = split.paths;
  sys.demand = split.demand;
  return sys;
}

IncidenceSystem build_incidence_system(const Network& net, const DemandTable& demand, int k) {
  const auto paths = build_path_set(net, demand, k);
  const auto split = split_singletons(paths, demand, net.link_count());
  return assemble_incidence(split, net.link_count());
}

Eigen::VectorXd IncidenceSystem::link_flows(const Eigen::VectorXd& x) const {
  Eigen::VectorXd v = v0;
  v.noalias() += B.transpose() * x;
  return v;
}

Eigen::VectorXd IncidenceSystem::od_flows(const Eigen::VectorXd& x) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(od_count());
  for (Eigen::Index p = 0; p < x.size(); ++p) out[od_of_path[static_cast<std::size_t>(p)]] += x[p];
  return out;
}

std::string path_set_to_json(const std::vector<Path>& paths, const DemandTable& demand) {
  nlohmann::json doc = nlohmann::json::array();
  for (const Path& p : paths) {
    const OdPair& od = demand.od_pairs.at(static_cast<std::size_t>(p.od_index));
    doc.push_back({{"od", {od.origin + 1, od.destination + 1}}, {"links", p.links}});
  }
  return doc.dump(1);
}

std::vector<Path> path_set_from_json(const std::string& text, const DemandTable& demand) {
  std::map<std::pair<int, int>, int> index;
  for (std::size_t i = 0; i < demand.od_pairs.size(); ++i)
    index[{demand.od_pairs[i].origin, demand.od_pairs[i].destination}] = static_cast<int>(i);
  std::vector<Path> paths;
  try {
    const auto doc = nlohmann::json::parse(text);
    if (!doc.is_array()) throw InputError("path set JSON must be an array");
    for (const auto& entry : doc) {
      const auto od = entry.at("od").get<std::vector<int>>();
      if (od.size() != 2) throw InputError("path set entry 'od' must have two node ids");
      auto it = index.find({od[0] - 1, od[1] - 1});
      if (it == index.end())
        throw InputError("path set references OD (" + std::to_string(od[0]) + "," + std::to_string(od[1]) +
                         ") absent from the trips table");
      paths.push_back({it->second, entry.at("links").get<std::vector<LinkId>>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed path set JSON: ") + e.what());
  }
  return paths;
}

}  // namespace ctap
