#include <map>
#include <set>

#include "ctap/error.hpp"
#include "ctap/paths.hpp"
#include "doctest.h"
#include "helpers.hpp"

using namespace ctap;

namespace {

// Every loopless path origin -> destination by exhaustive DFS.
void enumerate(const Network& net, int node, int dest, std::vector<char>& seen, std::vector<int>& links,
               std::vector<std::vector<int>>& out) {
  if (node == dest) {
    out.push_back(links);
    return;
  }
  for (LinkId id : net.outgoing(node)) {
    const int next = net.link(id).head;
    if (seen[next]) continue;
    seen[next] = 1;
    links.push_back(id);
    enumerate(net, next, dest, seen, links, out);
    links.pop_back();
    seen[next] = 0;
  }
}

double fft_cost(const Network& net, const std::vector<int>& links) {
  double c = 0.0;
  for (int id : links) c += net.link(id).free_flow_time;
  return c;
}

bool is_walk(const Network& net, const OdPair& od, const std::vector<int>& links) {
  int at = od.origin;
  std::set<int> visited{at};
  for (int id : links) {
    if (net.link(id).tail != at) return false;
    at = net.link(id).head;
    if (!visited.insert(at).second) return false;
  }
  return at == od.destination;
}

}  // namespace

TEST_CASE("parallel links") {
  const Network net(2, {testutil::link(0, 1, 1, 1, 0.15, 4), testutil::link(0, 1, 1, 2, 0.15, 4)});
  const DemandTable demand{2, {{0, 1, 5.0}}};
  const auto two = build_path_set(net, demand, 2);
  REQUIRE(two.size() == 2);
  CHECK(two[0].links == std::vector<int>{0});
  CHECK(two[1].links == std::vector<int>{1});
  CHECK(build_path_set(net, demand, 5).size() == 2);
  CHECK_THROWS_AS(build_path_set(net, demand, 0), InputError);
}

TEST_CASE("Yen matches exhaustive enumeration on the grid") {
  const Fixture f = grid_fixture(3, 3);
  const int k = 6;
  const auto paths = build_path_set(f.net, f.demand, k);
  std::map<int, std::vector<const Path*>> by_od;
  for (const Path& p : paths) by_od[p.od_index].push_back(&p);
  for (std::size_t od = 0; od < f.demand.od_pairs.size(); ++od) {
    const OdPair& pair = f.demand.od_pairs[od];
    std::vector<std::vector<int>> all;
    std::vector<char> seen(static_cast<std::size_t>(f.net.node_count()), 0);
    std::vector<int> links;
    seen[pair.origin] = 1;
    enumerate(f.net, pair.origin, pair.destination, seen, links, all);
    std::vector<double> costs;
    for (const auto& p : all) costs.push_back(fft_cost(f.net, p));
    std::sort(costs.begin(), costs.end());
    const auto& got = by_od[static_cast<int>(od)];
    REQUIRE(got.size() == std::min<std::size_t>(k, all.size()));
    for (std::size_t i = 0; i < got.size(); ++i) {
      CHECK(is_walk(f.net, pair, got[i]->links));
      CHECK(fft_cost(f.net, got[i]->links) == doctest::Approx(costs[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("Sioux Falls k=3 path validity and conservation") {
  const Network net = load_network(testutil::sioux_net());
  const DemandTable demand = load_trips(testutil::sioux_trips());
  const auto paths = build_path_set(net, demand, 3);
  std::map<int, int> count;
  for (const Path& p : paths) {
    ++count[p.od_index];
    CHECK(is_walk(net, demand.od_pairs[p.od_index], p.links));
  }
  CHECK(count.size() == demand.od_pairs.size());
  for (const auto& [od, c] : count) CHECK((c >= 1 && c <= 3));
  const SingletonSplit split = split_singletons(paths, demand, net.link_count());
  // v0 sums demand times path length for singleton ODs; compare against that
  double singleton_weighted = 0.0;
  std::map<int, std::vector<const Path*>> by_od;
  for (const Path& p : paths) by_od[p.od_index].push_back(&p);
  for (const auto& [od, ps] : by_od)
    if (ps.size() == 1) singleton_weighted += demand.od_pairs[od].demand * static_cast<double>(ps[0]->links.size());
  CHECK(split.v0.sum() == doctest::Approx(singleton_weighted));
  CHECK(split.singleton_demand + split.demand.total() == doctest::Approx(demand.total()));
}

TEST_CASE("singleton folding") {
  const DemandTable demand{2, {{0, 1, 5.0}}};
  const SingletonSplit one = split_singletons({{0, {0, 2}}}, demand, 3);
  CHECK(one.paths.empty());
  CHECK(one.demand.od_pairs.empty());
  CHECK(one.v0.isApprox(Eigen::Vector3d(5, 0, 5)));
  const SingletonSplit two = split_singletons({{0, {0}}, {0, {1, 2}}}, demand, 3);
  CHECK(two.paths.size() == 2);
  CHECK(two.v0.isZero());
  const IncidenceSystem empty = assemble_incidence(one, 3);
  CHECK(empty.A.rows() == 0);
  CHECK(empty.B.rows() == 0);
  CHECK(empty.B.cols() == 3);
}

TEST_CASE("incidence matrices") {
  const IncidenceSystem sys = testutil::system_from_paths({{0, {0}}, {0, {1, 2}}}, {4.0}, 3);
  Eigen::MatrixXd A = Eigen::MatrixXd(sys.A), B = Eigen::MatrixXd(sys.B);
  Eigen::MatrixXd A_expect(1, 2);
  A_expect << 1, 1;
  Eigen::MatrixXd B_expect(2, 3);
  B_expect << 1, 0, 0, 0, 1, 1;
  CHECK(A == A_expect);
  CHECK(B == B_expect);
  CHECK_THROWS_AS(testutil::system_from_paths({{0, {0}}, {0, {7}}}, {4.0}, 3), InvariantError);
  CHECK_THROWS_AS(testutil::system_from_paths({{0, {0, 0}}, {0, {1}}}, {4.0}, 3), InvariantError);
}

TEST_CASE("sparse link flows equal a loop-sum oracle") {
  std::mt19937_64 rng(7);
  const Fixture f = grid_fixture(3, 3);
  const IncidenceSystem sys = build_incidence_system(f.net, f.demand, 4);
  for (int trial = 0; trial < 5; ++trial) {
    const Eigen::VectorXd x = testutil::uniform(rng, sys.path_count(), 0.0, 10.0);
    Eigen::VectorXd oracle = sys.v0;
    for (Eigen::Index p = 0; p < sys.path_count(); ++p)
      for (int l : sys.paths[p].links) oracle[l] += x[p];
    CHECK((sys.link_flows(x) - oracle).lpNorm<Eigen::Infinity>() <= 1e-10);
  }
}

TEST_CASE("path set JSON round trip") {
  const Fixture f = braess_fixture();
  const auto paths = build_path_set(f.net, f.demand, 4);
  CHECK(path_set_from_json(path_set_to_json(paths, f.demand), f.demand) == paths);
}
