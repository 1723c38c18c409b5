#include "ctap/fixtures.hpp"

namespace ctap {

namespace {
Link make_link(NodeId tail, NodeId head, double fft, double alpha, double cap, double power) {
  Link l;
  l.tail = tail;
  l.head = head;
  l.free_flow_time = fft;
  l.bpr_alpha = alpha;
  l.capacity = cap;
  l.bpr_power = power;
  l.length = fft;
  return l;
}
}  // namespace

Fixture braess_fixture() {
  std::vector<Link> links = {
      make_link(0, 1, 1.0, 1.0, 10.0, 1.0),    // 1->2
      make_link(0, 2, 5.0, 0.15, 100.0, 4.0),  // 1->3
      make_link(1, 3, 5.0, 0.15, 100.0, 4.0),  // 2->4
      make_link(2, 3, 1.0, 1.0, 10.0, 1.0),    // 3->4
      make_link(1, 2, 0.5, 0.15, 100.0, 4.0),  // 2->3
  };
  Fixture f{Network(4, std::move(links)), DemandTable{}};
  f.demand.zone_count = 4;
  f.demand.od_pairs = {{0, 3, 60.0}, {0, 2, 10.0}, {1, 3, 10.0}};
  return f;
}

Fixture grid_fixture(int rows, int cols) {
  std::vector<Link> links;
  auto node = [cols](int i, int j) { return i * cols + j; };
  auto add = [&](int a, int b, int i, int j) {
    const double fft = 1.0 + ((i * 7 + j * 3) % 5) * 0.25;
    const double cap = 40.0 + ((i * 5 + j * 11 + a) % 4) * 10.0;
    links.push_back(make_link(a, b, fft, 0.15, cap, 4.0));
  };
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) {
      if (j + 1 < cols) {
        add(node(i, j), node(i, j + 1), i, j);
        add(node(i, j + 1), node(i, j), i, j + 1);
      }
      if (i + 1 < rows) {
        add(node(i, j), node(i + 1, j), i, j);
        add(node(i + 1, j), node(i, j), i + 1, j);
      }
    }
  const int n = rows * cols;
  Fixture f{Network(n, std::move(links)), DemandTable{}};
  f.demand.zone_count = n;
  for (int o = 0; o < n; ++o)
    for (int d = 0; d < n; ++d)
      if (o != d) f.demand.od_pairs.push_back({o, d, 10.0 + ((o * 13 + d * 7) % 20)});
  return f;
}

}  // namespace ctap
