#pragma once

// Desk-scale instances generated in code so tests run offline.

#include "ctap/network.hpp"

namespace ctap {

struct Fixture {
  Network net;
  DemandTable demand;
};

/// 4-node Braess network: 1->2, 1->3, 2->4, 3->4 plus the 2->3 shortcut.
/// Demand (1,4)=60, (1,3)=10, (2,4)=10.
Fixture braess_fixture();

/// rows x cols grid with bidirectional links between neighbours and demand
/// between every ordered node pair. Deterministic.
Fixture grid_fixture(int rows, int cols);

}  // namespace ctap
