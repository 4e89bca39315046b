#pragma once

// Exhaustive desk-scale model check: breadth-first enumeration of every
// reachable system state (two real endpoints, four real queues, one wire
// slot) over all interleavings of a small left-to-right workload, plus a
// single receiver-refusal branch and a single restart branch. Asserts, in
// every reachable state: at most one observable copy per packet, exactly one
// token in flight, no duplicate reveals, no lost packets, no deadlock, and
// exterior-clock agreement at quiescence. This is the brute-force oracle
// behind the queue and link safety claims.

#include <cstdint>
#include <string>
#include <vector>

namespace entlink {

struct ExploreConfig {
    int packets = 1;           // desk scale: <= 3
    std::size_t capacity = 1;  // queue capacity: <= 2
    bool nack_branch = true;
    bool restart_branch = true;
    std::size_t max_states = 2'000'000;
};

struct ExploreReport {
    std::size_t states = 0;
    std::size_t transitions = 0;
    bool overflow = false;
    std::vector<std::string> violations;

    bool passed() const { return violations.empty() && !overflow; }
};

ExploreReport explore_exhaustive(const ExploreConfig& config);

}  // namespace entlink
