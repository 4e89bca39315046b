#pragma once

// Deterministic discrete-event harness: two cells joined by a latency
// channel, a fault plan (stall, kill, bit flips, receiver pressure, wiretap
// insertion), and a godlike observer that checks invariants between every
// pair of events. Identical (config, seed) pairs produce byte-identical
// event logs.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "entlink/cell.hpp"
#include "entlink/event_log.hpp"
#include "entlink/scenario.hpp"

namespace entlink {

struct SimMetrics {
    uint64_t events = 0;
    uint64_t frames = 0;             // frames processed by the two endpoints
    uint64_t data_cycles = 0;        // completed data-fragment cycles
    uint64_t control_cycles = 0;     // completed message-layer control cycles
    uint64_t packets_revealed = 0;   // data fragments made observable
    uint64_t messages_delivered = 0; // inbox arrivals
    uint64_t retries = 0;            // NACKs received by offering endpoints
    uint64_t backpressure = 0;
    uint64_t stall_detections = 0;
    uint64_t restarts = 0;
    uint64_t tamper_deaths = 0;      // endpoints killed by corrupt/illegal frames
    ClockSet clocks_cl;              // final clocks of CL's endpoint
    ClockSet clocks_cr;
    std::optional<TimescaleReport> timescales;
};

struct Verdict {
    std::vector<std::string> violations;
    SimMetrics metrics;
    bool passed() const { return violations.empty(); }
};

struct ScenarioResult {
    EventLog log;
    Verdict verdict;

    // Convenience views for tests.
    std::vector<std::string> frame_labels_sent() const;
};

ScenarioResult run_scenario(const ScenarioConfig& config);

std::string summarize(const Verdict& verdict);

}  // namespace entlink
