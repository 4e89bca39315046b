#pragma once

// Scenario file format (see SCENARIO.md): a flat key = value section with
// the run parameters, then optional [workload] and [faults] sections with
// one entry per line. Unknown keys are rejected with a line number.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "entlink/codec.hpp"

namespace entlink {

enum class FaultKind : uint8_t {
    Stall,
    Unstall,
    Kill,
    BitFlip,
    WiretapInsert,
    ReceiverPressure,
};

enum class WiretapMode : uint8_t { PassThrough, Masquerade };

struct FaultEvent {
    uint64_t time = 0;
    FaultKind kind = FaultKind::Stall;
    uint32_t bit_index = 0;       // BitFlip
    double probability = 0.0;     // ReceiverPressure
    uint64_t seed = 0;            // ReceiverPressure
    WiretapMode mode = WiretapMode::PassThrough;

    friend bool operator==(const FaultEvent&, const FaultEvent&) = default;
};

struct WorkloadItem {
    uint64_t time = 0;
    Direction direction = Direction::LeftToRight;
    std::vector<uint8_t> payload;

    friend bool operator==(const WorkloadItem&, const WorkloadItem&) = default;
};

struct ScenarioConfig {
    uint64_t seed = 1;
    std::size_t fragment_size = 64;
    std::size_t queue_capacity = 16;
    uint64_t latency_l2r = 1;
    uint64_t latency_r2l = 1;
    uint64_t watchdog_timeout = 64;  // 0 disables stall detection
    uint64_t watchdog_poll_interval = 8;
    std::size_t retry_limit = 8;
    uint64_t max_events = 10000;
    std::vector<WorkloadItem> workload;
    std::vector<FaultEvent> faults;

    friend bool operator==(const ScenarioConfig&, const ScenarioConfig&) = default;
};

struct ScenarioParseResult {
    std::optional<ScenarioConfig> config;
    std::string error;  // "line N: ..." when parsing failed
};

ScenarioParseResult parse_scenario(const std::string& text);

// Canonical rendering; parse_scenario(render_scenario(c)) == c.
std::string render_scenario(const ScenarioConfig& config);

}  // namespace entlink
