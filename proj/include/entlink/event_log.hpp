#pragma once

// Line-delimited structured event records, one event per line, stable field
// order. The text form is the external interface: equal runs must produce
// byte-identical logs, and trace-diff compares them bytewise.
//
//   t=<u64> actor=<name> kind=<kind> [label=... m=... seq=... last=... len=...
//   [data=<hex>]] [detail=<str>] clkL=<sub>:<int>:<ext> clkR=<sub>:<int>:<ext>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "entlink/codec.hpp"
#include "entlink/link.hpp"

namespace entlink {

struct EventRecord {
    uint64_t time = 0;
    std::string actor;
    std::string kind;
    std::optional<Packet> frame;
    std::string detail;
    ClockSet clock_left;
    ClockSet clock_right;
};

std::string to_line(const EventRecord& rec);

struct EventLog {
    std::vector<EventRecord> records;

    std::string to_text() const;
    uint64_t span() const {
        return records.empty() ? 0 : records.back().time - records.front().time;
    }
};

std::string hex_encode(const std::vector<uint8_t>& bytes);

}  // namespace entlink
