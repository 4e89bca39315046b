#include <algorithm>
#include <string>
#include <vector>

#include "doctest.h"
#include "entlink/sim.hpp"

using namespace entlink;

namespace {

std::vector<uint8_t> bytes_of(const std::string& s) {
    return std::vector<uint8_t>(s.begin(), s.end());
}

ScenarioConfig base_config(uint64_t seed = 1) {
    ScenarioConfig c;
    c.seed = seed;
    c.fragment_size = 2;
    c.max_events = 1200;
    return c;
}

std::size_t count_kind(const EventLog& log, const std::string& kind) {
    std::size_t n = 0;
    for (const auto& r : log.records)
        if (r.kind == kind) ++n;
    return n;
}

std::optional<uint64_t> first_time_of(const EventLog& log,
                                      const std::string& kind) {
    for (const auto& r : log.records)
        if (r.kind == kind) return r.time;
    return std::nullopt;
}

// Endpoint- and cell-visible records only; harness actors (CH, W, SIM, OBS)
// stripped. Used for the wiretap indistinguishability claim.
std::string endpoint_view(const EventLog& log) {
    std::string out;
    for (const auto& r : log.records) {
        if (r.actor == "NL" || r.actor == "NR" || r.actor == "CL" ||
            r.actor == "CR") {
            out += to_line(r);
            out += '\n';
        }
    }
    return out;
}

}  // namespace

TEST_CASE("canonical scenario: three fragments, seven cycles, no violations") {
    auto cfg = base_config();
    cfg.workload.push_back({10, Direction::LeftToRight, bytes_of("HELLO")});
    const auto res = run_scenario(cfg);
    CHECK(res.verdict.passed());
    CHECK(res.verdict.metrics.messages_delivered == 1);
    CHECK(res.verdict.metrics.data_cycles == 3);
    CHECK(res.verdict.metrics.control_cycles == 4);
    CHECK(res.verdict.metrics.packets_revealed == 3);
    // 3 data + 4 message-layer control cycles on each exterior clock.
    CHECK(res.verdict.metrics.clocks_cl.exterior == 7);
    CHECK(res.verdict.metrics.clocks_cr.exterior == 7);
    CHECK(res.verdict.metrics.retries == 0);

    // The inbox gains the message exactly when the final control cycle
    // (the M-DONE round) completes, and not an event before.
    std::optional<uint64_t> inbox_t, last_cycle_t;
    for (const auto& r : res.log.records) {
        if (r.kind == "inbox") inbox_t = r.time;
        if (r.kind == "deliver") last_cycle_t = r.time;
    }
    REQUIRE(inbox_t.has_value());
    REQUIRE(last_cycle_t.has_value());
    CHECK(*inbox_t == *last_cycle_t);
}

TEST_CASE("healthy logs alternate frame direction strictly") {
    auto cfg = base_config();
    cfg.workload.push_back({10, Direction::LeftToRight, bytes_of("HELLO")});
    cfg.workload.push_back({11, Direction::RightToLeft, bytes_of("WORLD")});
    const auto res = run_scenario(cfg);
    REQUIRE(res.verdict.passed());
    std::optional<Direction> prev;
    for (const auto& r : res.log.records) {
        if (r.kind != "send" || !r.frame) continue;
        if (prev) CHECK(r.frame->direction() == complement(*prev));
        prev = r.frame->direction();
    }
}

TEST_CASE("idle-only run: exterior clocks frozen, pendulum alternates") {
    ScenarioConfig cfg;
    cfg.seed = 2;
    cfg.max_events = 100;
    const auto res = run_scenario(cfg);
    CHECK(res.verdict.passed());
    CHECK(res.verdict.metrics.clocks_cl.exterior == 0);
    CHECK(res.verdict.metrics.clocks_cr.exterior == 0);
    CHECK(res.verdict.metrics.data_cycles == 0);
    const auto labels = res.frame_labels_sent();
    REQUIRE(labels.size() > 10);
    for (std::size_t i = 0; i < labels.size(); ++i)
        CHECK(labels[i] == (i % 2 == 0 ? "L-TICK" : "R-TOCK"));
}

TEST_CASE("the four-phase golden trace appears verbatim for a one-packet message") {
    auto cfg = base_config(4);
    cfg.fragment_size = 8;  // single fragment
    cfg.workload.push_back({10, Direction::LeftToRight, bytes_of("HI")});
    const auto res = run_scenario(cfg);
    REQUIRE(res.verdict.passed());
    // Find the data offer and check the four on-wire frames around it.
    const auto labels = res.frame_labels_sent();
    std::vector<std::string> sent_kinds;
    std::vector<bool> is_data;
    for (const auto& r : res.log.records) {
        if (r.kind != "send" || !r.frame) continue;
        is_data.push_back(r.frame->is_offer() &&
                          (r.frame->message_id & kControlFlag) == 0);
    }
    bool found = false;
    for (std::size_t i = 0; i + 3 < labels.size(); ++i) {
        if (!is_data[i]) continue;
        found = true;
        const bool left_sender = labels[i] == "L-TECK";
        const std::vector<std::string> golden =
            left_sender
                ? std::vector<std::string>{"L-TECK", "R-TACK", "L-TICK",
                                           "R-TOCK"}
                : std::vector<std::string>{"R-TECK", "L-TACK", "R-TOCK",
                                           "L-TICK"};
        for (int k = 0; k < 4; ++k) CHECK(labels[i + k] == golden[k]);
        break;
    }
    CHECK(found);
}

TEST_CASE("empty message costs zero data cycles and four control cycles") {
    auto cfg = base_config(6);
    cfg.workload.push_back({10, Direction::LeftToRight, {}});
    const auto res = run_scenario(cfg);
    CHECK(res.verdict.passed());
    CHECK(res.verdict.metrics.messages_delivered == 1);
    CHECK(res.verdict.metrics.data_cycles == 0);
    CHECK(res.verdict.metrics.control_cycles == 4);
    CHECK(res.verdict.metrics.clocks_cl.exterior == 4);
}

TEST_CASE("receiver pressure: every packet lands exactly once, in order, with retries") {
    auto cfg = base_config(7);
    cfg.fragment_size = 1;
    cfg.max_events = 6000;
    cfg.workload.push_back({10, Direction::LeftToRight, bytes_of("0123456789")});
    cfg.faults.push_back({0, FaultKind::ReceiverPressure, 0, 0.5, 99,
                          WiretapMode::PassThrough});
    const auto res = run_scenario(cfg);
    CHECK(res.verdict.passed());  // observer enforces unique, ordered reveals
    CHECK(res.verdict.metrics.messages_delivered == 1);
    CHECK(res.verdict.metrics.packets_revealed == 10);
    CHECK(res.verdict.metrics.retries > 0);
}

TEST_CASE("stall is detected by both watchdogs and recovery completes the message") {
    auto cfg = base_config(3);
    cfg.max_events = 2000;
    cfg.workload.push_back({10, Direction::LeftToRight, bytes_of("HELLO")});
    cfg.faults.push_back({14, FaultKind::Stall});
    cfg.faults.push_back({400, FaultKind::Unstall});
    const auto res = run_scenario(cfg);
    CHECK(res.verdict.passed());
    CHECK(res.verdict.metrics.stall_detections == 2);
    CHECK(res.verdict.metrics.restarts == 1);
    CHECK(res.verdict.metrics.messages_delivered == 1);
    // Detection within timeout + poll interval of the stall.
    std::vector<uint64_t> detections;
    for (const auto& r : res.log.records)
        if (r.kind == "stall-detected") detections.push_back(r.time);
    REQUIRE(detections.size() == 2);
    for (const uint64_t t : detections) {
        CHECK(t > 14);
        CHECK(t <= 14 + cfg.watchdog_timeout + cfg.watchdog_poll_interval);
    }
    // Recovery happens only after the wire is repaired.
    const auto restart_t = first_time_of(res.log, "restart");
    REQUIRE(restart_t.has_value());
    CHECK(*restart_t >= 400);
}

TEST_CASE("kill mid-message: no partial inbox, both sides flag the loss") {
    auto cfg = base_config(5);
    cfg.workload.push_back({10, Direction::LeftToRight, bytes_of("HELLO")});
    cfg.faults.push_back({18, FaultKind::Kill});
    const auto res = run_scenario(cfg);
    CHECK(res.verdict.passed());  // divergence is flagged, hence not silent
    CHECK(res.verdict.metrics.messages_delivered == 0);
    CHECK(count_kind(res.log, "inbox") == 0);
    CHECK(res.verdict.metrics.stall_detections == 2);
    CHECK(res.verdict.metrics.restarts == 0);  // a killed wire stays dead
}

TEST_CASE("a flipped direction bit on a TACK kills the offering endpoint before any reveal") {
    auto cfg = base_config(8);
    cfg.fragment_size = 8;
    cfg.watchdog_timeout = 0;  // keep the corpse: no restart, no recovery
    cfg.workload.push_back({10, Direction::LeftToRight, bytes_of("HI")});

    // Dry run to learn, deterministically, when the data TACK is in flight.
    auto dry = cfg;
    const auto probe = run_scenario(dry);
    std::optional<uint64_t> tack_time;
    for (const auto& r : probe.log.records) {
        if (r.kind == "send" && r.frame && r.frame->is_accept() &&
            (r.frame->message_id & kControlFlag) == 0) {
            tack_time = r.time;
            break;
        }
    }
    REQUIRE(tack_time.has_value());

    cfg.faults.push_back({*tack_time, FaultKind::BitFlip, 2});  // direction bit
    const auto res = run_scenario(cfg);
    CHECK(res.verdict.metrics.tamper_deaths == 1);
    CHECK(count_kind(res.log, "dead") == 1);
    // The tampered accept never produced a reveal: detection precedes it.
    for (const auto& r : res.log.records) {
        if (r.kind == "reveal")
            CHECK(r.detail.find("m=1,") == std::string::npos);
    }
    CHECK(res.verdict.metrics.messages_delivered == 0);
}

TEST_CASE("a pass-through wiretap is invisible to the endpoints") {
    auto cfg = base_config(11);
    cfg.workload.push_back({10, Direction::LeftToRight, bytes_of("HELLO")});
    auto tapped = cfg;
    tapped.faults.push_back(
        {5, FaultKind::WiretapInsert, 0, 0.0, 0, WiretapMode::PassThrough});
    tapped.max_events += 1;  // the insertion event itself costs one slot
    const auto plain = run_scenario(cfg);
    const auto with_tap = run_scenario(tapped);
    REQUIRE(plain.verdict.passed());
    REQUIRE(with_tap.verdict.passed());
    CHECK(endpoint_view(plain.log) == endpoint_view(with_tap.log));
    CHECK(count_kind(with_tap.log, "tap") > 0);
}

TEST_CASE("a masquerading wiretap fools the sender; only the godlike observer sees it") {
    auto cfg = base_config(13);
    cfg.max_events = 900;
    cfg.workload.push_back({40, Direction::LeftToRight, bytes_of("SECRET")});
    cfg.faults.push_back(
        {21, FaultKind::WiretapInsert, 0, 0.0, 0, WiretapMode::Masquerade});
    const auto res = run_scenario(cfg);
    // The sender's link keeps cycling against the impostor...
    CHECK(res.verdict.metrics.clocks_cl.exterior > 0);
    // ...while the cut-off endpoint sees nothing and stalls.
    CHECK(res.verdict.metrics.clocks_cr.exterior == 0);
    CHECK(count_kind(res.log, "inbox") == 0);
    CHECK(res.verdict.metrics.stall_detections == 1);
    // The endpoints cannot tell; the observer's calibration can.
    CHECK_FALSE(res.verdict.passed());
}

TEST_CASE("equal seeds give byte-identical logs, different seeds differ") {
    auto cfg = base_config(21);
    cfg.workload.push_back({10, Direction::LeftToRight, bytes_of("HELLO")});
    cfg.faults.push_back({0, FaultKind::ReceiverPressure, 0, 0.3, 5,
                          WiretapMode::PassThrough});
    const auto a = run_scenario(cfg);
    const auto b = run_scenario(cfg);
    CHECK(a.log.to_text() == b.log.to_text());
    auto cfg2 = cfg;
    cfg2.seed = 22;
    const auto c = run_scenario(cfg2);
    CHECK(a.log.to_text() != c.log.to_text());
}

TEST_CASE("event record rendering is locked down") {
    EventRecord rec;
    rec.time = 12;
    rec.actor = "NL";
    rec.kind = "send";
    rec.frame = make_offer(Direction::LeftToRight, 1, 0, true, {0x41, 0x42});
    rec.clock_left = {3, 2, 0};
    rec.clock_right = {4, 3, 1};
    CHECK(to_line(rec) ==
          "t=12 actor=NL kind=send label=L-TECK m=1 seq=0 last=1 len=2 "
          "data=4142 clkL=3:2:0 clkR=4:3:1");

    EventRecord plain;
    plain.time = 0;
    plain.actor = "SIM";
    plain.kind = "boot";
    plain.detail = "NL=LEFT,NR=RIGHT";
    CHECK(to_line(plain) ==
          "t=0 actor=SIM kind=boot detail=NL=LEFT,NR=RIGHT clkL=0:0:0 "
          "clkR=0:0:0");
}

TEST_CASE("timescale separation shows up in the canonical run and saturation flags") {
    auto low = base_config(31);
    low.max_events = 3000;
    low.fragment_size = 1;
    low.workload.push_back(
        {10, Direction::LeftToRight, bytes_of("0123456789")});
    const auto res = run_scenario(low);
    REQUIRE(res.verdict.metrics.timescales.has_value());
    CHECK(res.verdict.metrics.timescales->msg_over_packet > 1.0);
    CHECK(res.verdict.metrics.timescales->packet_over_tick > 1.0);
    CHECK_FALSE(res.verdict.metrics.timescales->flagged);

    auto sat = base_config(32);
    sat.max_events = 20000;
    sat.fragment_size = 1;
    for (uint64_t i = 0; i < 40; ++i)
        sat.workload.push_back({10 + i, Direction::LeftToRight, {0x41}});
    const auto sres = run_scenario(sat);
    REQUIRE(sres.verdict.metrics.timescales.has_value());
    CHECK(sres.verdict.metrics.timescales->msg_over_packet ==
          doctest::Approx(1.0));
    CHECK(sres.verdict.metrics.timescales->flagged);
}

namespace {

uint32_t detail_m(const std::string& detail) {
    const auto at = detail.find("m=");
    if (at == std::string::npos) return 0;
    return static_cast<uint32_t>(std::stoul(detail.substr(at + 2)));
}

// Recompute the summary counters from the log records alone: the metrics
// must carry no state the log does not.
SimMetrics metrics_from_log(const EventLog& log) {
    SimMetrics m;
    for (const auto& r : log.records) {
        const bool endpoint = r.actor == "NL" || r.actor == "NR";
        if (r.kind == "recv" && endpoint) ++m.frames;
        if (r.kind == "deliver") {
            if (detail_m(r.detail) & kControlFlag) ++m.control_cycles;
            else ++m.data_cycles;
        }
        if (r.kind == "reveal" && (detail_m(r.detail) & kControlFlag) == 0)
            ++m.packets_revealed;
        if (r.kind == "inbox") ++m.messages_delivered;
        if (r.kind == "nack-recv") ++m.retries;
        if (r.kind == "backpressure") ++m.backpressure;
        if (r.kind == "stall-detected") ++m.stall_detections;
        if (r.kind == "restart") ++m.restarts;
        if (r.kind == "dead") ++m.tamper_deaths;
    }
    if (!log.records.empty()) {
        m.clocks_cl = log.records.back().clock_left;
        m.clocks_cr = log.records.back().clock_right;
    }
    return m;
}

void check_metrics_match(const ScenarioResult& res) {
    const SimMetrics derived = metrics_from_log(res.log);
    const SimMetrics& m = res.verdict.metrics;
    CHECK(m.frames == derived.frames);
    CHECK(m.data_cycles == derived.data_cycles);
    CHECK(m.control_cycles == derived.control_cycles);
    CHECK(m.packets_revealed == derived.packets_revealed);
    CHECK(m.messages_delivered == derived.messages_delivered);
    CHECK(m.retries == derived.retries);
    CHECK(m.backpressure == derived.backpressure);
    CHECK(m.stall_detections == derived.stall_detections);
    CHECK(m.restarts == derived.restarts);
    CHECK(m.tamper_deaths == derived.tamper_deaths);
    CHECK(m.clocks_cl == derived.clocks_cl);
    CHECK(m.clocks_cr == derived.clocks_cr);
}

// The legal wire language: idles, and payload cycles of the contiguous
// shape OFFER (NACK OFFER)* ACCEPT confirm-IDLE closing-IDLE, where the
// closing idle may itself carry the next grafted offer.
void check_cycle_shape(const EventLog& log) {
    enum class S { Idle, Offered, Nacked, ConfirmDue, ClosingDue };
    S state = S::Idle;
    for (const auto& r : log.records) {
        if (r.kind != "send" || !r.frame) continue;
        const FrameKind k = kind_of(*r.frame);
        switch (state) {
            case S::Idle:
                REQUIRE((k == FrameKind::Idle || k == FrameKind::Offer));
                if (k == FrameKind::Offer) state = S::Offered;
                break;
            case S::Offered:
                REQUIRE((k == FrameKind::Accept || k == FrameKind::Nack));
                state = k == FrameKind::Accept ? S::ConfirmDue : S::Nacked;
                break;
            case S::Nacked:
                REQUIRE((k == FrameKind::Offer || k == FrameKind::Idle));
                state = k == FrameKind::Offer ? S::Offered : S::Idle;
                break;
            case S::ConfirmDue:
                REQUIRE(k == FrameKind::Idle);
                state = S::ClosingDue;
                break;
            case S::ClosingDue:
                REQUIRE((k == FrameKind::Idle || k == FrameKind::Offer));
                state = k == FrameKind::Offer ? S::Offered : S::Idle;
                break;
        }
    }
}

}  // namespace

TEST_CASE("summaries are a pure function of the event log") {
    auto canonical = base_config();
    canonical.workload.push_back({10, Direction::LeftToRight, bytes_of("HELLO")});
    check_metrics_match(run_scenario(canonical));

    auto pressured = base_config(7);
    pressured.fragment_size = 1;
    pressured.max_events = 4000;
    pressured.workload.push_back(
        {10, Direction::LeftToRight, bytes_of("0123456789")});
    pressured.faults.push_back({0, FaultKind::ReceiverPressure, 0, 0.5, 99,
                                WiretapMode::PassThrough});
    check_metrics_match(run_scenario(pressured));

    auto stalled = base_config(3);
    stalled.max_events = 2000;
    stalled.workload.push_back({10, Direction::LeftToRight, bytes_of("HELLO")});
    stalled.faults.push_back({14, FaultKind::Stall});
    stalled.faults.push_back({400, FaultKind::Unstall});
    check_metrics_match(run_scenario(stalled));
}

TEST_CASE("healthy wire traffic always parses as contiguous payload cycles") {
    auto canonical = base_config();
    canonical.workload.push_back({10, Direction::LeftToRight, bytes_of("HELLO")});
    check_cycle_shape(run_scenario(canonical).log);

    auto bidi = base_config(17);
    bidi.workload.push_back({10, Direction::LeftToRight, bytes_of("ALPHA")});
    bidi.workload.push_back({10, Direction::RightToLeft, bytes_of("BRAVO")});
    check_cycle_shape(run_scenario(bidi).log);

    auto pressured = base_config(7);
    pressured.fragment_size = 1;
    pressured.max_events = 4000;
    pressured.workload.push_back(
        {10, Direction::LeftToRight, bytes_of("0123456789")});
    pressured.faults.push_back({0, FaultKind::ReceiverPressure, 0, 0.5, 99,
                                WiretapMode::PassThrough});
    check_cycle_shape(run_scenario(pressured).log);
}

TEST_CASE("strong entanglement without a watchdog deadlocks forever on a stall") {
    auto cfg = base_config(41);
    cfg.watchdog_timeout = 0;  // the fully entangled cell cannot observe time
    cfg.max_events = 1500;
    cfg.workload.push_back({10, Direction::LeftToRight, bytes_of("HELLO")});
    cfg.faults.push_back({14, FaultKind::Stall});
    cfg.faults.push_back({100, FaultKind::Unstall});
    const auto res = run_scenario(cfg);
    CHECK(res.verdict.metrics.stall_detections == 0);
    CHECK(res.verdict.metrics.restarts == 0);
    CHECK(res.verdict.metrics.messages_delivered == 1);  // frames resume...
    // ...but had the channel stayed broken, nothing would ever move again:
    auto dead = cfg;
    dead.faults.pop_back();  // no unstall
    const auto dres = run_scenario(dead);
    CHECK(dres.verdict.metrics.messages_delivered == 0);
    CHECK(dres.verdict.metrics.stall_detections == 0);
    const auto stall_t = first_time_of(dres.log, "fault");
    REQUIRE(stall_t.has_value());
    for (const auto& r : dres.log.records) {
        if (r.kind == "send" || r.kind == "recv") CHECK(r.time <= *stall_t + 2);
    }
}
