#include "entlink/explore.hpp"

#include <deque>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include "entlink/cell.hpp"
#include "entlink/link.hpp"
#include "entlink/queue.hpp"

namespace entlink {

namespace {

Packet workload_packet(int packets, int i) {
    return make_offer(Direction::LeftToRight, 1, static_cast<uint32_t>(i),
                      i + 1 == packets,
                      {static_cast<uint8_t>('a' + i)});
}

struct SysState {
    LinkEndpoint ep[2];  // 0 = left cell's endpoint, 1 = right cell's
    ObservableQueue qs[2] = {ObservableQueue(QueueSide::Sender, 1),
                             ObservableQueue(QueueSide::Sender, 1)};
    ObservableQueue qr[2] = {ObservableQueue(QueueSide::Receiver, 1),
                             ObservableQueue(QueueSide::Receiver, 1)};
    std::optional<Packet> wire;
    int wire_to = -1;
    int pushed = 0;
    int consumed = 0;
    int nack_budget = 0;
    int restart_budget = 0;
    uint8_t revealed_mask = 0;
    uint8_t consumed_mask = 0;
};

void serialize_packet(std::ostringstream& os, const Packet& p) {
    os << static_cast<int>(p.header.bits) << "," << p.message_id << ","
       << p.seq << "," << p.last << "," << p.payload.size() << ";";
    for (const uint8_t b : p.payload) os << static_cast<int>(b) << ".";
}

void serialize_endpoint(std::ostringstream& os, const LinkEndpoint& ep) {
    os << static_cast<int>(ep.role()) << "|" << static_cast<int>(ep.phase())
       << "|" << ep.retry_count() << "|" << ep.clocks().exterior << "|";
    if (ep.send_register()) serialize_packet(os, *ep.send_register());
    os << "|";
    if (ep.recv_register())
        os << ep.recv_register()->first << "," << ep.recv_register()->second;
    os << "|";
    // A fresh endpoint validates against its virtual own-idle reference, so
    // it is bisimilar to one that actually sent that idle; fold them.
    if (ep.last_sent()) serialize_packet(os, *ep.last_sent());
    else if (ep.role() != Role::Unassigned)
        serialize_packet(os, make_idle(ep.my_direction()));
    os << "#";
}

void serialize_queue(std::ostringstream& os, const ObservableQueue& q) {
    for (const auto& e : q.entries()) {
        os << static_cast<int>(e.state) << ":";
        serialize_packet(os, e.packet);
    }
    os << "/";
    for (const auto& [m, wm] : q.watermarks()) os << m << "=" << wm << ",";
    os << "#";
}

// Identity key: everything that drives the dynamics. Subtime and interior
// counters are excluded (the idle pendulum grows them without bound);
// exterior is bounded by the cycle count and is kept for the agreement check.
std::string state_key(const SysState& s) {
    std::ostringstream os;
    for (int i = 0; i < 2; ++i) {
        serialize_endpoint(os, s.ep[i]);
        serialize_queue(os, s.qs[i]);
        serialize_queue(os, s.qr[i]);
    }
    os << "w:";
    if (s.wire) {
        os << s.wire_to << ":";
        serialize_packet(os, *s.wire);
    }
    os << "|" << s.pushed << "|" << s.consumed << "|" << s.nack_budget << "|"
       << s.restart_budget << "|" << static_cast<int>(s.revealed_mask) << "|"
       << static_cast<int>(s.consumed_mask);
    return os.str();
}

class Explorer {
  public:
    explicit Explorer(const ExploreConfig& cfg) : cfg_(cfg) {}

    ExploreReport run();

  private:
    void fail(const std::string& what) {
        if (seen_.insert(what).second) report_.violations.push_back(what);
    }

    void bootstrap(SysState& s) {
        // Fixed orientation: the left cell's endpoint draws the higher nonce.
        s.ep[0].bootstrap_step(2, 1);
        s.ep[1].bootstrap_step(1, 2);
        const auto first = s.ep[0].initial_frame();
        s.wire = *first;
        s.wire_to = 1;
    }

    void check_state(const SysState& s);
    void apply_effects(SysState& s, const std::vector<LinkEffect>& effects);
    std::vector<SysState> successors(const SysState& s);
    void enqueue(SysState s);

    ExploreConfig cfg_;
    ExploreReport report_;
    std::set<std::string> visited_;
    std::set<std::string> seen_;
    std::deque<SysState> frontier_;
};

void Explorer::apply_effects(SysState& s,
                             const std::vector<LinkEffect>& effects) {
    for (const auto& e : effects) {
        switch (e.kind) {
            case LinkEffectKind::Revealed: {
                const uint8_t bit = static_cast<uint8_t>(1u << e.seq);
                if (s.revealed_mask & bit)
                    fail("duplicate-reveal seq=" + std::to_string(e.seq));
                s.revealed_mask |= bit;
                break;
            }
            case LinkEffectKind::Violation:
                fail("unexpected-death: " + e.detail);
                break;
            default:
                break;
        }
    }
}

void Explorer::check_state(const SysState& s) {
    // At most one observable copy of any packet, anywhere.
    for (int seq = 0; seq < cfg_.packets; ++seq) {
        std::size_t n = 0;
        for (int i = 0; i < 2; ++i) {
            n += s.qs[i].observable_count(1, static_cast<uint32_t>(seq));
            n += s.qr[i].observable_count(1, static_cast<uint32_t>(seq));
        }
        if (n > 1) fail("observable-copies seq=" + std::to_string(seq));
    }
    // One token in flight whenever both endpoints are live.
    if (s.ep[0].operational() && s.ep[1].operational() && !s.wire)
        fail("token-lost");
    // Exterior clocks agree at quiescence.
    if (s.ep[0].phase() == Phase::IdleAwaiting &&
        s.ep[1].phase() == Phase::IdleAwaiting && s.wire &&
        kind_of(*s.wire) == FrameKind::Idle &&
        s.ep[0].clocks().exterior != s.ep[1].clocks().exterior) {
        fail("exterior-disagreement");
    }
    // A fully drained quiescent state must have consumed every packet once.
    if (s.pushed == cfg_.packets && s.wire &&
        kind_of(*s.wire) == FrameKind::Idle &&
        s.ep[0].phase() == Phase::IdleAwaiting &&
        s.ep[1].phase() == Phase::IdleAwaiting && s.qs[0].size() == 0 &&
        s.qr[1].size() == 0) {
        if (s.consumed != cfg_.packets ||
            s.consumed_mask !=
                static_cast<uint8_t>((1u << cfg_.packets) - 1u))
            fail("lost-packet");
    }
}

std::vector<SysState> Explorer::successors(const SysState& s) {
    std::vector<SysState> out;

    // Deliver the frame in flight, with an optional refusal branch.
    if (s.wire) {
        std::vector<bool> refusals = {false};
        if (cfg_.nack_branch && s.nack_budget > 0 && s.wire->is_offer() &&
            s.wire_to == 1)
            refusals.push_back(true);
        for (const bool refuse : refusals) {
            SysState next = s;
            const Packet frame = *next.wire;
            const int to = next.wire_to;
            next.wire.reset();
            next.wire_to = -1;
            if (refuse) next.nack_budget -= 1;
            auto r = next.ep[to].on_receive(frame, next.qs[to], next.qr[to],
                                            refuse);
            apply_effects(next, r.effects);
            if (r.outbound) {
                next.wire = *r.outbound;
                next.wire_to = 1 - to;
            }
            out.push_back(std::move(next));
        }
    }

    // The sending cell pushes the next workload packet into its queue.
    if (s.pushed < cfg_.packets) {
        SysState next = s;
        if (next.qs[0].push_send(workload_packet(cfg_.packets, next.pushed)) ==
            PushResult::Ok) {
            next.pushed += 1;
            out.push_back(std::move(next));
        }
    }

    // The receiving cell consumes a revealed packet.
    {
        SysState next = s;
        if (const auto p = next.qr[1].consume_revealed()) {
            next.consumed += 1;
            const uint8_t bit = static_cast<uint8_t>(1u << p->seq);
            if (next.consumed_mask & bit)
                fail("double-consume seq=" + std::to_string(p->seq));
            next.consumed_mask |= bit;
            const Packet expect = workload_packet(cfg_.packets,
                                                  static_cast<int>(p->seq));
            if (p->payload != expect.payload || p->last != expect.last)
                fail("corrupt-delivery seq=" + std::to_string(p->seq));
            out.push_back(std::move(next));
        }
    }

    // Watchdog-authorized restart at an arbitrary moment: the in-flight
    // frame vanishes, both sides re-bootstrap, unconfirmed work re-offers.
    if (cfg_.restart_branch && s.restart_budget > 0) {
        SysState next = s;
        next.restart_budget -= 1;
        next.wire.reset();
        next.wire_to = -1;
        for (int i = 0; i < 2; ++i) {
            next.ep[i].restart();
            next.qs[i].revert_unconfirmed();
            next.qr[i].revert_unconfirmed();
        }
        bootstrap(next);
        out.push_back(std::move(next));
    }

    return out;
}

void Explorer::enqueue(SysState s) {
    const std::string key = state_key(s);
    if (!visited_.insert(key).second) return;
    check_state(s);
    frontier_.push_back(std::move(s));
}

ExploreReport Explorer::run() {
    SysState init;
    for (int i = 0; i < 2; ++i) {
        init.qs[i] = ObservableQueue(QueueSide::Sender, cfg_.capacity);
        init.qr[i] = ObservableQueue(QueueSide::Receiver, cfg_.capacity);
    }
    init.nack_budget = cfg_.nack_branch ? 1 : 0;
    init.restart_budget = cfg_.restart_branch ? 1 : 0;
    bootstrap(init);
    enqueue(std::move(init));

    while (!frontier_.empty()) {
        if (visited_.size() > cfg_.max_states) {
            report_.overflow = true;  // StateSpaceOverflow
            break;
        }
        SysState s = std::move(frontier_.front());
        frontier_.pop_front();
        auto next = successors(s);
        report_.transitions += next.size();
        if (next.empty()) fail("deadlock");
        for (auto& n : next) enqueue(std::move(n));
    }
    report_.states = visited_.size();
    return report_;
}

}  // namespace

ExploreReport explore_exhaustive(const ExploreConfig& config) {
    Explorer ex(config);
    return ex.run();
}

}  // namespace entlink
