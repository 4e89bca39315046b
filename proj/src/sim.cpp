#include "entlink/sim.hpp"

#include <algorithm>
#include <map>
#include <queue>
#include <random>
#include <set>
#include <sstream>

namespace entlink {

namespace {

constexpr const char* kEndpointName[2] = {"NL", "NR"};
constexpr const char* kCellName[2] = {"CL", "CR"};

class Simulation {
  public:
    explicit Simulation(const ScenarioConfig& cfg)
        : cfg_(cfg),
          rng_(cfg.seed),
          cells_{CellAgent("CL", true, cfg.queue_capacity, cfg.retry_limit,
                           cfg.watchdog_timeout, cfg.fragment_size),
                 CellAgent("CR", false, cfg.queue_capacity, cfg.retry_limit,
                           cfg.watchdog_timeout, cfg.fragment_size)} {}

    ScenarioResult run();

  private:
    struct PendingFrame {
        uint64_t id;
        uint64_t incarnation;
        int to;
        std::vector<uint8_t> bytes;
        FrameKind kind;
        uint64_t arrive_time;
        bool parked = false;
    };

    enum class EventKind : uint8_t {
        Bootstrap,
        FrameArrival,
        Drain,
        Inject,
        Fault,
        Poll,
    };

    struct Event {
        uint64_t time;
        uint64_t order;
        EventKind kind;
        uint64_t frame_id = 0;
        int cell = 0;
        std::size_t index = 0;
    };

    struct EventAfter {
        bool operator()(const Event& a, const Event& b) const {
            if (a.time != b.time) return a.time > b.time;
            return a.order > b.order;
        }
    };

    void schedule(Event e) {
        e.order = next_order_++;
        queue_.push(e);
    }

    void log(uint64_t t, const std::string& actor, const std::string& kind,
             std::optional<Packet> frame = std::nullopt,
             const std::string& detail = {}) {
        EventRecord rec;
        rec.time = t;
        rec.actor = actor;
        rec.kind = kind;
        rec.frame = std::move(frame);
        rec.detail = detail;
        rec.clock_left = cells_[0].endpoint().clocks();
        rec.clock_right = cells_[1].endpoint().clocks();
        result_.log.records.push_back(std::move(rec));
    }

    void violation(uint64_t t, const std::string& what) {
        // Report each distinct violation once.
        if (seen_violations_.insert(what).second) {
            result_.verdict.violations.push_back(what);
            log(t, "OBS", "violation", std::nullopt, what);
        }
    }

    uint64_t latency_from(int cell) const {
        return cell == 0 ? cfg_.latency_l2r : cfg_.latency_r2l;
    }

    void send_frame(int from_cell, const Packet& p, uint64_t now,
                    bool from_wiretap = false) {
        auto bytes = encode_frame(p);
        if (!bytes) return;  // cannot happen for protocol-built frames
        PendingFrame f;
        f.id = next_frame_id_++;
        f.incarnation = incarnation_;
        f.to = from_wiretap ? 0 : 1 - from_cell;
        f.bytes = std::move(*bytes);
        f.kind = kind_of(p);
        f.arrive_time = now + latency_from(from_wiretap ? 1 : from_cell);
        in_flight_.push_back(f);
        log(now, from_wiretap ? "W" : kEndpointName[from_cell], "send", p);
        if (wiretap_passthrough_) log(now, "W", "tap", p);
        schedule({f.arrive_time, 0, EventKind::FrameArrival, f.id, 0, 0});
        if (!from_wiretap) cells_[from_cell].note_activity(now);
    }

    PendingFrame* find_frame(uint64_t id) {
        for (auto& f : in_flight_) {
            if (f.id == id) return &f;
        }
        return nullptr;
    }

    void erase_frame(uint64_t id) {
        in_flight_.erase(
            std::remove_if(in_flight_.begin(), in_flight_.end(),
                           [&](const PendingFrame& f) { return f.id == id; }),
            in_flight_.end());
    }

    uint64_t draw_nonce() { return rng_(); }

    bool pressure_refuses() {
        if (!pressure_active_) return false;
        const double u =
            static_cast<double>(pressure_rng_() >> 11) * 0x1.0p-53;
        return u < pressure_probability_;
    }

    void bootstrap(uint64_t now, const std::string& kind) {
        uint64_t nl = draw_nonce();
        uint64_t nr = draw_nonce();
        while (nl == nr) {
            log(now, "SIM", "redraw");
            nl = draw_nonce();
            nr = draw_nonce();
        }
        const auto role_l = cells_[0].endpoint().bootstrap_step(nl, nr);
        const auto role_r = cells_[1].endpoint().bootstrap_step(nr, nl);
        std::ostringstream detail;
        detail << "NL=" << to_string(*role_l) << ",NR=" << to_string(*role_r);
        log(now, "SIM", kind, std::nullopt, detail.str());
        const int left = *role_l == Role::Left ? 0 : 1;
        const auto first = cells_[left].endpoint().initial_frame();
        cells_[0].note_activity(now);
        cells_[1].note_activity(now);
        if (first) send_frame(left, *first, now);
    }

    void restart_link(uint64_t now) {
        ++metrics_.restarts;
        ++incarnation_;
        if (!in_flight_.empty())
            log(now, "CH", "flush", std::nullopt,
                "frames=" + std::to_string(in_flight_.size()));
        in_flight_.clear();
        for (auto& cell : cells_) {
            cell.endpoint().restart();
            cell.send_queue().revert_unconfirmed();
            cell.recv_queue().revert_unconfirmed();
            cell.wants_restart = false;
        }
        bootstrap(now, "restart");
    }

    void handle_link_result(int cell, OnReceiveResult& r, uint64_t now) {
        for (const auto& e : r.effects) {
            const bool control = (e.message_id & kControlFlag) != 0;
            switch (e.kind) {
                case LinkEffectKind::Held:
                    log(now, kEndpointName[cell], "hold", std::nullopt,
                        key_detail(e));
                    break;
                case LinkEffectKind::Revealed:
                    log(now, kEndpointName[cell], "reveal", std::nullopt,
                        key_detail(e));
                    if (!control) ++metrics_.packets_revealed;
                    observe_reveal(now, e.message_id, e.seq);
                    break;
                case LinkEffectKind::Retired:
                    log(now, kEndpointName[cell], "retire", std::nullopt,
                        key_detail(e));
                    break;
                case LinkEffectKind::Delivered:
                    log(now, kEndpointName[cell], "deliver", std::nullopt,
                        key_detail(e));
                    if (control) ++metrics_.control_cycles;
                    else ++metrics_.data_cycles;
                    break;
                case LinkEffectKind::NackSent:
                    log(now, kEndpointName[cell], "nack-sent", std::nullopt,
                        key_detail(e));
                    break;
                case LinkEffectKind::NackReceived:
                    log(now, kEndpointName[cell], "nack-recv", std::nullopt,
                        key_detail(e));
                    ++metrics_.retries;
                    break;
                case LinkEffectKind::BackPressure:
                    log(now, kEndpointName[cell], "backpressure", std::nullopt,
                        key_detail(e));
                    ++metrics_.backpressure;
                    break;
                case LinkEffectKind::Violation:
                    log(now, kEndpointName[cell], "dead", std::nullopt, e.detail);
                    ++metrics_.tamper_deaths;
                    break;
            }
        }
        cells_[cell].on_link_effects(r.effects);
        if (r.outbound) send_frame(cell, *r.outbound, now);
        schedule({now, 0, EventKind::Drain, 0, cell, 0});
    }

    static std::string key_detail(const LinkEffect& e) {
        return "m=" + std::to_string(e.message_id) +
               ",seq=" + std::to_string(e.seq);
    }

    void deliver_to_wiretap(const PendingFrame& f, uint64_t now) {
        const auto decoded = decode_frame(f.bytes);
        if (!decoded.packet) {
            wiretap_ep_->on_corrupt_frame(to_string(decoded.error));
            log(now, "W", "dead", std::nullopt, to_string(decoded.error));
            return;
        }
        log(now, "W", "recv", *decoded.packet);
        auto r = wiretap_ep_->on_receive(*decoded.packet, *wiretap_qs_,
                                         *wiretap_qr_, false);
        while (wiretap_qr_->consume_revealed()) {
            // The masquerader silently swallows whatever it accepted.
        }
        if (r.outbound) send_frame(1, *r.outbound, now, /*from_wiretap=*/true);
    }

    void deliver(const Event& ev, uint64_t now) {
        PendingFrame* f = find_frame(ev.frame_id);
        if (!f) return;  // killed or flushed
        if (f->incarnation != incarnation_) {
            log(now, "CH", "drop", std::nullopt, "stale-incarnation");
            erase_frame(ev.frame_id);
            return;
        }
        if (stalled_) {
            f->parked = true;  // held by the broken channel
            return;
        }
        const PendingFrame frame = *f;
        erase_frame(ev.frame_id);

        // The masquerader takes over everything addressed to the right
        // endpoint; the blocked endpoint receives nothing and never speaks
        // again (it is event-driven), so no return-path filter is needed.
        if (wiretap_masquerade_ && frame.to == 1) {
            deliver_to_wiretap(frame, now);
            return;
        }

        const int cell = frame.to;
        cells_[cell].note_activity(now);
        const auto decoded = decode_frame(frame.bytes);
        if (!decoded.packet) {
            ++metrics_.frames;
            log(now, kEndpointName[cell], "recv", std::nullopt,
                "corrupt:" + to_string(decoded.error));
            cells_[cell].endpoint().on_corrupt_frame(to_string(decoded.error));
            log(now, kEndpointName[cell], "dead", std::nullopt,
                "corrupt-frame:" + to_string(decoded.error));
            ++metrics_.tamper_deaths;
            return;
        }
        ++metrics_.frames;
        log(now, kEndpointName[cell], "recv", *decoded.packet);
        const bool refuse =
            decoded.packet->is_offer() ? pressure_refuses() : false;
        auto r = cells_[cell].endpoint().on_receive(
            *decoded.packet, cells_[cell].send_queue(),
            cells_[cell].recv_queue(), refuse);
        handle_link_result(cell, r, now);
    }

    void apply_fault(const FaultEvent& f, uint64_t now) {
        switch (f.kind) {
            case FaultKind::Stall:
                stalled_ = true;
                log(now, "CH", "fault", std::nullopt, "stall");
                break;
            case FaultKind::Unstall: {
                stalled_ = false;
                log(now, "CH", "fault", std::nullopt, "unstall");
                for (auto& pf : in_flight_) {
                    if (pf.parked) {
                        pf.parked = false;
                        pf.arrive_time = now;
                        schedule({now, 0, EventKind::FrameArrival, pf.id, 0, 0});
                    }
                }
                break;
            }
            case FaultKind::Kill:
                killed_ = true;
                log(now, "CH", "fault", std::nullopt,
                    "kill,frames=" + std::to_string(in_flight_.size()));
                in_flight_.clear();
                break;
            case FaultKind::BitFlip: {
                if (in_flight_.empty()) {
                    log(now, "CH", "fault", std::nullopt, "bitflip,no-frame");
                    break;
                }
                PendingFrame& pf = in_flight_.front();
                const uint32_t bit =
                    f.bit_index % static_cast<uint32_t>(pf.bytes.size() * 8);
                pf.bytes[bit / 8] ^= static_cast<uint8_t>(1u << (bit % 8));
                log(now, "CH", "fault", std::nullopt,
                    "bitflip,bit=" + std::to_string(bit));
                break;
            }
            case FaultKind::WiretapInsert:
                if (f.mode == WiretapMode::PassThrough) {
                    wiretap_passthrough_ = true;
                    log(now, "CH", "fault", std::nullopt, "wiretap,passthrough");
                } else {
                    wiretap_masquerade_ = true;
                    // The masquerader clones the blocked endpoint's protocol
                    // state and answers in its place with a bottomless queue.
                    wiretap_ep_ = cells_[1].endpoint();
                    wiretap_qs_.emplace(QueueSide::Sender, 1);
                    wiretap_qr_.emplace(QueueSide::Receiver, 1u << 20);
                    log(now, "CH", "fault", std::nullopt, "wiretap,masquerade");
                }
                break;
            case FaultKind::ReceiverPressure:
                pressure_active_ = true;
                pressure_probability_ = f.probability;
                pressure_rng_.seed(f.seed);
                log(now, "CH", "fault", std::nullopt, "pressure");
                break;
        }
    }

    void poll(int cell, uint64_t now) {
        schedule({now + cfg_.watchdog_poll_interval, 0, EventKind::Poll, 0,
                  cell, 0});
        if (cells_[cell].watchdog_poll(now) == CellAgent::Watchdog::Stalled &&
            !cells_[cell].wants_restart) {
            cells_[cell].wants_restart = true;
            stall_flagged_[cell] = true;
            ++metrics_.stall_detections;
            log(now, kCellName[cell], "stall-detected");
        }
        const bool channel_ok =
            !stalled_ && !killed_ && !wiretap_masquerade_;
        if ((cells_[0].wants_restart || cells_[1].wants_restart) && channel_ok &&
            cfg_.watchdog_timeout != 0) {
            restart_link(now);
        }
    }

    // --- godlike observer, run between every pair of events ---

    void observe_reveal(uint64_t now, uint32_t m, uint32_t seq) {
        const PacketKey key{m, seq};
        if (!revealed_keys_.insert(key).second)
            violation(now, "duplicate-reveal m=" + std::to_string(m) +
                               " seq=" + std::to_string(seq));
        auto& expected = reveal_order_[m];
        if (seq != expected)
            violation(now, "reveal-order m=" + std::to_string(m) + " got seq=" +
                               std::to_string(seq) + " expected " +
                               std::to_string(expected));
        expected = seq + 1;
    }

    void observe(uint64_t now) {
        // At most one queue anywhere may promise a given (m, seq).
        std::map<PacketKey, std::size_t> census;
        for (const auto& cell : cells_) {
            for (const auto* q : {&cell.send_queue(), &cell.recv_queue()}) {
                for (const auto& e : q->entries()) {
                    if (e.observable)
                        ++census[{e.packet.message_id, e.packet.seq}];
                }
            }
        }
        for (const auto& [key, n] : census) {
            if (n > 1)
                violation(now, "observable-copies m=" + std::to_string(key.first) +
                                   " seq=" + std::to_string(key.second) + " n=" +
                                   std::to_string(n));
        }

        const auto& el = cells_[0].endpoint();
        const auto& er = cells_[1].endpoint();

        // Exactly one frame in flight whenever both endpoints are live and
        // the channel is healthy.
        if (el.operational() && er.operational() && !stalled_ && !killed_ &&
            !wiretap_masquerade_) {
            std::size_t live = 0;
            for (const auto& f : in_flight_) {
                if (!f.parked && f.incarnation == incarnation_) ++live;
            }
            if (live != 1)
                violation(now, "token-count " + std::to_string(live));
        }

        // Exterior clocks agree at every quiescent point.
        if (el.phase() == Phase::IdleAwaiting &&
            er.phase() == Phase::IdleAwaiting) {
            bool idle_wire = true;
            for (const auto& f : in_flight_) {
                if (f.incarnation == incarnation_ && f.kind != FrameKind::Idle)
                    idle_wire = false;
            }
            if (idle_wire && el.clocks().exterior != er.clocks().exterior)
                violation(now, "exterior-disagreement " +
                                   std::to_string(el.clocks().exterior) + "!=" +
                                   std::to_string(er.clocks().exterior));
        }
    }

    void final_checks(uint64_t now) {
        // Message atomicity: inbox iff sender delivered, or both sides
        // flagged the entanglement loss; never silent.
        for (int c = 0; c < 2; ++c) {
            const int peer = 1 - c;
            std::vector<uint32_t> arrived;
            for (const auto& msg : cells_[peer].inbox()) {
                const bool from_c = (msg.message_id % 2 == 1) == (c == 0);
                if (from_c) arrived.push_back(msg.message_id);
            }
            std::vector<uint32_t> expected_order;
            for (const uint32_t id : cells_[c].submitted()) {
                const bool delivered = cells_[c].delivered(id);
                const bool in_inbox =
                    std::find(arrived.begin(), arrived.end(), id) != arrived.end();
                if (in_inbox) expected_order.push_back(id);
                if (delivered != in_inbox) {
                    const bool flagged_c =
                        stall_flagged_[c] ||
                        cells_[c].endpoint().phase() == Phase::Dead;
                    const bool flagged_p =
                        stall_flagged_[peer] ||
                        cells_[peer].endpoint().phase() == Phase::Dead;
                    if (!(flagged_c && flagged_p))
                        violation(now, "silent-divergence m=" + std::to_string(id));
                }
            }
            if (arrived != expected_order)
                violation(now, "inbox-order mismatch");
        }
        // Inbox contents must equal what was submitted.
        for (int c = 0; c < 2; ++c) {
            for (const auto& msg : cells_[c].inbox()) {
                const auto it = submitted_payloads_.find(msg.message_id);
                if (it == submitted_payloads_.end() || it->second != msg.payload)
                    violation(now,
                              "inbox-content m=" + std::to_string(msg.message_id));
            }
        }
    }

    ScenarioConfig cfg_;
    std::mt19937_64 rng_;
    std::mt19937_64 pressure_rng_;
    CellAgent cells_[2];
    std::priority_queue<Event, std::vector<Event>, EventAfter> queue_;
    uint64_t next_order_ = 0;
    uint64_t next_frame_id_ = 1;
    uint64_t incarnation_ = 0;
    std::vector<PendingFrame> in_flight_;
    bool stalled_ = false;
    bool killed_ = false;
    bool pressure_active_ = false;
    double pressure_probability_ = 0.0;
    bool wiretap_passthrough_ = false;
    bool wiretap_masquerade_ = false;
    std::optional<LinkEndpoint> wiretap_ep_;
    std::optional<ObservableQueue> wiretap_qs_;
    std::optional<ObservableQueue> wiretap_qr_;
    bool stall_flagged_[2] = {false, false};
    std::set<PacketKey> revealed_keys_;
    std::map<uint32_t, uint32_t> reveal_order_;
    std::map<uint32_t, std::vector<uint8_t>> submitted_payloads_;
    std::set<std::string> seen_violations_;
    SimMetrics metrics_;
    ScenarioResult result_;
};

ScenarioResult Simulation::run() {
    schedule({0, 0, EventKind::Bootstrap, 0, 0, 0});
    for (std::size_t i = 0; i < cfg_.workload.size(); ++i)
        schedule({cfg_.workload[i].time, 0, EventKind::Inject, 0, 0, i});
    for (std::size_t i = 0; i < cfg_.faults.size(); ++i)
        schedule({cfg_.faults[i].time, 0, EventKind::Fault, 0, 0, i});
    if (cfg_.watchdog_timeout != 0) {
        schedule({cfg_.watchdog_poll_interval, 0, EventKind::Poll, 0, 0, 0});
        schedule({cfg_.watchdog_poll_interval, 0, EventKind::Poll, 0, 1, 0});
    }

    uint64_t now = 0;
    while (!queue_.empty() && metrics_.events < cfg_.max_events) {
        const Event ev = queue_.top();
        queue_.pop();
        now = ev.time;
        ++metrics_.events;
        switch (ev.kind) {
            case EventKind::Bootstrap:
                bootstrap(now, "boot");
                break;
            case EventKind::FrameArrival:
                deliver(ev, now);
                break;
            case EventKind::Drain: {
                for (const auto& ce : cells_[ev.cell].drain()) {
                    log(now, kCellName[ev.cell], ce.kind, std::nullopt,
                        "m=" + std::to_string(ce.message_id) +
                            (ce.kind == "consume"
                                 ? ",seq=" + std::to_string(ce.seq)
                                 : "") +
                            (ce.kind == "inbox"
                                 ? ",len=" + std::to_string(ce.len)
                                 : ""));
                    if (ce.kind == "inbox") ++metrics_.messages_delivered;
                }
                break;
            }
            case EventKind::Inject: {
                const auto& item = cfg_.workload[ev.index];
                const int cell =
                    item.direction == Direction::LeftToRight ? 0 : 1;
                const uint32_t id = cells_[cell].submit(item.payload);
                submitted_payloads_[id] = item.payload;
                log(now, kCellName[cell], "inject", std::nullopt,
                    "m=" + std::to_string(id) +
                        ",len=" + std::to_string(item.payload.size()));
                schedule({now, 0, EventKind::Drain, 0, cell, 0});
                break;
            }
            case EventKind::Fault:
                apply_fault(cfg_.faults[ev.index], now);
                break;
            case EventKind::Poll:
                poll(ev.cell, now);
                break;
        }
        observe(now);
    }
    final_checks(now);

    metrics_.clocks_cl = cells_[0].endpoint().clocks();
    metrics_.clocks_cr = cells_[1].endpoint().clocks();
    metrics_.timescales =
        compute_timescales(result_.log.span(), metrics_.frames,
                           metrics_.data_cycles, metrics_.messages_delivered);
    result_.verdict.metrics = metrics_;
    return std::move(result_);
}

}  // namespace

ScenarioResult run_scenario(const ScenarioConfig& config) {
    Simulation sim(config);
    return sim.run();
}

std::vector<std::string> ScenarioResult::frame_labels_sent() const {
    std::vector<std::string> labels;
    for (const auto& rec : log.records) {
        if (rec.kind == "send" && rec.frame) {
            const auto label = label_of(rec.frame->header);
            labels.push_back(label ? to_string(*label) : "INVALID");
        }
    }
    return labels;
}

std::string summarize(const Verdict& v) {
    std::ostringstream os;
    const auto& m = v.metrics;
    os << "events: " << m.events << "  frames: " << m.frames << "\n";
    os << "packets_delivered: " << m.data_cycles
       << "  control_cycles: " << m.control_cycles
       << "  messages_delivered: " << m.messages_delivered << "\n";
    os << "packets_revealed: " << m.packets_revealed
       << "  retries: " << m.retries << "  backpressure: " << m.backpressure
       << "\n";
    os << "exterior: CL=" << m.clocks_cl.exterior
       << " CR=" << m.clocks_cr.exterior
       << "  interior: CL=" << m.clocks_cl.interior
       << " CR=" << m.clocks_cr.interior << "  subtime: CL="
       << m.clocks_cl.subtime << " CR=" << m.clocks_cr.subtime << "\n";
    os << "stalls_detected: " << m.stall_detections
       << "  restarts: " << m.restarts
       << "  tamper_deaths: " << m.tamper_deaths << "\n";
    if (m.timescales) {
        os << "timescale: dtM/dtP=" << m.timescales->msg_over_packet
           << " dtP/dtTick=" << m.timescales->packet_over_tick
           << (m.timescales->flagged ? " FLAGGED" : " ok") << "\n";
    } else {
        os << "timescale: insufficient-data\n";
    }
    os << "violations: " << v.violations.size() << "\n";
    for (const auto& s : v.violations) os << "  violation: " << s << "\n";
    return os.str();
}

}  // namespace entlink
