#include "entlink/cell.hpp"

#include <algorithm>
#include <utility>

namespace entlink {

std::vector<Packet> packetize(const Message& msg, std::size_t fragment_size) {
    std::vector<Packet> fragments;
    if (msg.payload.empty() || fragment_size == 0) return fragments;
    const std::size_t n =
        (msg.payload.size() + fragment_size - 1) / fragment_size;
    fragments.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t begin = i * fragment_size;
        const std::size_t end =
            std::min(begin + fragment_size, msg.payload.size());
        fragments.push_back(make_offer(
            Direction::LeftToRight, msg.message_id, static_cast<uint32_t>(i),
            i + 1 == n,
            std::vector<uint8_t>(msg.payload.begin() + begin,
                                 msg.payload.begin() + end)));
    }
    return fragments;
}

ReassembleResult reassemble(const std::vector<Packet>& fragments) {
    ReassembleResult result;
    std::map<uint32_t, std::pair<std::vector<uint8_t>, bool>> table;
    uint32_t message_id = 0;
    for (const auto& f : fragments) {
        message_id = f.message_id;
        const auto it = table.find(f.seq);
        if (it != table.end()) {
            if (it->second.first != f.payload || it->second.second != f.last) {
                result.status = ReassembleResult::Status::Conflict;
                return result;
            }
            continue;  // repeated promise, ignored idempotently
        }
        table.emplace(f.seq, std::make_pair(f.payload, f.last));
    }
    std::optional<uint32_t> last_seq;
    for (const auto& [seq, entry] : table) {
        if (entry.second) last_seq = seq;
    }
    if (!last_seq) return result;  // no terminal fragment yet
    for (uint32_t s = 0; s <= *last_seq; ++s) {
        if (table.find(s) == table.end()) return result;
    }
    if (table.rbegin()->first != *last_seq) {
        result.status = ReassembleResult::Status::Conflict;  // data past last
        return result;
    }
    Message msg;
    msg.message_id = message_id;
    for (uint32_t s = 0; s <= *last_seq; ++s) {
        const auto& payload = table[s].first;
        msg.payload.insert(msg.payload.end(), payload.begin(), payload.end());
    }
    result.status = ReassembleResult::Status::Complete;
    result.message = std::move(msg);
    return result;
}

std::optional<TimescaleReport> compute_timescales(uint64_t span,
                                                  uint64_t frames,
                                                  uint64_t data_cycles,
                                                  uint64_t messages) {
    if (messages == 0 || data_cycles == 0 || frames == 0 || span == 0)
        return std::nullopt;
    TimescaleReport r;
    const double dt_m = static_cast<double>(span) / static_cast<double>(messages);
    const double dt_p =
        static_cast<double>(span) / static_cast<double>(data_cycles);
    const double dt_tick =
        static_cast<double>(span) / static_cast<double>(frames);
    r.msg_over_packet = dt_m / dt_p;
    r.packet_over_tick = dt_p / dt_tick;
    r.flagged = r.msg_over_packet <= 1.0 || r.packet_over_tick <= 1.0;
    return r;
}

CellAgent::CellAgent(std::string id, bool odd_message_ids,
                     std::size_t queue_capacity, std::size_t retry_limit,
                     uint64_t watchdog_timeout, std::size_t fragment_size)
    : id_(std::move(id)),
      next_message_id_(odd_message_ids ? 1 : 2),
      fragment_size_(fragment_size),
      endpoint_(retry_limit),
      q_send_(QueueSide::Sender, queue_capacity),
      q_recv_(QueueSide::Receiver, queue_capacity) {
    watchdog_.timeout = watchdog_timeout;
}

uint32_t CellAgent::submit(std::vector<uint8_t> payload) {
    const uint32_t id = next_message_id_;
    next_message_id_ += 2;  // odd ids on one cell, even on the other
    outbox_.push_back(Message{id, std::move(payload)});
    submitted_.push_back(id);
    if (!active_out_) start_next_outbound();
    return id;
}

void CellAgent::start_next_outbound() {
    if (outbox_.empty()) return;
    OutboundMessage out;
    out.msg = std::move(outbox_.front());
    outbox_.pop_front();
    out.fragments = packetize(out.msg, fragment_size_);
    out.phase = MsgPhase::MOffered;
    feed_.push_back(control_packet(out.msg.message_id, false, out.ctrl_seq++,
                                   MsgControl::MsgOffer));
    active_out_ = std::move(out);
    events_.push_back({"msg-offer", active_out_->msg.message_id, 0, 0});
}

Packet CellAgent::control_packet(uint32_t message_id, bool reverse,
                                 uint32_t ctrl_seq, MsgControl op) const {
    const uint32_t stream =
        message_id | kControlFlag | (reverse ? kReverseFlag : 0u);
    return make_offer(Direction::LeftToRight, stream, ctrl_seq, false,
                      {static_cast<uint8_t>(op)});
}

MsgPhase CellAgent::outbound_phase() const {
    return active_out_ ? active_out_->phase : MsgPhase::MIdle;
}

void CellAgent::on_link_effects(const std::vector<LinkEffect>& effects) {
    for (const auto& e : effects) {
        if (e.kind != LinkEffectKind::Delivered) continue;
        // chi for the M-DONE control packet we sent: the final control cycle
        // is complete, so the reassembled message becomes visible.
        if ((e.message_id & kControlFlag) == 0) continue;
        if ((e.message_id & kReverseFlag) == 0) continue;
        const uint32_t id = e.message_id & kIdMask;
        const auto it = inbound_.find(id);
        if (it == inbound_.end() || !it->second.pending_inbox) continue;
        if (!it->second.done_enqueued || e.seq != 1) continue;
        inbox_.push_back(*it->second.pending_inbox);
        events_.push_back(
            {"inbox", id, 0, it->second.pending_inbox->payload.size()});
        it->second.pending_inbox.reset();
    }
}

void CellAgent::handle_control(const Packet& p) {
    const uint32_t id = p.message_id & kIdMask;
    const MsgControl op = static_cast<MsgControl>(
        p.payload.empty() ? 0 : p.payload.front());
    switch (op) {
        case MsgControl::MsgOffer: {
            inbound_.try_emplace(id);
            auto& in = inbound_[id];
            feed_.push_back(
                control_packet(id, true, in.ctrl_seq++, MsgControl::MsgAccept));
            events_.push_back({"msg-accept", id, 0, 0});
            break;
        }
        case MsgControl::MsgAccept: {
            if (!active_out_ || active_out_->msg.message_id != id) break;
            active_out_->phase = MsgPhase::MHeld;
            // Stream every fragment, then the confirm, in FIFO order.
            for (const auto& f : active_out_->fragments) feed_.push_back(f);
            feed_.push_back(control_packet(id, false, active_out_->ctrl_seq++,
                                           MsgControl::MsgConfirm));
            active_out_->phase = MsgPhase::MConfirmed;
            events_.push_back({"msg-confirm", id, 0, 0});
            break;
        }
        case MsgControl::MsgConfirm: {
            auto& in = inbound_[id];
            std::vector<Packet> collected;
            collected.reserve(in.fragments.size());
            for (const auto& [seq, entry] : in.fragments) {
                collected.push_back(make_offer(Direction::LeftToRight, id, seq,
                                               entry.second, entry.first));
            }
            ReassembleResult r = reassemble(collected);
            const bool empty_message = in.fragments.empty();
            if (empty_message) {
                r.status = ReassembleResult::Status::Complete;
                r.message = Message{id, {}};
            }
            if (r.status == ReassembleResult::Status::Complete) {
                in.pending_inbox = std::move(r.message);
                in.done_enqueued = true;
                feed_.push_back(
                    control_packet(id, true, in.ctrl_seq++, MsgControl::MsgDone));
                events_.push_back({"msg-done", id, 0, 0});
            } else {
                // Message-layer violation: keep the fragments for restart
                // reconciliation, surface the abandonment.
                in.abandoned = true;
                events_.push_back({"abandoned", id, 0, 0});
            }
            break;
        }
        case MsgControl::MsgDone: {
            if (active_out_ && active_out_->msg.message_id == id) {
                delivered_.insert(id);
                events_.push_back({"delivered", id, 0, 0});
                active_out_.reset();
                start_next_outbound();
            }
            break;
        }
        default:
            events_.push_back({"abandoned", id, 0, 0});
            break;
    }
}

void CellAgent::handle_data(const Packet& p) {
    auto& in = inbound_[p.message_id];
    const auto it = in.fragments.find(p.seq);
    if (it != in.fragments.end()) {
        if (it->second.first != p.payload || it->second.second != p.last)
            in.abandoned = true;
        return;  // idempotent duplicate
    }
    in.fragments.emplace(p.seq, std::make_pair(p.payload, p.last));
}

std::vector<CellEvent> CellAgent::drain() {
    while (auto p = q_recv_.consume_revealed()) {
        events_.push_back({"consume", p->message_id, p->seq, p->payload.size()});
        if (p->message_id & kControlFlag) {
            handle_control(*p);
        } else {
            handle_data(*p);
        }
    }
    while (!feed_.empty()) {
        if (q_send_.push_send(feed_.front()) != PushResult::Ok) break;
        feed_.pop_front();
    }
    return std::exchange(events_, {});
}

CellAgent::Watchdog CellAgent::watchdog_poll(uint64_t now) const {
    if (watchdog_.timeout == 0) return Watchdog::Healthy;  // strong entanglement
    if (now > watchdog_.last_activity &&
        now - watchdog_.last_activity > watchdog_.timeout)
        return Watchdog::Stalled;
    return Watchdog::Healthy;
}

}  // namespace entlink
