#include "entlink/link.hpp"

namespace entlink {

std::string to_string(Role r) {
    switch (r) {
        case Role::Left: return "LEFT";
        case Role::Right: return "RIGHT";
        case Role::Unassigned: return "UNASSIGNED";
    }
    return "?";
}

std::string to_string(Phase p) {
    switch (p) {
        case Phase::Bootstrapping: return "BOOTSTRAPPING";
        case Phase::IdleTokenHeld: return "IDLE_TOKEN_HELD";
        case Phase::IdleAwaiting: return "IDLE_AWAITING";
        case Phase::OfferSent: return "OFFER_SENT";
        case Phase::OfferHeld: return "OFFER_HELD";
        case Phase::ConfirmSent: return "CONFIRM_SENT";
        case Phase::Dead: return "DEAD";
    }
    return "?";
}

std::optional<Role> LinkEndpoint::bootstrap_step(uint64_t nonce_local,
                                                 uint64_t nonce_remote) {
    if (nonce_local == nonce_remote) return std::nullopt;
    role_ = nonce_local > nonce_remote ? Role::Left : Role::Right;
    clocks_.subtime += 1;
    // LEFT holds the token and opens the pendulum; RIGHT waits.
    phase_ = role_ == Role::Left ? Phase::IdleTokenHeld : Phase::IdleAwaiting;
    return role_;
}

std::optional<Packet> LinkEndpoint::initial_frame() {
    if (phase_ != Phase::IdleTokenHeld) return std::nullopt;
    phase_ = Phase::IdleAwaiting;
    return emit(make_idle(my_direction()));
}

Packet LinkEndpoint::emit(Packet p) {
    clocks_.subtime += 1;
    clocks_.interior += 1;
    last_sent_ = p;
    return p;
}

// An idle-class reply slot: graft the next offer onto it if the cell has
// queued one, otherwise tread water.
Packet LinkEndpoint::idle_or_offer(ObservableQueue& q_send) {
    if (auto next = q_send.next_to_send()) {
        clocks_.subtime += 1;  // pull from queue into the send register
        Packet offer = make_offer(my_direction(), next->message_id, next->seq,
                                  next->last, next->payload);
        send_register_ = offer;
        retry_count_ = 0;
        phase_ = Phase::OfferSent;
        return emit(offer);
    }
    phase_ = Phase::IdleAwaiting;
    return emit(make_idle(my_direction()));
}

OnReceiveResult LinkEndpoint::die(const std::string& reason) {
    phase_ = Phase::Dead;
    send_register_.reset();
    recv_register_.reset();
    pending_confirm_.reset();
    OnReceiveResult r;
    r.died = true;
    r.effects.push_back({LinkEffectKind::Violation, 0, 0, reason});
    return r;
}

void LinkEndpoint::on_corrupt_frame(const std::string& reason) {
    if (phase_ == Phase::Dead) return;
    clocks_.interior += 1;
    phase_ = Phase::Dead;
    send_register_.reset();
    recv_register_.reset();
    pending_confirm_.reset();
    (void)reason;
}

OnReceiveResult LinkEndpoint::on_receive(const Packet& frame,
                                         ObservableQueue& q_send,
                                         ObservableQueue& q_recv,
                                         bool refuse_payload) {
    OnReceiveResult result;
    if (phase_ == Phase::Dead) return result;  // no reply from the dead
    clocks_.subtime += 1;
    clocks_.interior += 1;

    if (phase_ == Phase::Bootstrapping || phase_ == Phase::IdleTokenHeld)
        return die("frame-before-ready");

    // Reflection check against our last signal. A fresh RIGHT endpoint has
    // sent nothing yet; the pendulum's virtual predecessor is its own idle.
    const Packet reference =
        last_sent_ ? *last_sent_ : make_idle(my_direction());
    if (!is_valid_reflection(reference, frame))
        return die("reflection-violation:" + (label_of(frame.header)
                       ? to_string(*label_of(frame.header))
                       : std::string("invalid")));

    const FrameKind kind = kind_of(frame);

    switch (phase_) {
        case Phase::IdleAwaiting: {
            if (kind == FrameKind::Idle) {
                result.outbound = idle_or_offer(q_send);
                return result;
            }
            if (kind == FrameKind::Offer) {
                // Receiver path below.
                break;
            }
            return die("illegal-frame-in-idle");
        }

        case Phase::OfferSent: {
            if (!send_register_) return die("offer-state-without-register");
            const uint32_t m = send_register_->message_id;
            const uint32_t s = send_register_->seq;
            if (kind == FrameKind::Accept) {
                if (frame.message_id != m || frame.seq != s)
                    return die("accept-echo-mismatch");
                if (q_send.retire_sent(m, s) != RetireResult::Ok)
                    return die("retire-no-such-entry");
                result.effects.push_back({LinkEffectKind::Retired, m, s, {}});
                send_register_.reset();
                pending_confirm_ = PacketKey{m, s};
                phase_ = Phase::ConfirmSent;
                result.outbound = emit(make_idle(my_direction()));
                return result;
            }
            if (kind == FrameKind::Nack) {
                if (frame.message_id != m || frame.seq != s)
                    return die("nack-echo-mismatch");
                retry_count_ += 1;
                result.effects.push_back({LinkEffectKind::NackReceived, m, s, {}});
                if (retry_count_ <= retry_limit_) {
                    // Back a step, without removing or altering the promise.
                    result.outbound = emit(*send_register_);
                    return result;
                }
                // Give the slot back to the pendulum and tell the cell.
                q_send.revert_inflight(m, s);
                send_register_.reset();
                retry_count_ = 0;
                result.effects.push_back({LinkEffectKind::BackPressure, m, s, {}});
                phase_ = Phase::IdleAwaiting;
                result.outbound = emit(make_idle(my_direction()));
                return result;
            }
            return die("illegal-frame-in-offer-sent");
        }

        case Phase::OfferHeld: {
            if (kind != FrameKind::Idle) return die("illegal-frame-in-offer-held");
            if (!recv_register_) return die("held-state-without-register");
            const auto [m, s] = *recv_register_;
            const RevealResult rr = q_recv.reveal(m, s);
            if (rr == RevealResult::NoSuchEntry) return die("reveal-no-such-entry");
            clocks_.subtime += 1;
            if (rr == RevealResult::Revealed)
                result.effects.push_back({LinkEffectKind::Revealed, m, s, {}});
            recv_register_.reset();
            clocks_.exterior += 1;  // cycle complete on the receiving side
            // We just closed a cycle as receiver: this slot may carry our
            // own pending offer (fairness under contention).
            result.outbound = idle_or_offer(q_send);
            return result;
        }

        case Phase::ConfirmSent: {
            if (kind != FrameKind::Idle && kind != FrameKind::Offer)
                return die("illegal-frame-in-confirm-sent");
            if (!pending_confirm_) return die("confirm-state-without-key");
            const auto [m, s] = *pending_confirm_;
            q_send.confirm_delivery(m, s);
            clocks_.subtime += 1;
            pending_confirm_.reset();
            clocks_.exterior += 1;  // chi: cycle complete on the sending side
            result.effects.push_back({LinkEffectKind::Delivered, m, s, {}});
            if (kind == FrameKind::Idle) {
                result.outbound = idle_or_offer(q_send);
                return result;
            }
            // The closing TOCK carried a grafted offer; fall through to the
            // receiver path for it.
            phase_ = Phase::IdleAwaiting;
            break;
        }

        default:
            return die("unreachable-phase");
    }

    // Receiver path: an inbound offer in an idle-class slot.
    if (refuse_payload) {
        result.effects.push_back(
            {LinkEffectKind::NackSent, frame.message_id, frame.seq, {}});
        phase_ = Phase::IdleAwaiting;
        result.outbound =
            emit(make_nack(my_direction(), frame.message_id, frame.seq));
        return result;
    }
    const HoldResult hr = q_recv.hold_unrevealed(frame);
    switch (hr) {
        case HoldResult::Ok:
        case HoldResult::Duplicate:
            if (hr == HoldResult::Ok) {
                clocks_.subtime += 1;
                result.effects.push_back(
                    {LinkEffectKind::Held, frame.message_id, frame.seq, {}});
            }
            recv_register_ = PacketKey{frame.message_id, frame.seq};
            phase_ = Phase::OfferHeld;
            result.outbound =
                emit(make_accept(my_direction(), frame.message_id, frame.seq));
            return result;
        case HoldResult::QueueFull:
            result.effects.push_back(
                {LinkEffectKind::NackSent, frame.message_id, frame.seq, {}});
            phase_ = Phase::IdleAwaiting;
            result.outbound =
                emit(make_nack(my_direction(), frame.message_id, frame.seq));
            return result;
        case HoldResult::PayloadMismatch:
            return die("duplicate-key-payload-mismatch");
    }
    return die("unreachable");
}

void LinkEndpoint::restart() {
    role_ = Role::Unassigned;
    phase_ = Phase::Bootstrapping;
    send_register_.reset();
    recv_register_.reset();
    pending_confirm_.reset();
    last_sent_.reset();
    retry_count_ = 0;
    clocks_ = ClockSet{};  // a restarted link is a new shared-clock epoch
}

}  // namespace entlink
