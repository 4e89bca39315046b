#pragma once

// Per-endpoint protocol state machine. The two endpoints of a link alternate
// strictly: every inbound frame produces exactly one outbound frame, so a
// single hot-potato token bounces between them. With no data pending the
// token is the TICK/TOCK pendulum; a payload transfer grafts itself onto the
// pendulum as the four-phase cycle
//
//   OFFER (teck)  ->  ACCEPT (tack)  ->  confirm (tick)  ->  TOCK
//
// with the queue transitions: share P into the send register; copy P into
// the receive register and hold it unrevealed; retire the sender's copy
// (unobservable); reveal the receiver's copy. A NACK sends the cycle back a
// step without altering the promise to send. Any frame that is not a legal
// reflection of what the endpoint last sent kills the link (phase DEAD):
// entanglement has been lost.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "entlink/codec.hpp"
#include "entlink/queue.hpp"

namespace entlink {

enum class Role : uint8_t { Left, Right, Unassigned };

enum class Phase : uint8_t {
    Bootstrapping,
    IdleTokenHeld,  // bootstrap done, first frame not yet emitted (LEFT only)
    IdleAwaiting,   // sent an idle-class frame, waiting for the peer
    OfferSent,      // our offer is in flight, awaiting TACK or NACK
    OfferHeld,      // we hold the peer's packet unrevealed, awaiting confirm
    ConfirmSent,    // we confirmed receipt of TACK, awaiting the closing TOCK
    Dead,
};

std::string to_string(Role r);
std::string to_string(Phase p);

// Subtime counts local promise-keeping actions, interior counts signals the
// endpoint processes (sent and received), exterior counts completed payload
// cycles only. Pure idling never advances the exterior clock.
struct ClockSet {
    uint64_t subtime = 0;
    uint64_t interior = 0;
    uint64_t exterior = 0;

    friend bool operator==(const ClockSet&, const ClockSet&) = default;
};

enum class LinkEffectKind : uint8_t {
    Held,          // receiver copied an offer into the queue, unrevealed
    Revealed,      // receiver made the packet observable
    Retired,       // sender retired its copy on TACK
    Delivered,     // cycle complete at the sender (chi)
    NackSent,
    NackReceived,
    BackPressure,  // retry budget exhausted, offer returned to the queue
    Violation,
};

struct LinkEffect {
    LinkEffectKind kind;
    uint32_t message_id = 0;
    uint32_t seq = 0;
    std::string detail;
};

struct OnReceiveResult {
    std::optional<Packet> outbound;  // absent only when the endpoint died
    std::vector<LinkEffect> effects;
    bool died = false;
};

class LinkEndpoint {
  public:
    explicit LinkEndpoint(std::size_t retry_limit = 8)
        : retry_limit_(retry_limit) {}

    // Virtual coin flip: the higher nonce promises to call itself LEFT.
    // Equal nonces ask for a redraw (nullopt). LEFT then holds the token.
    std::optional<Role> bootstrap_step(uint64_t nonce_local,
                                       uint64_t nonce_remote);

    // LEFT's first L-TICK; flips IdleTokenHeld to IdleAwaiting.
    std::optional<Packet> initial_frame();

    // Processes one inbound frame and produces the reply. `refuse_payload`
    // forces the not-ready path (NACK) on an inbound offer.
    OnReceiveResult on_receive(const Packet& frame, ObservableQueue& q_send,
                               ObservableQueue& q_recv,
                               bool refuse_payload = false);

    // A frame that failed to decode: line corruption, entanglement lost.
    void on_corrupt_frame(const std::string& reason);

    // Clears registers and clocks, returns to BOOTSTRAPPING. Legal on a
    // healthy link too (idempotent re-bootstrap). Queue reversion is the
    // caller's job (ObservableQueue::revert_unconfirmed).
    void restart();

    Role role() const { return role_; }
    Phase phase() const { return phase_; }
    const ClockSet& clocks() const { return clocks_; }
    const std::optional<Packet>& send_register() const { return send_register_; }
    const std::optional<PacketKey>& recv_register() const { return recv_register_; }
    const std::optional<Packet>& last_sent() const { return last_sent_; }
    std::size_t retry_count() const { return retry_count_; }
    bool operational() const {
        return phase_ != Phase::Dead && phase_ != Phase::Bootstrapping &&
               phase_ != Phase::IdleTokenHeld;
    }

    Direction my_direction() const {
        return role_ == Role::Left ? Direction::LeftToRight
                                   : Direction::RightToLeft;
    }

  private:
    Packet emit(Packet p);
    Packet idle_or_offer(ObservableQueue& q_send);
    OnReceiveResult die(const std::string& reason);

    Role role_ = Role::Unassigned;
    Phase phase_ = Phase::Bootstrapping;
    std::optional<Packet> send_register_;     // N(+): offer awaiting TACK
    std::optional<PacketKey> recv_register_;  // N(-): held key awaiting confirm
    std::optional<PacketKey> pending_confirm_;  // retired key awaiting TOCK
    std::optional<Packet> last_sent_;
    std::size_t retry_count_ = 0;
    std::size_t retry_limit_;
    ClockSet clocks_;
};

}  // namespace entlink
