#pragma once

// Cell agent: originates and consumes messages, packetizes them, reassembles
// inbound fragments, and runs the second (message-layer) entanglement
// recursively on top of packet delivery:
//
//   M-OFFER -> M-ACCEPT -> data fragments -> M-CONFIRM -> M-DONE
//
// Control signals are ordinary link packets flagged by the high bit of the
// message id; each carries a one-byte opcode (an offer frame with a truly
// empty payload would read as a NACK). The receiving cell moves a message to
// its inbox only when the M-DONE cycle completes, and the sending cell marks
// it delivered only when M-DONE is revealed to it, so a message either
// arrives whole or not at all.
//
// The cell is split-brained: the link drives one clock domain, and an
// independent watchdog clock samples link activity to detect stalls the
// strongly-entangled side could never see.

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "entlink/codec.hpp"
#include "entlink/link.hpp"
#include "entlink/queue.hpp"

namespace entlink {

// High bit of message_id flags a message-layer control packet; the next bit
// marks the reverse stream (control packets sent by the message's receiver),
// so the two directions' control streams never share a (message_id, seq) key.
constexpr uint32_t kControlFlag = 0x8000'0000u;
constexpr uint32_t kReverseFlag = 0x4000'0000u;
constexpr uint32_t kIdMask = ~(kControlFlag | kReverseFlag);

enum class MsgControl : uint8_t {
    MsgOffer = 1,
    MsgAccept = 2,
    MsgConfirm = 3,
    MsgDone = 4,
};

enum class MsgPhase : uint8_t { MIdle, MOffered, MHeld, MConfirmed };

// Splits a message payload into in-order fragments of at most
// `fragment_size` bytes; the final fragment carries the last flag. An empty
// payload yields no data packets (the message is control-only).
std::vector<Packet> packetize(const Message& msg, std::size_t fragment_size);

struct ReassembleResult {
    enum class Status : uint8_t { Complete, Incomplete, Conflict };
    Status status = Status::Incomplete;
    std::optional<Message> message;
};

// Concatenates fragments in seq order. Complete only when seqs form a
// contiguous 0..k run whose final member carries the last flag. Duplicate
// fragments with equal payloads are idempotent; a payload conflict under an
// equal key is entanglement loss.
ReassembleResult reassemble(const std::vector<Packet>& fragments);

struct WatchdogClock {
    uint64_t last_activity = 0;
    uint64_t timeout = 64;  // 0 disables the watchdog (strong entanglement)
};

struct TimescaleReport {
    double msg_over_packet = 0.0;   // dt_M / dt_P
    double packet_over_tick = 0.0;  // dt_P / dt_tick
    bool flagged = false;           // either ratio <= 1
};

// Mean-interval ratios over a run: span / count per event class. Data-cycle
// counts exclude message-layer control cycles. Nullopt when no message (or
// no data cycle, or no frame) gives a ratio meaning.
std::optional<TimescaleReport> compute_timescales(uint64_t span,
                                                  uint64_t frames,
                                                  uint64_t data_cycles,
                                                  uint64_t messages);

struct CellEvent {
    std::string kind;  // msg-offer, msg-accept, msg-confirm, msg-done,
                       // consume, inbox, delivered, abandoned
    uint32_t message_id = 0;
    uint32_t seq = 0;
    std::size_t len = 0;
};

class CellAgent {
  public:
    CellAgent(std::string id, bool odd_message_ids, std::size_t queue_capacity,
              std::size_t retry_limit, uint64_t watchdog_timeout,
              std::size_t fragment_size);

    const std::string& id() const { return id_; }
    LinkEndpoint& endpoint() { return endpoint_; }
    const LinkEndpoint& endpoint() const { return endpoint_; }
    ObservableQueue& send_queue() { return q_send_; }
    ObservableQueue& recv_queue() { return q_recv_; }
    const ObservableQueue& send_queue() const { return q_send_; }
    const ObservableQueue& recv_queue() const { return q_recv_; }

    // Queues a message for transfer; returns its id. Messages per direction
    // go out strictly one at a time, in submission order.
    uint32_t submit(std::vector<uint8_t> payload);

    // Effects reported by this cell's endpoint while processing a frame.
    void on_link_effects(const std::vector<LinkEffect>& effects);

    // One event-loop step on the cell side of the split brain: consume
    // revealed packets, advance the message layer, feed the send queue.
    // Returns the cell-level events that occurred.
    std::vector<CellEvent> drain();

    void note_activity(uint64_t now) { watchdog_.last_activity = now; }

    enum class Watchdog : uint8_t { Healthy, Stalled };
    Watchdog watchdog_poll(uint64_t now) const;
    const WatchdogClock& watchdog() const { return watchdog_; }

    const std::vector<Message>& inbox() const { return inbox_; }
    bool delivered(uint32_t message_id) const {
        return delivered_.count(message_id) != 0;
    }
    const std::vector<uint32_t>& submitted() const { return submitted_; }
    MsgPhase outbound_phase() const;
    bool wants_restart = false;

  private:
    void start_next_outbound();
    Packet control_packet(uint32_t message_id, bool reverse, uint32_t ctrl_seq,
                          MsgControl op) const;
    void handle_control(const Packet& p);
    void handle_data(const Packet& p);

    struct OutboundMessage {
        Message msg;
        std::vector<Packet> fragments;
        MsgPhase phase = MsgPhase::MIdle;
        uint32_t ctrl_seq = 0;  // my control stream: offer=0, confirm=1
    };

    struct InboundMessage {
        std::map<uint32_t, std::pair<std::vector<uint8_t>, bool>> fragments;
        uint32_t ctrl_seq = 0;  // my control stream: accept=0, done=1
        bool done_enqueued = false;
        std::optional<Message> pending_inbox;
        bool abandoned = false;
    };

    std::string id_;
    uint32_t next_message_id_;
    std::size_t fragment_size_;
    LinkEndpoint endpoint_;
    ObservableQueue q_send_;
    ObservableQueue q_recv_;
    WatchdogClock watchdog_;

    std::deque<Message> outbox_;
    std::optional<OutboundMessage> active_out_;
    std::deque<Packet> feed_;  // staged packets awaiting queue room
    std::map<uint32_t, InboundMessage> inbound_;
    std::vector<Message> inbox_;
    std::set<uint32_t> delivered_;
    std::vector<uint32_t> submitted_;
    std::vector<CellEvent> events_;
};

}  // namespace entlink
