#pragma once

// Observability-gated send/receive buffers sitting between a cell's message
// process and its network interface. An entry's `observable` flag is the
// queue's promise of the packet's presence to its cell; the protocol keeps
// at most one queue in the whole system promising any given (message_id, seq)
// at any instant.
//
// Sender-side lifecycle:   PENDING_SEND -> IN_FLIGHT -> RETIRED -> (removed)
// Receiver-side lifecycle: HELD_UNREVEALED -> REVEALED -> (consumed)
//
// An entry is observable only while PENDING_SEND (sender) or REVEALED
// (receiver). RETIRED entries stay unobservable until the cycle-complete
// TOCK confirms them; a restart reverts them to PENDING_SEND so nothing is
// lost in the accept-to-confirm fault window.

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <utility>

#include "entlink/codec.hpp"

namespace entlink {

enum class EntryState : uint8_t {
    PendingSend,
    InFlight,
    HeldUnrevealed,
    Revealed,
    Retired,
};

enum class QueueSide : uint8_t { Sender, Receiver };

struct QueueEntry {
    Packet packet;
    EntryState state;
    bool observable;
};

enum class PushResult : uint8_t { Ok, QueueFull };
enum class HoldResult : uint8_t { Ok, Duplicate, QueueFull, PayloadMismatch };
enum class RetireResult : uint8_t { Ok, NoSuchEntry };
enum class RevealResult : uint8_t { Revealed, AlreadyRevealed, NoSuchEntry };

using PacketKey = std::pair<uint32_t, uint32_t>;

class ObservableQueue {
  public:
    ObservableQueue(QueueSide side, std::size_t capacity)
        : side_(side), capacity_(capacity) {}

    QueueSide side() const { return side_; }
    std::size_t capacity() const { return capacity_; }
    std::size_t size() const { return entries_.size(); }
    const std::deque<QueueEntry>& entries() const { return entries_; }

    // --- sender side ---

    // Appends a PENDING_SEND entry, observable at the sender.
    PushResult push_send(const Packet& p);

    // Oldest PENDING_SEND entry, marked IN_FLIGHT. None while another entry
    // is already in flight: the link carries one packet at a time.
    std::optional<Packet> next_to_send();

    bool has_pending_send() const;

    // TACK received: entry becomes RETIRED and unobservable. The entry is
    // kept until confirm_delivery removes it on the cycle-complete TOCK.
    RetireResult retire_sent(uint32_t message_id, uint32_t seq);

    // Cycle complete: drop the retired entry for good.
    void confirm_delivery(uint32_t message_id, uint32_t seq);

    // NACK retry budget exhausted: put the in-flight entry back.
    void revert_inflight(uint32_t message_id, uint32_t seq);

    // Restart: IN_FLIGHT and unconfirmed RETIRED entries go back to
    // PENDING_SEND for re-offer; receiver-side dedupe makes that idempotent.
    std::size_t revert_unconfirmed();

    // --- receiver side ---

    // Admit a packet as HELD_UNREVEALED (not observable). Duplicate keys are
    // idempotent no-ops unless the payload disagrees.
    HoldResult hold_unrevealed(const Packet& p);

    // Confirm arrived: flip the held entry to REVEALED and observable.
    // Re-revealing an already-revealed or already-consumed key is idempotent.
    RevealResult reveal(uint32_t message_id, uint32_t seq);

    // Cell takes the oldest REVEALED entry out of the queue.
    std::optional<Packet> consume_revealed();

    // True if the key was revealed at some point (entry or watermark).
    bool was_revealed(uint32_t message_id, uint32_t seq) const;

    std::size_t observable_count(uint32_t message_id, uint32_t seq) const;

    const std::map<uint32_t, uint32_t>& watermarks() const {
        return consumed_watermark_;
    }

  private:
    QueueEntry* find_active(uint32_t message_id, uint32_t seq);
    const QueueEntry* find_active(uint32_t message_id, uint32_t seq) const;

    QueueSide side_;
    std::size_t capacity_;
    std::deque<QueueEntry> entries_;
    // Receiver side: next unconsumed seq per message id. A seq below the
    // watermark has been revealed and consumed; re-offers of it are dupes.
    std::map<uint32_t, uint32_t> consumed_watermark_;
};

}  // namespace entlink
