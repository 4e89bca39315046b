#pragma once

// Link-signal codec: 3-bit signal headers, their complement reflection, and
// the byte-exact frame layout (see WIRE.md).
//
// Every signal on the link is one of six labels, formed as intent (x)
// direction and packed into three bits (b0 intent-high, b1 intent-low,
// b2 direction):
//
//   L-TICK  idle   L2R  (0,0,0)      L-TECK  offer  L2R  (1,0,0)
//   R-TICK  idle   R2L  (1,1,1)      R-TECK  offer  R2L  (1,0,1)
//   L-TACK  accept L2R  (0,1,0)      R-TACK  accept R2L  (0,1,1)
//
// R-TICK is the TOCK of the idle pendulum. The two remaining 3-bit patterns,
// (0,0,1) and (1,1,0), are invalid and signal line corruption. One's
// complement of a valid codeword is always the valid codeword of the
// opposite endpoint: tick<->tock, L-teck<->R-tack, R-teck<->L-tack. That
// reflection property is what lets an endpoint validate every reply.
//
// A NACK is not a seventh signal: it is an offer-coded frame with a
// mandatory empty payload. Only offer frames ever carry payload bytes.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace entlink {

enum class Intent : uint8_t { Idle, Offer, Accept };
enum class Direction : uint8_t { LeftToRight, RightToLeft };

constexpr Direction complement(Direction d) {
    return d == Direction::LeftToRight ? Direction::RightToLeft
                                       : Direction::LeftToRight;
}

// 3-bit signal header. Only the low three bits of `bits` are meaningful.
struct HeaderVector {
    uint8_t bits = 0;

    constexpr bool intent_high() const { return (bits & 1u) != 0; }
    constexpr bool intent_low() const { return (bits & 2u) != 0; }
    constexpr bool direction_bit() const { return (bits & 4u) != 0; }

    static constexpr HeaderVector from_bits(bool b0, bool b1, bool b2) {
        return HeaderVector{static_cast<uint8_t>((b0 ? 1u : 0u) |
                                                 (b1 ? 2u : 0u) |
                                                 (b2 ? 4u : 0u))};
    }

    friend constexpr bool operator==(HeaderVector, HeaderVector) = default;
};

enum class SignalLabel : uint8_t { LTick, RTick, LTeck, RTeck, LTack, RTack };

std::string to_string(SignalLabel label);

// Total over the six-element (direction, intent) domain.
HeaderVector encode_header(Direction direction, Intent intent);

// Inverse of encode_header; nullopt for the two invalid patterns.
std::optional<std::pair<Direction, Intent>> decode_header(HeaderVector h);

// Label of a valid codeword, nullopt otherwise.
std::optional<SignalLabel> label_of(HeaderVector h);

// One's complement per component; an involution on all eight patterns.
HeaderVector complement(HeaderVector h);

// The unit of link transfer. Idle frames carry a zero key and no payload;
// offer frames carry the payload fragment; accept and NACK frames echo the
// key of the offer they answer.
struct Packet {
    HeaderVector header;
    uint32_t message_id = 0;
    uint32_t seq = 0;
    bool last = false;  // terminal-fragment marker
    std::vector<uint8_t> payload;

    Direction direction() const;
    Intent intent() const;
    bool is_idle() const { return intent() == Intent::Idle; }
    bool is_offer() const { return intent() == Intent::Offer && !payload.empty(); }
    bool is_nack() const { return intent() == Intent::Offer && payload.empty(); }
    bool is_accept() const { return intent() == Intent::Accept; }

    friend bool operator==(const Packet&, const Packet&) = default;
};

Packet make_idle(Direction d);
Packet make_offer(Direction d, uint32_t message_id, uint32_t seq, bool last,
                  std::vector<uint8_t> payload);
Packet make_accept(Direction d, uint32_t message_id, uint32_t seq);
Packet make_nack(Direction d, uint32_t message_id, uint32_t seq);

// Payload-bearing message as the cell sees it; fragments reassemble to it.
struct Message {
    uint32_t message_id = 0;
    std::vector<uint8_t> payload;

    friend bool operator==(const Message&, const Message&) = default;
};

// Frame kinds as the transition legality table sees them. A NACK is
// distinguished from a data offer by its empty payload alone.
enum class FrameKind : uint8_t { Idle, Offer, Nack, Accept };

FrameKind kind_of(const Packet& p);

// True iff `received` is a legal reflection of `sent` under the link's
// transition table: the direction must alternate, and the kind pair must be
// one of
//   idle   -> idle | offer      (pendulum, or an offer grafted onto the slot)
//   offer  -> accept | nack
//   nack   -> offer | idle      (retry, or the sender giving up its slot)
//   accept -> idle              (the pure confirm)
// Anything else means the entanglement has been lost. On the idle and offer
// legs this coincides with received.header == complement(sent.header).
bool is_valid_reflection(const Packet& sent, const Packet& received);

enum class FrameError : uint8_t {
    None,
    Truncated,          // fewer bytes than the fixed 12-byte prefix
    ReservedHeaderBits, // header byte bits 3..7 set
    InvalidCodeword,    // (0,0,1) or (1,1,0)
    ReservedFlagBits,   // flags byte bits 1..7 set
    PayloadDiscipline,  // non-offer intent with payload bytes
    IdleNonzeroKey,     // idle frame with nonzero id/seq or last flag
    ZeroKey,            // offer/accept frame with message_id 0
    LengthMismatch,     // declared length disagrees with trailing bytes
};

std::string to_string(FrameError e);

struct FrameDecodeResult {
    std::optional<Packet> packet;
    FrameError error = FrameError::None;
};

// Frame layout (big-endian fields, offsets in bytes):
//   0      header byte (low 3 bits)
//   1      flags byte (bit 0 = last fragment)
//   2..5   message_id
//   6..9   seq
//   10..11 payload length
//   12..   payload
// Returns nullopt if the packet violates the payload or key discipline.
std::optional<std::vector<uint8_t>> encode_frame(const Packet& p);

FrameDecodeResult decode_frame(std::span<const uint8_t> bytes);

}  // namespace entlink
