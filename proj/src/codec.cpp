#include "entlink/codec.hpp"

namespace entlink {

namespace {

constexpr uint8_t kHeaderMask = 0x07;

constexpr bool dir_bit(Direction d) { return d == Direction::RightToLeft; }

}  // namespace

std::string to_string(SignalLabel label) {
    switch (label) {
        case SignalLabel::LTick: return "L-TICK";
        case SignalLabel::RTick: return "R-TOCK";
        case SignalLabel::LTeck: return "L-TECK";
        case SignalLabel::RTeck: return "R-TECK";
        case SignalLabel::LTack: return "L-TACK";
        case SignalLabel::RTack: return "R-TACK";
    }
    return "?";
}

HeaderVector encode_header(Direction direction, Intent intent) {
    const bool d = dir_bit(direction);
    switch (intent) {
        case Intent::Idle:
            // Idle intent bits repeat the direction bit so that the
            // complement of an idle codeword is the opposite idle codeword.
            return HeaderVector::from_bits(d, d, d);
        case Intent::Offer:
            return HeaderVector::from_bits(true, false, d);
        case Intent::Accept:
            return HeaderVector::from_bits(false, true, d);
    }
    return HeaderVector{};
}

std::optional<std::pair<Direction, Intent>> decode_header(HeaderVector h) {
    if ((h.bits & ~kHeaderMask) != 0) return std::nullopt;
    const Direction d =
        h.direction_bit() ? Direction::RightToLeft : Direction::LeftToRight;
    const bool b0 = h.intent_high();
    const bool b1 = h.intent_low();
    if (b0 && !b1) return std::make_pair(d, Intent::Offer);
    if (!b0 && b1) return std::make_pair(d, Intent::Accept);
    // Equal intent bits are idle only when they match the direction bit;
    // (0,0,1) and (1,1,0) are the two invalid patterns.
    if (b0 == h.direction_bit()) return std::make_pair(d, Intent::Idle);
    return std::nullopt;
}

std::optional<SignalLabel> label_of(HeaderVector h) {
    const auto decoded = decode_header(h);
    if (!decoded) return std::nullopt;
    const bool right = decoded->first == Direction::RightToLeft;
    switch (decoded->second) {
        case Intent::Idle: return right ? SignalLabel::RTick : SignalLabel::LTick;
        case Intent::Offer: return right ? SignalLabel::RTeck : SignalLabel::LTeck;
        case Intent::Accept: return right ? SignalLabel::RTack : SignalLabel::LTack;
    }
    return std::nullopt;
}

HeaderVector complement(HeaderVector h) {
    return HeaderVector{static_cast<uint8_t>(~h.bits & kHeaderMask)};
}

Direction Packet::direction() const {
    return header.direction_bit() ? Direction::RightToLeft
                                  : Direction::LeftToRight;
}

Intent Packet::intent() const {
    const auto decoded = decode_header(header);
    return decoded ? decoded->second : Intent::Idle;
}

Packet make_idle(Direction d) {
    Packet p;
    p.header = encode_header(d, Intent::Idle);
    return p;
}

Packet make_offer(Direction d, uint32_t message_id, uint32_t seq, bool last,
                  std::vector<uint8_t> payload) {
    Packet p;
    p.header = encode_header(d, Intent::Offer);
    p.message_id = message_id;
    p.seq = seq;
    p.last = last;
    p.payload = std::move(payload);
    return p;
}

Packet make_accept(Direction d, uint32_t message_id, uint32_t seq) {
    Packet p;
    p.header = encode_header(d, Intent::Accept);
    p.message_id = message_id;
    p.seq = seq;
    return p;
}

Packet make_nack(Direction d, uint32_t message_id, uint32_t seq) {
    Packet p;
    p.header = encode_header(d, Intent::Offer);
    p.message_id = message_id;
    p.seq = seq;
    return p;
}

FrameKind kind_of(const Packet& p) {
    switch (p.intent()) {
        case Intent::Idle: return FrameKind::Idle;
        case Intent::Offer:
            return p.payload.empty() ? FrameKind::Nack : FrameKind::Offer;
        case Intent::Accept: return FrameKind::Accept;
    }
    return FrameKind::Idle;
}

bool is_valid_reflection(const Packet& sent, const Packet& received) {
    if (received.direction() != complement(sent.direction())) return false;
    switch (kind_of(sent)) {
        case FrameKind::Idle:
            return kind_of(received) == FrameKind::Idle ||
                   kind_of(received) == FrameKind::Offer;
        case FrameKind::Offer:
            return kind_of(received) == FrameKind::Accept ||
                   kind_of(received) == FrameKind::Nack;
        case FrameKind::Nack:
            return kind_of(received) == FrameKind::Offer ||
                   kind_of(received) == FrameKind::Idle;
        case FrameKind::Accept:
            return kind_of(received) == FrameKind::Idle;
    }
    return false;
}

std::string to_string(FrameError e) {
    switch (e) {
        case FrameError::None: return "none";
        case FrameError::Truncated: return "truncated";
        case FrameError::ReservedHeaderBits: return "reserved-header-bits";
        case FrameError::InvalidCodeword: return "invalid-codeword";
        case FrameError::ReservedFlagBits: return "reserved-flag-bits";
        case FrameError::PayloadDiscipline: return "payload-discipline";
        case FrameError::IdleNonzeroKey: return "idle-nonzero-key";
        case FrameError::ZeroKey: return "zero-key";
        case FrameError::LengthMismatch: return "length-mismatch";
    }
    return "?";
}

namespace {

constexpr std::size_t kFixedPrefix = 12;

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
    out.push_back(static_cast<uint8_t>(v >> 24));
    out.push_back(static_cast<uint8_t>(v >> 16));
    out.push_back(static_cast<uint8_t>(v >> 8));
    out.push_back(static_cast<uint8_t>(v));
}

uint32_t get_u32(std::span<const uint8_t> b, std::size_t at) {
    return (static_cast<uint32_t>(b[at]) << 24) |
           (static_cast<uint32_t>(b[at + 1]) << 16) |
           (static_cast<uint32_t>(b[at + 2]) << 8) |
           static_cast<uint32_t>(b[at + 3]);
}

FrameError validate(const Packet& p) {
    const auto decoded = decode_header(p.header);
    if ((p.header.bits & ~kHeaderMask) != 0) return FrameError::ReservedHeaderBits;
    if (!decoded) return FrameError::InvalidCodeword;
    switch (decoded->second) {
        case Intent::Idle:
            if (p.message_id != 0 || p.seq != 0 || p.last)
                return FrameError::IdleNonzeroKey;
            if (!p.payload.empty()) return FrameError::PayloadDiscipline;
            break;
        case Intent::Accept:
            if (!p.payload.empty()) return FrameError::PayloadDiscipline;
            if (p.message_id == 0) return FrameError::ZeroKey;
            break;
        case Intent::Offer:
            if (p.message_id == 0) return FrameError::ZeroKey;
            break;
    }
    return FrameError::None;
}

}  // namespace

std::optional<std::vector<uint8_t>> encode_frame(const Packet& p) {
    if (validate(p) != FrameError::None) return std::nullopt;
    if (p.payload.size() > 0xffff) return std::nullopt;
    std::vector<uint8_t> out;
    out.reserve(kFixedPrefix + p.payload.size());
    out.push_back(p.header.bits);
    out.push_back(p.last ? 0x01 : 0x00);
    put_u32(out, p.message_id);
    put_u32(out, p.seq);
    out.push_back(static_cast<uint8_t>(p.payload.size() >> 8));
    out.push_back(static_cast<uint8_t>(p.payload.size()));
    out.insert(out.end(), p.payload.begin(), p.payload.end());
    return out;
}

FrameDecodeResult decode_frame(std::span<const uint8_t> bytes) {
    if (bytes.size() < kFixedPrefix) return {std::nullopt, FrameError::Truncated};
    if ((bytes[0] & ~kHeaderMask) != 0)
        return {std::nullopt, FrameError::ReservedHeaderBits};
    const HeaderVector h{static_cast<uint8_t>(bytes[0] & kHeaderMask)};
    if (!decode_header(h)) return {std::nullopt, FrameError::InvalidCodeword};
    if ((bytes[1] & ~0x01) != 0) return {std::nullopt, FrameError::ReservedFlagBits};

    Packet p;
    p.header = h;
    p.last = (bytes[1] & 0x01) != 0;
    p.message_id = get_u32(bytes, 2);
    p.seq = get_u32(bytes, 6);
    const std::size_t len =
        (static_cast<std::size_t>(bytes[10]) << 8) | bytes[11];
    if (bytes.size() != kFixedPrefix + len)
        return {std::nullopt, FrameError::LengthMismatch};
    p.payload.assign(bytes.begin() + kFixedPrefix, bytes.end());

    if (const FrameError err = validate(p); err != FrameError::None)
        return {std::nullopt, err};
    return {std::move(p), FrameError::None};
}

}  // namespace entlink
