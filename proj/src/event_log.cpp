#include "entlink/event_log.hpp"

#include <sstream>

namespace entlink {

std::string hex_encode(const std::vector<uint8_t>& bytes) {
    static const char digits[] = "0123456789abcdef";
    std::string out;
    out.reserve(bytes.size() * 2);
    for (const uint8_t b : bytes) {
        out.push_back(digits[b >> 4]);
        out.push_back(digits[b & 0xf]);
    }
    return out;
}

std::string to_line(const EventRecord& rec) {
    std::ostringstream os;
    os << "t=" << rec.time << " actor=" << rec.actor << " kind=" << rec.kind;
    if (rec.frame) {
        const auto label = label_of(rec.frame->header);
        os << " label=" << (label ? to_string(*label) : "INVALID");
        os << " m=" << rec.frame->message_id << " seq=" << rec.frame->seq
           << " last=" << (rec.frame->last ? 1 : 0)
           << " len=" << rec.frame->payload.size();
        if (!rec.frame->payload.empty())
            os << " data=" << hex_encode(rec.frame->payload);
    }
    if (!rec.detail.empty()) os << " detail=" << rec.detail;
    os << " clkL=" << rec.clock_left.subtime << ":" << rec.clock_left.interior
       << ":" << rec.clock_left.exterior;
    os << " clkR=" << rec.clock_right.subtime << ":" << rec.clock_right.interior
       << ":" << rec.clock_right.exterior;
    return os.str();
}

std::string EventLog::to_text() const {
    std::string out;
    for (const auto& rec : records) {
        out += to_line(rec);
        out += '\n';
    }
    return out;
}

}  // namespace entlink
