#include "entlink/queue.hpp"

#include <algorithm>

namespace entlink {

QueueEntry* ObservableQueue::find_active(uint32_t message_id, uint32_t seq) {
    for (auto& e : entries_) {
        if (e.packet.message_id == message_id && e.packet.seq == seq) return &e;
    }
    return nullptr;
}

const QueueEntry* ObservableQueue::find_active(uint32_t message_id,
                                               uint32_t seq) const {
    for (const auto& e : entries_) {
        if (e.packet.message_id == message_id && e.packet.seq == seq) return &e;
    }
    return nullptr;
}

PushResult ObservableQueue::push_send(const Packet& p) {
    if (entries_.size() >= capacity_) return PushResult::QueueFull;
    entries_.push_back({p, EntryState::PendingSend, true});
    return PushResult::Ok;
}

std::optional<Packet> ObservableQueue::next_to_send() {
    for (const auto& e : entries_) {
        if (e.state == EntryState::InFlight) return std::nullopt;
    }
    for (auto& e : entries_) {
        if (e.state == EntryState::PendingSend) {
            e.state = EntryState::InFlight;
            e.observable = false;
            return e.packet;
        }
    }
    return std::nullopt;
}

bool ObservableQueue::has_pending_send() const {
    bool any_pending = false;
    for (const auto& e : entries_) {
        if (e.state == EntryState::InFlight) return false;
        if (e.state == EntryState::PendingSend) any_pending = true;
    }
    return any_pending;
}

RetireResult ObservableQueue::retire_sent(uint32_t message_id, uint32_t seq) {
    QueueEntry* e = find_active(message_id, seq);
    if (!e || e->state != EntryState::InFlight) return RetireResult::NoSuchEntry;
    e->state = EntryState::Retired;
    e->observable = false;
    return RetireResult::Ok;
}

void ObservableQueue::confirm_delivery(uint32_t message_id, uint32_t seq) {
    entries_.erase(
        std::remove_if(entries_.begin(), entries_.end(),
                       [&](const QueueEntry& e) {
                           return e.state == EntryState::Retired &&
                                  e.packet.message_id == message_id &&
                                  e.packet.seq == seq;
                       }),
        entries_.end());
}

void ObservableQueue::revert_inflight(uint32_t message_id, uint32_t seq) {
    QueueEntry* e = find_active(message_id, seq);
    if (e && e->state == EntryState::InFlight) {
        e->state = EntryState::PendingSend;
        e->observable = true;
    }
}

std::size_t ObservableQueue::revert_unconfirmed() {
    std::size_t reverted = 0;
    for (auto& e : entries_) {
        if (e.state == EntryState::InFlight || e.state == EntryState::Retired) {
            e.state = EntryState::PendingSend;
            // Not observable: the peer may already hold or expose its copy,
            // and the sender cannot know which after a restart.
            e.observable = false;
            ++reverted;
        }
    }
    return reverted;
}

HoldResult ObservableQueue::hold_unrevealed(const Packet& p) {
    if (const QueueEntry* e = find_active(p.message_id, p.seq)) {
        if (e->packet.payload != p.payload || e->packet.last != p.last)
            return HoldResult::PayloadMismatch;
        return HoldResult::Duplicate;
    }
    const auto wm = consumed_watermark_.find(p.message_id);
    if (wm != consumed_watermark_.end() && p.seq < wm->second)
        return HoldResult::Duplicate;
    if (entries_.size() >= capacity_) return HoldResult::QueueFull;
    entries_.push_back({p, EntryState::HeldUnrevealed, false});
    return HoldResult::Ok;
}

RevealResult ObservableQueue::reveal(uint32_t message_id, uint32_t seq) {
    if (QueueEntry* e = find_active(message_id, seq)) {
        if (e->state == EntryState::Revealed) return RevealResult::AlreadyRevealed;
        if (e->state != EntryState::HeldUnrevealed) return RevealResult::NoSuchEntry;
        e->state = EntryState::Revealed;
        e->observable = true;
        return RevealResult::Revealed;
    }
    const auto wm = consumed_watermark_.find(message_id);
    if (wm != consumed_watermark_.end() && seq < wm->second)
        return RevealResult::AlreadyRevealed;
    return RevealResult::NoSuchEntry;
}

std::optional<Packet> ObservableQueue::consume_revealed() {
    for (auto it = entries_.begin(); it != entries_.end(); ++it) {
        if (it->state == EntryState::Revealed) {
            Packet p = std::move(it->packet);
            entries_.erase(it);
            auto& wm = consumed_watermark_[p.message_id];
            wm = std::max(wm, p.seq + 1);
            return p;
        }
    }
    return std::nullopt;
}

bool ObservableQueue::was_revealed(uint32_t message_id, uint32_t seq) const {
    if (const QueueEntry* e = find_active(message_id, seq))
        return e->state == EntryState::Revealed;
    const auto wm = consumed_watermark_.find(message_id);
    return wm != consumed_watermark_.end() && seq < wm->second;
}

std::size_t ObservableQueue::observable_count(uint32_t message_id,
                                              uint32_t seq) const {
    std::size_t n = 0;
    for (const auto& e : entries_) {
        if (e.observable && e.packet.message_id == message_id &&
            e.packet.seq == seq)
            ++n;
    }
    return n;
}

}  // namespace entlink
