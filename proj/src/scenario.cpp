#include "entlink/scenario.hpp"

#include <cctype>
#include <cstdio>
#include <sstream>

#include "entlink/event_log.hpp"

namespace entlink {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

std::vector<std::string> split_ws(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream is(s);
    std::string tok;
    while (is >> tok) out.push_back(tok);
    return out;
}

bool parse_u64(const std::string& s, uint64_t& out) {
    if (s.empty()) return false;
    uint64_t v = 0;
    for (const char c : s) {
        if (c < '0' || c > '9') return false;
        v = v * 10 + static_cast<uint64_t>(c - '0');
    }
    out = v;
    return true;
}

bool parse_prob(const std::string& s, double& out) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size()) return false;
    if (v < 0.0 || v > 1.0) return false;
    out = v;
    return true;
}

std::optional<std::vector<uint8_t>> parse_payload(const std::string& tok) {
    if (tok.rfind("text:", 0) == 0) {
        const std::string body = tok.substr(5);
        return std::vector<uint8_t>(body.begin(), body.end());
    }
    if (tok.rfind("hex:", 0) == 0) {
        const std::string body = tok.substr(4);
        if (body.size() % 2 != 0) return std::nullopt;
        std::vector<uint8_t> bytes;
        bytes.reserve(body.size() / 2);
        for (std::size_t i = 0; i < body.size(); i += 2) {
            uint8_t v = 0;
            for (const char c : {body[i], body[i + 1]}) {
                v = static_cast<uint8_t>(v << 4);
                if (c >= '0' && c <= '9') v |= static_cast<uint8_t>(c - '0');
                else if (c >= 'a' && c <= 'f') v |= static_cast<uint8_t>(c - 'a' + 10);
                else if (c >= 'A' && c <= 'F') v |= static_cast<uint8_t>(c - 'A' + 10);
                else return std::nullopt;
            }
            bytes.push_back(v);
        }
        return bytes;
    }
    return std::nullopt;
}

std::string fail(int line, const std::string& what) {
    return "line " + std::to_string(line) + ": " + what;
}

}  // namespace

ScenarioParseResult parse_scenario(const std::string& text) {
    ScenarioConfig cfg;
    enum class Section { Params, Workload, Faults } section = Section::Params;
    std::istringstream is(text);
    std::string raw;
    int lineno = 0;

    while (std::getline(is, raw)) {
        ++lineno;
        std::string line = trim(raw);
        if (const auto hash = line.find('#'); hash != std::string::npos)
            line = trim(line.substr(0, hash));
        if (line.empty()) continue;

        if (line.front() == '[') {
            if (line == "[workload]") section = Section::Workload;
            else if (line == "[faults]") section = Section::Faults;
            else return {std::nullopt, fail(lineno, "unknown section " + line)};
            continue;
        }

        if (section == Section::Params) {
            const auto eq = line.find('=');
            if (eq == std::string::npos)
                return {std::nullopt, fail(lineno, "expected key = value")};
            const std::string key = trim(line.substr(0, eq));
            const std::string value = trim(line.substr(eq + 1));
            uint64_t v = 0;
            if (!parse_u64(value, v))
                return {std::nullopt, fail(lineno, "bad integer for " + key)};
            if (key == "seed") cfg.seed = v;
            else if (key == "fragment_size") {
                if (v == 0) return {std::nullopt, fail(lineno, "fragment_size must be positive")};
                cfg.fragment_size = v;
            } else if (key == "queue_capacity") {
                if (v == 0) return {std::nullopt, fail(lineno, "queue_capacity must be positive")};
                cfg.queue_capacity = v;
            } else if (key == "latency_l2r") {
                if (v == 0) return {std::nullopt, fail(lineno, "latency_l2r must be positive")};
                cfg.latency_l2r = v;
            } else if (key == "latency_r2l") {
                if (v == 0) return {std::nullopt, fail(lineno, "latency_r2l must be positive")};
                cfg.latency_r2l = v;
            } else if (key == "watchdog_timeout") cfg.watchdog_timeout = v;
            else if (key == "watchdog_poll_interval") {
                if (v == 0) return {std::nullopt, fail(lineno, "watchdog_poll_interval must be positive")};
                cfg.watchdog_poll_interval = v;
            } else if (key == "retry_limit") cfg.retry_limit = v;
            else if (key == "max_events") {
                if (v == 0) return {std::nullopt, fail(lineno, "max_events must be positive")};
                cfg.max_events = v;
            } else return {std::nullopt, fail(lineno, "unknown key " + key)};
            continue;
        }

        const std::vector<std::string> toks = split_ws(line);
        if (section == Section::Workload) {
            if (toks.size() != 3)
                return {std::nullopt, fail(lineno, "expected: time direction payload")};
            WorkloadItem item;
            if (!parse_u64(toks[0], item.time))
                return {std::nullopt, fail(lineno, "bad inject time")};
            if (toks[1] == "L2R") item.direction = Direction::LeftToRight;
            else if (toks[1] == "R2L") item.direction = Direction::RightToLeft;
            else return {std::nullopt, fail(lineno, "direction must be L2R or R2L")};
            const auto payload = parse_payload(toks[2]);
            if (!payload)
                return {std::nullopt, fail(lineno, "payload must be text:... or hex:...")};
            item.payload = *payload;
            cfg.workload.push_back(std::move(item));
            continue;
        }

        // [faults]
        if (toks.size() < 2)
            return {std::nullopt, fail(lineno, "expected: time kind [args]")};
        FaultEvent f;
        if (!parse_u64(toks[0], f.time))
            return {std::nullopt, fail(lineno, "bad fault time")};
        const std::string& kind = toks[1];
        if (kind == "stall" && toks.size() == 2) f.kind = FaultKind::Stall;
        else if (kind == "unstall" && toks.size() == 2) f.kind = FaultKind::Unstall;
        else if (kind == "kill" && toks.size() == 2) f.kind = FaultKind::Kill;
        else if (kind == "bitflip" && toks.size() == 3) {
            f.kind = FaultKind::BitFlip;
            uint64_t bit = 0;
            if (!parse_u64(toks[2], bit))
                return {std::nullopt, fail(lineno, "bad bit index")};
            f.bit_index = static_cast<uint32_t>(bit);
        } else if (kind == "wiretap" && toks.size() == 3) {
            f.kind = FaultKind::WiretapInsert;
            if (toks[2] == "passthrough") f.mode = WiretapMode::PassThrough;
            else if (toks[2] == "masquerade") f.mode = WiretapMode::Masquerade;
            else return {std::nullopt, fail(lineno, "wiretap mode must be passthrough or masquerade")};
        } else if (kind == "pressure" && toks.size() == 4) {
            f.kind = FaultKind::ReceiverPressure;
            if (!parse_prob(toks[2], f.probability))
                return {std::nullopt, fail(lineno, "bad probability")};
            if (!parse_u64(toks[3], f.seed))
                return {std::nullopt, fail(lineno, "bad pressure seed")};
        } else {
            return {std::nullopt, fail(lineno, "unknown fault: " + line)};
        }
        cfg.faults.push_back(f);
    }
    return {cfg, {}};
}

std::string render_scenario(const ScenarioConfig& cfg) {
    std::ostringstream os;
    os << "seed = " << cfg.seed << "\n";
    os << "fragment_size = " << cfg.fragment_size << "\n";
    os << "queue_capacity = " << cfg.queue_capacity << "\n";
    os << "latency_l2r = " << cfg.latency_l2r << "\n";
    os << "latency_r2l = " << cfg.latency_r2l << "\n";
    os << "watchdog_timeout = " << cfg.watchdog_timeout << "\n";
    os << "watchdog_poll_interval = " << cfg.watchdog_poll_interval << "\n";
    os << "retry_limit = " << cfg.retry_limit << "\n";
    os << "max_events = " << cfg.max_events << "\n";
    if (!cfg.workload.empty()) {
        os << "\n[workload]\n";
        for (const auto& w : cfg.workload) {
            os << w.time << " "
               << (w.direction == Direction::LeftToRight ? "L2R" : "R2L")
               << " hex:" << hex_encode(w.payload) << "\n";
        }
    }
    if (!cfg.faults.empty()) {
        os << "\n[faults]\n";
        for (const auto& f : cfg.faults) {
            os << f.time << " ";
            switch (f.kind) {
                case FaultKind::Stall: os << "stall"; break;
                case FaultKind::Unstall: os << "unstall"; break;
                case FaultKind::Kill: os << "kill"; break;
                case FaultKind::BitFlip: os << "bitflip " << f.bit_index; break;
                case FaultKind::WiretapInsert:
                    os << "wiretap "
                       << (f.mode == WiretapMode::PassThrough ? "passthrough"
                                                              : "masquerade");
                    break;
                case FaultKind::ReceiverPressure: {
                    char buf[64];
                    std::snprintf(buf, sizeof(buf), "%.17g", f.probability);
                    os << "pressure " << buf << " " << f.seed;
                    break;
                }
            }
            os << "\n";
        }
    }
    return os.str();
}

}  // namespace entlink
