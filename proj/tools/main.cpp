// Scenario runner and reporting front end.
//
//   entlink run <file.scn> [--seed N] [--out PATH] [--quiet]
//   entlink explore [--packets N] [--capacity N] [--no-nack] [--no-restart]
//   entlink trace-diff <a> <b>
//
// `run` exits 0 iff the verdict carries no invariant violations; the event
// log lands next to the scenario (or under $ENTLINK_OUT / --out).

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "entlink/explore.hpp"
#include "entlink/scenario.hpp"
#include "entlink/sim.hpp"

namespace {

std::optional<std::string> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

int cmd_run(const std::string& path, std::optional<uint64_t> seed_override,
            std::string out_path, bool quiet) {
    const auto text = read_file(path);
    if (!text) {
        std::cerr << "error: cannot read " << path << "\n";
        return 2;
    }
    auto parsed = entlink::parse_scenario(*text);
    if (!parsed.config) {
        std::cerr << "error: " << path << ": " << parsed.error << "\n";
        return 2;
    }
    if (seed_override) parsed.config->seed = *seed_override;

    const auto result = entlink::run_scenario(*parsed.config);

    if (out_path.empty()) {
        std::filesystem::path base(path);
        base.replace_extension(".log");
        if (const char* dir = std::getenv("ENTLINK_OUT"))
            base = std::filesystem::path(dir) / base.filename();
        out_path = base.string();
    }
    std::ofstream out(out_path, std::ios::binary);
    if (!out) {
        std::cerr << "error: cannot write " << out_path << "\n";
        return 2;
    }
    out << result.log.to_text();
    out.close();

    if (!quiet) {
        std::cout << "scenario: " << path << " seed=" << parsed.config->seed
                  << "\n"
                  << "log: " << out_path << "\n"
                  << entlink::summarize(result.verdict);
    }
    return result.verdict.passed() ? 0 : 1;
}

int cmd_explore(int packets, int capacity, bool nack, bool restart,
                std::size_t max_states) {
    entlink::ExploreConfig cfg;
    cfg.packets = packets;
    cfg.capacity = static_cast<std::size_t>(capacity);
    cfg.nack_branch = nack;
    cfg.restart_branch = restart;
    cfg.max_states = max_states;
    const auto report = entlink::explore_exhaustive(cfg);
    std::cout << "packets: " << packets << "  capacity: " << capacity
              << "  nack: " << (nack ? "on" : "off")
              << "  restart: " << (restart ? "on" : "off") << "\n"
              << "reachable states: " << report.states
              << "  transitions: " << report.transitions << "\n";
    if (report.overflow) {
        std::cerr << "error: state space overflow (>" << max_states << ")\n";
        return 2;
    }
    for (const auto& v : report.violations)
        std::cout << "violation: " << v << "\n";
    std::cout << (report.passed() ? "all invariants hold\n"
                                  : "INVARIANT VIOLATIONS FOUND\n");
    return report.passed() ? 0 : 1;
}

int cmd_trace_diff(const std::string& a, const std::string& b) {
    const auto ta = read_file(a);
    const auto tb = read_file(b);
    if (!ta || !tb) {
        std::cerr << "error: cannot read " << (!ta ? a : b) << "\n";
        return 2;
    }
    if (*ta == *tb) {
        std::cout << "identical\n";
        return 0;
    }
    // Report the first differing line for the humans.
    std::istringstream sa(*ta), sb(*tb);
    std::string la, lb;
    std::size_t line = 0;
    while (true) {
        ++line;
        const bool ga = static_cast<bool>(std::getline(sa, la));
        const bool gb = static_cast<bool>(std::getline(sb, lb));
        if (!ga && !gb) break;
        if (!ga || !gb || la != lb) {
            std::cout << "differ at line " << line << "\n";
            if (ga) std::cout << "a: " << la << "\n";
            if (gb) std::cout << "b: " << lb << "\n";
            break;
        }
    }
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"entangled-link scenario runner"};
    app.require_subcommand(1);

    std::string scn_path;
    std::optional<uint64_t> seed;
    std::string out_path;
    bool quiet = false;
    auto* run = app.add_subcommand("run", "run a scenario file");
    run->add_option("file", scn_path, "scenario file")->required();
    run->add_option("--seed", seed, "override the scenario seed");
    run->add_option("--out", out_path, "event log path");
    run->add_flag("--quiet", quiet, "suppress the summary");

    int packets = 1;
    int capacity = 1;
    bool no_nack = false;
    bool no_restart = false;
    std::size_t max_states = 2'000'000;
    auto* explore = app.add_subcommand("explore", "exhaustive state check");
    explore->add_option("--packets", packets, "workload size (<=3)")
        ->check(CLI::Range(0, 3));
    explore->add_option("--capacity", capacity, "queue capacity (<=2)")
        ->check(CLI::Range(1, 2));
    explore->add_flag("--no-nack", no_nack, "skip the refusal branch");
    explore->add_flag("--no-restart", no_restart, "skip the restart branch");
    explore->add_option("--max-states", max_states, "state budget");

    std::string diff_a, diff_b;
    auto* diff = app.add_subcommand("trace-diff", "bytewise log comparison");
    diff->add_option("a", diff_a, "first log")->required();
    diff->add_option("b", diff_b, "second log")->required();

    CLI11_PARSE(app, argc, argv);

    if (run->parsed()) return cmd_run(scn_path, seed, out_path, quiet);
    if (explore->parsed())
        return cmd_explore(packets, capacity, !no_nack, !no_restart, max_states);
    return cmd_trace_diff(diff_a, diff_b);
}
