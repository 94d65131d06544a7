#pragma once
// Config-driven experiment runner: scenario parsing, experiment dispatch,
// JSONL records, and the named check suites behind `verify`.

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

namespace perpetua::cli {

struct Policy {
    double eps = 1e-12;
    uint64_t nmax = 1000000;
    size_t pop_cap = size_t(1) << 22;
    uint32_t gen_cap = 30;
    double confidence = 0.99;
};

struct Scenario {
    uint64_t seed = 1;
    uint64_t replicates = 100000;
    std::string law;
    std::string bspec = "power:alpha=1";
    std::string experiment;
    Policy policy;
    std::string output;  // empty = stdout
    int threads = 0;     // 0 = PERPETUA_THREADS or hardware
    bool timings = false;

    void apply_json(const nlohmann::json& j);
    static Scenario from_json_file(const std::string& path);
};

inline constexpr const char* kVersion = "perpetua 0.1.0";

// exit codes: 0 all checks pass, 1 failed checks, 2 config error,
// 3 law/experiment incompatibility
struct RunResult {
    int exit_code = 0;
    std::vector<nlohmann::ordered_json> records;
};

RunResult run_scenario(const Scenario& s);

void write_jsonl(const std::vector<nlohmann::ordered_json>& records,
                 std::ostream& os);

struct CheckResult {
    std::string id;
    bool pass = false;
    std::string detail;
};

// suite in {rvkit, perpetuity, ladder, brw, spine, inequalities, all}
std::vector<CheckResult> run_suite(const std::string& suite, bool quick,
                                   uint64_t seed, int threads);

}  // namespace perpetua::cli
