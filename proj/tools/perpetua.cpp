// perpetua: simulation laboratory for random discounted sums and weighted
// branching walks. Subcommands: run, verify, report, list-laws.

#include <CLI11.hpp>

#include "perpetua/kernels.hpp"
#include "perpetua/lawlib.hpp"
#include "perpetua/report.hpp"
#include "perpetua/scenario.hpp"

#include <chrono>
#include <fstream>
#include <iostream>

using namespace perpetua;

int main(int argc, char** argv) {
    CLI::App app{"perpetua: perpetuity and branching-walk simulation lab"};
    app.require_subcommand(1);

    std::string kernels;
    app.add_option("--kernels", kernels,
                   "kernel backend: auto, scalar, avx2, neon");

    // ---- run ------------------------------------------------------------
    auto* run = app.add_subcommand("run", "run one experiment scenario");
    std::string scenario_file, law, bspec, experiment, out_path;
    uint64_t seed = 0, reps = 0, nmax = 0;
    double eps = 0, confidence = 0;
    size_t pop_cap = 0;
    uint32_t gen_cap = 0;
    int threads = 0;
    bool timings = false;
    run->add_option("--scenario", scenario_file, "scenario JSON file");
    run->add_option("--law", law, "law spec, e.g. const:m=0.5,q=1");
    run->add_option("--b", bspec, "b spec, e.g. power:alpha=1");
    run->add_option("--experiment", experiment,
                    "perp-moment|perp-ladder|perp-wald|brw-martingale|"
                    "brw-fixpoint|spine-identity|spine-sizebias|ui-check|"
                    "inequality:symm|inequality:tailsup");
    run->add_option("--seed", seed, "master seed");
    run->add_option("--reps", reps, "replicates");
    run->add_option("--eps", eps, "truncation epsilon");
    run->add_option("--nmax", nmax, "step cap per replicate");
    run->add_option("--pop-cap", pop_cap, "population cap");
    run->add_option("--gen-cap", gen_cap, "generation cap");
    run->add_option("--confidence", confidence, "confidence level");
    run->add_option("--threads", threads,
                    "worker threads (default: PERPETUA_THREADS or hardware)");
    run->add_option("--out", out_path, "output JSONL path (default stdout)");
    run->add_flag("--timings", timings,
                  "append per-record elapsed_ms (breaks byte reproducibility)");

    // ---- verify ----------------------------------------------------------
    auto* verify = app.add_subcommand("verify", "run a named check suite");
    std::string suite = "all";
    bool quick = false;
    uint64_t vseed = 7;
    int vthreads = 0;
    verify->add_option("suite", suite,
                       "rvkit|perpetuity|ladder|brw|spine|inequalities|all");
    verify->add_flag("--quick", quick, "reduced replicate counts");
    verify->add_option("--seed", vseed, "master seed");
    verify->add_option("--threads", vthreads, "worker threads");

    // ---- report ----------------------------------------------------------
    auto* report = app.add_subcommand("report", "render results to CSV/SVG");
    std::string results_path, report_dir = "report", format = "both";
    report->add_option("results", results_path, "JSONL results file")
        ->required();
    report->add_option("--out", report_dir, "output directory");
    report->add_option("--format", format, "csv|svg|both");

    // ---- list-laws -------------------------------------------------------
    auto* list = app.add_subcommand("list-laws", "print the law catalogue");

    CLI11_PARSE(app, argc, argv);

    if (!kernels.empty() && !kern::select(kernels)) {
        std::cerr << "unknown or unsupported kernel backend: " << kernels
                  << "\n";
        return 2;
    }

    if (list->parsed()) {
        std::cout << "driver pair laws:\n";
        for (const auto& s : lawlib::mq_law_catalogue())
            std::cout << "  " << s << "\n";
        std::cout << "point process laws:\n";
        for (const auto& s : lawlib::pp_law_catalogue())
            std::cout << "  " << s << "\n";
        std::cout << "b functions: power:alpha=  powerlog:alpha=,k=  "
                     "powerexp:alpha=,beta=,gamma=\n";
        return 0;
    }

    if (verify->parsed()) {
        std::vector<cli::CheckResult> results;
        try {
            results = cli::run_suite(suite, quick, vseed, vthreads);
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << "\n";
            return 2;
        }
        size_t width = 8;
        for (const auto& r : results) width = std::max(width, r.id.size());
        bool all_pass = true;
        for (const auto& r : results) {
            std::cout << r.id << std::string(width - r.id.size() + 2, ' ')
                      << (r.pass ? "pass" : "FAIL") << "  " << r.detail
                      << "\n";
            all_pass = all_pass && r.pass;
        }
        std::cout << (all_pass ? "all checks passed" : "FAILURES present")
                  << " (" << results.size() << " checks)\n";
        return all_pass ? 0 : 1;
    }

    if (report->parsed()) {
        const int rc = cli::report_results(results_path, report_dir, format);
        if (rc != 0) std::cerr << "malformed results file\n";
        return rc;
    }

    // run
    cli::Scenario s;
    try {
        if (!scenario_file.empty())
            s = cli::Scenario::from_json_file(scenario_file);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    if (run->count("--law")) s.law = law;
    if (run->count("--b")) s.bspec = bspec;
    if (run->count("--experiment")) s.experiment = experiment;
    if (run->count("--seed")) s.seed = seed;
    if (run->count("--reps")) s.replicates = reps;
    if (run->count("--eps")) s.policy.eps = eps;
    if (run->count("--nmax")) s.policy.nmax = nmax;
    if (run->count("--pop-cap")) s.policy.pop_cap = pop_cap;
    if (run->count("--gen-cap")) s.policy.gen_cap = gen_cap;
    if (run->count("--confidence")) s.policy.confidence = confidence;
    if (run->count("--threads")) s.threads = threads;
    if (run->count("--out")) s.output = out_path;
    s.timings = timings;
    if (s.law.empty() || s.experiment.empty()) {
        std::cerr << "run needs --law and --experiment (or a scenario file)\n";
        return 2;
    }

    const auto t0 = std::chrono::steady_clock::now();
    auto result = cli::run_scenario(s);
    const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
                             std::chrono::steady_clock::now() - t0)
                             .count();
    if (s.timings)
        for (auto& r : result.records) r["elapsed_ms"] = elapsed;

    if (s.output.empty()) {
        cli::write_jsonl(result.records, std::cout);
    } else {
        std::ofstream os(s.output);
        if (!os) {
            std::cerr << "cannot open output: " << s.output << "\n";
            return 2;
        }
        cli::write_jsonl(result.records, os);
    }
    std::cerr << "experiment " << s.experiment << " finished in " << elapsed
              << " ms, exit " << result.exit_code << "\n";
    return result.exit_code;
}
