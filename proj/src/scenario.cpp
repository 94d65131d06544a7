#include "perpetua/scenario.hpp"

#include "perpetua/brwsim.hpp"
#include "perpetua/estimate.hpp"
#include "perpetua/lawlib.hpp"
#include "perpetua/mathutil.hpp"
#include "perpetua/parallel.hpp"
#include "perpetua/perpsim.hpp"
#include "perpetua/rvkit.hpp"
#include "perpetua/spinesim.hpp"
#include "perpetua/stats.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>

namespace perpetua::cli {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

json number_or_null(double v) {
    if (std::isfinite(v)) return v;
    return nullptr;
}

ordered_json base_record(const Scenario& s, const std::string& tag) {
    ordered_json r;
    r["experiment"] = s.experiment;
    r["law"] = s.law;
    r["seed"] = s.seed;
    r["reps"] = s.replicates;
    r["tag"] = tag;
    return r;
}

ordered_json curve_json(const std::vector<stats::CurvePoint>& curve) {
    ordered_json arr = ordered_json::array();
    for (const auto& p : curve)
        arr.push_back({{"t", p.t},
                       {"estimate", p.estimate},
                       {"lo", p.lo},
                       {"hi", p.hi}});
    return arr;
}

void finish_record(ordered_json& r, uint64_t n, double estimate, double lo,
                   double hi, bool pass) {
    r["n"] = n;
    r["estimate"] = number_or_null(estimate);
    r["ci"] = {number_or_null(lo), number_or_null(hi)};
    r["pass"] = pass;
    r["version"] = kVersion;
}

std::vector<double> log_grid(double lo, double hi, size_t points) {
    std::vector<double> g(points);
    for (size_t i = 0; i < points; ++i)
        g[i] = lo * std::pow(hi / lo, static_cast<double>(i) /
                                          static_cast<double>(points - 1));
    return g;
}

brwsim::BrwCaps caps_of(const Policy& p) {
    return brwsim::BrwCaps{p.pop_cap, p.gen_cap};
}

bool is_pp_experiment(const std::string& e) {
    return e == "brw-martingale" || e == "brw-fixpoint" ||
           e == "spine-identity" || e == "spine-sizebias" || e == "ui-check" ||
           e == "inequality:tailsup";
}

bool is_mq_experiment(const std::string& e) {
    return e == "perp-moment" || e == "perp-ladder" || e == "perp-wald" ||
           e == "inequality:symm";
}

// ---------------------------------------------------------------------------
// experiment bodies

void run_perp_moment(const Scenario& s, const lawlib::MQLaw& law,
                     RunResult& out) {
    perpsim::ZinfPolicy pol{s.policy.eps, s.policy.nmax, 16};
    const auto key = rng::make_key(s.seed);
    const auto res = perpsim::mc_zinf_mean(law, pol, s.replicates, key,
                                           s.policy.confidence, s.threads);
    ordered_json r = base_record(s, "zinf_mean");
    bool pass = res.nonconvergent == 0;
    double expected = std::numeric_limits<double>::quiet_NaN();
    if (law.analytics && law.analytics->e_m && law.analytics->e_q &&
        std::fabs(*law.analytics->e_m) < 1.0) {
        expected = *law.analytics->e_q / (1.0 - *law.analytics->e_m);
        const double z = mathutil::z_value(s.policy.confidence);
        if (res.report.n > 0)
            pass = pass && std::fabs(res.report.estimate - expected) <=
                               std::max(z * res.report.std_error, 1e-9);
        r["expected"] = expected;
    }
    r["nonconvergent"] = res.nonconvergent;
    finish_record(r, res.report.n, res.report.estimate, res.report.ci_lo,
                  res.report.ci_hi, pass && res.report.n > 0);
    out.records.push_back(std::move(r));
}

void run_perp_ladder(const Scenario& s, const lawlib::MQLaw& law,
                     RunResult& out) {
    const auto a = lawlib::AEvaluator::from_law(law);
    const auto key = rng::make_key(s.seed);
    for (const double x : {0.5, 0.1, 0.01}) {
        const auto est = perpsim::estimate_sigma_x_mean(
            law, x, s.replicates, rng::fold_key(key, static_cast<uint64_t>(1.0 / x)),
            s.policy.confidence, s.threads);
        const double bound = 2.0 * a.J(std::fabs(std::log(x)));
        ordered_json r = base_record(s, "sigma_x=" + std::to_string(x));
        r["bound"] = bound;
        finish_record(r, est.n, est.estimate, est.ci_lo, est.ci_hi,
                      est.ci_hi <= bound);
        out.records.push_back(std::move(r));
    }
}

void run_perp_wald(const Scenario& s, const lawlib::MQLaw& law,
                   RunResult& out) {
    const auto a = lawlib::AEvaluator::from_law(law);
    const auto key = rng::make_key(s.seed);
    const double eta = perpsim::pick_eta(law, rng::fold_key(key, 7));
    for (const double x : {1.0, 2.0, 4.0}) {
        const auto rep = perpsim::wald_check(
            law, a, eta, x, s.replicates,
            rng::fold_key(key, 100 + static_cast<uint64_t>(x)), s.threads);
        ordered_json r = base_record(s, "wald_x=" + std::to_string(x));
        r["eta"] = rep.eta;
        r["v_hat"] = rep.v_hat;
        r["s_hat"] = rep.s_hat;
        r["a_of_x"] = rep.a_of_x;
        r["alpha_hat"] = rep.alpha_hat;
        const bool pass = rep.residual <= 3.0 * std::max(rep.residual_se, 0.0) +
                                              1e-12;
        finish_record(r, rep.reps, rep.residual, 0.0,
                      3.0 * rep.residual_se, pass);
        out.records.push_back(std::move(r));
    }
}

void run_brw_martingale(const Scenario& s, const lawlib::PointProcessLaw& pp,
                        RunResult& out) {
    const uint32_t nmax = std::min<uint32_t>(10, s.policy.gen_cap);
    const auto key = rng::make_key(s.seed);
    const auto caps = caps_of(s.policy);
    const size_t nblocks =
        (s.replicates + par::kDefaultBlock - 1) / par::kDefaultBlock;
    std::vector<std::vector<Moments>> blocks(nblocks,
                                             std::vector<Moments>(nmax + 1));
    par::parallel_blocks(
        s.replicates, par::kDefaultBlock, s.threads,
        [&](size_t bi, uint64_t b, uint64_t e) {
            std::vector<Moments> acc(nmax + 1);
            for (uint64_t i = b; i < e; ++i) {
                const auto t =
                    brwsim::martingale_trajectory(pp, nmax, key, i, caps);
                for (uint32_t n = 0; n <= nmax && n < t.w.size(); ++n)
                    acc[n].add(t.w[n]);
            }
            blocks[bi] = std::move(acc);
        });
    for (uint32_t n = 1; n <= nmax; ++n) {
        Moments all;
        for (size_t bi = 0; bi < nblocks; ++bi) all.merge(blocks[bi][n]);
        const auto est =
            make_report(all, s.policy.confidence, s.seed, pp.id, "w_mean");
        ordered_json r = base_record(s, "w_mean_n=" + std::to_string(n));
        r["expected"] = 1.0;
        const bool pass =
            std::fabs(est.estimate - 1.0) <= 3.0 * std::max(est.std_error, 1e-15);
        finish_record(r, est.n, est.estimate, est.ci_lo, est.ci_hi, pass);
        out.records.push_back(std::move(r));
    }
}

void run_brw_fixpoint(const Scenario& s, const lawlib::PointProcessLaw& pp,
                      RunResult& out) {
    const auto key = rng::make_key(s.seed);
    const auto rep = brwsim::check_fixpoint(pp, 2, 2, s.replicates, key,
                                            caps_of(s.policy), 0.01, s.threads);
    ordered_json r = base_record(s, "fixpoint_n2_m2");
    r["ks_critical"] = rep.ks_critical;
    finish_record(r, rep.n_samples, rep.ks_distance, 0.0, rep.ks_critical,
                  rep.pass);
    out.records.push_back(std::move(r));
}

void run_spine_identity(const Scenario& s, const lawlib::PointProcessLaw& pp,
                        RunResult& out) {
    const uint32_t n = std::min<uint32_t>(8, s.policy.gen_cap);
    const auto key = rng::make_key(s.seed);
    const auto caps = caps_of(s.policy);
    const size_t nblocks =
        (s.replicates + par::kDefaultBlock - 1) / par::kDefaultBlock;
    struct BlockMax {
        double decomp = 0, closed = 0, paper = 0;
        Moments paper_gap;
    };
    std::vector<BlockMax> blocks(nblocks);
    par::parallel_blocks(
        s.replicates, par::kDefaultBlock, s.threads,
        [&](size_t bi, uint64_t b, uint64_t e) {
            BlockMax bm;
            for (uint64_t i = b; i < e; ++i) {
                const auto sp = spinesim::simulate_what(pp, n, key, i, caps);
                const auto res = spinesim::verify_spine_identity(sp);
                const double scale = 1.0 + std::fabs(res.what);
                bm.decomp = std::max(bm.decomp, res.decomposition / scale);
                bm.closed = std::max(bm.closed, res.closed_form / scale);
                bm.paper = std::max(bm.paper, res.paper_form / scale);
                bm.paper_gap.add(res.paper_form);
            }
            blocks[bi] = bm;
        });
    BlockMax all;
    for (const auto& bm : blocks) {
        all.decomp = std::max(all.decomp, bm.decomp);
        all.closed = std::max(all.closed, bm.closed);
        all.paper = std::max(all.paper, bm.paper);
        all.paper_gap.merge(bm.paper_gap);
    }
    ordered_json r = base_record(s, "spine_identity_n=" + std::to_string(n));
    r["max_resid_decomposition"] = all.decomp;
    r["max_resid_closed_form"] = all.closed;
    r["mean_paper_form_gap"] = all.paper_gap.mean;
    const bool pass = all.decomp <= 1e-10 && all.closed <= 1e-10;
    finish_record(r, s.replicates, all.closed, 0.0, 1e-10, pass);
    out.records.push_back(std::move(r));
}

void run_spine_sizebias(const Scenario& s, const lawlib::PointProcessLaw& pp,
                        RunResult& out) {
    const auto key = rng::make_key(s.seed);
    const auto caps = caps_of(s.policy);
    const auto identity = [](std::span<const double> w) { return w.back(); };
    const auto log1p_last = [](std::span<const double> w) {
        return std::log1p(w.back());
    };
    for (const uint32_t n : {1u, 2u}) {
        for (int hi = 0; hi < 2; ++hi) {
            const auto rep = spinesim::size_biasing_check(
                pp, n, hi == 0 ? identity : log1p_last, s.replicates,
                rng::fold_key(key, 10 * n + hi), caps, s.policy.confidence,
                s.threads);
            ordered_json r = base_record(
                s, std::string("size_bias_n=") + std::to_string(n) +
                       (hi == 0 ? ",h=id" : ",h=log1p"));
            r["lhs"] = rep.lhs.estimate;
            r["rhs"] = rep.rhs.estimate;
            r["combined_se"] = rep.combined_se;
            finish_record(r, rep.lhs.n,
                          rep.lhs.estimate - rep.rhs.estimate,
                          -3.0 * rep.combined_se, 3.0 * rep.combined_se,
                          rep.pass);
            out.records.push_back(std::move(r));
        }
    }
}

void run_ui_check(const Scenario& s, const lawlib::PointProcessLaw& pp,
                  RunResult& out) {
    const auto key = rng::make_key(s.seed);
    const auto sig = stats::uniform_integrability_check(
        pp, s.replicates, key, caps_of(s.policy),
        std::min<uint32_t>(12, s.policy.gen_cap), s.threads);
    ordered_json r = base_record(s, "ui_signals");
    r["pi_evidence"] = sig.pi_evidence;
    r["j_moment_verdict"] = stats::to_string(sig.j_moment.verdict);
    r["capped"] = sig.capped_trajectories;
    r["expect_ui"] = sig.expect_ui;
    r["summary"] = sig.summary;
    // informational: pass means the three signals agree with the observed mean
    const bool agree = sig.expect_ui == sig.w_mean_near_one;
    finish_record(r, sig.w_mean_at_horizon.n, sig.w_mean_at_horizon.estimate,
                  sig.w_mean_at_horizon.ci_lo, sig.w_mean_at_horizon.ci_hi,
                  agree);
    out.records.push_back(std::move(r));
}

void run_inequality_symm(const Scenario& s, const lawlib::MQLaw& law,
                         RunResult& out) {
    const auto key = rng::make_key(s.seed);
    const perpsim::PairSymmetrizer sym(law);
    constexpr size_t kPairs = 32;
    std::vector<double> lhs(s.replicates), rhs(s.replicates);
    par::parallel_blocks(
        s.replicates, par::kDefaultBlock, s.threads,
        [&](size_t, uint64_t b, uint64_t e) {
            for (uint64_t i = b; i < e; ++i) {
                auto rs = rng::make_stream(key, rng::Domain::symm, i);
                double prefix = 1.0, sup = 0.0;
                for (size_t k = 0; k < kPairs; ++k) {
                    const auto p = sym.sample(rs);
                    sup = std::max(sup, std::fabs(prefix * p.q2bar));
                    prefix *= p.pi2;
                }
                lhs[i] = sup;
                auto rz = rng::make_stream(key, rng::Domain::zinf, i, 9);
                perpsim::ZinfPolicy pol{s.policy.eps, s.policy.nmax, 16};
                rhs[i] = std::fabs(perpsim::simulate_zinf(law, pol, rz).value);
            }
        });
    const auto grid = log_grid(0.25, 3.0, 8);
    std::vector<double> half_grid;
    for (const double t : grid) half_grid.push_back(t / 2.0);
    const auto lhs_curve = stats::tail_curve(lhs, grid, s.policy.confidence);
    const auto rhs_curve =
        stats::tail_curve(rhs, half_grid, s.policy.confidence);
    const auto rep = stats::inequality_check_ci(lhs_curve, rhs_curve, 4.0);
    ordered_json r = base_record(s, "symm_constant4");
    ordered_json pts = ordered_json::array();
    for (const auto& p : rep.points)
        pts.push_back({{"t", p.t}, {"lhs_up", p.lhs_up}, {"rhs_lo", p.rhs_lo},
                       {"pass", p.pass}});
    r["points"] = std::move(pts);
    r["curve_lhs"] = curve_json(lhs_curve);
    r["curve_rhs"] = curve_json(rhs_curve);
    finish_record(r, s.replicates, rep.best_constant, 0.0, 4.0, rep.pass);
    out.records.push_back(std::move(r));
}

void run_inequality_tailsup(const Scenario& s,
                            const lawlib::PointProcessLaw& pp,
                            RunResult& out) {
    const auto key = rng::make_key(s.seed);
    const auto caps = caps_of(s.policy);
    const uint32_t horizon = std::min<uint32_t>(16, s.policy.gen_cap);
    std::vector<double> w(s.replicates), wstar(s.replicates);
    par::parallel_blocks(
        s.replicates, par::kDefaultBlock, s.threads,
        [&](size_t, uint64_t b, uint64_t e) {
            for (uint64_t i = b; i < e; ++i) {
                const auto t =
                    brwsim::martingale_trajectory(pp, horizon, key, i, caps);
                w[i] = t.w.back();
                wstar[i] = *std::max_element(t.w.begin(), t.w.end());
            }
        });
    const double a = 0.5;
    const auto grid = log_grid(1.0, 8.0, 8);
    std::vector<double> a_grid;
    for (const double t : grid) a_grid.push_back(a * t);
    const auto num = stats::tail_curve(wstar, grid, s.policy.confidence);
    const auto den = stats::tail_curve(w, a_grid, s.policy.confidence);
    const auto rep = stats::inequality_check_ratio(num, den);
    ordered_json r = base_record(s, "tailsup_a=0.5");
    ordered_json pts = ordered_json::array();
    for (const auto& p : rep.points)
        pts.push_back({{"t", p.t},
                       {"ratio_pt", p.ratio_pt},
                       {"ratio_up", p.ratio_up},
                       {"pass", p.pass}});
    r["points"] = std::move(pts);
    r["rule"] = rep.rule;
    r["curve_wstar"] = curve_json(num);
    r["curve_w"] = curve_json(den);
    finish_record(r, s.replicates, rep.best_constant, 0.0, 32.0, rep.pass);
    out.records.push_back(std::move(r));
}

}  // namespace

void Scenario::apply_json(const json& j) {
    if (j.contains("seed")) seed = j.at("seed").get<uint64_t>();
    if (j.contains("replicates")) replicates = j.at("replicates").get<uint64_t>();
    if (j.contains("law")) law = j.at("law").get<std::string>();
    if (j.contains("b")) bspec = j.at("b").get<std::string>();
    if (j.contains("experiment")) experiment = j.at("experiment").get<std::string>();
    if (j.contains("output")) output = j.at("output").get<std::string>();
    if (j.contains("threads")) threads = j.at("threads").get<int>();
    if (j.contains("policy")) {
        const auto& p = j.at("policy");
        if (p.contains("eps")) policy.eps = p.at("eps").get<double>();
        if (p.contains("nmax")) policy.nmax = p.at("nmax").get<uint64_t>();
        if (p.contains("pop_cap")) policy.pop_cap = p.at("pop_cap").get<size_t>();
        if (p.contains("gen_cap")) policy.gen_cap = p.at("gen_cap").get<uint32_t>();
        if (p.contains("confidence"))
            policy.confidence = p.at("confidence").get<double>();
    }
}

Scenario Scenario::from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open scenario file: " + path);
    json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw ConfigError("malformed scenario file: " + std::string(e.what()));
    }
    Scenario s;
    s.apply_json(j);
    return s;
}

RunResult run_scenario(const Scenario& s) {
    RunResult out;
    try {
        if (s.replicates == 0 || s.policy.eps <= 0 || s.policy.nmax == 0 ||
            s.policy.gen_cap == 0 || s.policy.pop_cap == 0 ||
            !(s.policy.confidence > 0 && s.policy.confidence < 1))
            throw ConfigError("scenario has non-positive numeric fields");
        if (is_mq_experiment(s.experiment)) {
            const auto law = lawlib::parse_mq_law(s.law);
            if (s.experiment == "perp-moment") {
                run_perp_moment(s, law, out);
            } else if (s.experiment == "perp-ladder") {
                const auto regime = lawlib::classify_regime(law);
                if (regime.regime != lawlib::RegimeCase::C1)
                    throw IncompatibleExperiment(
                        "perp-ladder needs a C1 law (|M| <= 1 a.s.)");
                run_perp_ladder(s, law, out);
            } else if (s.experiment == "perp-wald") {
                const auto regime = lawlib::classify_regime(law);
                if (regime.regime != lawlib::RegimeCase::C1)
                    throw IncompatibleExperiment("perp-wald needs a C1 law");
                run_perp_wald(s, law, out);
            } else {
                run_inequality_symm(s, law, out);
            }
        } else if (is_pp_experiment(s.experiment)) {
            const auto pp = lawlib::parse_pp_law(s.law);
            if ((s.experiment == "spine-identity" ||
                 s.experiment == "spine-sizebias") &&
                !pp.enumerable())
                throw IncompatibleExperiment(
                    "spine experiments need an enumerable point process");
            if (s.experiment == "brw-martingale")
                run_brw_martingale(s, pp, out);
            else if (s.experiment == "brw-fixpoint")
                run_brw_fixpoint(s, pp, out);
            else if (s.experiment == "spine-identity")
                run_spine_identity(s, pp, out);
            else if (s.experiment == "spine-sizebias")
                run_spine_sizebias(s, pp, out);
            else if (s.experiment == "ui-check")
                run_ui_check(s, pp, out);
            else
                run_inequality_tailsup(s, pp, out);
        } else {
            throw ConfigError("unknown experiment: " + s.experiment);
        }
    } catch (const IncompatibleExperiment& e) {
        out.exit_code = 3;
        ordered_json r = base_record(s, "error");
        r["error"] = e.what();
        r["version"] = kVersion;
        out.records.push_back(std::move(r));
        return out;
    } catch (const ConfigError& e) {
        out.exit_code = 2;
        ordered_json r = base_record(s, "error");
        r["error"] = e.what();
        r["version"] = kVersion;
        out.records.push_back(std::move(r));
        return out;
    }
    for (const auto& r : out.records)
        if (r.contains("pass") && !r.at("pass").get<bool>()) out.exit_code = 1;
    return out;
}

void write_jsonl(const std::vector<ordered_json>& records, std::ostream& os) {
    for (const auto& r : records) os << r.dump() << "\n";
}

// ---------------------------------------------------------------------------
// verify suites

namespace {

using Check = std::function<CheckResult()>;

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

void add_rvkit_checks(std::vector<std::pair<std::string, Check>>& checks,
                      bool quick) {
    checks.emplace_back("surrogate-certification", [quick]() -> CheckResult {
        const auto& grid = quick ? rvkit::Grid::geometric(1e-3, 1e4, 16)
                                 : rvkit::default_validation_grid();
        std::string detail;
        bool pass = true;
        for (const char* spec :
             {"power:alpha=1", "power:alpha=2", "powerlog:alpha=1,k=1",
              "powerexp:alpha=0.5,beta=0.5,gamma=0.5"}) {
            try {
                const double c =
                    rvkit::select_c(rvkit::BFunctionSpec::parse(spec), grid);
                detail += std::string(spec) + " c=" + fmt(c) + "; ";
            } catch (const Error& e) {
                pass = false;
                detail += std::string(spec) + " FAILED; ";
            }
        }
        return {"surrogate-certification", pass, detail};
    });
    checks.emplace_back("phi-subadditive", []() -> CheckResult {
        const auto b = rvkit::BFunctionSpec::parse("power:alpha=1");
        const double c = rvkit::select_c(b);
        const auto g = rvkit::make_surrogate(b, c, rvkit::SurrogateKind::g);
        const rvkit::PhiFunction phi(
            g, [](double t) { return std::min(t, std::log(2.0)); });
        const auto grid = rvkit::Grid::geometric(1e-2, 1e5, 8);
        double worst = 0;
        for (const double x : grid.pts)
            for (const double y : grid.pts)
                worst = std::max(worst, phi(x + y) - phi(x) - phi(y));
        return {"phi-subadditive", worst <= 1e-9, "worst gap=" + fmt(worst)};
    });
    checks.emplace_back("phi-star-homogeneity", []() -> CheckResult {
        const auto b = rvkit::BFunctionSpec::parse("power:alpha=1");
        const double c = rvkit::select_c(b);
        const auto g = rvkit::make_surrogate(b, c, rvkit::SurrogateKind::g);
        const rvkit::PhiFunction phi(
            g, [](double t) { return std::min(t, std::log(2.0)); });
        const auto grid = rvkit::Grid::geometric(1e-2, 1e5, 8);
        double worst = 0;
        for (const double x : grid.pts)
            for (double al = 0.1; al < 0.95; al += 0.1)
                worst = std::max(worst, al * phi(x) - phi(al * x));
        return {"phi-star-homogeneity", worst <= 1e-9,
                "worst gap=" + fmt(worst)};
    });
    checks.emplace_back("slow-variation-tail", []() -> CheckResult {
        const auto b = rvkit::BFunctionSpec::parse("power:alpha=1");
        const double c = rvkit::select_c(b);
        const auto f = rvkit::make_surrogate(b, c, rvkit::SurrogateKind::f);
        const auto rep = rvkit::check_regular_variation(
            [&f](double x) { return f(x); }, 0.0, 2.0,
            rvkit::tail_certification_grid());
        const auto b2 = rvkit::BFunctionSpec::parse("power:alpha=2");
        const auto rep2 = rvkit::check_regular_variation(
            [&b2](double x) { return b2.eval(x); }, 2.0, 3.0,
            rvkit::tail_certification_grid(), 1e-9);
        return {"slow-variation-tail", rep.pass && rep2.pass,
                "f dev=" + fmt(rep.worst_tail_deviation) +
                    ", b dev=" + fmt(rep2.worst_tail_deviation)};
    });
    checks.emplace_back("b-asymptotic-to-f", []() -> CheckResult {
        const auto b = rvkit::BFunctionSpec::parse("power:alpha=1");
        const double c = rvkit::select_c(b);
        const auto f = rvkit::make_surrogate(b, c, rvkit::SurrogateKind::f);
        // convergence is at rate b(log c)/b(log x), so probe far out
        const double x = 1e26;
        const double ratio = b.eval(std::log(x)) / f(x);
        return {"b-asymptotic-to-f", std::fabs(ratio - 1.0) < 0.05,
                "ratio at 1e26 = " + fmt(ratio)};
    });
}

void add_perpetuity_checks(std::vector<std::pair<std::string, Check>>& checks,
                           uint64_t seed, bool quick, int threads) {
    const uint64_t reps = quick ? 20000 : 100000;
    checks.emplace_back("zinf-geometric-exact", [seed]() -> CheckResult {
        const auto law = lawlib::const_law(0.5, 1.0);
        auto rs = rng::make_stream(rng::make_key(seed), rng::Domain::zinf, 0);
        const auto r = perpsim::simulate_zinf(law, {}, rs);
        const bool pass = std::fabs(r.value - 2.0) <= 1e-9 &&
                          r.status == perpsim::ZinfStatus::truncated;
        return {"zinf-geometric-exact", pass, "value=" + fmt(r.value)};
    });
    checks.emplace_back("zinf-divergent-flag", [seed]() -> CheckResult {
        const auto law = lawlib::const_law(2.0, 1.0);
        auto rs = rng::make_stream(rng::make_key(seed), rng::Domain::zinf, 0);
        const auto r = perpsim::simulate_zinf(law, {1e-12, 1000, 16}, rs);
        return {"zinf-divergent-flag",
                r.status == perpsim::ZinfStatus::nonconvergent,
                "steps=" + std::to_string(r.steps)};
    });
    checks.emplace_back("zinf-mean-uniform", [seed, reps, threads]() -> CheckResult {
        const auto law = lawlib::uniform01_m_law(1.0);
        const auto res = perpsim::mc_zinf_mean(law, {}, reps,
                                               rng::make_key(seed), 0.99,
                                               threads);
        const bool pass = res.report.ci_lo <= 2.0 && 2.0 <= res.report.ci_hi &&
                          res.nonconvergent == 0;
        return {"zinf-mean-uniform", pass,
                "mean=" + fmt(res.report.estimate) + " ci=[" +
                    fmt(res.report.ci_lo) + "," + fmt(res.report.ci_hi) + "]"};
    });
    checks.emplace_back("path-stopped-representation", [seed]() -> CheckResult {
        const auto law = lawlib::twopoint_m_law(2.0, 0.5, 0.125, 1.0);
        double worst = 0;
        for (uint64_t rep = 0; rep < 64; ++rep) {
            auto rs = rng::make_stream(rng::make_key(seed),
                                       rng::Domain::perp_path, rep);
            const auto p = perpsim::simulate_path(law, 24, rs);
            const size_t n = p.length();
            for (size_t m = 0; m <= n; ++m) {
                // z_n = z_m + pi_m * (discounted tail sum from m)
                double tail = 0;
                for (size_t k = m + 1; k <= n; ++k) {
                    double prod = 1.0;
                    for (size_t j = m; j < k - 1; ++j) prod *= p.m[j];
                    tail += prod * p.q[k - 1];
                }
                const double lhs = p.z[n];
                const double rhs = p.z[m] + p.pi(m) * tail;
                worst = std::max(worst, std::fabs(lhs - rhs) /
                                            (1.0 + std::fabs(lhs)));
            }
        }
        return {"path-stopped-representation", worst <= 1e-10,
                "worst rel resid=" + fmt(worst)};
    });
    checks.emplace_back("degenerate-fixed-point", []() -> CheckResult {
        const auto law = lawlib::const_law(0.5, 1.0);
        const auto c = perpsim::degenerate_fixed_point(law);
        return {"degenerate-fixed-point", c.has_value() && *c == 2.0,
                c ? "c=" + fmt(*c) : "none"};
    });
}

void add_ladder_checks(std::vector<std::pair<std::string, Check>>& checks,
                       uint64_t seed, bool quick, int threads) {
    const uint64_t reps = quick ? 20000 : 100000;
    checks.emplace_back("sigma-mean-bound", [seed, reps, threads]() -> CheckResult {
        bool pass = true;
        std::string detail;
        for (const auto& law :
             {lawlib::uniform01_m_law(1.0), lawlib::const_law(0.5, 1.0)}) {
            const auto a = lawlib::AEvaluator::from_law(law);
            for (const double x : {0.5, 0.1, 0.01}) {
                const auto est = perpsim::estimate_sigma_x_mean(
                    law, x, reps,
                    rng::fold_key(rng::make_key(seed),
                                  static_cast<uint64_t>(1000 * x)),
                    0.99, threads);
                const double bound = 2.0 * a.J(std::fabs(std::log(x)));
                if (est.ci_hi > bound) pass = false;
                detail += fmt(est.ci_hi) + "<=" + fmt(bound) + "; ";
            }
        }
        return {"sigma-mean-bound", pass, detail};
    });
    checks.emplace_back("ladder-reconstruction", [seed]() -> CheckResult {
        const auto law = lawlib::twopoint_m_law(2.0, 0.5, 0.125, 1.0);
        double worst = 0;
        for (uint64_t rep = 0; rep < 32; ++rep) {
            auto rs = rng::make_stream(rng::make_key(seed),
                                       rng::Domain::ladder, rep, 7);
            const auto dec = perpsim::ladder_decompose(law, 16, rs);
            double sum = 0, prefix = 1.0;
            for (const auto& blk : dec.blocks) {
                sum += prefix * blk.qhat;
                prefix *= blk.mhat;
            }
            worst = std::max(worst,
                             std::fabs(sum - dec.zstar_completed) /
                                 (1.0 + std::fabs(dec.zstar_completed)));
        }
        return {"ladder-reconstruction", worst <= 1e-10,
                "worst rel resid=" + fmt(worst)};
    });
    checks.emplace_back("wald-exact-geometric", [seed]() -> CheckResult {
        const auto law = lawlib::const_law(0.5, 1.0);
        const auto a = lawlib::AEvaluator::from_law(law);
        const auto rep = perpsim::wald_check(law, a, 2.0, std::log(4.0), 1024,
                                             rng::make_key(seed));
        return {"wald-exact-geometric",
                rep.residual == 0.0 && rep.v_hat == 2.0,
                "residual=" + fmt(rep.residual) + " v=" + fmt(rep.v_hat)};
    });
    checks.emplace_back("wald-mc-uniform", [seed, reps, threads]() -> CheckResult {
        const auto law = lawlib::uniform01_m_law(1.0);
        const auto a = lawlib::AEvaluator::from_law(law);
        const double eta =
            perpsim::pick_eta(law, rng::fold_key(rng::make_key(seed), 3));
        bool pass = true;
        std::string detail;
        for (const double x : {1.0, 2.0, 4.0}) {
            const auto rep = perpsim::wald_check(
                law, a, eta, x, reps,
                rng::fold_key(rng::make_key(seed),
                              200 + static_cast<uint64_t>(x)),
                threads);
            if (rep.residual > 3.0 * rep.residual_se + 1e-12) pass = false;
            detail += "x=" + fmt(x) + " resid=" + fmt(rep.residual) + "; ";
        }
        return {"wald-mc-uniform", pass, detail};
    });
    checks.emplace_back("v-lower-bound", [seed, reps, threads]() -> CheckResult {
        const auto law = lawlib::uniform01_m_law(1.0);
        const auto a = lawlib::AEvaluator::from_law(law);
        const double eta =
            perpsim::pick_eta(law, rng::fold_key(rng::make_key(seed), 4));
        bool pass = true;
        std::string detail;
        for (const double x : {1.0, 2.0, 4.0}) {
            const auto rep = perpsim::wald_check(
                law, a, eta, x, reps,
                rng::fold_key(rng::make_key(seed),
                              300 + static_cast<uint64_t>(x)),
                threads);
            const double lower = rep.alpha_hat * a.J(x) - 3.0 * rep.v_se;
            if (rep.v_hat < lower) pass = false;
            detail += "x=" + fmt(x) + " v=" + fmt(rep.v_hat) +
                      ">=" + fmt(lower) + "; ";
        }
        return {"v-lower-bound", pass, detail};
    });
}

void add_brw_checks(std::vector<std::pair<std::string, Check>>& checks,
                    uint64_t seed, bool quick, int threads) {
    const uint64_t reps = quick ? 2000 : 10000;
    checks.emplace_back("binary-exact-weights", [seed]() -> CheckResult {
        const auto pp = lawlib::deterministic_binary_pp();
        const auto t = brwsim::martingale_trajectory(
            pp, 12, rng::make_key(seed), 0, brwsim::BrwCaps{});
        bool pass = true;
        for (const double w : t.w) pass = pass && (w == 1.0);
        return {"binary-exact-weights", pass,
                "levels=" + std::to_string(t.w.size())};
    });
    checks.emplace_back("martingale-mean-one", [seed, reps, threads]() -> CheckResult {
        const auto pp = lawlib::gw_two_point_pp(1, 2, 0.5, 0.0, 1.0);
        const size_t nblocks =
            (reps + par::kDefaultBlock - 1) / par::kDefaultBlock;
        std::vector<std::vector<Moments>> blocks(nblocks,
                                                 std::vector<Moments>(11));
        par::parallel_blocks(
            reps, par::kDefaultBlock, threads,
            [&](size_t bi, uint64_t b, uint64_t e) {
                std::vector<Moments> acc(11);
                for (uint64_t i = b; i < e; ++i) {
                    const auto t = brwsim::martingale_trajectory(
                        pp, 10, rng::make_key(seed), i, brwsim::BrwCaps{});
                    for (uint32_t n = 0; n <= 10; ++n) acc[n].add(t.w[n]);
                }
                blocks[bi] = std::move(acc);
            });
        bool pass = true;
        double worst = 0;
        for (uint32_t n = 1; n <= 10; ++n) {
            Moments all;
            for (size_t bi = 0; bi < nblocks; ++bi) all.merge(blocks[bi][n]);
            const double dev = std::fabs(all.mean - 1.0);
            worst = std::max(worst, dev / std::max(all.std_error(), 1e-15));
            if (dev > 3.0 * all.std_error()) pass = false;
        }
        return {"martingale-mean-one", pass, "worst z=" + fmt(worst)};
    });
    checks.emplace_back("fixpoint-two-sample", [seed, reps, threads]() -> CheckResult {
        const auto pp = lawlib::gw_two_point_pp(1, 2, 0.5, 0.0, 1.0);
        const auto rep = brwsim::check_fixpoint(pp, 2, 2, reps,
                                                rng::make_key(seed),
                                                brwsim::BrwCaps{}, 0.01,
                                                threads);
        return {"fixpoint-two-sample", rep.pass,
                "ks=" + fmt(rep.ks_distance) + " crit=" + fmt(rep.ks_critical)};
    });
    checks.emplace_back("extinction-probability", [seed, reps, threads]() -> CheckResult {
        // N in {0,3} with p = 1/3: extinction probability is the smallest
        // root of s = 1/3 + (2/3) s^3, i.e. (sqrt(3) - 1) / 2
        const auto pp = lawlib::gw_two_point_pp(0, 3, 1.0 / 3.0, 0.0, 1.0);
        const double target = (std::sqrt(3.0) - 1.0) / 2.0;
        uint64_t extinct = 0;
        std::vector<uint64_t> cnt(
            (reps + par::kDefaultBlock - 1) / par::kDefaultBlock, 0);
        // a small population cap decides survival cheaply: dying out from
        // thousands of individuals has negligible probability
        const brwsim::BrwCaps caps{4096, 30};
        par::parallel_blocks(
            reps, par::kDefaultBlock, threads,
            [&](size_t bi, uint64_t b, uint64_t e) {
                uint64_t c = 0;
                for (uint64_t i = b; i < e; ++i) {
                    const auto t = brwsim::martingale_trajectory(
                        pp, 24, rng::make_key(seed), i, caps);
                    if (t.extinct) ++c;
                }
                cnt[bi] = c;
            });
        for (const auto c : cnt) extinct += c;
        const double phat = static_cast<double>(extinct) /
                            static_cast<double>(reps);
        const double se =
            std::sqrt(target * (1.0 - target) / static_cast<double>(reps));
        // finite horizon underestimates slightly; allow one extra se
        const bool pass = std::fabs(phat - target) <= 4.0 * se;
        return {"extinction-probability", pass,
                "phat=" + fmt(phat) + " target=" + fmt(target)};
    });
}

void add_spine_checks(std::vector<std::pair<std::string, Check>>& checks,
                      uint64_t seed, bool quick, int threads) {
    const uint64_t reps = quick ? 10000 : 100000;
    checks.emplace_back("spine-identity-residuals", [seed]() -> CheckResult {
        bool pass = true;
        double worst = 0;
        for (const auto& pp : {lawlib::gw_two_point_pp(1, 2, 0.5, 0.0, 1.0),
                               lawlib::deterministic_binary_pp()}) {
            for (uint64_t i = 0; i < 512; ++i) {
                const auto sp = spinesim::simulate_what(
                    pp, 6, rng::make_key(seed), i, brwsim::BrwCaps{});
                const auto r = spinesim::verify_spine_identity(sp);
                const double scale = 1.0 + std::fabs(r.what);
                worst = std::max(
                    {worst, r.decomposition / scale, r.closed_form / scale});
            }
        }
        pass = worst <= 1e-10;
        return {"spine-identity-residuals", pass, "worst=" + fmt(worst)};
    });
    checks.emplace_back("paper-form-gap-binary", [seed]() -> CheckResult {
        const auto pp = lawlib::deterministic_binary_pp();
        const auto sp = spinesim::simulate_what(pp, 3, rng::make_key(seed), 0,
                                                brwsim::BrwCaps{});
        const auto r = spinesim::verify_spine_identity(sp);
        // displayed right side evaluates to 3 - 2^{1-3} = 2.75 while the
        // assembled value is exactly 1
        const bool pass = std::fabs(r.paper_form - 1.75) <= 1e-12 &&
                          sp.what[3] == 1.0;
        return {"paper-form-gap-binary", pass, "gap=" + fmt(r.paper_form)};
    });
    checks.emplace_back("sizebias-exact-n1", []() -> CheckResult {
        const auto pp = lawlib::gw_two_point_pp(1, 2, 0.5, 0.0, 1.0);
        const auto mq = lawlib::spine_mq_law(pp);
        double rhs = 0;  // E \hat W_1 = E Q under the spine pair law
        for (const auto& a : *mq.support) rhs += a.p * a.q;
        const auto w1 = lawlib::induced_q_and_w1_law(pp).w1;
        double lhs = 0;  // E W_1^2
        for (const auto& a : w1.atoms()) lhs += a.mass * a.value * a.value;
        const bool pass = std::fabs(lhs - rhs) <= 1e-12 &&
                          std::fabs(lhs - 10.0 / 9.0) <= 1e-12;
        return {"sizebias-exact-n1", pass,
                "lhs=" + fmt(lhs) + " rhs=" + fmt(rhs)};
    });
    checks.emplace_back("sizebias-mc", [seed, reps, threads]() -> CheckResult {
        const auto pp = lawlib::gw_two_point_pp(1, 2, 0.5, 0.0, 1.0);
        const auto rep = spinesim::size_biasing_check(
            pp, 2, [](std::span<const double> w) { return std::log1p(w.back()); },
            reps, rng::make_key(seed), brwsim::BrwCaps{}, 0.99, threads);
        return {"sizebias-mc", rep.pass,
                "lhs=" + fmt(rep.lhs.estimate) + " rhs=" + fmt(rep.rhs.estimate)};
    });
    checks.emplace_back("reciprocal-martingale", [seed, reps, threads]() -> CheckResult {
        const auto pp = lawlib::gw_two_point_pp(1, 2, 0.5, 0.0, 1.0);
        const auto reports = spinesim::reciprocal_martingale_check(
            pp, 5, reps, rng::make_key(seed), brwsim::BrwCaps{}, 0.99, threads);
        bool pass = true;
        double worst = 0;
        for (const auto& r : reports) {
            const double dev = std::fabs(r.estimate - 1.0);
            if (dev > 3.0 * std::max(r.std_error, 1e-15)) pass = false;
            worst = std::max(worst, dev);
        }
        return {"reciprocal-martingale", pass, "worst dev=" + fmt(worst)};
    });
    checks.emplace_back("what-mean-closed-form", [seed, reps, threads]() -> CheckResult {
        const auto pp = lawlib::gw_two_point_pp(1, 2, 0.5, 0.0, 1.0);
        const size_t nblocks =
            (reps + par::kDefaultBlock - 1) / par::kDefaultBlock;
        std::vector<std::vector<Moments>> blocks(nblocks,
                                                 std::vector<Moments>(7));
        par::parallel_blocks(
            reps, par::kDefaultBlock, threads,
            [&](size_t bi, uint64_t b, uint64_t e) {
                std::vector<Moments> acc(7);
                for (uint64_t i = b; i < e; ++i) {
                    const auto sp = spinesim::simulate_what(
                        pp, 6, rng::make_key(seed), i, brwsim::BrwCaps{});
                    for (uint32_t n = 0; n <= 6; ++n) acc[n].add(sp.what[n]);
                }
                blocks[bi] = std::move(acc);
            });
        bool pass = true;
        std::string detail;
        for (uint32_t n = 1; n <= 6; ++n) {
            Moments all;
            for (size_t bi = 0; bi < nblocks; ++bi) all.merge(blocks[bi][n]);
            const double target =
                4.0 / 3.0 - (1.0 / 3.0) * std::pow(2.0 / 3.0, n);
            if (std::fabs(all.mean - target) > 3.0 * all.std_error())
                pass = false;
            if (n <= 2)
                detail += "n=" + std::to_string(n) + ":" + fmt(all.mean) + " ";
        }
        return {"what-mean-closed-form", pass, detail};
    });
}

void add_inequality_checks(std::vector<std::pair<std::string, Check>>& checks,
                           uint64_t seed, bool quick, int threads) {
    const uint64_t reps = quick ? 20000 : 100000;
    checks.emplace_back("tail-symm-constant4", [seed, reps, threads]() -> CheckResult {
        Scenario s;
        s.seed = seed;
        s.replicates = reps;
        s.law = "qtwopoint:m=0.5,q1=1,q2=2,p1=0.5";
        s.experiment = "inequality:symm";
        s.threads = threads;
        RunResult rr;
        run_inequality_symm(s, lawlib::parse_mq_law(s.law), rr);
        const bool pass = rr.records.at(0).at("pass").get<bool>();
        return {"tail-symm-constant4", pass,
                "best c=" + fmt(rr.records.at(0).at("estimate").get<double>())};
    });
    checks.emplace_back("tail-sup-ratio", [seed, reps, threads]() -> CheckResult {
        Scenario s;
        s.seed = seed;
        s.replicates = reps;
        s.law = "gw:nmin=1,nmax=2,p=0.5,x=0,gamma=1";
        s.experiment = "inequality:tailsup";
        s.threads = threads;
        RunResult rr;
        run_inequality_tailsup(s, lawlib::parse_pp_law(s.law), rr);
        const bool pass = rr.records.at(0).at("pass").get<bool>();
        return {"tail-sup-ratio", pass,
                "best b=" + fmt(rr.records.at(0).at("estimate").get<double>())};
    });
    checks.emplace_back("jensen-bound-spine", [seed, reps, threads]() -> CheckResult {
        // concave nondecreasing f applied to the size-biased weight versus
        // the coupled discounted majorant
        const auto pp = lawlib::gw_two_point_pp(1, 2, 0.5, 0.0, 1.0);
        const auto b = rvkit::BFunctionSpec::parse("power:alpha=1");
        const auto f =
            rvkit::make_surrogate(b, rvkit::select_c(b), rvkit::SurrogateKind::f);
        const uint64_t n = 8;
        const size_t nblocks =
            (reps + par::kDefaultBlock - 1) / par::kDefaultBlock;
        std::vector<Moments> blocks(nblocks);
        par::parallel_blocks(
            reps, par::kDefaultBlock, threads,
            [&](size_t bi, uint64_t bb, uint64_t ee) {
                Moments mm;
                for (uint64_t i = bb; i < ee; ++i) {
                    const auto sp = spinesim::simulate_what(
                        pp, n, rng::make_key(seed), i, brwsim::BrwCaps{});
                    double zmaj = 0, prefix = 1.0;
                    for (const auto& st : sp.steps) {
                        zmaj += prefix * st.q;
                        prefix = st.pi;
                    }
                    mm.add(f(sp.what[n]) - f(std::max(1.0, zmaj)));
                }
                blocks[bi] = mm;
            });
        Moments all;
        for (const auto& m : blocks) all.merge(m);
        const bool pass = all.mean <= 3.0 * all.std_error();
        return {"jensen-bound-spine", pass,
                "mean gap=" + fmt(all.mean) + " se=" + fmt(all.std_error())};
    });
    checks.emplace_back("spine-pathwise-lower-bound", [seed]() -> CheckResult {
        const auto pp = lawlib::gw_two_point_pp(1, 2, 0.5, 0.0, 1.0);
        bool pass = true;
        for (uint64_t i = 0; i < 2048; ++i) {
            const auto sp = spinesim::simulate_what(pp, 6, rng::make_key(seed),
                                                    i, brwsim::BrwCaps{});
            double prefix = 1.0, runmax_piq = 0, runmax_what = 0;
            for (uint32_t k = 1; k <= sp.n; ++k) {
                const double piq = prefix * sp.steps[k - 1].q;
                prefix = sp.steps[k - 1].pi;
                runmax_piq = std::max(runmax_piq, piq);
                runmax_what = std::max(runmax_what, sp.what[k]);
                if (sp.what[k] < piq * (1.0 - 1e-12)) pass = false;
            }
            if (runmax_what < runmax_piq * (1.0 - 1e-12)) pass = false;
        }
        return {"spine-pathwise-lower-bound", pass, ""};
    });
}

}  // namespace

std::vector<CheckResult> run_suite(const std::string& suite, bool quick,
                                   uint64_t seed, int threads) {
    std::vector<std::pair<std::string, Check>> checks;
    const bool all = suite == "all";
    if (all || suite == "rvkit") add_rvkit_checks(checks, quick);
    if (all || suite == "perpetuity")
        add_perpetuity_checks(checks, seed, quick, threads);
    if (all || suite == "ladder") add_ladder_checks(checks, seed, quick, threads);
    if (all || suite == "brw") add_brw_checks(checks, seed, quick, threads);
    if (all || suite == "spine") add_spine_checks(checks, seed, quick, threads);
    if (all || suite == "inequalities")
        add_inequality_checks(checks, seed, quick, threads);
    if (checks.empty()) throw ConfigError("unknown suite: " + suite);
    std::vector<CheckResult> results;
    results.reserve(checks.size());
    for (auto& [id, fn] : checks) {
        try {
            results.push_back(fn());
        } catch (const std::exception& e) {
            results.push_back({id, false, std::string("exception: ") + e.what()});
        }
    }
    return results;
}

}  // namespace perpetua::cli
