#include <doctest.h>

#include "perpetua/spinesim.hpp"

#include <cmath>
#include <set>

using namespace perpetua;
using namespace perpetua::spinesim;

namespace {
const rng::Key kKey = rng::make_key(31415);
const brwsim::BrwCaps kCaps{};
}  // namespace

TEST_CASE("spine step on the deterministic binary law") {
    const auto pp = lawlib::deterministic_binary_pp();
    uint64_t child0 = 0;
    const uint64_t n = 4000;
    for (uint64_t i = 0; i < n; ++i) {
        auto rs = rng::make_stream(kKey, rng::Domain::spine, i);
        const auto d = spine_step(pp, rs);
        CHECK(d.m == 0.5);
        CHECK(d.q == 1.0);
        REQUIRE(d.xs.size() == 2);
        if (d.child == 0) ++child0;
    }
    // equal weights: the spine child is picked uniformly
    const double phat = double(child0) / double(n);
    CHECK(std::fabs(phat - 0.5) <= 3.0 * std::sqrt(0.25 / double(n)));
}

TEST_CASE("spine step law matches the enumerated driver pair atoms bitwise") {
    const auto pp = lawlib::gw_two_point_pp(1, 2, 0.5, 0.0, 1.0);
    const auto mq = lawlib::spine_mq_law(pp);
    std::set<std::pair<double, double>> seen;
    uint64_t singles = 0;
    const uint64_t n = 20000;
    for (uint64_t i = 0; i < n; ++i) {
        auto rs = rng::make_stream(kKey, rng::Domain::spine, i, 1);
        const auto d = spine_step(pp, rs);
        seen.insert({d.m, d.q});
        if (d.xs.size() == 1) ++singles;
    }
    std::set<std::pair<double, double>> expect;
    for (const auto& a : *mq.support) expect.insert({a.m, a.q});
    CHECK(seen == expect);  // exact atom match across modules
    // tilted configuration frequencies: 1/3 vs 2/3
    const double phat = double(singles) / double(n);
    CHECK(std::fabs(phat - 1.0 / 3.0) <=
          3.0 * std::sqrt(2.0 / 9.0 / double(n)));
    CHECK_THROWS_AS(
        [&] {
            auto rs = rng::make_stream(kKey, rng::Domain::spine, 0, 2);
            spine_step(lawlib::heavy_w1_pp(2.5, 8), rs);
        }(),
        UnsupportedTilting);
}

TEST_CASE("deterministic binary spine telescopes to one") {
    for (const uint32_t n : {0u, 1u, 3u, 8u}) {
        const auto sp = simulate_what(lawlib::deterministic_binary_pp(), n,
                                      kKey, n, kCaps);
        REQUIRE(sp.what.size() == n + 1);
        for (const double w : sp.what) CHECK(w == 1.0);
        const auto res = verify_spine_identity(sp);
        CHECK(res.decomposition == 0.0);
        CHECK(res.closed_form == 0.0);
        if (n == 3) CHECK(std::fabs(res.paper_form - 1.75) <= 1e-12);
        if (n == 0) CHECK(res.paper_form == 0.0);
    }
}

TEST_CASE("spine path invariants on the two-point law") {
    const auto pp = lawlib::gw_two_point_pp(1, 2, 0.5, 0.0, 1.0);
    for (uint64_t i = 0; i < 2000; ++i) {
        const auto sp = simulate_what(pp, 6, kKey, i, kCaps);
        const auto res = verify_spine_identity(sp);
        const double tol = 1e-10 * (1.0 + std::fabs(res.what));
        CHECK(res.decomposition <= tol);
        CHECK(res.closed_form <= tol);
        double pi = 1.0, logw = 0.0;
        for (const auto& st : sp.steps) {
            // Q equals M plus the sibling ratios, exactly as stored
            double q = st.m;
            for (const auto& sib : st.siblings) q += sib.ratio;
            CHECK(st.q == q);
            pi *= st.m;
            CHECK(st.pi == pi);
            logw = st.logw;
        }
        // linear and log-safe spine weights agree to relative tolerance
        CHECK(std::fabs(sp.steps.back().pi - std::exp(logw)) <=
              1e-12 * sp.steps.back().pi);
    }
}

TEST_CASE("sibling remainders are centered") {
    const auto pp = lawlib::gw_two_point_pp(1, 2, 0.5, 0.0, 1.0);
    const uint32_t n = 5;
    Moments r_mean;
    for (uint64_t i = 0; i < 20000; ++i) {
        const auto sp = simulate_what(pp, n, kKey, 40000 + i, kCaps);
        for (uint32_t k = 1; k <= n; ++k) {
            double rnk = 0;
            for (const auto& sib : sp.steps[k - 1].siblings)
                rnk += sib.ratio * (sib.subtree_w[n - k] - 1.0);
            r_mean.add(rnk);
        }
    }
    CHECK(std::fabs(r_mean.mean) <= 3.0 * r_mean.std_error());
}

TEST_CASE("mean size-biased weight follows the second-moment closed form") {
    // exact oracle via the driver pair atoms: E what_2 = E Pi_2 +
    // (E Q - E M) + E M (E Q - E M) with E M = 2/3, E Q = 10/9, which
    // telescopes to 32/27 = 4/3 - (1/3)(2/3)^2
    const auto pp = lawlib::gw_two_point_pp(1, 2, 0.5, 0.0, 1.0);
    const auto mq = lawlib::spine_mq_law(pp);
    const double em = *mq.analytics->e_m, eq = *mq.analytics->e_q;
    const double oracle = em * em + (eq - em) + em * (eq - em);
    CHECK(oracle == doctest::Approx(32.0 / 27.0).epsilon(1e-13));

    std::vector<Moments> mom(3);
    for (uint64_t i = 0; i < 20000; ++i) {
        const auto sp = simulate_what(pp, 2, kKey, 90000 + i, kCaps);
        for (uint32_t j = 0; j <= 2; ++j) mom[j].add(sp.what[j]);
    }
    CHECK(mom[0].mean == 1.0);
    CHECK(std::fabs(mom[1].mean - 10.0 / 9.0) <= 3.0 * mom[1].std_error());
    CHECK(std::fabs(mom[2].mean - oracle) <= 3.0 * mom[2].std_error());
}

TEST_CASE("size biasing identity at one step is exact by enumeration") {
    const auto pp = lawlib::gw_two_point_pp(1, 2, 0.5, 0.0, 1.0);
    // lhs: E W_1 h(W_1) from the W_1 law; rhs: E h(what_1) from the spine law
    const auto w1 = lawlib::induced_q_and_w1_law(pp).w1;
    const auto mq = lawlib::spine_mq_law(pp);
    for (const auto& h : {std::function<double(double)>([](double x) { return x; }),
                          std::function<double(double)>(
                              [](double x) { return std::log1p(x); })}) {
        double lhs = 0;
        for (const auto& a : w1.atoms()) lhs += a.mass * a.value * h(a.value);
        double rhs = 0;
        for (const auto& a : *mq.support) rhs += a.p * h(a.q);
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-13));
    }
}

TEST_CASE("size biasing check agrees within three combined sigmas") {
    const auto pp = lawlib::gw_two_point_pp(1, 2, 0.5, 0.0, 1.0);
    const auto id = [](std::span<const double> w) { return w.back(); };
    const auto rep = size_biasing_check(pp, 2, id, 20000, kKey, kCaps);
    CHECK(rep.pass);
    // running-max functional
    const auto maxind = [](std::span<const double> w) {
        double mx = 0;
        for (const double v : w) mx = std::max(mx, v);
        return mx > 1.2 ? 1.0 : 0.0;
    };
    const auto rep2 =
        size_biasing_check(pp, 3, maxind, 20000, rng::fold_key(kKey, 5), kCaps);
    CHECK(rep2.pass);
}

TEST_CASE("reciprocal spine weights have mean one") {
    const auto pp = lawlib::gw_two_point_pp(1, 2, 0.5, 0.0, 1.0);
    // exact at one step: E 1/what_1 = sum p/q over the driver atoms
    const auto mq = lawlib::spine_mq_law(pp);
    double exact = 0;
    for (const auto& a : *mq.support) exact += a.p / a.q;
    CHECK(exact == doctest::Approx(1.0).epsilon(1e-13));

    const auto reports =
        reciprocal_martingale_check(pp, 5, 20000, kKey, kCaps);
    REQUIRE(reports.size() == 6);
    for (const auto& r : reports) {
        INFO(r.tag);
        CHECK(std::fabs(r.estimate - 1.0) <=
              3.0 * std::max(r.std_error, 1e-15));
    }
}

TEST_CASE("importance-weighted spine matches exact tilting") {
    // enumerable law with extinction mass: N in {0,2}, so importance paths
    // can die with weight zero while the estimators stay unbiased
    const auto pp = lawlib::gw_two_point_pp(0, 2, 0.25, 0.0, 1.0);
    // E what_1 = E W_1^2 = 0.75 * (4/3)^2 = 4/3
    Moments exact_mode, importance_mode;
    for (uint64_t i = 0; i < 20000; ++i) {
        const auto se = simulate_what(pp, 1, kKey, i, kCaps);
        exact_mode.add(se.what[1]);
        const auto si = simulate_what(pp, 1, rng::fold_key(kKey, 9), i, kCaps,
                                      TiltPolicy::importance);
        importance_mode.add(si.weight * si.what[1]);
    }
    CHECK(std::fabs(exact_mode.mean - 4.0 / 3.0) <=
          3.0 * exact_mode.std_error());
    CHECK(std::fabs(importance_mode.mean - 4.0 / 3.0) <=
          3.0 * importance_mode.std_error());
}

TEST_CASE("capped sibling subtrees are padded and flagged") {
    const auto pp = lawlib::deterministic_binary_pp();
    const brwsim::BrwCaps tiny{16, 30};
    const auto sp = simulate_what(pp, 8, kKey, 0, tiny);
    CHECK(sp.capped);
    REQUIRE(sp.what.size() == 9);
    for (const double w : sp.what) CHECK(std::isfinite(w));
}
