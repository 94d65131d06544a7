#include <doctest.h>

#include "perpetua/lawlib.hpp"
#include "perpetua/mathutil.hpp"

#include <cmath>
#include <map>
#include <set>

using namespace perpetua;
using namespace perpetua::lawlib;

namespace {
const rng::Key kKey = rng::make_key(424242);
}

TEST_CASE("stock driver pairs sample inside their support") {
    auto rs = rng::make_stream(kKey, rng::Domain::generic, 0);
    const auto c = const_law(0.5, 1.0);
    for (int i = 0; i < 16; ++i) {
        const auto [m, q] = sample_mq(c, rs);
        CHECK(m == 0.5);
        CHECK(q == 1.0);
    }
    const auto tp = twopoint_m_law(2.0, 0.5, 0.125, 1.0);
    for (int i = 0; i < 64; ++i) {
        const auto [m, q] = sample_mq(tp, rs);
        CHECK((m == 2.0 || m == 0.125));
        CHECK(q == 1.0);
    }
    const auto u = uniform01_m_law(1.0);
    for (int i = 0; i < 64; ++i) {
        const auto [m, q] = sample_mq(u, rs);
        CHECK(m > 0.0);
        CHECK(m < 1.0);
        CHECK(q == 1.0);
    }
}

TEST_CASE("a sampler emitting M = 0 is rejected") {
    MQLaw bad;
    bad.id = "bad";
    bad.sample_raw = [](rng::Stream&) { return std::make_pair(0.0, 1.0); };
    auto rs = rng::make_stream(kKey, rng::Domain::generic, 1);
    CHECK_THROWS_AS(sample_mq(bad, rs), SamplerViolation);
}

TEST_CASE("finite support law validation") {
    CHECK_THROWS(make_finite_support_law("x", {{0.5, 1.0, 0.7}}));  // mass != 1
    CHECK_THROWS(make_finite_support_law("x", {{0.0, 1.0, 1.0}}));  // M = 0
    CHECK_THROWS(make_finite_support_law("x", {{0.5, 0.0, 1.0}}));  // Q = 0 a.s.
}

TEST_CASE("regime classification from closed-form analytics") {
    const auto check = [](const MQLaw& law, RegimeCase c, RegimeSubcase s) {
        const auto rep = classify_regime(law);
        INFO(law.id);
        CHECK(rep.regime == c);
        CHECK(rep.subcase == s);
        CHECK_FALSE(rep.empirical);
    };
    check(const_law(0.5, 1.0), RegimeCase::C1, RegimeSubcase::A1);
    // E log M = (log 2 + log 1/8)/2 = -log 2 < 0 with P{|M|>1} > 0
    check(twopoint_m_law(2.0, 0.5, 0.125, 1.0), RegimeCase::C2,
          RegimeSubcase::A1);
    check(uniform01_m_law(1.0), RegimeCase::C1, RegimeSubcase::A1);
    check(heavy_ladder_law(0.5, 1.0, 1.0), RegimeCase::C1, RegimeSubcase::A2);
    check(const_law(2.0, 1.0), RegimeCase::divergent, RegimeSubcase::none);
    check(const_law(1.0, 1.0), RegimeCase::divergent, RegimeSubcase::none);

    // A3: both one-sided log moments infinite, declared J-moment finite
    MQLaw a3 = uniform01_m_law(1.0);
    a3.analytics->e_log_abs_m = std::numeric_limits<double>::quiet_NaN();
    a3.analytics->e_log_plus_abs_m = std::numeric_limits<double>::infinity();
    a3.analytics->e_log_minus_abs_m = std::numeric_limits<double>::infinity();
    a3.analytics->p_m_gt1 = 0.3;
    a3.analytics->p_m_lt1 = 0.7;
    a3.analytics->j_logplus_m_finite = true;
    const auto rep = classify_regime(a3);
    CHECK(rep.regime == RegimeCase::C2);
    CHECK(rep.subcase == RegimeSubcase::A3);
}

TEST_CASE("empirical classification when analytics are absent") {
    MQLaw u = uniform01_m_law(1.0);
    u.analytics.reset();
    CHECK_THROWS(classify_regime(u));  // no budget
    const auto rep = classify_regime(u, 20000, kKey);
    CHECK(rep.regime == RegimeCase::C1);
    CHECK(rep.subcase == RegimeSubcase::A1);
    CHECK(rep.empirical);
}

TEST_CASE("classification ignores scaling of Q") {
    const auto base = q_twopoint_law(0.5, 1.0, 2.0, 0.5);
    const auto scaled = q_twopoint_law(0.5, 17.0, 34.0, 0.5);
    CHECK(classify_regime(base).regime == classify_regime(scaled).regime);
    CHECK(classify_regime(base).subcase == classify_regime(scaled).subcase);
}

TEST_CASE("A and J closed forms") {
    const auto half = AEvaluator::from_law(const_law(0.5, 1.0));
    const double log2 = std::log(2.0);
    CHECK(half.A(1.0) == doctest::Approx(log2).epsilon(1e-15));
    CHECK(half.A(0.1) == doctest::Approx(0.1).epsilon(1e-15));
    CHECK(half.A(0.0) == 0.0);
    CHECK(half.J(2 * log2) == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(half.J(0.0) == 1.0);  // 1 / P{|M| < 1}
    CHECK(half.J(-1.0) == 0.0);

    const auto uni = AEvaluator::from_law(uniform01_m_law(1.0));
    CHECK(uni.A(1.0) == doctest::Approx(1.0 - std::exp(-1.0)).epsilon(1e-14));

    const auto expanding = AEvaluator::from_law(const_law(2.0, 1.0));
    CHECK_THROWS_AS(expanding.J(0.0), UndefinedJ);
    CHECK(std::isinf(expanding.J(1.0)));

    // heavy ladder: A(x) = 2 sqrt(x) - 1 above the scale
    const auto hl = AEvaluator::from_law(heavy_ladder_law(0.5, 1.0, 1.0));
    CHECK(hl.A(0.5) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(hl.A(4.0) == doctest::Approx(3.0).epsilon(1e-13));

    // lognormal A matches numeric integration of the survival function
    const auto ln = lognormal_m_law(1.0, 0.7, 1.0);
    const auto a = AEvaluator::from_law(ln);
    for (const double x : {0.5, 1.0, 3.0}) {
        double s = 0;
        const int n = 20000;
        for (int i = 0; i < n; ++i) {
            const double y = x * (i + 0.5) / n;
            s += ln.analytics->survival_neglogm(y) * (x / n);
        }
        CHECK(a.A(x) == doctest::Approx(s).epsilon(1e-6));
    }
}

TEST_CASE("A evaluator invariants on closed forms and tables") {
    const auto laws = {const_law(0.5, 1.0), uniform01_m_law(1.0),
                       heavy_ladder_law(0.5, 1.0, 1.0),
                       lognormal_m_law(0.5, 1.0, 1.0)};
    for (const auto& law : laws) {
        const auto closed = AEvaluator::from_law(law);
        const auto emp = AEvaluator::empirical(law, kKey, 100000, 256);
        double prev_c = 0, prev_e = 0;
        for (double x = 0; x <= 30.0; x += 0.25) {
            const double ac = closed.A(x), ae = emp.A(x);
            INFO(law.id << " x=" << x);
            CHECK(ac >= prev_c - 1e-12);  // nondecreasing
            CHECK(ae >= prev_e - 1e-12);
            CHECK(ac <= x + 1e-12);  // A(x) <= x
            CHECK(ae <= x + 1e-12);
            prev_c = ac;
            prev_e = ae;
        }
    }
}

TEST_CASE("empirical A converges to the closed form") {
    // normalized sup distance over [0, 30] at one million draws
    for (const auto& law :
         {uniform01_m_law(1.0), heavy_ladder_law(0.5, 1.0, 1.0),
          lognormal_m_law(0.5, 1.0, 1.0)}) {
        const auto closed = AEvaluator::from_law(law);
        const auto emp = AEvaluator::empirical(law, kKey, 1000000, 512);
        double sup = 0;
        for (double x = 0; x <= 30.0; x += 0.1) {
            const double d = std::fabs(emp.A(x) - closed.A(x)) /
                             std::max(1.0, closed.A(x));
            sup = std::max(sup, d);
        }
        INFO(law.id);
        CHECK(sup <= 0.01);
    }
}

TEST_CASE("point process m(gamma) and supercriticality") {
    const auto gw = gw_two_point_pp(1, 2, 0.5, 0.0, 1.0);
    CHECK(gw.m_gamma() == 1.5);
    const auto bin = deterministic_binary_pp();
    CHECK(bin.m_gamma() == 1.0);
    CHECK_THROWS(gw_two_point_pp(1, 1, 1.0, 0.0, 1.0));  // E N = 1
    const auto poi = poisson_pp(2.0, 0.0, 1.0);
    CHECK(poi.m_gamma() == 2.0);
    CHECK(poi.enumeration_deficit <= 1e-12);

    // enumerable invariant: sum over configs of p * sum e^{gamma x} = m,
    // up to the documented truncation deficit of the enumerator
    double m = 0;
    for (const auto& cfg : *poi.enumerated) {
        double s = 0;
        for (const double x : cfg.xs) s += std::exp(poi.gamma * x);
        m += cfg.p * s;
    }
    CHECK(std::fabs(m - 2.0) <= 1e-9);
    // exactly enumerable law: equality to full precision
    const auto gw2 = gw_two_point_pp(1, 2, 0.5, 0.0, 1.0);
    double m2 = 0;
    for (const auto& cfg : *gw2.enumerated) {
        double s = 0;
        for (const double x : cfg.xs) s += std::exp(gw2.gamma * x);
        m2 += cfg.p * s;
    }
    CHECK(std::fabs(m2 - 1.5) <= 1e-12);
}

TEST_CASE("induced weight-ratio law") {
    const auto gw = gw_two_point_pp(1, 2, 0.5, 0.0, 1.0);
    const auto mlaw = induced_m_law(gw);
    REQUIRE(mlaw.atoms().size() == 1);
    CHECK(mlaw.atoms()[0].value == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    CHECK(mlaw.atoms()[0].mass == doctest::Approx(1.0).epsilon(1e-12));

    const auto bin = induced_m_law(deterministic_binary_pp());
    REQUIRE(bin.atoms().size() == 1);
    CHECK(bin.atoms()[0].value == 0.5);

    // single child at the origin: the induced law is the point mass at 1
    PointProcessLaw degen;
    degen.id = "single";
    degen.gamma = 1.0;
    degen.enumerated = std::vector<PPConfig>{{{0.0}, 1.0}};
    degen.m_gamma_closed = 1.0;
    CHECK_THROWS_AS(induced_m_law(degen), DegenerateBrw);

    CHECK_THROWS_AS(induced_m_law(heavy_w1_pp(2.5, 8)), NotEnumerable);
}

TEST_CASE("induced W1 and Q laws satisfy the mass relation") {
    const auto gw = gw_two_point_pp(1, 2, 0.5, 0.0, 1.0);
    const auto iw = induced_q_and_w1_law(gw);
    REQUIRE(iw.w1.atoms().size() == 2);
    CHECK(iw.w1.atoms()[0].value == doctest::Approx(2.0 / 3.0));
    CHECK(iw.w1.atoms()[0].mass == doctest::Approx(0.5));
    CHECK(iw.w1.atoms()[1].value == doctest::Approx(4.0 / 3.0));
    // q masses are x * w1 masses on every support point
    for (size_t i = 0; i < iw.w1.atoms().size(); ++i) {
        CHECK(iw.q.atoms()[i].value == iw.w1.atoms()[i].value);
        CHECK(iw.q.atoms()[i].mass ==
              doctest::Approx(iw.w1.atoms()[i].value * iw.w1.atoms()[i].mass)
                  .epsilon(1e-14));
    }
    CHECK(iw.q.total_mass() == doctest::Approx(1.0).epsilon(1e-12));
    // E Q = E W1^2 = 10/9
    CHECK(iw.q.mean() == doctest::Approx(10.0 / 9.0).epsilon(1e-13));

    const auto binq = induced_q_and_w1_law(deterministic_binary_pp());
    REQUIRE(binq.w1.atoms().size() == 1);
    CHECK(binq.w1.atoms()[0].value == 1.0);
    CHECK(binq.q.atoms()[0].value == 1.0);
}

TEST_CASE("exact tilting") {
    const auto gw = gw_two_point_pp(1, 2, 0.5, 0.0, 1.0);
    const auto tilted = tilted_reproduction_law(gw);
    REQUIRE(tilted.enumerated->size() == 2);
    std::map<size_t, double> probs;
    for (const auto& cfg : *tilted.enumerated) probs[cfg.xs.size()] = cfg.p;
    CHECK(probs[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
    CHECK(probs[2] == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
    double total = 0;
    for (const auto& cfg : *tilted.enumerated) total += cfg.p;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));

    // the binary law is a fixed point of the tilt (density identically 1)
    const auto bt = tilted_reproduction_law(deterministic_binary_pp());
    REQUIRE(bt.enumerated->size() == 1);
    CHECK(bt.enumerated->front().p == doctest::Approx(1.0).epsilon(1e-15));

    // Poisson offspring tilts to 1 + Poisson
    const double lambda = 2.0;
    const auto pt = tilted_reproduction_law(poisson_pp(lambda, 0.0, 1.0));
    for (const auto& cfg : *pt.enumerated) {
        const size_t k = cfg.xs.size();
        if (k == 0) continue;
        const double expect = std::exp(-lambda) *
                              std::pow(lambda, double(k - 1)) /
                              std::tgamma(double(k));
        CHECK(cfg.p == doctest::Approx(expect).epsilon(1e-9));
    }
}

TEST_CASE("rejection tilting matches the exact tilt") {
    const auto gw = gw_two_point_pp(1, 2, 0.5, 0.0, 1.0);
    const auto rej = tilted_reproduction_law(gw, TiltMode::rejection);
    uint64_t twos = 0;
    const uint64_t n = 20000;
    for (uint64_t i = 0; i < n; ++i) {
        auto rs = rng::make_stream(kKey, rng::Domain::law_aux, i, 4);
        if (rej.sample(rs).size() == 2) ++twos;
    }
    const double phat = double(twos) / double(n);
    CHECK(std::fabs(phat - 2.0 / 3.0) < 3.0 * std::sqrt(2.0 / 9.0 / double(n)));

    CHECK_THROWS_AS(
        tilted_reproduction_law(poisson_pp(2.0, 0.0, 1.0), TiltMode::rejection),
        UnboundedDensity);
}

TEST_CASE("importance tilting weights have mean one") {
    const auto poi = poisson_pp(2.0, 0.0, 1.0);
    Moments mw;
    for (uint64_t i = 0; i < 20000; ++i) {
        auto rs = rng::make_stream(kKey, rng::Domain::law_aux, i, 5);
        mw.add(sample_tilted_importance(poi, rs).weight);
    }
    CHECK(std::fabs(mw.mean - 1.0) <= 3.0 * mw.std_error());
}

TEST_CASE("spine driver pair law") {
    const auto gw = gw_two_point_pp(1, 2, 0.5, 0.0, 1.0);
    const auto mq = spine_mq_law(gw);
    REQUIRE(mq.support->size() == 2);
    const auto& atoms = *mq.support;
    CHECK(atoms[0].m == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    CHECK(atoms[0].q == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    CHECK(atoms[0].p == doctest::Approx(1.0 / 3.0).epsilon(1e-13));
    CHECK(atoms[1].q == doctest::Approx(4.0 / 3.0).epsilon(1e-15));
    CHECK(atoms[1].p == doctest::Approx(2.0 / 3.0).epsilon(1e-13));
    // E M = 2/3 and E Q = E W1^2 = 10/9
    CHECK(*mq.analytics->e_m == doctest::Approx(2.0 / 3.0).epsilon(1e-13));
    CHECK(*mq.analytics->e_q == doctest::Approx(10.0 / 9.0).epsilon(1e-13));
}

TEST_CASE("m(gamma) estimation") {
    const auto gw = gw_two_point_pp(1, 2, 0.5, 0.0, 1.0);
    const auto exact = estimate_m_gamma(gw, 1000, kKey);
    CHECK(exact.estimate == 1.5);
    CHECK(exact.std_error == 0.0);

    const auto bin = estimate_m_gamma(deterministic_binary_pp(), 1000, kKey);
    CHECK(bin.estimate == 1.0);

    // sampler-only law: Monte Carlo CI should contain E V = 1
    const auto hw = heavy_w1_pp(2.5, 8);
    const auto mc = estimate_m_gamma(hw, 40000, kKey);
    CHECK(mc.ci_lo <= 1.0);
    CHECK(1.0 <= mc.ci_hi);
    CHECK_THROWS(estimate_m_gamma(gw, 50, kKey));  // n too small
}

TEST_CASE("heavy W1 point process is supercritical with unit mean weight") {
    const auto hw = heavy_w1_pp(0.75, 24);
    CHECK(hw.m_gamma() == 1.0);
    CHECK(*hw.mean_offspring > 1.0);
    Moments w1;
    for (uint64_t i = 0; i < 20000; ++i) {
        auto rs = rng::make_stream(kKey, rng::Domain::law_aux, i, 6);
        w1.add(sample_w1(hw, rs));
    }
    CHECK(std::fabs(w1.mean - 1.0) <= 4.0 * w1.std_error());
}

TEST_CASE("law strings parse to the catalogue") {
    CHECK(parse_mq_law("const:m=0.5,q=1").support->size() == 1);
    CHECK(parse_mq_law("twopoint:m1=2,p1=0.5,m2=0.125,q=1").support->size() ==
          2);
    CHECK(parse_mq_law("logpareto_q:m=0.5,beta=2.5").analytics->p_m_lt1 == 1.0);
    CHECK(parse_mq_law("spinemq_gw:nmin=1,nmax=2,p=0.5,x=0,gamma=1")
              .support->size() == 2);
    CHECK(parse_pp_law("gw:nmin=1,nmax=2,p=0.5,x=0,gamma=1").enumerable());
    CHECK(parse_pp_law("detbinary").m_gamma() == 1.0);
    CHECK_THROWS_AS(parse_mq_law("nope:z=1"), ConfigError);
    CHECK_THROWS_AS(parse_pp_law("poisson:lambda=abc"), ConfigError);
}
