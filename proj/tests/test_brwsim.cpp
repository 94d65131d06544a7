#include <doctest.h>

#include "perpetua/brwsim.hpp"
#include "perpetua/mathutil.hpp"

#include <cmath>
#include <map>

using namespace perpetua;
using namespace perpetua::brwsim;

namespace {

const rng::Key kKey = rng::make_key(90210);
const BrwCaps kCaps{};

// Exact population law of the two-point offspring walk by convolution:
// P{N_{k+1} = j} from P{N_k = i} with each of i parents spawning 1 or 2
// children with probability 1/2. Independent oracle for weight moments.
std::map<uint64_t, double> pop_law_two_point(uint32_t n) {
    std::map<uint64_t, double> law{{1, 1.0}};
    for (uint32_t k = 0; k < n; ++k) {
        std::map<uint64_t, double> next;
        for (const auto& [i, p] : law) {
            // children = i + Binomial(i, 1/2)
            double binom = std::pow(0.5, double(i));
            for (uint64_t extra = 0; extra <= i; ++extra) {
                next[i + extra] += p * binom;
                binom *= double(i - extra) / double(extra + 1);
            }
        }
        law = std::move(next);
    }
    return law;
}

}  // namespace

TEST_CASE("deterministic binary weights are exact at every level") {
    const auto pp = lawlib::deterministic_binary_pp();
    Generation g = root_generation();
    CHECK(g.wn() == 1.0);
    for (uint32_t n = 1; n <= 12; ++n) {
        g = grow(g, pp, kKey, 0, kCaps);
        CHECK(g.pop() == (size_t(1) << n));
        for (const double w : g.linw) CHECK(w == std::ldexp(1.0, -int(n)));
        CHECK(g.wn() == 1.0);  // bit-exact compensated sum of 2^n dyadics
        // stored log weight tracks gamma * pos - n log m to tolerance
        for (size_t i = 0; i < g.pop(); ++i) {
            const double expect = pp.gamma * g.pos[i];  // log m = 0
            CHECK(std::fabs(g.logw[i] - expect) <=
                  1e-12 * (1.0 + std::fabs(expect)));
        }
    }
    const auto [mn, mx] = g.logw_range();
    CHECK(mn == mx);  // all individuals carry the same weight
}

TEST_CASE("fast fixed-displacement path equals the generic path bitwise") {
    auto pp = lawlib::gw_two_point_pp(1, 2, 0.5, 0.25, 1.0);
    auto generic = pp;
    generic.sample_count = nullptr;  // force the per-parent sampler
    Generation a = root_generation(), b = root_generation();
    for (uint32_t n = 1; n <= 8; ++n) {
        a = grow(a, pp, kKey, 3, kCaps);
        b = grow(b, generic, kKey, 3, kCaps);
        REQUIRE(a.pop() == b.pop());
        CHECK(a.pos == b.pos);
        CHECK(a.logw == b.logw);
        CHECK(a.linw == b.linw);
    }
}

TEST_CASE("weight mean stays one across generations") {
    const auto pp = lawlib::gw_two_point_pp(1, 2, 0.5, 0.0, 1.0);
    std::vector<Moments> mom(11);
    for (uint64_t i = 0; i < 4000; ++i) {
        const auto t = martingale_trajectory(pp, 10, kKey, i, kCaps);
        for (uint32_t n = 0; n <= 10; ++n) mom[n].add(t.w[n]);
    }
    for (uint32_t n = 1; n <= 10; ++n) {
        INFO("n=" << n);
        CHECK(std::fabs(mom[n].mean - 1.0) <= 3.0 * mom[n].std_error());
    }
    // W_1 takes only the two enumerated values
    for (uint64_t i = 0; i < 100; ++i) {
        const auto t = martingale_trajectory(pp, 1, kKey, 100000 + i, kCaps);
        CHECK((std::fabs(t.w[1] - 2.0 / 3.0) < 1e-15 ||
               std::fabs(t.w[1] - 4.0 / 3.0) < 1e-15));
    }
}

TEST_CASE("second weight moment matches the exact convolution oracle") {
    // closed form a_n = 4/3 - (1/3)(2/3)^n; verified here against the exact
    // population law, then against the simulation
    for (uint32_t n = 1; n <= 3; ++n) {
        const auto law = pop_law_two_point(n);
        double second = 0;
        const double wn = std::pow(2.0 / 3.0, double(n));
        for (const auto& [pop, p] : law)
            second += p * (double(pop) * wn) * (double(pop) * wn);
        const double closed = 4.0 / 3.0 - std::pow(2.0 / 3.0, double(n)) / 3.0;
        CHECK(second == doctest::Approx(closed).epsilon(1e-12));
    }
    const auto pp = lawlib::gw_two_point_pp(1, 2, 0.5, 0.0, 1.0);
    std::vector<Moments> mom(7);
    for (uint64_t i = 0; i < 20000; ++i) {
        const auto t = martingale_trajectory(pp, 6, kKey, 500000 + i, kCaps);
        for (uint32_t n = 1; n <= 6; ++n) mom[n].add(t.w[n] * t.w[n]);
    }
    for (uint32_t n = 1; n <= 6; ++n) {
        const double closed = 4.0 / 3.0 - std::pow(2.0 / 3.0, double(n)) / 3.0;
        INFO("n=" << n);
        CHECK(std::fabs(mom[n].mean - closed) <= 3.0 * mom[n].std_error());
    }
}

TEST_CASE("extinction is terminal and zero-padded") {
    const auto pp = lawlib::gw_two_point_pp(0, 3, 1.0 / 3.0, 0.0, 1.0);
    uint64_t extinct = 0;
    for (uint64_t i = 0; i < 2000; ++i) {
        const auto t =
            martingale_trajectory(pp, 12, kKey, i, BrwCaps{4096, 30});
        if (t.extinct) {
            ++extinct;
            REQUIRE(t.w.size() == 13);
            for (uint32_t n = t.gens; n <= 12; ++n) CHECK(t.w[n] == 0.0);
        }
    }
    CHECK(extinct > 400);  // extinction probability is (sqrt(3)-1)/2 = 0.366
    CHECK(extinct < 1000);
}

TEST_CASE("population cap raises and trajectories flag it") {
    const auto pp = lawlib::deterministic_binary_pp();
    Generation g = root_generation();
    const BrwCaps tiny{8, 30};
    g = grow(g, pp, kKey, 0, tiny);
    g = grow(g, pp, kKey, 0, tiny);
    g = grow(g, pp, kKey, 0, tiny);  // pop 8 still fits
    CHECK_THROWS_AS(grow(g, pp, kKey, 0, tiny), PopulationExplosion);
    const auto t = martingale_trajectory(pp, 10, kKey, 0, tiny);
    CHECK(t.capped);
    CHECK(t.gens == 3);
}

TEST_CASE("running maxima never decrease") {
    const std::vector<double> w{1.0, 0.5, 2.0, 1.5, 3.0};
    const auto rm = running_max(w);
    CHECK(rm == std::vector<double>{1.0, 1.0, 2.0, 2.0, 3.0});
}

TEST_CASE("composition law equals the direct law exactly at one level") {
    // W_2 versus sum_v L(v) W_1(v): enumerate both exactly
    const double w = 2.0 / 3.0;
    std::map<double, double> direct;
    {
        const auto pops = pop_law_two_point(2);
        for (const auto& [pop, p] : pops)
            direct[double(pop) * w * w] += p;
    }
    std::map<double, double> composed;
    {
        // level one: 1 or 2 children, each subtree contributing its own W_1
        for (const int n1 : {1, 2}) {
            const double p1 = 0.5;
            if (n1 == 1) {
                for (const double w1 : {2.0 / 3.0, 4.0 / 3.0})
                    composed[w * w1] += p1 * 0.5;
            } else {
                for (const double wa : {2.0 / 3.0, 4.0 / 3.0})
                    for (const double wb : {2.0 / 3.0, 4.0 / 3.0})
                        composed[w * (wa + wb)] += p1 * 0.25;
            }
        }
    }
    REQUIRE(direct.size() == composed.size());
    auto it = composed.begin();
    for (const auto& [v, p] : direct) {
        CHECK(v == doctest::Approx(it->first).epsilon(1e-12));
        CHECK(p == doctest::Approx(it->second).epsilon(1e-12));
        ++it;
    }
}

TEST_CASE("fixed point of the branching recursion via two samples") {
    const auto pp = lawlib::gw_two_point_pp(1, 2, 0.5, 0.0, 1.0);
    const auto rep = check_fixpoint(pp, 2, 2, 4000, kKey, kCaps);
    CHECK(rep.pass);
    CHECK(rep.ks_distance <= rep.ks_critical);

    // the deterministic law collapses both sides to the constant 1
    const auto bin = lawlib::deterministic_binary_pp();
    const auto rep2 = check_fixpoint(bin, 2, 2, 256, kKey, kCaps);
    CHECK(rep2.ks_distance == 0.0);
}

TEST_CASE("size-biased pick of generation weights matches the product law") {
    // weighted empirical distribution of log L(v) over generation n versus
    // independent products of the induced ratio law (random-displacement law
    // so the comparison is not a point mass)
    const auto pp = lawlib::heavy_w1_pp(3.0, 4);
    const uint32_t n = 2;
    const uint64_t reps = 8000;
    std::vector<std::pair<double, double>> weighted;  // (log L, weight)
    for (uint64_t i = 0; i < reps; ++i) {
        Generation g = root_generation();
        for (uint32_t k = 0; k < n && g.pop() > 0; ++k)
            g = grow(g, pp, kKey, i, kCaps);
        for (size_t v = 0; v < g.pop(); ++v)
            weighted.emplace_back(g.logw[v], g.linw[v]);
    }
    // product side: n independent draws of the induced ratio law, which for
    // this process is exp(P)/fanout with P the log-Pareto driver
    std::vector<double> products;
    const rng::Key pk = rng::fold_key(kKey, 77);
    for (uint64_t i = 0; i < 20000; ++i) {
        auto rs = rng::make_stream(pk, rng::Domain::law_aux, i);
        double logpi = 0;
        for (uint32_t k = 0; k < n; ++k) {
            const double p = std::pow(rs.next_u01(), -1.0 / 3.0);
            logpi += p - std::log(4.0);
        }
        products.push_back(logpi);
    }
    std::sort(products.begin(), products.end());
    std::sort(weighted.begin(), weighted.end());
    double wtot = 0;
    for (const auto& [lw, wt] : weighted) wtot += wt;
    // normalize by the replicate count: the weighted mass per tree is W_n
    // with mean one, so the weighted CDF estimates the product CDF
    double cum = 0;
    size_t pi = 0;
    for (size_t i = 0; i < weighted.size(); ++i) {
        cum += weighted[i].second;
        const double frac = cum / wtot;
        if (i + 1 < weighted.size() &&
            weighted[i + 1].first == weighted[i].first)
            continue;
        while (pi < products.size() && products[pi] <= weighted[i].first) ++pi;
        const double prod_cdf = double(pi) / double(products.size());
        if (frac > 0.05 && frac < 0.95)
            CHECK(std::fabs(frac - prod_cdf) <= 0.05);
    }
}
