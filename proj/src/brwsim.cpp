#include "perpetua/brwsim.hpp"

#include "perpetua/kernels.hpp"
#include "perpetua/mathutil.hpp"
#include "perpetua/parallel.hpp"

#include <algorithm>
#include <cmath>

namespace perpetua::brwsim {

double Generation::wn() const {
    return kern::active().striped_sum(linw.data(), linw.size());
}

std::pair<double, double> Generation::logw_range() const {
    if (logw.empty()) return {0.0, 0.0};
    double mn, mx;
    kern::active().minmax(logw.data(), logw.size(), &mn, &mx);
    return {mn, mx};
}

Generation root_generation() {
    Generation g;
    g.pos = {0.0};
    g.logw = {0.0};
    g.linw = {1.0};
    g.n = 0;
    return g;
}

Generation grow(const Generation& gen, const lawlib::PointProcessLaw& pp,
                rng::Key key, uint64_t replicate, const BrwCaps& caps) {
    if (gen.n >= caps.gen_cap)
        throw Error("grow: generation cap reached");
    Generation next;
    next.n = gen.n + 1;
    if (gen.pop() == 0) return next;  // extinct stays extinct

    const double m = pp.m_gamma();
    const double gamma = pp.gamma;
    const double logm = std::log(m);

    if (pp.fixed_displacement && pp.sample_count) {
        const double x0 = pp.displacement;
        const double step = lawlib::child_weight(gamma, x0, m);
        const double dlog = gamma * x0 - logm;
        const size_t parents = gen.pop();
        std::vector<uint32_t> counts(parents);
        size_t total = 0;
        for (size_t i = 0; i < parents; ++i) {
            auto rs = rng::make_stream(key, rng::Domain::brw_growth, replicate,
                                       gen.n, i);
            counts[i] = static_cast<uint32_t>(pp.sample_count(rs));
            total += counts[i];
        }
        if (total > caps.pop_cap)
            throw PopulationExplosion("population " + std::to_string(total) +
                                      " exceeds cap");
        next.pos.resize(total);
        next.logw.resize(total);
        next.linw.resize(total);
        size_t ofs = 0;
        for (size_t i = 0; i < parents; ++i)
            for (uint32_t j = 0; j < counts[i]; ++j) {
                next.pos[ofs] = gen.pos[i];
                next.logw[ofs] = gen.logw[i];
                next.linw[ofs] = gen.linw[i];
                ++ofs;
            }
        const auto& k = kern::active();
        k.axpb(next.pos.data(), 1.0, x0, next.pos.data(), total);
        k.axpb(next.logw.data(), 1.0, dlog, next.logw.data(), total);
        k.axpb(next.linw.data(), step, 0.0, next.linw.data(), total);
        return next;
    }

    const size_t parents = gen.pop();
    next.pos.reserve(parents * 2);
    next.logw.reserve(parents * 2);
    next.linw.reserve(parents * 2);
    for (size_t i = 0; i < parents; ++i) {
        auto rs = rng::make_stream(key, rng::Domain::brw_growth, replicate,
                                   gen.n, i);
        const auto xs = pp.sample(rs);
        if (next.pop() + xs.size() > caps.pop_cap)
            throw PopulationExplosion("population exceeds cap");
        for (const double x : xs) {
            next.pos.push_back(gen.pos[i] + x);
            next.logw.push_back(gen.logw[i] + (gamma * x - logm));
            next.linw.push_back(gen.linw[i] *
                                lawlib::child_weight(gamma, x, m));
        }
    }
    return next;
}

Trajectory martingale_trajectory(const lawlib::PointProcessLaw& pp,
                                 uint32_t n_max, rng::Key key,
                                 uint64_t replicate, const BrwCaps& caps) {
    Trajectory t;
    const uint32_t horizon = std::min(n_max, caps.gen_cap);
    t.w.reserve(horizon + 1);
    Generation g = root_generation();
    t.w.push_back(g.wn());
    for (uint32_t k = 1; k <= horizon; ++k) {
        try {
            g = grow(g, pp, key, replicate, caps);
        } catch (const PopulationExplosion&) {
            t.capped = true;
            t.gens = k - 1;
            return t;
        }
        if (g.pop() == 0) {
            t.extinct = true;
            t.gens = k;
            // extinct: the martingale is zero from here on
            while (t.w.size() <= horizon) t.w.push_back(0.0);
            return t;
        }
        t.w.push_back(g.wn());
    }
    t.gens = horizon;
    return t;
}

std::vector<double> running_max(std::span<const double> w) {
    std::vector<double> out;
    out.reserve(w.size());
    double mx = -std::numeric_limits<double>::infinity();
    for (const double v : w) {
        mx = std::max(mx, v);
        out.push_back(mx);
    }
    return out;
}

FixpointReport check_fixpoint(const lawlib::PointProcessLaw& pp, uint32_t n,
                              uint32_t m, uint64_t reps, rng::Key key,
                              const BrwCaps& caps, double alpha, int threads) {
    const rng::Key key_a = rng::fold_key(key, 1);
    const rng::Key key_b = rng::fold_key(key, 2);
    std::vector<double> direct(reps), composed(reps);
    par::parallel_blocks(
        reps, par::kDefaultBlock, threads, [&](size_t, uint64_t b, uint64_t e) {
            for (uint64_t i = b; i < e; ++i) {
                direct[i] = martingale_trajectory(pp, n + m, key_a, i, caps)
                                .w[n + m];
                Generation g = root_generation();
                for (uint32_t k = 0; k < n && g.pop() > 0; ++k)
                    g = grow(g, pp, key_b, i, caps);
                if (g.pop() == 0) {
                    composed[i] = 0.0;
                    continue;
                }
                std::vector<double> vals(g.pop());
                for (size_t v = 0; v < g.pop(); ++v) {
                    const rng::Key kv =
                        rng::fold_key(key_b, (i << 24) | (v + 1));
                    vals[v] =
                        g.linw[v] *
                        martingale_trajectory(pp, m, kv, 0, caps).w[m];
                }
                composed[i] =
                    kern::active().striped_sum(vals.data(), vals.size());
            }
        });
    std::sort(direct.begin(), direct.end());
    std::sort(composed.begin(), composed.end());
    FixpointReport rep;
    rep.n_samples = reps;
    rep.ks_distance = mathutil::ks_two_sample_sorted(direct, composed);
    rep.ks_critical = mathutil::ks_critical_two_sample(alpha, reps, reps);
    rep.pass = rep.ks_distance <= rep.ks_critical;
    return rep;
}

}  // namespace perpetua::brwsim
