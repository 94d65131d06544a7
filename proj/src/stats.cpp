#include "perpetua/stats.hpp"

#include "perpetua/mathutil.hpp"
#include "perpetua/parallel.hpp"

#include <algorithm>
#include <cmath>

namespace perpetua::stats {

namespace {

struct JointAtom {
    double pi, z, p;
};

// merge joint atoms equal in both coordinates up to the standard tolerance
void merge_joint(std::vector<JointAtom>& atoms) {
    std::sort(atoms.begin(), atoms.end(), [](const JointAtom& a,
                                             const JointAtom& b) {
        return a.pi != b.pi ? a.pi < b.pi : a.z < b.z;
    });
    std::vector<JointAtom> merged;
    merged.reserve(atoms.size());
    constexpr double tol = DiscreteLaw::kMergeTol;
    for (const auto& a : atoms) {
        if (!merged.empty()) {
            auto& last = merged.back();
            const double spi = std::max({1.0, std::fabs(last.pi), std::fabs(a.pi)});
            const double sz = std::max({1.0, std::fabs(last.z), std::fabs(a.z)});
            if (a.pi - last.pi <= tol * spi && std::fabs(a.z - last.z) <= tol * sz) {
                const double m = last.p + a.p;
                last.pi = (last.pi * last.p + a.pi * a.p) / m;
                last.z = (last.z * last.p + a.z * a.p) / m;
                last.p = m;
                continue;
            }
        }
        merged.push_back(a);
    }
    atoms = std::move(merged);
}

}  // namespace

ExactZn dp_exact_zn(const lawlib::MQLaw& law, uint32_t n, size_t support_cap) {
    if (!law.support)
        throw NotEnumerable("exact convolution needs a finite-support law");
    const auto& sup = *law.support;
    std::vector<JointAtom> state{{1.0, 0.0, 1.0}};
    for (uint32_t k = 0; k < n; ++k) {
        std::vector<JointAtom> next;
        next.reserve(state.size() * sup.size());
        for (const auto& st : state)
            for (const auto& a : sup)
                next.push_back({st.pi * a.m, st.z + st.pi * a.q, st.p * a.p});
        merge_joint(next);
        if (next.size() > support_cap)
            throw SupportExplosion("joint support exceeded cap at step " +
                                   std::to_string(k + 1));
        state = std::move(next);
    }
    std::vector<Atom> z_atoms, pi_atoms;
    z_atoms.reserve(state.size());
    pi_atoms.reserve(state.size());
    for (const auto& st : state) {
        z_atoms.push_back({st.z, st.p});
        pi_atoms.push_back({st.pi, st.p});
    }
    ExactZn out;
    out.z = DiscreteLaw::from_atoms(std::move(z_atoms));
    out.pi = DiscreteLaw::from_atoms(std::move(pi_atoms));
    return out;
}

EstimateReport mc_mean(const std::function<double(rng::Stream&)>& sampler,
                       uint64_t reps, rng::Key key, rng::Domain domain,
                       double confidence, int threads, std::string law_id,
                       std::string tag, uint64_t seed) {
    if (reps < 2) throw Error("mc_mean needs reps >= 2");
    const size_t nblocks = (reps + par::kDefaultBlock - 1) / par::kDefaultBlock;
    std::vector<Moments> blocks(nblocks);
    par::parallel_blocks(reps, par::kDefaultBlock, threads,
                         [&](size_t bi, uint64_t b, uint64_t e) {
                             Moments mm;
                             for (uint64_t i = b; i < e; ++i) {
                                 auto rs = rng::make_stream(key, domain, i);
                                 mm.add(sampler(rs));
                             }
                             blocks[bi] = mm;
                         });
    Moments all;
    for (const auto& b : blocks) all.merge(b);
    return make_report(all, confidence, seed, std::move(law_id), std::move(tag));
}

std::vector<CurvePoint> tail_curve(std::span<const double> samples,
                                   std::span<const double> t_grid,
                                   double confidence) {
    std::vector<double> sorted(samples.begin(), samples.end());
    std::sort(sorted.begin(), sorted.end());
    const double z = mathutil::z_value(confidence);
    std::vector<CurvePoint> out;
    out.reserve(t_grid.size());
    for (const double t : t_grid) {
        CurvePoint p;
        p.t = t;
        p.n = sorted.size();
        const auto it = std::upper_bound(sorted.begin(), sorted.end(), t);
        p.hits = static_cast<uint64_t>(sorted.end() - it);
        p.estimate = static_cast<double>(p.hits) / static_cast<double>(p.n);
        const auto [lo, hi] = mathutil::wilson_interval(p.hits, p.n, z);
        p.lo = lo;
        p.hi = hi;
        out.push_back(p);
    }
    return out;
}

InequalityReport inequality_check_ci(const std::vector<CurvePoint>& lhs,
                                     const std::vector<CurvePoint>& rhs,
                                     double constant, double slack) {
    if (lhs.size() != rhs.size())
        throw Error("inequality check needs a common grid");
    InequalityReport rep;
    rep.rule = "lhs_up <= " + std::to_string(constant) + " * rhs_lo + slack";
    rep.pass = true;
    for (size_t i = 0; i < lhs.size(); ++i) {
        InequalityPoint p;
        p.t = lhs[i].t;
        p.lhs_up = lhs[i].hi;
        p.rhs_lo = rhs[i].lo;
        p.ratio_pt = rhs[i].estimate > 0 ? lhs[i].estimate / rhs[i].estimate
                                         : 0.0;
        p.pass = p.lhs_up <= constant * p.rhs_lo + slack;
        rep.best_constant = std::max(rep.best_constant, p.ratio_pt);
        rep.pass = rep.pass && p.pass;
        rep.points.push_back(p);
    }
    return rep;
}

InequalityReport inequality_check_ratio(const std::vector<CurvePoint>& num,
                                        const std::vector<CurvePoint>& den,
                                        double cap, double tail_factor) {
    if (num.size() != den.size())
        throw Error("inequality check needs a common grid");
    // Deep-tail points carry no Monte Carlo information: with fewer than
    // kMinHits reference hits a point is vacuous unless the numerator alone
    // confidently violates the capped bound.
    constexpr uint64_t kMinHits = 10;
    InequalityReport rep;
    rep.rule = "ratio bounded by " + std::to_string(cap) +
               ", stable tail (factor " + std::to_string(tail_factor) +
               "), sparse points vacuous below " + std::to_string(kMinHits) +
               " reference hits";
    rep.pass = true;
    std::vector<double> certified_ratios;
    double last_certified_up = 0;
    for (size_t i = 0; i < num.size(); ++i) {
        InequalityPoint p;
        p.t = num[i].t;
        p.lhs_up = num[i].hi;
        p.rhs_lo = den[i].lo;
        if (den[i].hits < kMinHits) {
            p.pass = !(num[i].lo > cap * den[i].hi);
        } else {
            p.ratio_pt = num[i].estimate / den[i].estimate;
            p.ratio_up = p.lhs_up / std::max(p.rhs_lo, 1e-300);
            p.pass = p.ratio_up <= cap;
            rep.best_constant = std::max(rep.best_constant, p.ratio_pt);
            certified_ratios.push_back(p.ratio_pt);
            last_certified_up = p.ratio_up;
        }
        rep.pass = rep.pass && p.pass;
        rep.points.push_back(p);
    }
    if (rep.pass && !certified_ratios.empty()) {
        std::vector<double> sorted = certified_ratios;
        std::sort(sorted.begin(), sorted.end());
        const double median = sorted[sorted.size() / 2];
        if (last_certified_up > tail_factor * std::max(1.0, median))
            rep.pass = false;
    }
    if (certified_ratios.empty()) rep.pass = false;  // nothing certified
    return rep;
}

const char* to_string(GrowthVerdict v) {
    switch (v) {
        case GrowthVerdict::converging: return "converging";
        case GrowthVerdict::diverging: return "diverging";
        case GrowthVerdict::inconclusive: return "inconclusive";
    }
    return "?";
}

GrowthTrace moment_growth_diagnostic(
    const std::function<double(rng::Stream&)>& sampler, rng::Key key,
    int log2_start, int log2_end, rng::Domain domain, int threads) {
    if (log2_start < 12 || log2_end <= log2_start)
        throw Error("growth diagnostic needs 12 <= log2_start < log2_end");
    const uint64_t block = 4096;  // 2^12, so checkpoints align with blocks
    const uint64_t total = 1ull << log2_end;
    const size_t nblocks = static_cast<size_t>(total / block);
    std::vector<Moments> blocks(nblocks);
    std::vector<double> block_max(nblocks, 0.0);
    par::parallel_blocks(total, block, threads,
                         [&](size_t bi, uint64_t b, uint64_t e) {
                             Moments mm;
                             double mx = 0.0;
                             for (uint64_t i = b; i < e; ++i) {
                                 auto rs = rng::make_stream(key, domain, i);
                                 const double v = sampler(rs);
                                 mm.add(v);
                                 mx = std::max(mx, v);
                             }
                             blocks[bi] = mm;
                             block_max[bi] = mx;
                         });
    GrowthTrace trace;
    Moments acc;
    double running_max = 0.0;
    size_t next_block = 0;
    for (int p = log2_start; p <= log2_end; ++p) {
        const size_t upto = static_cast<size_t>((1ull << p) / block);
        while (next_block < upto) {
            running_max = std::max(running_max, block_max[next_block]);
            acc.merge(blocks[next_block++]);
        }
        trace.checkpoints.push_back(1ull << p);
        trace.means.push_back(acc.mean);
        const double sum = acc.mean * static_cast<double>(acc.n);
        trace.max_share.push_back(sum > 0 ? running_max / sum : 0.0);
    }
    const size_t m = trace.means.size();
    if (m >= 4) {
        // the share signal: max/sum vanishes iff the mean is finite, so a
        // persistent share is the divergence witness while the mean-trace
        // thresholds grade the trend (calibrated on the stock boundary laws)
        constexpr double kShareCut = 0.07;
        const double share = trace.max_share[m - 1];
        const double g3 = trace.means[m - 4] > 0
                              ? trace.means[m - 1] / trace.means[m - 4]
                              : std::numeric_limits<double>::infinity();
        const double gf = trace.means[0] > 0
                              ? trace.means[m - 1] / trace.means[0]
                              : std::numeric_limits<double>::infinity();
        const bool conv = share < kShareCut && std::fabs(g3 - 1.0) < 0.15;
        const bool div =
            share > kShareCut &&
            (gf > 1.25 * 1.25 * 1.25 || g3 > 1.25 * 1.25 * 1.25 ||
             trace.means[m - 1] > trace.means[0]);
        trace.verdict = conv ? GrowthVerdict::converging
                             : (div ? GrowthVerdict::diverging
                                    : GrowthVerdict::inconclusive);
    }
    return trace;
}

double ks_distance_to_discrete(std::vector<double> samples,
                               const DiscreteLaw& law) {
    std::sort(samples.begin(), samples.end());
    const double n = static_cast<double>(samples.size());
    double cum = 0, d = 0;
    for (const auto& a : law.atoms()) {
        // samples within the support-merging tolerance of an atom belong to
        // it: simulated values can sit a few ulps off the convolution value
        const double delta =
            DiscreteLaw::kMergeTol * std::max(1.0, std::fabs(a.value));
        const double f_minus = cum;
        cum += a.mass;
        const double f_v = cum;
        const double fhat_minus =
            static_cast<double>(std::lower_bound(samples.begin(),
                                                 samples.end(),
                                                 a.value - delta) -
                                samples.begin()) /
            n;
        const double fhat_v =
            static_cast<double>(std::upper_bound(samples.begin(),
                                                 samples.end(),
                                                 a.value + delta) -
                                samples.begin()) /
            n;
        d = std::max({d, std::fabs(fhat_minus - f_minus),
                      std::fabs(fhat_v - f_v)});
    }
    return d;
}

UiSignals uniform_integrability_check(const lawlib::PointProcessLaw& pp,
                                      uint64_t reps, rng::Key key,
                                      const brwsim::BrwCaps& caps,
                                      uint32_t w_horizon, int threads) {
    UiSignals sig;
    const uint32_t horizon =
        w_horizon == 0 ? caps.gen_cap : std::min(w_horizon, caps.gen_cap);

    // signal 1: mean weight at the horizon
    const rng::Key key_w = rng::fold_key(key, 11);
    const size_t nblocks = (reps + par::kDefaultBlock - 1) / par::kDefaultBlock;
    std::vector<Moments> blocks(nblocks);
    std::vector<uint64_t> capped(nblocks, 0);
    par::parallel_blocks(
        reps, par::kDefaultBlock, threads, [&](size_t bi, uint64_t b, uint64_t e) {
            Moments mm;
            uint64_t c = 0;
            for (uint64_t i = b; i < e; ++i) {
                const auto t =
                    brwsim::martingale_trajectory(pp, horizon, key_w, i, caps);
                if (t.capped) {
                    ++c;
                    mm.add(t.w.back());
                } else {
                    mm.add(t.w[horizon]);
                }
            }
            blocks[bi] = mm;
            capped[bi] = c;
        });
    Moments wall;
    for (size_t i = 0; i < nblocks; ++i) {
        wall.merge(blocks[i]);
        sig.capped_trajectories += capped[i];
    }
    sig.w_mean_at_horizon = make_report(wall, 0.99, 0, pp.id, "w_at_horizon");
    sig.w_mean_near_one =
        std::fabs(sig.w_mean_at_horizon.estimate - 1.0) <=
        3.0 * std::max(sig.w_mean_at_horizon.std_error, 1e-12);

    // signal 2: do the spine products vanish? (classification of the
    // induced weight-ratio law)
    lawlib::AEvaluator a_eval = lawlib::AEvaluator::closed_form(
        [](double) { return 0.0; }, 0.0);
    if (pp.enumerable()) {
        const auto mlaw = lawlib::induced_m_law(pp);
        double elog = 0, plt = 0;
        std::vector<Atom> atoms = mlaw.atoms();
        for (const auto& a : atoms) {
            elog += a.mass * std::log(a.value);
            if (a.value < 1.0) plt += a.mass;
        }
        sig.pi_to_zero_positive = elog < 0;
        sig.pi_evidence = "E log M = " + std::to_string(elog) + " (exact)";
        a_eval = lawlib::AEvaluator::closed_form(
            [atoms](double x) {
                double s = 0;
                for (const auto& a : atoms)
                    s += a.mass *
                         std::min(std::max(-std::log(a.value), 0.0), x);
                return s;
            },
            plt);
    } else {
        sig.empirical_m_evidence = true;
        const auto samples = lawlib::induced_m_weighted_samples(
            pp, 1 << 17, rng::fold_key(key, 13));
        double wsum = 0, wlog = 0, wlog2 = 0;
        std::vector<std::pair<double, double>> neglog;
        neglog.reserve(samples.size());
        for (const auto& [v, w] : samples) {
            const double l = std::log(v);
            wsum += w;
            wlog += w * l;
            wlog2 += w * l * l;
            neglog.emplace_back(-l, w);
        }
        const double mean = wlog / wsum;
        const double var = std::max(0.0, wlog2 / wsum - mean * mean);
        const double se =
            std::sqrt(var / static_cast<double>(samples.size()));
        sig.pi_to_zero_positive = mean + 3.0 * se < 0.0;
        sig.pi_evidence =
            "weighted E log M = " + std::to_string(mean) + " +- " +
            std::to_string(se) + " (empirical)";
        a_eval = lawlib::AEvaluator::empirical_weighted(std::move(neglog));
    }

    // signal 3: growth of W_1 J(log+ W_1)
    const rng::Key key_j = rng::fold_key(key, 17);
    auto a_copy = a_eval;
    sig.j_moment = moment_growth_diagnostic(
        [&pp, a_copy](rng::Stream& rs) {
            const double w1 = lawlib::sample_w1(pp, rs);
            if (w1 <= 1.0) return 0.0;
            const double lw = std::log(w1);
            return w1 * a_copy.J(lw);
        },
        key_j, 12, 20, rng::Domain::diag, threads);

    sig.expect_ui = sig.pi_to_zero_positive &&
                    sig.j_moment.verdict == GrowthVerdict::converging;
    sig.summary = std::string("w_mean_near_one=") +
                  (sig.w_mean_near_one ? "yes" : "no") +
                  ", pi_to_zero=" + (sig.pi_to_zero_positive ? "yes" : "no") +
                  ", j_moment=" + to_string(sig.j_moment.verdict);
    return sig;
}

}  // namespace perpetua::stats
