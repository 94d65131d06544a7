#include "perpetua/spinesim.hpp"

#include "perpetua/parallel.hpp"

#include <algorithm>
#include <cmath>

namespace perpetua::spinesim {

namespace {

// size-biased child pick within a configuration: probability proportional
// to e^{gamma x}
size_t pick_child(const std::vector<double>& xs, double gamma,
                  rng::Stream& rs) {
    if (xs.size() == 1) {
        (void)rs.next_u01();  // keep draw counts uniform across configs
        return 0;
    }
    double total = 0;
    for (const double x : xs) total += std::exp(gamma * x);
    const double u = rs.next_u01() * total;
    double cum = 0;
    for (size_t j = 0; j + 1 < xs.size(); ++j) {
        cum += std::exp(gamma * xs[j]);
        if (u < cum) return j;
    }
    return xs.size() - 1;
}

SpineStepDraw finish_draw(std::vector<double> xs, double gamma, double m_gamma,
                          double weight, rng::Stream& rs) {
    SpineStepDraw d;
    d.xs = std::move(xs);
    d.importance_weight = weight;
    d.child = pick_child(d.xs, gamma, rs);
    d.m = lawlib::child_weight(gamma, d.xs[d.child], m_gamma);
    // Q = M + sum of sibling ratios, folded in index order
    double q = d.m;
    for (size_t j = 0; j < d.xs.size(); ++j)
        if (j != d.child) q += lawlib::child_weight(gamma, d.xs[j], m_gamma);
    d.q = q;
    return d;
}

struct PreparedTilt {
    std::vector<std::vector<double>> configs;
    std::vector<double> cum;
};

PreparedTilt prepare_exact_tilt(const lawlib::PointProcessLaw& pp) {
    if (!pp.enumerable())
        throw UnsupportedTilting(
            "spine steps need an enumerable point process in exact mode");
    const auto tilted = lawlib::tilted_reproduction_law(pp);
    PreparedTilt pt;
    double s = 0;
    for (const auto& cfg : *tilted.enumerated) {
        pt.configs.push_back(cfg.xs);
        s += cfg.p;
        pt.cum.push_back(s);
    }
    return pt;
}

size_t pick_config(const PreparedTilt& pt, rng::Stream& rs) {
    const double u = rs.next_u01() * pt.cum.back();
    const auto it = std::lower_bound(pt.cum.begin(), pt.cum.end(), u);
    return std::min(static_cast<size_t>(it - pt.cum.begin()),
                    pt.configs.size() - 1);
}

}  // namespace

SpineStepDraw spine_step(const lawlib::PointProcessLaw& pp, rng::Stream& rs) {
    const PreparedTilt pt = prepare_exact_tilt(pp);
    auto xs = pt.configs[pick_config(pt, rs)];
    return finish_draw(std::move(xs), pp.gamma, pp.m_gamma(), 1.0, rs);
}

SpineStepDraw spine_step_importance(const lawlib::PointProcessLaw& pp,
                                    rng::Stream& rs) {
    auto wc = lawlib::sample_tilted_importance(pp, rs);
    if (wc.xs.empty()) {
        // zero tilted mass: a dead path, carried with weight 0 so the
        // importance estimators stay unbiased
        SpineStepDraw d;
        d.importance_weight = 0.0;
        return d;
    }
    return finish_draw(std::move(wc.xs), pp.gamma, pp.m_gamma(), wc.weight, rs);
}

SpinePath simulate_what(const lawlib::PointProcessLaw& pp, uint32_t n,
                        rng::Key key, uint64_t replicate,
                        const brwsim::BrwCaps& caps, TiltPolicy policy) {
    SpinePath path;
    path.n = n;
    path.law_id = pp.id;
    path.steps.reserve(n);
    if (caps.gen_cap < n)
        throw Error("spine horizon exceeds the generation cap");

    const double gamma = pp.gamma;
    const double m_gamma = pp.m_gamma();
    const double logm = std::log(m_gamma);

    PreparedTilt pt;
    if (policy == TiltPolicy::exact) pt = prepare_exact_tilt(pp);

    double pi = 1.0, logw = 0.0;
    bool dead = false;
    for (uint32_t k = 1; k <= n; ++k) {
        auto rs = rng::make_stream(key, rng::Domain::spine, replicate, k);
        SpineStepDraw draw;
        if (dead) {
            draw.m = 1.0;  // filler steps on a dead importance path
            draw.q = 1.0;
            draw.xs = {0.0};
        } else if (policy == TiltPolicy::exact) {
            auto xs = pt.configs[pick_config(pt, rs)];
            draw = finish_draw(std::move(xs), gamma, m_gamma, 1.0, rs);
        } else {
            draw = spine_step_importance(pp, rs);
            path.weight *= draw.importance_weight;
            if (draw.importance_weight == 0.0) {
                dead = true;
                draw.m = 1.0;
                draw.q = 1.0;
                draw.xs = {0.0};
                draw.child = 0;
            }
        }
        SpineStep step;
        step.m = draw.m;
        step.q = draw.q;
        const double logw_prev = logw;
        pi *= draw.m;
        if (!dead) logw += gamma * draw.xs[draw.child] - logm;
        step.pi = pi;
        step.logw = logw;
        if (!dead) {
            uint32_t sib_index = 0;
            for (size_t j = 0; j < draw.xs.size(); ++j) {
                if (j == draw.child) continue;
                SiblingRecord rec;
                rec.ratio = lawlib::child_weight(gamma, draw.xs[j], m_gamma);
                rec.logw_abs = logw_prev + (gamma * draw.xs[j] - logm);
                if (sib_index >= (1u << 12))
                    throw Error("spine: sibling index out of key range");
                const uint64_t salt = (replicate << 18) |
                                      (static_cast<uint64_t>(k) << 12) |
                                      (static_cast<uint64_t>(sib_index) + 1);
                const rng::Key sib_key = rng::fold_key(key, salt);
                auto traj =
                    brwsim::martingale_trajectory(pp, n - k, sib_key, 0, caps);
                rec.capped = traj.capped;
                if (traj.capped) path.capped = true;
                rec.subtree_w = std::move(traj.w);
                // a capped subtree keeps its last level value as a stand-in
                while (rec.subtree_w.size() < static_cast<size_t>(n - k) + 1)
                    rec.subtree_w.push_back(rec.subtree_w.back());
                step.siblings.push_back(std::move(rec));
                ++sib_index;
            }
        }
        path.steps.push_back(std::move(step));
    }

    // assemble \hat W_j for every horizon j <= n in a fixed fold order
    path.what.resize(n + 1);
    for (uint32_t j = 0; j <= n; ++j) {
        double v = j == 0 ? 1.0 : path.steps[j - 1].pi;
        for (uint32_t k = 1; k <= j; ++k) {
            const double pik1 = k == 1 ? 1.0 : path.steps[k - 2].pi;
            for (const auto& sib : path.steps[k - 1].siblings)
                v += pik1 * sib.ratio * sib.subtree_w[j - k];
        }
        path.what[j] = v;
    }
    return path;
}

SpineResiduals verify_spine_identity(const SpinePath& path) {
    SpineResiduals r;
    const uint32_t n = path.n;
    r.what = path.what[n];

    double decomp = n == 0 ? 1.0 : path.steps[n - 1].pi;
    for (uint32_t k = 1; k <= n; ++k) {
        const double pik1 = k == 1 ? 1.0 : path.steps[k - 2].pi;
        for (const auto& sib : path.steps[k - 1].siblings)
            decomp += pik1 * sib.ratio * sib.subtree_w[n - k];
    }
    r.decomposition = std::fabs(path.what[n] - decomp);

    double closed = n == 0 ? 1.0 : path.steps[n - 1].pi;
    double paper = 1.0;
    for (uint32_t k = 1; k <= n; ++k) {
        const double pik1 = k == 1 ? 1.0 : path.steps[k - 2].pi;
        const double pik = path.steps[k - 1].pi;
        double rnk = 0;
        for (const auto& sib : path.steps[k - 1].siblings)
            rnk += sib.ratio * (sib.subtree_w[n - k] - 1.0);
        closed += (pik1 * path.steps[k - 1].q - pik) + pik1 * rnk;
        paper += pik1 * (path.steps[k - 1].q + rnk);
    }
    r.closed_form = std::fabs(path.what[n] - closed);
    r.paper_form = std::fabs(path.what[n] - paper);
    return r;
}

TwoEstimates size_biasing_check(
    const lawlib::PointProcessLaw& pp, uint32_t n,
    const std::function<double(std::span<const double>)>& h, uint64_t reps,
    rng::Key key, const brwsim::BrwCaps& caps, double confidence,
    int threads) {
    const rng::Key key_lhs = rng::fold_key(key, 101);
    const rng::Key key_rhs = rng::fold_key(key, 202);
    const size_t nblocks = (reps + par::kDefaultBlock - 1) / par::kDefaultBlock;
    std::vector<Moments> ml(nblocks), mr(nblocks);
    par::parallel_blocks(
        reps, par::kDefaultBlock, threads, [&](size_t bi, uint64_t b, uint64_t e) {
            Moments bl, br;
            for (uint64_t i = b; i < e; ++i) {
                const auto traj =
                    brwsim::martingale_trajectory(pp, n, key_lhs, i, caps);
                bl.add(traj.w[n] * h(traj.w));
                const auto sp = simulate_what(pp, n, key_rhs, i, caps);
                br.add(sp.weight * h(sp.what));
            }
            ml[bi] = bl;
            mr[bi] = br;
        });
    Moments lall, rall;
    for (size_t i = 0; i < nblocks; ++i) {
        lall.merge(ml[i]);
        rall.merge(mr[i]);
    }
    TwoEstimates out;
    out.lhs = make_report(lall, confidence, 0, pp.id, "size_bias_lhs");
    out.rhs = make_report(rall, confidence, 0, pp.id, "size_bias_rhs");
    out.combined_se = std::sqrt(lall.std_error() * lall.std_error() +
                                rall.std_error() * rall.std_error());
    out.pass =
        std::fabs(out.lhs.estimate - out.rhs.estimate) <= 3.0 * out.combined_se;
    return out;
}

std::vector<EstimateReport> reciprocal_martingale_check(
    const lawlib::PointProcessLaw& pp, uint32_t n_max, uint64_t reps,
    rng::Key key, const brwsim::BrwCaps& caps, double confidence,
    int threads) {
    const size_t nblocks = (reps + par::kDefaultBlock - 1) / par::kDefaultBlock;
    std::vector<std::vector<Moments>> blocks(nblocks,
                                             std::vector<Moments>(n_max + 1));
    par::parallel_blocks(
        reps, par::kDefaultBlock, threads, [&](size_t bi, uint64_t b, uint64_t e) {
            std::vector<Moments> acc(n_max + 1);
            for (uint64_t i = b; i < e; ++i) {
                const auto sp = simulate_what(pp, n_max, key, i, caps);
                for (uint32_t j = 0; j <= n_max; ++j)
                    acc[j].add(sp.weight / sp.what[j]);
            }
            blocks[bi] = std::move(acc);
        });
    std::vector<EstimateReport> out;
    out.reserve(n_max + 1);
    for (uint32_t j = 0; j <= n_max; ++j) {
        Moments all;
        for (size_t bi = 0; bi < nblocks; ++bi) all.merge(blocks[bi][j]);
        out.push_back(make_report(all, confidence, 0, pp.id,
                                  "reciprocal_n=" + std::to_string(j)));
    }
    return out;
}

}  // namespace perpetua::spinesim
