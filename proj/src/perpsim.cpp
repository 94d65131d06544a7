#include "perpetua/perpsim.hpp"

#include "perpetua/parallel.hpp"

#include <algorithm>
#include <cmath>

namespace perpetua::perpsim {

namespace {

constexpr double kLogUnderflow = -745.0;  // below the smallest subnormal
constexpr double kLogSafeDirect = 700.0;  // exp(-s) still normal

// signed increment Pi_{k-1} Q_k from the log-safe state
double increment_from_state(double s_prev, int sign_prev, double q,
                            bool* underflow) {
    *underflow = false;
    if (q == 0.0) return 0.0;
    if (s_prev <= kLogSafeDirect) return sign_prev * std::exp(-s_prev) * q;
    const double logmag = -s_prev + std::log(std::fabs(q));
    if (logmag < kLogUnderflow) {
        *underflow = true;
        return 0.0;
    }
    const double mag = std::exp(logmag);
    return (q < 0) == (sign_prev < 0) ? mag : -mag;
}

}  // namespace

PerpetuityPath simulate_path(const lawlib::MQLaw& law, size_t n,
                             rng::Stream& rs) {
    PerpetuityPath p;
    p.law_id = law.id;
    p.stream_id = rs.id();
    p.m.reserve(n);
    p.q.reserve(n);
    p.s.reserve(n + 1);
    p.sign.reserve(n + 1);
    p.z.reserve(n + 1);
    p.s.push_back(0.0);
    p.sign.push_back(1);
    p.z.push_back(0.0);
    for (size_t k = 1; k <= n; ++k) {
        const auto [m, q] = lawlib::sample_mq(law, rs);
        p.m.push_back(m);
        p.q.push_back(q);
        bool uf = false;
        const double inc = increment_from_state(p.s[k - 1], p.sign[k - 1], q, &uf);
        if (uf) p.underflow_steps.push_back(static_cast<uint32_t>(k));
        p.z.push_back(p.z[k - 1] + inc);
        p.s.push_back(p.s[k - 1] - std::log(std::fabs(m)));
        p.sign.push_back(static_cast<int8_t>(m < 0 ? -p.sign[k - 1]
                                                   : p.sign[k - 1]));
    }
    return p;
}

std::optional<double> degenerate_fixed_point(const lawlib::MQLaw& law) {
    if (!law.support) return std::nullopt;
    const auto& atoms = *law.support;
    double c = 0;
    bool have_c = false;
    for (const auto& a : atoms) {
        if (a.m == 1.0) {
            if (a.q != 0.0) return std::nullopt;
            continue;
        }
        const double cand = a.q / (1.0 - a.m);
        if (!have_c) {
            c = cand;
            have_c = true;
        }
    }
    if (!have_c) return std::nullopt;
    for (const auto& a : atoms)
        if (a.q + a.m * c != c) return std::nullopt;
    return c;
}

ZinfResult simulate_zinf(const lawlib::MQLaw& law, const ZinfPolicy& policy,
                         rng::Stream& rs) {
    ZinfResult res;
    if (const auto c = degenerate_fixed_point(law)) {
        // Z_n = c (1 - Pi_n) exactly, so the limit is c whenever the
        // products vanish; outside the contracting regimes fall through to
        // simulation, which will flag divergence.
        const auto regime = lawlib::classify_regime(law);
        if (regime.regime == lawlib::RegimeCase::C1 ||
            regime.regime == lawlib::RegimeCase::C2) {
            res.value = *c;
            res.status = ZinfStatus::truncated;
            res.last_increment = 0.0;
            res.degenerate_fixed_point = true;
            return res;
        }
    }
    const double s_eps = -std::log(policy.eps);
    double s = 0.0, z = 0.0;
    int sign = 1;
    uint32_t quiet = 0;
    for (uint64_t k = 1; k <= policy.nmax; ++k) {
        const auto [m, q] = lawlib::sample_mq(law, rs);
        bool uf = false;
        const double inc = increment_from_state(s, sign, q, &uf);
        z += inc;
        s -= std::log(std::fabs(m));
        if (m < 0) sign = -sign;
        quiet = std::fabs(inc) <= policy.eps ? quiet + 1 : 0;
        res.last_increment = inc;
        res.steps = k;
        if (s >= s_eps && quiet >= policy.quiet_steps) {
            res.value = z;
            res.status = ZinfStatus::truncated;
            return res;
        }
    }
    res.value = z;
    res.status = ZinfStatus::nonconvergent;
    return res;
}

ZinfLogResult simulate_zinf_log(const lawlib::MQLaw& law,
                                const ZinfPolicy& policy, rng::Stream& rs) {
    if (!law.sample_log_positive)
        throw Error("law '" + law.id + "' has no log-space positive sampler");
    ZinfLogResult res;
    const double s_eps = -std::log(policy.eps);
    const double log_eps = std::log(policy.eps);
    double s = 0.0;
    double lz = -std::numeric_limits<double>::infinity();
    uint32_t quiet = 0;
    for (uint64_t k = 1; k <= policy.nmax; ++k) {
        const auto [logm, logq] = law.sample_log_positive(rs);
        const double term = -s + logq;  // log of Pi_{k-1} Q_k
        if (term > lz) {
            lz = term + std::log1p(std::exp(lz - term));
        } else {
            lz = lz + std::log1p(std::exp(term - lz));
        }
        s -= logm;
        quiet = term <= log_eps ? quiet + 1 : 0;
        res.steps = k;
        if (s >= s_eps && quiet >= policy.quiet_steps) {
            res.log_value = lz;
            return res;
        }
    }
    res.log_value = lz;
    res.status = ZinfStatus::nonconvergent;
    return res;
}

std::vector<double> forward_ifs(const lawlib::MQLaw& law, double phi0, size_t n,
                                rng::Stream& rs) {
    std::vector<double> phi;
    phi.reserve(n + 1);
    phi.push_back(phi0);
    for (size_t k = 1; k <= n; ++k) {
        const auto [m, q] = lawlib::sample_mq(law, rs);
        phi.push_back(q + m * phi.back());
    }
    return phi;
}

StopResult ladder_epoch(const PerpetuityPath& path) {
    for (size_t k = 1; k <= path.length(); ++k)
        if (path.s[k] >= 0.0) return {true, k};
    return {false, path.length()};
}

StopResult sigma_x(const PerpetuityPath& path, double x) {
    if (!(x > 0.0 && x <= 1.0)) throw Error("sigma_x needs x in (0, 1]");
    const double threshold = -std::log(x);
    for (size_t k = 1; k <= path.length(); ++k)
        if (path.s[k] > threshold) return {true, k};
    return {false, path.length()};
}

StopResult dual_sigma_star(const PerpetuityPath& path) {
    for (size_t k = 1; k <= path.length(); ++k)
        if (path.s[k] < 0.0) return {true, k};
    return {false, path.length()};
}

LadderDecomposition ladder_decompose(const lawlib::MQLaw& law, size_t blocks,
                                     rng::Stream& rs,
                                     uint64_t nmax_per_block) {
    const auto regime = lawlib::classify_regime(law);
    if (regime.regime != lawlib::RegimeCase::C1 &&
        regime.regime != lawlib::RegimeCase::C2)
        throw Error("ladder decomposition needs a contracting law (C1/C2)");
    LadderDecomposition dec;
    dec.blocks.reserve(blocks);
    double s_abs = 0.0;
    size_t epoch = 0;
    for (size_t b = 0; b < blocks; ++b) {
        double rel_s = 0.0;           // -log of in-block partial product
        double min_rel_s = 0.0;       // tracks sup of partial products
        double qhat = 0.0;
        uint64_t len = 0;
        for (;;) {
            if (len >= nmax_per_block)
                throw NonConvergent("ladder block exceeded nmax steps");
            const auto [m, q] = lawlib::sample_mq(law, rs);
            qhat += std::exp(-rel_s) * std::fabs(q);
            dec.zstar_completed += std::exp(-(s_abs + rel_s)) * std::fabs(q);
            rel_s -= std::log(std::fabs(m));
            ++len;
            if (rel_s < min_rel_s) min_rel_s = rel_s;
            if (rel_s >= 0.0) break;  // |in-block product| <= 1
        }
        LadderBlock blk;
        blk.length = len;
        blk.mhat = std::exp(-rel_s);
        blk.qtilde = std::max(1.0, std::exp(-min_rel_s));
        blk.qhat = qhat;
        dec.blocks.push_back(blk);
        epoch += len;
        dec.sigma_epochs.push_back(epoch);
        s_abs += rel_s;
        dec.total_steps += len;
    }
    return dec;
}

PairSymmetrizer::PairSymmetrizer(const lawlib::MQLaw& law) : law_(&law) {
    if (law.analytics && law.analytics->mq_independent) {
        independent_mode_ = true;
        return;
    }
    if (!law.support)
        throw UnsupportedConditioning(
            "conditional symmetrization needs independence or finite support");
    // enumerate (i, j) atom pairs grouped by the product m_i * m_j
    const auto& atoms = *law.support;
    struct PairEntry {
        double product, q2, p;
    };
    std::vector<PairEntry> entries;
    entries.reserve(atoms.size() * atoms.size());
    for (const auto& a1 : atoms)
        for (const auto& a2 : atoms)
            entries.push_back({a1.m * a2.m, a1.q + a1.m * a2.q, a1.p * a2.p});
    std::sort(entries.begin(), entries.end(),
              [](const PairEntry& a, const PairEntry& b) {
                  return a.product < b.product;
              });
    constexpr double tol = 1e-12;
    for (size_t i = 0; i < entries.size();) {
        const double rep = entries[i].product;
        size_t j = i;
        double cum = 0;
        std::vector<std::pair<double, double>> table;
        while (j < entries.size() &&
               entries[j].product - rep <=
                   tol * std::max(1.0, std::fabs(rep))) {
            if (entries[j].product != rep) tolerance_matching_ = true;
            cum += entries[j].p;
            table.emplace_back(cum, entries[j].q2);
            ++j;
        }
        for (auto& [c, q2] : table) c /= cum;
        group_products_.push_back(rep);
        group_q2_cum_.push_back(std::move(table));
        i = j;
    }
}

SymmetrizedPair PairSymmetrizer::sample(rng::Stream& rs) const {
    if (independent_mode_) {
        const auto [m1, q1] = lawlib::sample_mq(*law_, rs);
        const auto [m2, q2] = lawlib::sample_mq(*law_, rs);
        const auto [m1p, q1p] = lawlib::sample_mq(*law_, rs);
        const auto [m2p, q2p] = lawlib::sample_mq(*law_, rs);
        (void)m1p;
        (void)m2p;
        // reuse (M1, M2): the product is matched trivially and the
        // conditional law of Q^{(2)} given it is preserved
        const double a = q1 + m1 * q2;
        const double b = q1p + m1 * q2p;
        return {m1 * m2, a, a - b};
    }
    const auto [m1, q1] = lawlib::sample_mq(*law_, rs);
    const auto [m2, q2] = lawlib::sample_mq(*law_, rs);
    const double product = m1 * m2;
    const double q2val = q1 + m1 * q2;
    auto it = std::lower_bound(group_products_.begin(), group_products_.end(),
                               product - 1e-12 * std::max(1.0, std::fabs(product)));
    size_t g = static_cast<size_t>(it - group_products_.begin());
    if (g >= group_products_.size()) g = group_products_.size() - 1;
    const auto& table = group_q2_cum_[g];
    const double u = rs.next_u01();
    size_t lo = 0, hi = table.size();
    while (lo + 1 < hi) {
        const size_t mid = (lo + hi) / 2;
        if (table[mid - 1].first <= u)
            lo = mid;
        else
            hi = mid;
    }
    return {product, q2val, q2val - table[lo].second};
}

SupFunctionals sup_functionals(const PerpetuityPath& path) {
    if (path.length() == 0) throw Error("sup functionals need length >= 1");
    SupFunctionals f;
    double best_piq = -std::numeric_limits<double>::infinity();
    size_t best_piq_idx = 1;
    for (size_t k = 1; k <= path.length(); ++k) {
        const double lm = path.q[k - 1] == 0.0
                              ? -std::numeric_limits<double>::infinity()
                              : path.log_abs_increment(k);
        if (lm > best_piq) {
            best_piq = lm;
            best_piq_idx = k;
        }
    }
    double best_s = path.s[0];
    size_t best_pi_idx = 0;
    for (size_t k = 1; k < path.s.size(); ++k)
        if (path.s[k] < best_s) {
            best_s = path.s[k];
            best_pi_idx = k;
        }
    f.log_sup_piq = best_piq;
    f.sup_piq = std::exp(best_piq);
    f.argmax_piq = best_piq_idx;
    f.log_sup_pi = -best_s;
    f.sup_pi = std::exp(-best_s);
    f.argmax_pi = best_pi_idx;
    return f;
}

double pick_eta(const lawlib::MQLaw& law, rng::Key key, uint64_t pilot_reps,
                size_t horizon) {
    std::vector<double> sups(pilot_reps);
    par::parallel_blocks(pilot_reps, par::kDefaultBlock, 0,
                         [&](size_t, uint64_t b, uint64_t e) {
                             for (uint64_t i = b; i < e; ++i) {
                                 auto rs = rng::make_stream(
                                     key, rng::Domain::pilot, i);
                                 const auto path =
                                     simulate_path(law, horizon, rs);
                                 sups[i] = sup_functionals(path).sup_piq;
                             }
                         });
    std::sort(sups.begin(), sups.end());
    const size_t idx = static_cast<size_t>(
        std::ceil(0.9 * static_cast<double>(pilot_reps))) - 1;
    return sups[std::min(idx, sups.size() - 1)];
}

double estimate_alpha(const lawlib::MQLaw& law, double eta, rng::Key key,
                      uint64_t reps, size_t horizon) {
    std::vector<uint64_t> hits((reps + par::kDefaultBlock - 1) /
                               par::kDefaultBlock, 0);
    par::parallel_blocks(reps, par::kDefaultBlock, 0,
                         [&](size_t bi, uint64_t b, uint64_t e) {
                             uint64_t h = 0;
                             for (uint64_t i = b; i < e; ++i) {
                                 auto rs = rng::make_stream(
                                     key, rng::Domain::pilot, i, 1);
                                 const auto path =
                                     simulate_path(law, horizon, rs);
                                 if (sup_functionals(path).sup_piq <= eta) ++h;
                             }
                             hits[bi] = h;
                         });
    uint64_t total = 0;
    for (const auto h : hits) total += h;
    return static_cast<double>(total) / static_cast<double>(reps);
}

WaldReport wald_check(const lawlib::MQLaw& law, const lawlib::AEvaluator& a,
                      double eta, double x, uint64_t reps, rng::Key key,
                      int threads) {
    if (!(x > 0)) throw Error("wald_check needs x > 0");
    const double ax = a.A(x);
    WaldReport rep;
    rep.eta = eta;
    rep.x = x;
    rep.a_of_x = ax;
    rep.reps = reps;
    rep.alpha_hat = estimate_alpha(law, eta, key, std::min<uint64_t>(reps, 8192), 64);
    if (rep.alpha_hat <= 0.0)
        throw BadEta("empirical alpha is zero; raise eta");

    const size_t nblocks = (reps + par::kDefaultBlock - 1) / par::kDefaultBlock;
    std::vector<Moments> mt(nblocks), ms(nblocks), md(nblocks);
    par::parallel_blocks(
        reps, par::kDefaultBlock, threads, [&](size_t bi, uint64_t b, uint64_t e) {
            Moments bt, bs, bd;
            for (uint64_t i = b; i < e; ++i) {
                auto rs = rng::make_stream(key, rng::Domain::wald, i);
                double s = 0.0, sx = 0.0, maxpq = 0.0;
                uint64_t t = 0;
                for (;;) {
                    const auto [m, q] = lawlib::sample_mq(law, rs);
                    const double piq = std::exp(-s) * std::fabs(q);
                    if (piq > maxpq) maxpq = piq;
                    const double xi = -std::log(std::fabs(m));
                    sx += std::min(xi, x);
                    s += xi;
                    ++t;
                    if (s >= x || maxpq > eta) break;
                    if (t >= 10000000)
                        throw NonConvergent("stopped walk exceeded step cap");
                }
                bt.add(static_cast<double>(t));
                bs.add(sx);
                bd.add(sx - ax * static_cast<double>(t));
            }
            mt[bi] = bt;
            ms[bi] = bs;
            md[bi] = bd;
        });
    Moments t_all, s_all, d_all;
    for (size_t i = 0; i < nblocks; ++i) {
        t_all.merge(mt[i]);
        s_all.merge(ms[i]);
        d_all.merge(md[i]);
    }
    rep.v_hat = t_all.mean;
    rep.v_se = t_all.std_error();
    rep.s_hat = s_all.mean;
    rep.s_se = s_all.std_error();
    rep.residual = std::fabs(d_all.mean);
    rep.residual_se = d_all.std_error();
    return rep;
}

EstimateReport estimate_sigma_x_mean(const lawlib::MQLaw& law, double x,
                                     uint64_t reps, rng::Key key,
                                     double confidence, int threads,
                                     uint64_t nmax) {
    if (!(x > 0.0 && x <= 1.0)) throw Error("sigma_x needs x in (0, 1]");
    const double threshold = -std::log(x);
    const size_t nblocks = (reps + par::kDefaultBlock - 1) / par::kDefaultBlock;
    std::vector<Moments> blocks(nblocks);
    par::parallel_blocks(
        reps, par::kDefaultBlock, threads, [&](size_t bi, uint64_t b, uint64_t e) {
            Moments mm;
            for (uint64_t i = b; i < e; ++i) {
                auto rs = rng::make_stream(key, rng::Domain::ladder, i);
                double s = 0.0;
                uint64_t k = 0;
                do {
                    const auto [m, q] = lawlib::sample_mq(law, rs);
                    (void)q;
                    s -= std::log(std::fabs(m));
                    ++k;
                    if (k >= nmax)
                        throw NonConvergent("sigma(x) not reached before nmax");
                } while (!(s > threshold));
                mm.add(static_cast<double>(k));
            }
            blocks[bi] = mm;
        });
    Moments all;
    for (const auto& b : blocks) all.merge(b);
    return make_report(all, confidence, 0, law.id, "sigma_x_mean");
}

ZinfMcResult mc_zinf_mean(const lawlib::MQLaw& law, const ZinfPolicy& policy,
                          uint64_t reps, rng::Key key, double confidence,
                          int threads) {
    const size_t nblocks = (reps + par::kDefaultBlock - 1) / par::kDefaultBlock;
    std::vector<Moments> blocks(nblocks);
    std::vector<uint64_t> bad(nblocks, 0);
    par::parallel_blocks(
        reps, par::kDefaultBlock, threads, [&](size_t bi, uint64_t b, uint64_t e) {
            Moments mm;
            uint64_t nc = 0;
            for (uint64_t i = b; i < e; ++i) {
                auto rs = rng::make_stream(key, rng::Domain::zinf, i);
                const auto r = simulate_zinf(law, policy, rs);
                if (r.status == ZinfStatus::nonconvergent)
                    ++nc;
                else
                    mm.add(r.value);
            }
            blocks[bi] = mm;
            bad[bi] = nc;
        });
    ZinfMcResult out;
    Moments all;
    for (size_t i = 0; i < nblocks; ++i) {
        all.merge(blocks[i]);
        out.nonconvergent += bad[i];
    }
    out.report = make_report(all, confidence, 0, law.id, "zinf_mean");
    return out;
}

}  // namespace perpetua::perpsim
