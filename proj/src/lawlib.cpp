#include "perpetua/lawlib.hpp"

#include "perpetua/mathutil.hpp"
#include "perpetua/parallel.hpp"
#include "perpetua/specparse.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numeric>

namespace perpetua::lawlib {

namespace {

constexpr double kMassTol = 1e-12;

std::vector<double> cumulative_masses(const std::vector<MQJointAtom>& atoms) {
    std::vector<double> cum;
    cum.reserve(atoms.size());
    double s = 0;
    for (const auto& a : atoms) {
        s += a.p;
        cum.push_back(s);
    }
    return cum;
}

size_t pick_index(const std::vector<double>& cum, double u) {
    const double target = u * cum.back();
    const auto it = std::lower_bound(cum.begin(), cum.end(), target);
    return std::min(static_cast<size_t>(it - cum.begin()), cum.size() - 1);
}

// antiderivative of the standard normal survival function
double norm_sf_integral(double t) {
    return t * mathutil::norm_sf(t) - mathutil::norm_pdf(t);
}

double simpson(const std::function<double(double)>& f, double a, double b,
               int n) {
    if (n % 2) ++n;
    const double h = (b - a) / n;
    double s = f(a) + f(b);
    for (int i = 1; i < n; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
    return s * h / 3.0;
}

}  // namespace

std::pair<double, double> sample_mq(const MQLaw& law, rng::Stream& rs) {
    const auto mq = law.sample_raw(rs);
    if (mq.first == 0.0)
        throw SamplerViolation("law '" + law.id + "' emitted M = 0");
    return mq;
}

MQLaw make_finite_support_law(std::string id, std::vector<MQJointAtom> atoms,
                              bool mq_independent) {
    if (atoms.empty()) throw Error("finite-support law needs atoms");
    double mass = 0, q_zero_mass = 0;
    for (const auto& a : atoms) {
        if (a.p < 0) throw Error("negative atom mass");
        if (a.m == 0.0) throw Error("law '" + id + "': atom with M = 0");
        mass += a.p;
        if (a.q == 0.0) q_zero_mass += a.p;
    }
    if (std::fabs(mass - 1.0) > kMassTol)
        throw Error("law '" + id + "': masses sum to " + std::to_string(mass));
    if (q_zero_mass >= 1.0 - kMassTol)
        throw Error("law '" + id + "': P{Q=0} must be < 1");

    MQAnalytics an;
    an.mq_independent = mq_independent;
    double elog = 0, elogp = 0, elogm = 0, plt = 0, pgt = 0, em = 0, eabsm = 0,
           eq = 0;
    for (const auto& a : atoms) {
        const double l = std::log(std::fabs(a.m));
        elog += a.p * l;
        elogp += a.p * std::max(l, 0.0);
        elogm += a.p * std::max(-l, 0.0);
        if (std::fabs(a.m) < 1.0) plt += a.p;
        if (std::fabs(a.m) > 1.0) pgt += a.p;
        em += a.p * a.m;
        eabsm += a.p * std::fabs(a.m);
        eq += a.p * a.q;
    }
    an.e_log_abs_m = elog;
    an.e_log_plus_abs_m = elogp;
    an.e_log_minus_abs_m = elogm;
    an.p_m_lt1 = plt;
    an.p_m_gt1 = pgt;
    an.e_m = em;
    an.e_abs_m = eabsm;
    an.e_q = eq;
    an.j_logplus_m_finite = true;  // bounded support
    auto atoms_copy = atoms;
    an.survival_neglogm = [atoms_copy](double y) {
        double s = 0;
        for (const auto& a : atoms_copy)
            if (-std::log(std::fabs(a.m)) > y) s += a.p;
        return s;
    };
    an.a_closed = [atoms_copy](double x) {
        double s = 0;
        for (const auto& a : atoms_copy)
            s += a.p * std::min(std::max(-std::log(std::fabs(a.m)), 0.0), x);
        return s;
    };

    MQLaw law;
    law.id = std::move(id);
    law.analytics = std::move(an);
    auto cum = cumulative_masses(atoms);
    law.sample_raw = [atoms, cum](rng::Stream& rs) {
        const auto& a = atoms[pick_index(cum, rs.next_u01())];
        return std::make_pair(a.m, a.q);
    };
    law.support = std::move(atoms);
    return law;
}

MQLaw const_law(double m, double q) {
    return make_finite_support_law(
        "const:m=" + std::to_string(m) + ",q=" + std::to_string(q),
        {{m, q, 1.0}}, true);
}

MQLaw twopoint_m_law(double m1, double p1, double m2, double q) {
    return make_finite_support_law(
        "twopoint:m1=" + std::to_string(m1) + ",p1=" + std::to_string(p1) +
            ",m2=" + std::to_string(m2) + ",q=" + std::to_string(q),
        {{m1, q, p1}, {m2, q, 1.0 - p1}}, true);
}

MQLaw q_twopoint_law(double m, double q1, double q2, double p1) {
    return make_finite_support_law(
        "qtwopoint:m=" + std::to_string(m) + ",q1=" + std::to_string(q1) +
            ",q2=" + std::to_string(q2) + ",p1=" + std::to_string(p1),
        {{m, q1, p1}, {m, q2, 1.0 - p1}}, true);
}

MQLaw uniform01_m_law(double q) {
    MQLaw law;
    law.id = "uniform:q=" + std::to_string(q);
    law.sample_raw = [q](rng::Stream& rs) {
        return std::make_pair(rs.next_u01(), q);
    };
    MQAnalytics an;
    an.e_log_abs_m = -1.0;
    an.e_log_plus_abs_m = 0.0;
    an.e_log_minus_abs_m = 1.0;
    an.p_m_lt1 = 1.0;
    an.p_m_gt1 = 0.0;
    an.e_m = 0.5;
    an.e_abs_m = 0.5;
    an.e_q = q;
    an.j_logplus_m_finite = true;
    an.survival_neglogm = [](double y) { return y < 0 ? 1.0 : std::exp(-y); };
    an.a_closed = [](double x) { return x <= 0 ? 0.0 : -std::expm1(-x); };
    an.mq_independent = true;
    law.analytics = std::move(an);
    return law;
}

MQLaw lognormal_m_law(double mu, double sigma, double q) {
    if (!(sigma > 0)) throw Error("lognormal law needs sigma > 0");
    MQLaw law;
    law.id = "lognormal:mu=" + std::to_string(mu) +
             ",sigma=" + std::to_string(sigma) + ",q=" + std::to_string(q);
    law.sample_raw = [mu, sigma, q](rng::Stream& rs) {
        return std::make_pair(std::exp(-(mu + sigma * rs.next_normal())), q);
    };
    MQAnalytics an;
    an.e_log_abs_m = -mu;
    an.e_log_plus_abs_m =
        sigma * mathutil::norm_pdf(mu / sigma) - mu * mathutil::norm_sf(mu / sigma);
    an.e_log_minus_abs_m = an.e_log_plus_abs_m + mu;
    an.p_m_lt1 = mathutil::norm_cdf(mu / sigma);
    an.p_m_gt1 = mathutil::norm_sf(mu / sigma);
    an.e_m = std::exp(-mu + 0.5 * sigma * sigma);
    an.e_abs_m = an.e_m;
    an.e_q = q;
    an.j_logplus_m_finite = true;
    an.survival_neglogm = [mu, sigma](double y) {
        return mathutil::norm_sf((y - mu) / sigma);
    };
    an.a_closed = [mu, sigma](double x) {
        if (x <= 0) return 0.0;
        return sigma * (norm_sf_integral((x - mu) / sigma) -
                        norm_sf_integral(-mu / sigma));
    };
    an.mq_independent = true;
    law.analytics = std::move(an);
    return law;
}

MQLaw heavy_ladder_law(double shape, double scale, double q) {
    if (!(shape > 0) || !(scale > 0))
        throw Error("heavy ladder law needs positive shape and scale");
    MQLaw law;
    law.id = "heavyladder:shape=" + std::to_string(shape) +
             ",scale=" + std::to_string(scale) + ",q=" + std::to_string(q);
    law.sample_raw = [shape, scale, q](rng::Stream& rs) {
        // clamp at exp(-700) so M never underflows to an exact zero; all
        // consumers work through -log|M|, where min(xi, 700) is faithful
        // for every truncated moment with threshold below 700
        const double xi = scale * std::pow(rs.next_u01(), -1.0 / shape);
        return std::make_pair(std::exp(-std::min(xi, 700.0)), q);
    };
    MQAnalytics an;
    const bool infinite_mean = shape <= 1.0;
    an.e_log_abs_m = infinite_mean
                         ? -std::numeric_limits<double>::infinity()
                         : -shape * scale / (shape - 1.0);
    an.e_log_plus_abs_m = 0.0;
    an.e_log_minus_abs_m = infinite_mean
                               ? std::numeric_limits<double>::infinity()
                               : shape * scale / (shape - 1.0);
    an.p_m_lt1 = 1.0;
    an.p_m_gt1 = 0.0;
    an.e_q = q;
    an.j_logplus_m_finite = true;
    an.survival_neglogm = [shape, scale](double y) {
        return y < scale ? 1.0 : std::pow(y / scale, -shape);
    };
    an.a_closed = [shape, scale](double x) {
        if (x <= 0) return 0.0;
        if (x <= scale) return x;
        if (shape == 1.0) return scale * (1.0 + std::log(x / scale));
        return scale + std::pow(scale, shape) *
                           (std::pow(x, 1.0 - shape) -
                            std::pow(scale, 1.0 - shape)) /
                           (1.0 - shape);
    };
    an.mq_independent = true;
    law.analytics = std::move(an);
    return law;
}

MQLaw logpareto_q_law(double m, double beta) {
    if (m == 0.0) throw Error("logpareto_q law needs M != 0");
    if (!(beta > 0)) throw Error("logpareto_q law needs beta > 0");
    MQLaw law;
    law.id = "logpareto_q:m=" + std::to_string(m) +
             ",beta=" + std::to_string(beta);
    law.sample_raw = [m, beta](rng::Stream& rs) {
        const double logq = std::pow(rs.next_u01(), -1.0 / beta);
        return std::make_pair(m, std::exp(logq));
    };
    if (m > 0) {
        law.sample_log_positive = [m, beta](rng::Stream& rs) {
            const double logq = std::pow(rs.next_u01(), -1.0 / beta);
            return std::make_pair(std::log(m), logq);
        };
    }
    MQAnalytics an;
    const double l = std::log(std::fabs(m));
    an.e_log_abs_m = l;
    an.e_log_plus_abs_m = std::max(l, 0.0);
    an.e_log_minus_abs_m = std::max(-l, 0.0);
    an.p_m_lt1 = std::fabs(m) < 1 ? 1.0 : 0.0;
    an.p_m_gt1 = std::fabs(m) > 1 ? 1.0 : 0.0;
    an.e_m = m;
    an.e_abs_m = std::fabs(m);
    an.e_q = std::nullopt;  // E e^{log Q} = inf for every beta
    an.j_logplus_m_finite = true;
    an.survival_neglogm = [l](double y) { return (-l > y) ? 1.0 : 0.0; };
    an.a_closed = [l](double x) {
        return std::min(std::max(-l, 0.0), std::max(x, 0.0));
    };
    an.mq_independent = true;
    law.analytics = std::move(an);
    return law;
}

MQLaw parse_mq_law(std::string_view text) {
    const auto p = specparse::parse(text);
    if (p.name == "const")
        return const_law(p.number("m"), p.number_or("q", 1.0));
    if (p.name == "twopoint")
        return twopoint_m_law(p.number("m1"), p.number_or("p1", 0.5),
                              p.number("m2"), p.number_or("q", 1.0));
    if (p.name == "uniform") return uniform01_m_law(p.number_or("q", 1.0));
    if (p.name == "lognormal")
        return lognormal_m_law(p.number_or("mu", 1.0), p.number_or("sigma", 1.0),
                               p.number_or("q", 1.0));
    if (p.name == "heavyladder")
        return heavy_ladder_law(p.number_or("shape", 0.5),
                                p.number_or("scale", 1.0),
                                p.number_or("q", 1.0));
    if (p.name == "logpareto_q")
        return logpareto_q_law(p.number_or("m", 0.5), p.number("beta"));
    if (p.name == "qtwopoint")
        return q_twopoint_law(p.number("m"), p.number_or("q1", 1.0),
                              p.number_or("q2", 2.0), p.number_or("p1", 0.5));
    if (p.name == "spinemq_gw")
        return spine_mq_law(gw_two_point_pp(
            static_cast<int>(p.number_or("nmin", 1)),
            static_cast<int>(p.number_or("nmax", 2)), p.number_or("p", 0.5),
            p.number_or("x", 0.0), p.number_or("gamma", 1.0)));
    throw ConfigError("unknown MQ law: " + p.name);
}

std::vector<std::string> mq_law_catalogue() {
    return {
        "const:m=<m>,q=<q>                      point mass",
        "twopoint:m1=,p1=,m2=,q=                two-point M, constant Q",
        "uniform:q=<q>                          M ~ Uniform(0,1)",
        "lognormal:mu=,sigma=,q=                -log M ~ Normal(mu, sigma^2)",
        "heavyladder:shape=,scale=,q=           -log M ~ Pareto (E log M = -inf for shape <= 1)",
        "logpareto_q:m=,beta=                   P{log Q > t} = t^-beta, t >= 1",
        "qtwopoint:m=,q1=,q2=,p1=               constant M, two-point Q",
        "spinemq_gw:nmin=,nmax=,p=,x=,gamma=    spine driver pair of a two-point GW walk",
    };
}

// ---------------------------------------------------------------------------
// AEvaluator

AEvaluator AEvaluator::closed_form(std::function<double(double)> a,
                                   double p_m_lt1) {
    AEvaluator e;
    e.closed_ = std::move(a);
    e.p_m_lt1_ = p_m_lt1;
    return e;
}

AEvaluator AEvaluator::from_law(const MQLaw& law) {
    if (!law.analytics || !law.analytics->a_closed)
        throw Error("law '" + law.id + "' has no closed-form A");
    return closed_form(law.analytics->a_closed, law.analytics->p_m_lt1);
}

AEvaluator AEvaluator::empirical(const MQLaw& law, rng::Key key,
                                 uint64_t samples, size_t grid_points) {
    std::vector<std::pair<double, double>> t(samples);
    par::parallel_blocks(samples, par::kDefaultBlock, 0,
                         [&](size_t, uint64_t b, uint64_t e) {
                             for (uint64_t i = b; i < e; ++i) {
                                 auto rs = rng::make_stream(
                                     key, rng::Domain::law_aux, i);
                                 const auto mq = sample_mq(law, rs);
                                 t[i] = {-std::log(std::fabs(mq.first)), 1.0};
                             }
                         });
    AEvaluator e = empirical_weighted(std::move(t), grid_points);
    e.samples_ = samples;
    return e;
}

AEvaluator AEvaluator::empirical_weighted(
    std::vector<std::pair<double, double>> neglogm_weight, size_t grid_points) {
    AEvaluator e;
    double wsum = 0, wpos = 0, tmax = 0;
    for (auto& [t, w] : neglogm_weight) {
        if (t < 0) t = 0;  // positive part
        wsum += w;
        if (t > 0) wpos += w;
        tmax = std::max(tmax, t);
    }
    if (wsum <= 0) throw Error("empirical A: no mass");
    e.p_m_lt1_ = wpos / wsum;
    e.samples_ = neglogm_weight.size();
    if (tmax == 0) {  // |M| >= 1 a.s.
        e.table_x_ = {0.0};
        e.table_a_ = {0.0};
        e.tail_a_ = 0.0;
        return e;
    }
    std::sort(neglogm_weight.begin(), neglogm_weight.end());
    // prefix sums of w*t and w over the order statistics
    const size_t n = neglogm_weight.size();
    std::vector<double> pw(n + 1, 0.0), pwt(n + 1, 0.0);
    for (size_t i = 0; i < n; ++i) {
        pw[i + 1] = pw[i] + neglogm_weight[i].second;
        pwt[i + 1] = pwt[i] + neglogm_weight[i].second * neglogm_weight[i].first;
    }
    // knots at the sample quantiles: A is exact there and its curvature
    // lives where the mass does, so linear interpolation stays faithful
    // even for very heavy tails
    const auto a_exact = [&](double x) {
        const auto it = std::upper_bound(
            neglogm_weight.begin(), neglogm_weight.end(),
            std::make_pair(x, std::numeric_limits<double>::infinity()));
        const size_t k = static_cast<size_t>(it - neglogm_weight.begin());
        return (pwt[k] + x * (pw[n] - pw[k])) / wsum;
    };
    e.table_x_.push_back(0.0);
    e.table_a_.push_back(0.0);
    for (size_t g = 1; g <= grid_points; ++g) {
        const size_t idx = (g * (n - 1)) / grid_points;
        const double x = neglogm_weight[idx].first;
        if (x <= e.table_x_.back()) continue;
        e.table_x_.push_back(x);
        e.table_a_.push_back(a_exact(x));
    }
    if (e.table_x_.back() < tmax) {
        e.table_x_.push_back(tmax);
        e.table_a_.push_back(a_exact(tmax));
    }
    e.tail_a_ = pwt[n] / wsum;  // = A(x) for x >= tmax
    return e;
}

double AEvaluator::A(double x) const {
    if (x <= 0) return 0.0;
    if (closed_) return std::max(0.0, closed_(x));
    if (x >= table_x_.back()) return tail_a_;
    const auto it =
        std::upper_bound(table_x_.begin(), table_x_.end(), x);
    const size_t i = static_cast<size_t>(it - table_x_.begin());
    const double x0 = table_x_[i - 1], x1 = table_x_[i];
    const double a0 = table_a_[i - 1], a1 = table_a_[i];
    return a0 + (a1 - a0) * (x - x0) / (x1 - x0);
}

double AEvaluator::J(double x) const {
    if (x < 0) return 0.0;
    if (x == 0) {
        if (p_m_lt1_ <= 0)
            throw UndefinedJ("J(0) undefined: P{|M|<1} = 0");
        return 1.0 / p_m_lt1_;
    }
    const double a = A(x);
    if (a <= 0) return std::numeric_limits<double>::infinity();
    return x / a;
}

// ---------------------------------------------------------------------------
// point process laws

double PointProcessLaw::m_gamma() const {
    if (m_gamma_closed) return *m_gamma_closed;
    if (enumerated) {
        double m = 0;
        for (const auto& cfg : *enumerated) {
            double s = 0;
            for (double x : cfg.xs) s += std::exp(gamma * x);
            m += cfg.p * s;
        }
        return m;
    }
    throw Error("point process '" + id + "' has no m(gamma) available");
}

namespace {

void validate_supercritical(const PointProcessLaw& pp) {
    if (pp.mean_offspring && !(*pp.mean_offspring > 1.0))
        throw Error("point process '" + pp.id + "' is not supercritical");
    if (pp.enumerated && !pp.mean_offspring) {
        double en = 0;
        for (const auto& cfg : *pp.enumerated)
            en += cfg.p * static_cast<double>(cfg.xs.size());
        if (!(en > 1.0))
            throw Error("point process '" + pp.id + "' is not supercritical");
    }
}

std::vector<double> pp_cumulative(const std::vector<PPConfig>& cfgs) {
    std::vector<double> cum;
    cum.reserve(cfgs.size());
    double s = 0;
    for (const auto& c : cfgs) {
        s += c.p;
        cum.push_back(s);
    }
    return cum;
}

}  // namespace

PointProcessLaw gw_two_point_pp(int nmin, int nmax, double p, double x,
                                double gamma) {
    if (nmin < 0 || nmax < nmin) throw Error("gw law needs 0 <= nmin <= nmax");
    if (!(p >= 0 && p <= 1)) throw Error("gw law needs p in [0,1]");
    if (!(gamma > 0)) throw Error("gw law needs gamma > 0");
    PointProcessLaw pp;
    pp.id = "gw:nmin=" + std::to_string(nmin) + ",nmax=" + std::to_string(nmax) +
            ",p=" + std::to_string(p) + ",x=" + std::to_string(x) +
            ",gamma=" + std::to_string(gamma);
    pp.gamma = gamma;
    pp.fixed_displacement = true;
    pp.displacement = x;
    std::vector<PPConfig> cfgs;
    if (nmin == nmax || p == 1.0) {
        cfgs.push_back({std::vector<double>(nmin, x), 1.0});
    } else if (p == 0.0) {
        cfgs.push_back({std::vector<double>(nmax, x), 1.0});
    } else {
        cfgs.push_back({std::vector<double>(nmin, x), p});
        cfgs.push_back({std::vector<double>(nmax, x), 1.0 - p});
    }
    pp.enumerated = cfgs;
    const double en = p * nmin + (1.0 - p) * nmax;
    pp.mean_offspring = en;
    pp.m_gamma_closed = en * std::exp(gamma * x);
    pp.sum_weight_bound = nmax * std::exp(gamma * x);
    pp.sample = [nmin, nmax, p, x](rng::Stream& rs) {
        const int n = (rs.next_u01() < p) ? nmin : nmax;
        return std::vector<double>(n, x);
    };
    pp.sample_count = [nmin, nmax, p](rng::Stream& rs) {
        return static_cast<size_t>((rs.next_u01() < p) ? nmin : nmax);
    };
    validate_supercritical(pp);
    return pp;
}

PointProcessLaw deterministic_binary_pp() {
    PointProcessLaw pp = gw_two_point_pp(2, 2, 1.0, -std::log(2.0), 1.0);
    pp.id = "detbinary";
    return pp;
}

PointProcessLaw poisson_pp(double lambda, double x, double gamma) {
    if (!(lambda > 1)) throw Error("poisson law needs lambda > 1");
    if (!(gamma > 0)) throw Error("poisson law needs gamma > 0");
    PointProcessLaw pp;
    pp.id = "poisson:lambda=" + std::to_string(lambda) +
            ",x=" + std::to_string(x) + ",gamma=" + std::to_string(gamma);
    pp.gamma = gamma;
    pp.fixed_displacement = true;
    pp.displacement = x;
    pp.mean_offspring = lambda;
    pp.m_gamma_closed = lambda * std::exp(gamma * x);
    // truncated enumerator, deficit below the merge tolerance
    std::vector<PPConfig> cfgs;
    double pk = std::exp(-lambda), cum = 0;
    for (int k = 0; cum < 1.0 - 1e-12 && k < 400; ++k) {
        cfgs.push_back({std::vector<double>(k, x), pk});
        cum += pk;
        pk *= lambda / (k + 1);
    }
    pp.enumerated = std::move(cfgs);
    pp.enumeration_deficit = std::max(0.0, 1.0 - cum);
    pp.sample = [lambda, x](rng::Stream& rs) {
        // inversion by sequential search; one uniform per draw
        double u = rs.next_u01(), pk2 = std::exp(-lambda), c = pk2;
        int k = 0;
        while (u > c && k < 4000) {
            ++k;
            pk2 *= lambda / k;
            c += pk2;
        }
        return std::vector<double>(k, x);
    };
    pp.sample_count = [lambda](rng::Stream& rs) {
        double u = rs.next_u01(), pk2 = std::exp(-lambda), c = pk2;
        size_t k = 0;
        while (u > c && k < 4000) {
            ++k;
            pk2 *= lambda / static_cast<double>(k);
            c += pk2;
        }
        return k;
    };
    validate_supercritical(pp);
    return pp;
}

PointProcessLaw heavy_w1_pp(double beta, int fanout) {
    if (!(beta > 0)) throw Error("heavy_w1 law needs beta > 0");
    if (fanout < 2) throw Error("heavy_w1 law needs fanout >= 2");
    // pv = P{V > 0} = E exp(-P) for P ~ Pareto(beta, 1)
    const double pv = simpson(
        [beta](double t) { return std::exp(-t) * beta * std::pow(t, -beta - 1.0); },
        1.0, 60.0, 20000);
    PointProcessLaw pp;
    pp.id = "heavyw1:beta=" + std::to_string(beta) +
            ",k=" + std::to_string(fanout);
    pp.gamma = 1.0;
    pp.m_gamma_closed = 1.0;  // E V = 1 by construction
    pp.mean_offspring = fanout * pv;
    const int k = fanout;
    pp.sample = [beta, k, pv](rng::Stream& rs) {
        if (rs.next_u01() >= pv) return std::vector<double>{};
        for (;;) {
            const double p = std::pow(rs.next_u01(), -1.0 / beta);
            // accept with prob e^{1-p}: V | V>0 has density q(x)/x up to norm
            if (rs.next_u01() < std::exp(1.0 - p)) {
                const double v = std::exp(p);
                return std::vector<double>(k, std::log(v / k));
            }
        }
    };
    validate_supercritical(pp);
    return pp;
}

PointProcessLaw parse_pp_law(std::string_view text) {
    const auto p = specparse::parse(text);
    if (p.name == "gw")
        return gw_two_point_pp(static_cast<int>(p.number_or("nmin", 1)),
                               static_cast<int>(p.number_or("nmax", 2)),
                               p.number_or("p", 0.5), p.number_or("x", 0.0),
                               p.number_or("gamma", 1.0));
    if (p.name == "detbinary") return deterministic_binary_pp();
    if (p.name == "poisson")
        return poisson_pp(p.number("lambda"), p.number_or("x", 0.0),
                          p.number_or("gamma", 1.0));
    if (p.name == "heavyw1")
        return heavy_w1_pp(p.number("beta"),
                           static_cast<int>(p.number_or("k", 24)));
    throw ConfigError("unknown point process law: " + p.name);
}

std::vector<std::string> pp_law_catalogue() {
    return {
        "gw:nmin=,nmax=,p=,x=,gamma=   two-point offspring, fixed displacement",
        "detbinary                     N = 2, x = -log 2, gamma = 1 (W_n = 1)",
        "poisson:lambda=,x=,gamma=     Poisson offspring, fixed displacement",
        "heavyw1:beta=,k=              heavy W_1 around the J-moment boundary",
    };
}

double sample_w1(const PointProcessLaw& pp, rng::Stream& rs) {
    const double m = pp.m_gamma();
    double w = 0;
    for (double x : pp.sample(rs)) w += child_weight(pp.gamma, x, m);
    return w;
}

// ---------------------------------------------------------------------------
// regime classification

const char* to_string(RegimeCase c) {
    switch (c) {
        case RegimeCase::C1: return "C1";
        case RegimeCase::C2: return "C2";
        case RegimeCase::divergent: return "divergent";
        case RegimeCase::inconclusive: return "inconclusive";
    }
    return "?";
}

const char* to_string(RegimeSubcase s) {
    switch (s) {
        case RegimeSubcase::A1: return "A1";
        case RegimeSubcase::A2: return "A2";
        case RegimeSubcase::A3: return "A3";
        case RegimeSubcase::none: return "none";
    }
    return "?";
}

namespace {

RegimeSubcase subcase_from(double elog, double elogp, double elogm,
                           std::optional<bool> j_finite) {
    if (std::isfinite(elog) && elog < 0) return RegimeSubcase::A1;
    if (std::isinf(elog) && elog < 0) return RegimeSubcase::A2;
    if (std::isinf(elogp) && std::isinf(elogm) && j_finite.value_or(false))
        return RegimeSubcase::A3;
    return RegimeSubcase::none;
}

}  // namespace

RegimeReport classify_regime(const MQLaw& law, uint64_t budget,
                             std::optional<rng::Key> key) {
    RegimeReport rep;
    if (law.analytics) {
        const auto& an = *law.analytics;
        rep.empirical = false;
        const double elog = an.e_log_abs_m;
        if (an.p_m_gt1 == 0.0 && an.p_m_lt1 > 0.0) {
            rep.regime = RegimeCase::C1;
            rep.evidence = "P{|M|<=1}=1, P{|M|<1}>0 (closed form)";
        } else if (an.p_m_gt1 > 0.0) {
            if ((std::isfinite(elog) && elog < 0) ||
                (std::isinf(elog) && elog < 0)) {
                rep.regime = RegimeCase::C2;
                rep.evidence = "P{|M|>1}>0, E log|M| < 0 (closed form)";
            } else if (std::isfinite(elog) || (std::isinf(elog) && elog > 0)) {
                rep.regime = RegimeCase::divergent;
                rep.evidence = "E log|M| >= 0 (closed form)";
            } else if (an.j_logplus_m_finite.value_or(false)) {
                rep.regime = RegimeCase::C2;
                rep.evidence =
                    "both log tails infinite, E J(log+|M|) < inf (declared)";
            } else {
                rep.regime = RegimeCase::inconclusive;
                rep.evidence = "both log tails infinite, no J-moment flag";
            }
        } else {
            rep.regime = RegimeCase::divergent;
            rep.evidence = "P{|M| = 1} = 1";
        }
        if (rep.regime == RegimeCase::C1 || rep.regime == RegimeCase::C2)
            rep.subcase = subcase_from(elog, an.e_log_plus_abs_m,
                                       an.e_log_minus_abs_m,
                                       an.j_logplus_m_finite);
        return rep;
    }

    if (budget == 0 || !key)
        throw Error("classify_regime: no analytics and no sampling budget");
    rep.empirical = true;
    Moments logm;
    uint64_t lt1 = 0, gt1 = 0;
    for (uint64_t i = 0; i < budget; ++i) {
        auto rs = rng::make_stream(*key, rng::Domain::law_aux, i, 1);
        const double m = std::fabs(sample_mq(law, rs).first);
        logm.add(std::log(m));
        if (m < 1) ++lt1;
        if (m > 1) ++gt1;
    }
    const double z = 3.0;
    const double lo = logm.mean - z * logm.std_error();
    const double hi = logm.mean + z * logm.std_error();
    if (gt1 == 0 && lt1 > 0) {
        rep.regime = RegimeCase::C1;
        rep.evidence = "no sample with |M|>1 in budget (empirical)";
    } else if (gt1 > 0 && hi < 0) {
        rep.regime = RegimeCase::C2;
        rep.evidence = "empirical mean log|M| < 0 at 3 sigma (ladder drift)";
    } else if (lo > 0) {
        rep.regime = RegimeCase::divergent;
        rep.evidence = "empirical mean log|M| > 0 at 3 sigma";
    } else {
        rep.regime = RegimeCase::inconclusive;
        rep.evidence = "empirical mean log|M| CI straddles 0";
    }
    if (rep.regime == RegimeCase::C1 || rep.regime == RegimeCase::C2) {
        if (hi < 0) rep.subcase = RegimeSubcase::A1;
    }
    return rep;
}

// ---------------------------------------------------------------------------
// induced and tilted laws

DiscreteLaw induced_m_law(const PointProcessLaw& pp) {
    if (!pp.enumerable())
        throw NotEnumerable("induced M law needs an enumerable point process");
    const double m = pp.m_gamma();
    std::vector<Atom> atoms;
    for (const auto& cfg : *pp.enumerated)
        for (double x : cfg.xs) {
            const double w = child_weight(pp.gamma, x, m);
            atoms.push_back({w, cfg.p * w});
        }
    DiscreteLaw law = DiscreteLaw::from_atoms(std::move(atoms));
    const double mass = law.total_mass();
    if (std::fabs(mass - 1.0) > 1e-9 + pp.enumeration_deficit * 2)
        throw Error("induced M law mass " + std::to_string(mass));
    if (law.atoms().size() == 1 && std::fabs(law.atoms()[0].value - 1.0) < 1e-12)
        throw DegenerateBrw("induced M law is the point mass at 1");
    for (const auto& a : law.atoms())
        if (a.value == 0.0) throw DegenerateBrw("induced M law has mass at 0");
    return law;
}

std::vector<std::pair<double, double>> induced_m_weighted_samples(
    const PointProcessLaw& pp, uint64_t n_configs, rng::Key key) {
    const double m = pp.m_gamma();
    std::vector<std::pair<double, double>> out;
    std::mutex mu;
    par::parallel_blocks(
        n_configs, par::kDefaultBlock, 0, [&](size_t, uint64_t b, uint64_t e) {
            std::vector<std::pair<double, double>> local;
            for (uint64_t i = b; i < e; ++i) {
                auto rs = rng::make_stream(key, rng::Domain::law_aux, i, 2);
                for (double x : pp.sample(rs)) {
                    const double w = child_weight(pp.gamma, x, m);
                    local.emplace_back(w, w);
                }
            }
            std::lock_guard<std::mutex> lk(mu);
            out.insert(out.end(), local.begin(), local.end());
        });
    return out;
}

InducedW1Q induced_q_and_w1_law(const PointProcessLaw& pp) {
    if (!pp.enumerable())
        throw NotEnumerable("induced W1/Q laws need an enumerable point process");
    const double m = pp.m_gamma();
    std::vector<Atom> w1_atoms;
    for (const auto& cfg : *pp.enumerated) {
        double w = 0;
        for (double x : cfg.xs) w += child_weight(pp.gamma, x, m);
        w1_atoms.push_back({w, cfg.p});
    }
    InducedW1Q out;
    out.w1 = DiscreteLaw::from_atoms(std::move(w1_atoms));
    std::vector<Atom> q_atoms;
    for (const auto& a : out.w1.atoms()) q_atoms.push_back({a.value, a.value * a.mass});
    out.q = DiscreteLaw::from_atoms(std::move(q_atoms));
    for (const auto& a : out.q.atoms())
        if (a.value == 0.0) throw Error("induced Q law has mass at 0");
    return out;
}

PointProcessLaw tilted_reproduction_law(const PointProcessLaw& pp,
                                        TiltMode mode) {
    const double m = pp.m_gamma();
    if (mode == TiltMode::exact) {
        if (!pp.enumerable())
            throw NotEnumerable("exact tilting needs an enumerable point process");
        std::vector<PPConfig> cfgs;
        double total = 0;
        for (const auto& cfg : *pp.enumerated) {
            double s = 0;
            for (double x : cfg.xs) s += std::exp(pp.gamma * x);
            const double tp = cfg.p * s / m;
            if (tp > 0) cfgs.push_back({cfg.xs, tp});
            total += tp;
        }
        if (std::fabs(total - 1.0) > 1e-9 + pp.enumeration_deficit * 4)
            throw Error("tilted law mass " + std::to_string(total));
        for (auto& c : cfgs) c.p /= total;
        PointProcessLaw tilted;
        tilted.id = pp.id + "|tilted";
        tilted.gamma = pp.gamma;
        tilted.fixed_displacement = pp.fixed_displacement;
        tilted.displacement = pp.displacement;
        auto cum = pp_cumulative(cfgs);
        auto cfgs_copy = cfgs;
        tilted.sample = [cfgs_copy, cum](rng::Stream& rs) {
            return cfgs_copy[pick_index(cum, rs.next_u01())].xs;
        };
        tilted.sample_count = [cfgs_copy, cum](rng::Stream& rs) {
            return cfgs_copy[pick_index(cum, rs.next_u01())].xs.size();
        };
        tilted.enumerated = std::move(cfgs);
        return tilted;
    }
    if (mode == TiltMode::rejection) {
        if (!pp.sum_weight_bound)
            throw UnboundedDensity(
                "rejection tilting needs a declared bound on the total child "
                "weight");
        const double bound = *pp.sum_weight_bound;
        PointProcessLaw tilted;
        tilted.id = pp.id + "|tilted_rej";
        tilted.gamma = pp.gamma;
        tilted.fixed_displacement = pp.fixed_displacement;
        tilted.displacement = pp.displacement;
        auto base_sample = pp.sample;
        const double gamma = pp.gamma;
        tilted.sample = [base_sample, bound, gamma](rng::Stream& rs) {
            for (;;) {
                auto xs = base_sample(rs);
                double s = 0;
                for (double x : xs) s += std::exp(gamma * x);
                if (rs.next_u01() * bound < s) return xs;
            }
        };
        return tilted;
    }
    throw Error("importance tilting is exposed via sample_tilted_importance");
}

WeightedConfig sample_tilted_importance(const PointProcessLaw& pp,
                                        rng::Stream& rs) {
    const double m = pp.m_gamma();
    WeightedConfig wc;
    wc.xs = pp.sample(rs);
    double s = 0;
    for (double x : wc.xs) s += std::exp(pp.gamma * x);
    wc.weight = s / m;
    return wc;
}

MQLaw spine_mq_law(const PointProcessLaw& pp) {
    if (!pp.enumerable())
        throw NotEnumerable("spine driver pair needs an enumerable point process");
    const double m = pp.m_gamma();
    std::vector<MQJointAtom> atoms;
    for (const auto& cfg : *pp.enumerated) {
        if (cfg.xs.empty()) continue;  // empty configs carry no tilted mass
        double q = 0;
        for (double x : cfg.xs) q += child_weight(pp.gamma, x, m);
        // tilted config probability cfg.p * q, child picked with mass w/q
        for (double x : cfg.xs) {
            const double w = child_weight(pp.gamma, x, m);
            atoms.push_back({w, q, cfg.p * w});
        }
    }
    // merge equal (m, q) pairs so point-mass laws come out as single atoms
    std::sort(atoms.begin(), atoms.end(), [](const auto& a, const auto& b) {
        return a.m != b.m ? a.m < b.m : a.q < b.q;
    });
    std::vector<MQJointAtom> merged;
    for (const auto& a : atoms) {
        if (!merged.empty() && merged.back().m == a.m && merged.back().q == a.q)
            merged.back().p += a.p;
        else
            merged.push_back(a);
    }
    double total = 0;
    for (const auto& a : merged) total += a.p;
    if (std::fabs(total - 1.0) > 1e-9 + pp.enumeration_deficit * 4)
        throw Error("spine driver pair mass " + std::to_string(total));
    for (auto& a : merged) a.p /= total;
    return make_finite_support_law("spinemq(" + pp.id + ")", std::move(merged),
                                   false);
}

EstimateReport estimate_m_gamma(const PointProcessLaw& pp, uint64_t n,
                                rng::Key key, double confidence) {
    if (n < 100) throw Error("estimate_m_gamma needs n >= 100");
    if (pp.enumerable()) {
        Moments mom;
        mom.n = n;
        mom.mean = pp.m_gamma();
        mom.m2 = 0;
        auto rep = make_report(mom, confidence, 0, pp.id, "m_gamma");
        rep.std_error = 0;
        rep.ci_lo = rep.ci_hi = rep.estimate;
        return rep;
    }
    std::vector<Moments> blocks((n + par::kDefaultBlock - 1) / par::kDefaultBlock);
    par::parallel_blocks(n, par::kDefaultBlock, 0,
                         [&](size_t bi, uint64_t b, uint64_t e) {
                             Moments mm;
                             for (uint64_t i = b; i < e; ++i) {
                                 auto rs = rng::make_stream(
                                     key, rng::Domain::law_aux, i, 3);
                                 double s = 0;
                                 for (double x : pp.sample(rs))
                                     s += std::exp(pp.gamma * x);
                                 mm.add(s);
                             }
                             blocks[bi] = mm;
                         });
    Moments mom;
    for (const auto& b : blocks) mom.merge(b);
    return make_report(mom, confidence, 0, pp.id, "m_gamma");
}

}  // namespace perpetua::lawlib
