#include "perpetua/rvkit.hpp"

#include "perpetua/specparse.hpp"

#include <cmath>
#include <algorithm>

namespace perpetua::rvkit {

void BFunctionSpec::validate() const {
    if (!(alpha > 0) || !std::isfinite(alpha))
        throw Error("b spec: alpha must be positive");
    if (family == BFamily::power_log_iter && k < 0)
        throw Error("b spec: k must be >= 0");
    if (family == BFamily::power_exp_logpow) {
        if (!(gamma_exp > 0 && gamma_exp < 1))
            throw Error("b spec: gamma must lie in (0,1)");
        if (beta < 0) throw Error("b spec: beta must be >= 0");
    }
}

double BFunctionSpec::x_min() const {
    switch (family) {
        case BFamily::power:
            return 0.0;
        case BFamily::power_log_iter: {
            // point where the k-fold iterated log equals 1
            double v = 1.0;
            for (int i = 0; i < k; ++i) v = std::exp(v);
            return k == 0 ? 0.0 : v;
        }
        case BFamily::power_exp_logpow:
            return 1.0;
    }
    return 0.0;
}

double BFunctionSpec::eval(double x) const {
    const double xm = x_min();
    if (x < xm) x = xm;
    switch (family) {
        case BFamily::power:
            return std::pow(x, alpha);
        case BFamily::power_log_iter: {
            double l = x;
            for (int i = 0; i < k; ++i) l = std::log(l);
            return std::pow(x, alpha) * l;
        }
        case BFamily::power_exp_logpow:
            return std::pow(x, alpha) *
                   std::exp(beta * std::pow(std::log(x), gamma_exp));
    }
    return 0.0;
}

double BFunctionSpec::deriv(double x) const {
    const double xm = x_min();
    if (x < xm) return 0.0;
    switch (family) {
        case BFamily::power:
            return alpha * std::pow(x, alpha - 1.0);
        case BFamily::power_log_iter: {
            if (k == 0) return alpha * std::pow(x, alpha - 1.0);
            double l = x, chain = x;  // chain = x * prod_{j<k} log_j(x)
            for (int i = 0; i + 1 < k; ++i) {
                l = std::log(l);
                chain *= l;
            }
            const double lk = std::log(l);
            return alpha * std::pow(x, alpha - 1.0) * lk +
                   std::pow(x, alpha) / chain;
        }
        case BFamily::power_exp_logpow: {
            const double lx = std::log(x);
            const double core = eval(x);
            return core *
                   (alpha / x + beta * gamma_exp *
                                    std::pow(lx, gamma_exp - 1.0) / x);
        }
    }
    return 0.0;
}

std::string BFunctionSpec::to_string() const {
    switch (family) {
        case BFamily::power:
            return "power:alpha=" + std::to_string(alpha);
        case BFamily::power_log_iter:
            return "powerlog:alpha=" + std::to_string(alpha) +
                   ",k=" + std::to_string(k);
        case BFamily::power_exp_logpow:
            return "powerexp:alpha=" + std::to_string(alpha) +
                   ",beta=" + std::to_string(beta) +
                   ",gamma=" + std::to_string(gamma_exp);
    }
    return "?";
}

BFunctionSpec BFunctionSpec::parse(std::string_view text) {
    const auto p = specparse::parse(text);
    BFunctionSpec spec;
    if (p.name == "power") {
        spec.family = BFamily::power;
    } else if (p.name == "powerlog") {
        spec.family = BFamily::power_log_iter;
        spec.k = static_cast<int>(p.number_or("k", 1));
    } else if (p.name == "powerexp") {
        spec.family = BFamily::power_exp_logpow;
        spec.beta = p.number_or("beta", 0.0);
        spec.gamma_exp = p.number_or("gamma", 0.5);
    } else {
        throw ConfigError("unknown b family: " + p.name);
    }
    spec.alpha = p.number_or("alpha", 1.0);
    spec.validate();
    return spec;
}

Grid Grid::geometric(double lo, double hi, int per_decade) {
    Grid g;
    const double decades = std::log10(hi / lo);
    const int n = std::max(1, static_cast<int>(std::ceil(decades * per_decade)));
    g.pts.reserve(static_cast<size_t>(n) + 1);
    for (int i = 0; i <= n; ++i)
        g.pts.push_back(lo * std::pow(10.0, decades * i / n));
    g.pts.back() = hi;
    return g;
}

const Grid& default_validation_grid() {
    static const Grid g = Grid::geometric(1e-3, 1e6, 64);
    return g;
}

const Grid& tail_certification_grid() {
    static const Grid g = Grid::geometric(1.0, 1e15, 8);
    return g;
}

ConcaveSurrogate::ConcaveSurrogate(BFunctionSpec b, double c, SurrogateKind kind)
    : b_(std::move(b)), c_(c), kind_(kind) {
    b_.validate();
    if (!(c > b_.x_min()))
        throw Error("surrogate: shift c must exceed x_min of b");
    b_log_c_ = b_.eval(std::log(c_));
}

double ConcaveSurrogate::operator()(double x) const {
    const double u = std::log(c_ + x);
    const double lam = b_.eval(u) - b_log_c_;
    return kind_ == SurrogateKind::f ? lam : lam * u;
}

double ConcaveSurrogate::right_derivative_at_zero() const {
    const double logc = std::log(c_);
    const double d = b_.deriv(logc) / c_;
    return kind_ == SurrogateKind::f ? d : d * logc;
}

SurrogateCertificate certify_surrogate(const ConcaveSurrogate& s,
                                       const Grid& grid, double abs_tol,
                                       double rel_tol) {
    SurrogateCertificate cert;
    // slopes over {0} + grid; value(0) = 0 by construction
    std::vector<double> xs;
    xs.reserve(grid.pts.size() + 1);
    xs.push_back(0.0);
    for (double x : grid.pts) xs.push_back(x);
    std::vector<double> vs(xs.size());
    for (size_t i = 0; i < xs.size(); ++i) vs[i] = s(xs[i]);

    cert.nondecreasing = true;
    for (size_t i = 0; i + 1 < xs.size(); ++i) {
        const double slack = abs_tol + rel_tol * std::fabs(vs[i]);
        if (vs[i + 1] < vs[i] - slack) cert.nondecreasing = false;
    }

    cert.concave = true;
    double prev_slope = 0;
    bool have_prev = false;
    for (size_t i = 0; i + 1 < xs.size(); ++i) {
        const double slope = (vs[i + 1] - vs[i]) / (xs[i + 1] - xs[i]);
        if (have_prev) {
            const double slack =
                abs_tol + rel_tol * (std::fabs(prev_slope) + std::fabs(slope));
            const double increase = slope - prev_slope;
            cert.worst_slope_increase =
                std::max(cert.worst_slope_increase, increase);
            if (increase > slack) cert.concave = false;
        }
        prev_slope = slope;
        have_prev = true;
    }

    cert.positive_right_derivative = s.right_derivative_at_zero() > 0 &&
                                     vs[1] > 0;
    return cert;
}

ConcaveSurrogate make_surrogate(const BFunctionSpec& b, double c,
                                SurrogateKind kind, const Grid& grid) {
    ConcaveSurrogate s(b, c, kind);
    const SurrogateCertificate cert = certify_surrogate(s, grid);
    if (!cert.pass())
        throw ConcavityViolation("surrogate fails grid certification at c=" +
                                 std::to_string(c) + " (raise c)");
    return s;
}

double select_c(const BFunctionSpec& b, const Grid& grid, double cap) {
    b.validate();
    for (double c = std::exp(1.0); c <= cap; c *= 2.0) {
        if (!(c > b.x_min())) continue;
        ConcaveSurrogate f(b, c, SurrogateKind::f);
        ConcaveSurrogate g(b, c, SurrogateKind::g);
        if (certify_surrogate(f, grid).pass() &&
            certify_surrogate(g, grid).pass())
            return c;
    }
    throw NoAdmissibleC("no admissible shift c below cap for b=" +
                        b.to_string());
}

PhiFunction::PhiFunction(ConcaveSurrogate g,
                         std::function<double(double)> a_evaluator)
    : g_(std::move(g)), a_(std::move(a_evaluator)) {
    if (g_.kind() != SurrogateKind::g)
        throw Error("phi requires a g-kind surrogate");
}

double PhiFunction::operator()(double x) const {
    if (x == 0.0) return 0.0;
    const double a = a_(std::log1p(x));
    if (a <= 0.0)
        throw DivisionDegeneracy(
            "A(log(x+1)) vanished for x > 0; law has P{|M|<1} = 0");
    return g_(x) / a;
}

RegVarReport check_regular_variation(const std::function<double(double)>& h,
                                     double exponent, double y, const Grid& xs,
                                     double tol) {
    if (!(y > 1)) throw Error("regular variation check needs y > 1");
    RegVarReport rep;
    rep.y = y;
    rep.tol = tol;
    rep.target = std::pow(y, exponent);
    const double x_max = xs.pts.back();
    const double tail_lo = x_max / 10.0;
    double worst = 0, at_max = 0;
    for (double x : xs.pts) {
        if (x < tail_lo) continue;
        const double hx = h(x);
        if (hx == 0) continue;
        const double dev = std::fabs(h(x * y) / hx - rep.target);
        worst = std::max(worst, dev);
        if (x == x_max) at_max = dev;
    }
    rep.worst_tail_deviation = worst;
    rep.deviation_at_max = at_max;
    rep.pass = worst <= tol;
    return rep;
}

double empirical_submultiplicative_constant(
    const std::function<double(double)>& f, const Grid& grid) {
    double worst = 0;
    for (double x : grid.pts) {
        const double fx = f(x);
        for (double y : grid.pts) {
            if (y < x) continue;  // symmetric
            const double denom = fx + f(y);
            if (denom <= 0) continue;
            worst = std::max(worst, f(x * y) / denom);
        }
    }
    return worst;
}

}  // namespace perpetua::rvkit
