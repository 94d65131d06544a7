#pragma once
// Parametric laws for the perpetuity driver pair (M, Q) and for the
// reproduction point process of the branching walk, with closed-form
// analytics where available, regime classification, truncated-log-moment
// evaluators, and the induced / tilted laws.

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "perpetua/discrete.hpp"
#include "perpetua/errors.hpp"
#include "perpetua/estimate.hpp"
#include "perpetua/rng.hpp"

namespace perpetua::lawlib {

// ---------------------------------------------------------------------------
// driver pair laws

struct MQJointAtom {
    double m, q, p;
};

struct MQAnalytics {
    // E log|M| as an extended real; NaN when both one-sided parts diverge.
    double e_log_abs_m = std::numeric_limits<double>::quiet_NaN();
    double e_log_plus_abs_m = std::numeric_limits<double>::quiet_NaN();
    double e_log_minus_abs_m = std::numeric_limits<double>::quiet_NaN();
    double p_m_lt1 = std::numeric_limits<double>::quiet_NaN();  // P{|M| < 1}
    double p_m_gt1 = std::numeric_limits<double>::quiet_NaN();  // P{|M| > 1}
    std::optional<double> e_m, e_abs_m, e_q;
    std::function<double(double)> survival_neglogm;  // y -> P{-log|M| > y}
    std::function<double(double)> a_closed;          // A(x) if known
    std::optional<bool> j_logplus_m_finite;          // E J(log^+|M|) < inf
    bool mq_independent = false;
};

struct MQLaw {
    std::string id;
    std::function<std::pair<double, double>(rng::Stream&)> sample_raw;
    // optional log-space draws (log M, log Q) for a.s. positive laws whose
    // Q can overflow the double range; consumes the same stream draws as
    // sample_raw so coupled comparisons stay path-exact
    std::function<std::pair<double, double>(rng::Stream&)> sample_log_positive;
    std::optional<MQAnalytics> analytics;
    std::optional<std::vector<MQJointAtom>> support;

    bool finite_support() const { return support.has_value(); }
};

// One checked draw; throws SamplerViolation when a sampler emits M = 0.
std::pair<double, double> sample_mq(const MQLaw& law, rng::Stream& rs);

// Finite-support constructor: validates masses, M != 0, P{Q = 0} < 1, and
// derives exact analytics.
MQLaw make_finite_support_law(std::string id, std::vector<MQJointAtom> atoms,
                              bool mq_independent = false);

// stock catalogue
MQLaw const_law(double m, double q);
MQLaw twopoint_m_law(double m1, double p1, double m2, double q);
MQLaw uniform01_m_law(double q);
MQLaw lognormal_m_law(double mu, double sigma, double q);
// -log M ~ Pareto(shape, scale); shape <= 1 realizes E log M = -inf
MQLaw heavy_ladder_law(double shape, double scale, double q);
// M constant, P{log Q > t} = t^-beta for t >= 1
MQLaw logpareto_q_law(double m, double beta);
MQLaw q_twopoint_law(double m, double q1, double q2, double p1);

MQLaw parse_mq_law(std::string_view text);
std::vector<std::string> mq_law_catalogue();

// ---------------------------------------------------------------------------
// truncated-log-moment evaluator A and the ratio J

class AEvaluator {
  public:
    static AEvaluator closed_form(std::function<double(double)> a,
                                  double p_m_lt1);
    static AEvaluator from_law(const MQLaw& law);  // needs analytics.a_closed
    // builds the piecewise-linear table from draws of -log|M|
    static AEvaluator empirical(const MQLaw& law, rng::Key key,
                                uint64_t samples = 1000000,
                                size_t grid_points = 512);
    static AEvaluator empirical_weighted(
        std::vector<std::pair<double, double>> neglogm_weight,
        size_t grid_points = 512);

    double A(double x) const;
    // J(x) = x / A(x) for x > 0, 0 for x < 0, 1/P{|M|<1} at 0.
    // Throws UndefinedJ at x = 0 when P{|M|<1} = 0; returns +inf for x > 0
    // when A(x) = 0.
    double J(double x) const;

    double p_m_lt1() const { return p_m_lt1_; }
    bool is_empirical() const { return !table_x_.empty(); }
    uint64_t sample_count() const { return samples_; }

  private:
    std::function<double(double)> closed_;
    std::vector<double> table_x_, table_a_;
    double tail_a_ = 0;  // constant extension beyond the table
    double p_m_lt1_ = 0;
    uint64_t samples_ = 0;
};

// ---------------------------------------------------------------------------
// reproduction point process laws

struct PPConfig {
    std::vector<double> xs;  // child displacements
    double p;
};

struct PointProcessLaw {
    std::string id;
    double gamma = 1.0;
    std::function<std::vector<double>(rng::Stream&)> sample;
    // same draws as `sample`, returning only the child count; lets
    // fixed-displacement laws grow generations without per-parent allocation
    std::function<size_t(rng::Stream&)> sample_count;
    std::optional<std::vector<PPConfig>> enumerated;  // possibly truncated
    double enumeration_deficit = 0.0;
    std::optional<double> m_gamma_closed;
    std::optional<double> sum_weight_bound;  // a.s. bound on sum e^{gamma x}
    std::optional<double> mean_offspring;
    bool fixed_displacement = false;  // all children share one displacement
    double displacement = 0.0;

    bool enumerable() const { return enumerated.has_value(); }
    double m_gamma() const;
};

// e^{gamma x} / m; the one weight formula shared by every module so that
// enumerations and simulations agree atom-for-atom.
inline double child_weight(double gamma, double x, double m_gamma) {
    return std::exp(gamma * x) / m_gamma;
}

PointProcessLaw gw_two_point_pp(int nmin, int nmax, double p, double x,
                                double gamma);
PointProcessLaw deterministic_binary_pp();  // N = 2, x = -log 2, gamma = 1
PointProcessLaw poisson_pp(double lambda, double x, double gamma);
// N = 0 with prob 1 - pv, else `fanout` children at log(V/fanout) where V is
// the inverse size-biasing of a log-Pareto(beta) variable; gamma = 1 and
// m(1) = 1 exactly. Realizes heavy W_1 laws around the J-moment boundary.
PointProcessLaw heavy_w1_pp(double beta, int fanout);

PointProcessLaw parse_pp_law(std::string_view text);
std::vector<std::string> pp_law_catalogue();

// W_1 = sum of child weights of one configuration.
double sample_w1(const PointProcessLaw& pp, rng::Stream& rs);

// ---------------------------------------------------------------------------
// regime classification

enum class RegimeCase { C1, C2, divergent, inconclusive };
enum class RegimeSubcase { A1, A2, A3, none };

struct RegimeReport {
    RegimeCase regime = RegimeCase::inconclusive;
    RegimeSubcase subcase = RegimeSubcase::none;
    bool empirical = false;
    std::string evidence;
};

// Uses analytics when present; otherwise spends `budget` Monte Carlo draws
// and reports empirical evidence (inconclusive when ambiguous).
RegimeReport classify_regime(const MQLaw& law, uint64_t budget = 0,
                             std::optional<rng::Key> key = std::nullopt);

const char* to_string(RegimeCase c);
const char* to_string(RegimeSubcase s);

// ---------------------------------------------------------------------------
// induced and tilted laws

// P{M in B} = E sum_{|v|=1} L(v) 1_B(L(v)); exact for enumerable laws.
// Throws DegenerateBrw if the result is the point mass at 1.
DiscreteLaw induced_m_law(const PointProcessLaw& pp);

// Weighted Monte Carlo variant for sampler-only laws: per sampled
// configuration, every child contributes (L(v), weight L(v)).
std::vector<std::pair<double, double>> induced_m_weighted_samples(
    const PointProcessLaw& pp, uint64_t n_configs, rng::Key key);

struct InducedW1Q {
    DiscreteLaw w1;
    DiscreteLaw q;  // dQ = x dW1
};
InducedW1Q induced_q_and_w1_law(const PointProcessLaw& pp);

enum class TiltMode { exact, rejection, importance };

// Exact mode needs an enumerator; rejection mode a declared bound on the
// total child weight. Importance mode is exposed via
// sample_tilted_importance below.
PointProcessLaw tilted_reproduction_law(const PointProcessLaw& pp,
                                        TiltMode mode = TiltMode::exact);

struct WeightedConfig {
    std::vector<double> xs;
    double weight;  // (sum e^{gamma x}) / m
};
WeightedConfig sample_tilted_importance(const PointProcessLaw& pp,
                                        rng::Stream& rs);

// Joint law of the spine step pair: exact finite support for enumerable pp.
MQLaw spine_mq_law(const PointProcessLaw& pp);

EstimateReport estimate_m_gamma(const PointProcessLaw& pp, uint64_t n,
                                rng::Key key, double confidence = 0.99);

}  // namespace perpetua::lawlib
