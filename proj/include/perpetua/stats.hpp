#pragma once
// Estimators, exact convolution oracles, tail curves, inequality checkers,
// and the batched growth diagnostic for moment finiteness.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "perpetua/brwsim.hpp"
#include "perpetua/discrete.hpp"
#include "perpetua/estimate.hpp"
#include "perpetua/lawlib.hpp"
#include "perpetua/rng.hpp"

namespace perpetua::stats {

// Exact laws of the partial sum and of the running product after n steps of
// a finite-support driver pair, by forward convolution over joint atoms.
// Throws SupportExplosion when the merged joint support would exceed the cap.
struct ExactZn {
    DiscreteLaw z;
    DiscreteLaw pi;
};

ExactZn dp_exact_zn(const lawlib::MQLaw& law, uint32_t n,
                    size_t support_cap = 10000000);

EstimateReport mc_mean(const std::function<double(rng::Stream&)>& sampler,
                       uint64_t reps, rng::Key key,
                       rng::Domain domain = rng::Domain::estimate,
                       double confidence = 0.99, int threads = 0,
                       std::string law_id = "", std::string tag = "",
                       uint64_t seed = 0);

struct CurvePoint {
    double t = 0;
    double estimate = 0;  // P{X > t}
    double lo = 0, hi = 0;
    uint64_t hits = 0, n = 0;
};

std::vector<CurvePoint> tail_curve(std::span<const double> samples,
                                   std::span<const double> t_grid,
                                   double confidence = 0.99);

struct InequalityPoint {
    double t = 0;
    double lhs_up = 0, rhs_lo = 0;
    double ratio_pt = 0, ratio_up = 0;
    bool pass = false;
};

struct InequalityReport {
    bool pass = false;
    double best_constant = 0;  // worst observed point ratio
    std::string rule;
    std::vector<InequalityPoint> points;
};

// Pointwise check lhs_upperCI <= constant * rhs_lowerCI + slack.
InequalityReport inequality_check_ci(const std::vector<CurvePoint>& lhs,
                                     const std::vector<CurvePoint>& rhs,
                                     double constant, double slack = 0.0);

// Existential-constant mode: reports the empirical ratio curve and passes
// iff the Wilson-upper ratio stays below `cap` everywhere and the last grid
// point does not blow up past `tail_factor` times the median point ratio.
InequalityReport inequality_check_ratio(const std::vector<CurvePoint>& num,
                                        const std::vector<CurvePoint>& den,
                                        double cap = 32.0,
                                        double tail_factor = 4.0);

enum class GrowthVerdict { converging, diverging, inconclusive };
const char* to_string(GrowthVerdict v);

// Running means over a doubling batch schedule (2^log2_start .. 2^log2_end
// cumulative samples), together with the max-to-sum share (which vanishes
// in the limit exactly when the mean is finite). Converging: the mean moves
// by < 5% per doubling over the last three and the share is below 7%.
// Diverging: the share exceeds 7% and the means show net growth (25% per
// doubling compounded, or any full-schedule growth). A calibrated heuristic,
// not a test with guaranteed error rates.
struct GrowthTrace {
    std::vector<uint64_t> checkpoints;
    std::vector<double> means;
    std::vector<double> max_share;  // max sample / running sum
    GrowthVerdict verdict = GrowthVerdict::inconclusive;
};

GrowthTrace moment_growth_diagnostic(
    const std::function<double(rng::Stream&)>& sampler, rng::Key key,
    int log2_start = 12, int log2_end = 22,
    rng::Domain domain = rng::Domain::diag, int threads = 0);

// One-sample KS distance between an empirical sample and a discrete law.
double ks_distance_to_discrete(std::vector<double> samples,
                               const DiscreteLaw& law);

// Signals behind uniform integrability of the weight martingale: mean weight
// at the horizon, evidence that the spine products vanish, and the growth
// verdict for the J-weighted moment of W_1.
struct UiSignals {
    EstimateReport w_mean_at_horizon;
    uint64_t capped_trajectories = 0;
    bool w_mean_near_one = false;
    bool pi_to_zero_positive = false;
    bool empirical_m_evidence = false;
    std::string pi_evidence;
    GrowthTrace j_moment;
    bool expect_ui = false;
    std::string summary;
};

UiSignals uniform_integrability_check(const lawlib::PointProcessLaw& pp,
                                      uint64_t reps, rng::Key key,
                                      const brwsim::BrwCaps& caps,
                                      uint32_t w_horizon = 0, int threads = 0);

}  // namespace perpetua::stats
