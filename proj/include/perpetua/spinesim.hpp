#pragma once
// Size-biased walk with a distinguished ray: tilted reproduction along the
// spine, size-biased child selection, ordinary subtrees rooted at the
// siblings, and the additive decomposition of the size-biased martingale.

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "perpetua/brwsim.hpp"
#include "perpetua/estimate.hpp"
#include "perpetua/lawlib.hpp"
#include "perpetua/rng.hpp"

namespace perpetua::spinesim {

struct SiblingRecord {
    double ratio;     // weight relative to the spine parent
    double logw_abs;  // log of the absolute weight
    // W_0 .. W_{depth} of the ordinary subtree rooted at this sibling
    std::vector<double> subtree_w;
    bool capped = false;
};

struct SpineStep {
    double m = 0;     // spine weight ratio
    double q = 0;     // total child weight of the spine parent
    double pi = 0;    // spine weight after this step (linear)
    double logw = 0;  // log-safe spine weight
    std::vector<SiblingRecord> siblings;
};

struct SpinePath {
    uint32_t n = 0;
    std::vector<SpineStep> steps;   // steps[k-1] describes step k
    std::vector<double> what;       // assembled \hat W_0 .. \hat W_n
    double weight = 1.0;            // importance weight (1 in exact mode)
    bool capped = false;            // some sibling subtree hit the cap
    std::string law_id;
};

struct SpineStepDraw {
    std::vector<double> xs;
    size_t child = 0;
    double m = 0, q = 0;
    double importance_weight = 1.0;
};

// One spine reproduction event under the exact tilted law; throws
// UnsupportedTilting for sampler-only point processes.
SpineStepDraw spine_step(const lawlib::PointProcessLaw& pp, rng::Stream& rs);

// General-law variant: configurations come from the base law and carry the
// density ratio as an importance weight.
SpineStepDraw spine_step_importance(const lawlib::PointProcessLaw& pp,
                                    rng::Stream& rs);

enum class TiltPolicy { exact, importance };

SpinePath simulate_what(const lawlib::PointProcessLaw& pp, uint32_t n,
                        rng::Key key, uint64_t replicate,
                        const brwsim::BrwCaps& caps,
                        TiltPolicy policy = TiltPolicy::exact);

// Residuals of the three renditions of the decomposition at horizon n:
//  - decomposition: spine term plus sibling-subtree terms (recomputed fold)
//  - closed_form:   Pi_n + sum (Pi_{k-1} Q_k - Pi_k) + sum Pi_{k-1} R_k
//  - paper_form:    1 + sum Pi_{k-1} (Q_k + R_k), reported for comparison
struct SpineResiduals {
    double decomposition = 0;
    double closed_form = 0;
    double paper_form = 0;
    double what = 0;
};

SpineResiduals verify_spine_identity(const SpinePath& path);

struct TwoEstimates {
    EstimateReport lhs;  // E W_n h(W_0..W_n) over the ordinary walk
    EstimateReport rhs;  // E h(\hat W_0..\hat W_n) over spine runs
    double combined_se = 0;
    bool pass = false;  // |lhs - rhs| <= 3 combined se
};

TwoEstimates size_biasing_check(
    const lawlib::PointProcessLaw& pp, uint32_t n,
    const std::function<double(std::span<const double>)>& h, uint64_t reps,
    rng::Key key, const brwsim::BrwCaps& caps, double confidence = 0.99,
    int threads = 0);

// E[1/\hat W_j] for j = 0..n_max (mean one for every j).
std::vector<EstimateReport> reciprocal_martingale_check(
    const lawlib::PointProcessLaw& pp, uint32_t n_max, uint64_t reps,
    rng::Key key, const brwsim::BrwCaps& caps, double confidence = 0.99,
    int threads = 0);

}  // namespace perpetua::spinesim
