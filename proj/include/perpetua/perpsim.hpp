#pragma once
// Perpetuity trajectories in log-safe form, truncated limits, ladder
// decompositions, stopping functionals, conditional symmetrizations, and the
// capped-increment stopped-walk check.

#include <cstdint>
#include <optional>
#include <vector>

#include "perpetua/estimate.hpp"
#include "perpetua/lawlib.hpp"
#include "perpetua/rng.hpp"

namespace perpetua::perpsim {

struct PerpetuityPath {
    std::vector<double> m, q;       // draws, size n
    std::vector<double> s;          // s[k] = -log|Pi_k|, size n+1, s[0] = 0
    std::vector<int8_t> sign;       // sign of Pi_k, size n+1
    std::vector<double> z;          // partial sums, size n+1, z[0] = 0
    std::vector<uint32_t> underflow_steps;  // increments stored as exact zero
    std::string law_id;
    uint64_t stream_id = 0;

    size_t length() const { return m.size(); }
    double pi_abs(size_t k) const { return std::exp(-s[k]); }
    double pi(size_t k) const { return sign[k] * std::exp(-s[k]); }
    // log |Pi_{k-1} Q_k| for k >= 1
    double log_abs_increment(size_t k) const {
        return -s[k - 1] + std::log(std::fabs(q[k - 1]));
    }
};

PerpetuityPath simulate_path(const lawlib::MQLaw& law, size_t n,
                             rng::Stream& rs);

struct ZinfPolicy {
    double eps = 1e-12;
    uint64_t nmax = 1000000;
    uint32_t quiet_steps = 16;
};

enum class ZinfStatus { truncated, nonconvergent };

struct ZinfResult {
    double value = 0;
    ZinfStatus status = ZinfStatus::truncated;
    double last_increment = 0;
    uint64_t steps = 0;
    bool degenerate_fixed_point = false;
};

// Solution c of Q + M c = c simultaneously over all support atoms (exact
// floating-point check); detectable only for finite-support laws.
std::optional<double> degenerate_fixed_point(const lawlib::MQLaw& law);

ZinfResult simulate_zinf(const lawlib::MQLaw& law, const ZinfPolicy& policy,
                         rng::Stream& rs);

// Log-space variant for a.s. positive laws whose summands overflow doubles
// (heavy log-tailed Q). Accumulates log Z by log-sum-exp; requires the law
// to provide sample_log_positive.
struct ZinfLogResult {
    double log_value = -std::numeric_limits<double>::infinity();
    ZinfStatus status = ZinfStatus::truncated;
    uint64_t steps = 0;
};

ZinfLogResult simulate_zinf_log(const lawlib::MQLaw& law,
                                const ZinfPolicy& policy, rng::Stream& rs);

// Phi_k = Q_k + M_k Phi_{k-1}, same draw order as simulate_path.
std::vector<double> forward_ifs(const lawlib::MQLaw& law, double phi0, size_t n,
                                rng::Stream& rs);

struct StopResult {
    bool reached = false;
    size_t index = 0;  // steps scanned when not reached
};

StopResult ladder_epoch(const PerpetuityPath& path);        // |Pi_n| <= 1
StopResult sigma_x(const PerpetuityPath& path, double x);   // |Pi_n| < x
StopResult dual_sigma_star(const PerpetuityPath& path);     // |Pi_n| > 1

struct LadderBlock {
    size_t length;
    double mhat;    // |in-block product|, in (0,1]
    double qtilde;  // 1 v sup of in-block partial |products|
    double qhat;    // in-block discounted sum of |Q|
};

struct LadderDecomposition {
    std::vector<LadderBlock> blocks;
    std::vector<size_t> sigma_epochs;  // absolute epoch indices
    double zstar_completed = 0;  // sum |Pi_{k-1} Q_k| over completed blocks
    uint64_t total_steps = 0;
};

LadderDecomposition ladder_decompose(const lawlib::MQLaw& law, size_t blocks,
                                     rng::Stream& rs,
                                     uint64_t nmax_per_block = 1000000);

// Pairs (M_1 M_2, Q^{(2)}, symmetrized Q-bar) with the product matched
// exactly: by reuse of (M_1, M_2) for independent laws, by conditional
// resampling for finite-support laws.
struct SymmetrizedPair {
    double pi2;
    double q2;
    double q2bar;
};

class PairSymmetrizer {
  public:
    explicit PairSymmetrizer(const lawlib::MQLaw& law);
    SymmetrizedPair sample(rng::Stream& rs) const;
    bool tolerance_matching() const { return tolerance_matching_; }

  private:
    const lawlib::MQLaw* law_;
    bool independent_mode_ = false;
    bool tolerance_matching_ = false;  // product groups merged at 1e-12
    // finite-support machinery: per product group, conditional atom table
    std::vector<double> group_products_;
    std::vector<std::vector<std::pair<double, double>>> group_q2_cum_;  // (cum p, q2)
};

struct SupFunctionals {
    double sup_piq = 0;       // sup_{n>=1} |Pi_{n-1} Q_n|
    size_t argmax_piq = 0;
    double log_sup_piq = 0;
    double sup_pi = 0;        // sup_{n>=0} |Pi_n|
    size_t argmax_pi = 0;
    double log_sup_pi = 0;
};

SupFunctionals sup_functionals(const PerpetuityPath& path);

// capped-increment stopped walk: T = inf{n : S_n >= x or running max of
// |Pi_{k-1} Q_k| exceeds eta}; reports the identity residual
// |mean S^{(x)}_T - A(x) * mean T| with the standard error of the coupled
// per-replicate difference.
struct WaldReport {
    double v_hat = 0, v_se = 0;  // mean T, i.e. V(e^{-x})
    double s_hat = 0, s_se = 0;  // mean of capped S at T
    double a_of_x = 0;
    double residual = 0;
    double residual_se = 0;
    double alpha_hat = 0;  // P{sup |Pi Q| <= eta} over the pilot horizon
    double eta = 0, x = 0;
    uint64_t reps = 0;
};

WaldReport wald_check(const lawlib::MQLaw& law, const lawlib::AEvaluator& a,
                      double eta, double x, uint64_t reps, rng::Key key,
                      int threads = 0);

// empirical 90th percentile of sup_{n<=horizon} |Pi_{n-1} Q_n|
double pick_eta(const lawlib::MQLaw& law, rng::Key key,
                uint64_t pilot_reps = 4096, size_t horizon = 64);

double estimate_alpha(const lawlib::MQLaw& law, double eta, rng::Key key,
                      uint64_t reps, size_t horizon);

EstimateReport estimate_sigma_x_mean(const lawlib::MQLaw& law, double x,
                                     uint64_t reps, rng::Key key,
                                     double confidence = 0.99, int threads = 0,
                                     uint64_t nmax = 1000000);

struct ZinfMcResult {
    EstimateReport report;  // over convergent replicates
    uint64_t nonconvergent = 0;
};

ZinfMcResult mc_zinf_mean(const lawlib::MQLaw& law, const ZinfPolicy& policy,
                          uint64_t reps, rng::Key key, double confidence = 0.99,
                          int threads = 0);

}  // namespace perpetua::perpsim
