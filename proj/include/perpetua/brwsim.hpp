#pragma once
// Generation-by-generation branching walk with normalized weights. A
// generation is stored flat (positions, log weights, linear weights); the
// additive martingale value is a compensated sum of the linear weights,
// which are maintained multiplicatively so point-mass laws stay exact.

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "perpetua/lawlib.hpp"
#include "perpetua/rng.hpp"

namespace perpetua::brwsim {

struct BrwCaps {
    size_t pop_cap = size_t(1) << 22;
    uint32_t gen_cap = 30;
};

struct Generation {
    std::vector<double> pos;   // positions S(v)
    std::vector<double> logw;  // gamma * S(v) - n * log m(gamma)
    std::vector<double> linw;  // products of per-edge weights
    uint32_t n = 0;

    size_t pop() const { return pos.size(); }
    double wn() const;  // striped compensated sum of linw
    std::pair<double, double> logw_range() const;
};

Generation root_generation();

// One reproduction sweep; every parent draws from its own
// (replicate, generation, individual) substream. Throws PopulationExplosion
// when the next generation would exceed pop_cap.
Generation grow(const Generation& gen, const lawlib::PointProcessLaw& pp,
                rng::Key key, uint64_t replicate, const BrwCaps& caps);

struct Trajectory {
    std::vector<double> w;  // W_0 .. W_gens; zero-padded to n_max on extinction
    bool extinct = false;
    bool capped = false;  // population cap hit; w ends at the last full level
    uint32_t gens = 0;
};

Trajectory martingale_trajectory(const lawlib::PointProcessLaw& pp,
                                 uint32_t n_max, rng::Key key,
                                 uint64_t replicate, const BrwCaps& caps);

std::vector<double> running_max(std::span<const double> w);

// Two-sample comparison of W_{n+m} against the composition
// sum_v L(v) W_m(v) over a realized generation n with independent subtrees.
struct FixpointReport {
    double ks_distance = 0;
    double ks_critical = 0;
    uint64_t n_samples = 0;
    bool pass = false;
};

FixpointReport check_fixpoint(const lawlib::PointProcessLaw& pp, uint32_t n,
                              uint32_t m, uint64_t reps, rng::Key key,
                              const BrwCaps& caps, double alpha = 0.01,
                              int threads = 0);

}  // namespace perpetua::brwsim
