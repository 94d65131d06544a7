#pragma once
// Scalar building blocks shared by all kernel backends. SIMD backends use
// these for remainder elements, so the per-element arithmetic here defines
// the canonical result every backend must reproduce bit-for-bit.

#include <cmath>
#include <cstdint>
#include <cstddef>

namespace perpetua::kern::detail {

inline constexpr uint32_t PHILOX_M0 = 0xD2511F53u;
inline constexpr uint32_t PHILOX_M1 = 0xCD9E8D57u;
inline constexpr uint32_t PHILOX_W0 = 0x9E3779B9u;
inline constexpr uint32_t PHILOX_W1 = 0xBB67AE85u;

inline void philox_block(uint32_t k0, uint32_t k1, uint64_t hi, uint64_t lo,
                         uint32_t out[4]) {
    uint32_t x0 = static_cast<uint32_t>(lo);
    uint32_t x1 = static_cast<uint32_t>(lo >> 32);
    uint32_t x2 = static_cast<uint32_t>(hi);
    uint32_t x3 = static_cast<uint32_t>(hi >> 32);
    for (int r = 0; r < 10; ++r) {
        const uint64_t p0 = static_cast<uint64_t>(x0) * PHILOX_M0;
        const uint64_t p1 = static_cast<uint64_t>(x2) * PHILOX_M1;
        const uint32_t hi0 = static_cast<uint32_t>(p0 >> 32);
        const uint32_t lo0 = static_cast<uint32_t>(p0);
        const uint32_t hi1 = static_cast<uint32_t>(p1 >> 32);
        const uint32_t lo1 = static_cast<uint32_t>(p1);
        x0 = hi1 ^ x1 ^ k0;
        x1 = lo1;
        x2 = hi0 ^ x3 ^ k1;
        x3 = lo0;
        k0 += PHILOX_W0;
        k1 += PHILOX_W1;
    }
    out[0] = x0;
    out[1] = x1;
    out[2] = x2;
    out[3] = x3;
}

// One Neumaier update. The |s| >= |v| comparison and the blend orientation
// match the branchless form used by the SIMD backends.
inline void neumaier_step(double& s, double& c, double v) {
    const double t = s + v;
    const double big = (std::fabs(s) >= std::fabs(v)) ? s : v;
    const double small = (std::fabs(s) >= std::fabs(v)) ? v : s;
    c += (big - t) + small;
    s = t;
}

inline double fold_lanes_16(const double s[8], const double c[8]) {
    double total = 0.0, comp = 0.0;
    for (int j = 0; j < 8; ++j) neumaier_step(total, comp, s[j]);
    for (int j = 0; j < 8; ++j) neumaier_step(total, comp, c[j]);
    return total + comp;
}

inline double u01_from_u64(uint64_t bits) {
    const double k = static_cast<double>(bits >> 12);  // exact, < 2^52
    return (k + 0.5) * 0x1p-52;                        // in (0,1)
}

}  // namespace perpetua::kern::detail
