// NEON backend (aarch64). Floating-point kernels use 2-lane vectors with
// explicit compare+select so tie handling matches the scalar reference
// exactly; the Philox integer kernels stay scalar (the 32x32 multiply chain
// gains little from 2-lane NEON and the scalar form is the canonical one).

#include "perpetua/kernels.hpp"
#include "common.hpp"

#include <arm_neon.h>

namespace perpetua::kern {
namespace {

using namespace detail;

void philox_seq_neon(uint32_t k0, uint32_t k1, uint64_t hi, uint64_t lo0,
                     size_t nblocks, uint32_t* out) {
    for (size_t i = 0; i < nblocks; ++i)
        philox_block(k0, k1, hi, lo0 + i, out + 4 * i);
}

void philox_strided_neon(uint32_t k0, uint32_t k1, uint64_t hi0,
                         uint64_t hi_stride, uint64_t lo, size_t nblocks,
                         uint32_t* out) {
    for (size_t i = 0; i < nblocks; ++i)
        philox_block(k0, k1, hi0 + i * hi_stride, lo, out + 4 * i);
}

inline void neumaier_step_f64x2(float64x2_t& s, float64x2_t& c, float64x2_t v) {
    const float64x2_t t = vaddq_f64(s, v);
    const uint64x2_t mask = vcgeq_f64(vabsq_f64(s), vabsq_f64(v));
    const float64x2_t big = vbslq_f64(mask, s, v);
    const float64x2_t small = vbslq_f64(mask, v, s);
    c = vaddq_f64(c, vaddq_f64(vsubq_f64(big, t), small));
    s = t;
}

double striped_sum_neon(const double* x, size_t n) {
    float64x2_t sv[4], cv[4];
    for (int j = 0; j < 4; ++j) {
        sv[j] = vdupq_n_f64(0.0);
        cv[j] = vdupq_n_f64(0.0);
    }
    const size_t main_n = n - n % 8;
    for (size_t i = 0; i < main_n; i += 8)
        for (int j = 0; j < 4; ++j)
            neumaier_step_f64x2(sv[j], cv[j], vld1q_f64(x + i + 2 * j));
    double s[8], c[8];
    for (int j = 0; j < 4; ++j) {
        vst1q_f64(s + 2 * j, sv[j]);
        vst1q_f64(c + 2 * j, cv[j]);
    }
    for (size_t i = main_n; i < n; ++i)
        neumaier_step(s[i - main_n], c[i - main_n], x[i]);
    return fold_lanes_16(s, c);
}

void u01_neon(const uint64_t* bits, double* out, size_t n) {
    const uint64x2_t exp52 = vdupq_n_u64(0x4330000000000000ULL);
    const float64x2_t two52 = vdupq_n_f64(0x1p52);
    const float64x2_t half = vdupq_n_f64(0.5);
    const float64x2_t scale = vdupq_n_f64(0x1p-52);
    size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        const uint64x2_t k = vshrq_n_u64(vld1q_u64(bits + i), 12);
        const float64x2_t dk =
            vsubq_f64(vreinterpretq_f64_u64(vorrq_u64(k, exp52)), two52);
        vst1q_f64(out + i, vmulq_f64(vaddq_f64(dk, half), scale));
    }
    for (; i < n; ++i) out[i] = u01_from_u64(bits[i]);
}

void axpb_neon(const double* x, double a, double b, double* out, size_t n) {
    const float64x2_t av = vdupq_n_f64(a), bv = vdupq_n_f64(b);
    size_t i = 0;
    for (; i + 2 <= n; i += 2)
        vst1q_f64(out + i, vaddq_f64(vmulq_f64(av, vld1q_f64(x + i)), bv));
    for (; i < n; ++i) out[i] = a * x[i] + b;
}

void mul_neon(const double* x, const double* y, double* out, size_t n) {
    size_t i = 0;
    for (; i + 2 <= n; i += 2)
        vst1q_f64(out + i, vmulq_f64(vld1q_f64(x + i), vld1q_f64(y + i)));
    for (; i < n; ++i) out[i] = x[i] * y[i];
}

void minmax_neon(const double* x, size_t n, double* mn, double* mx) {
    if (n < 4) {
        scalar_backend().minmax(x, n, mn, mx);
        return;
    }
    // Canonical 4-lane striping, realized as two 2-lane registers.
    float64x2_t min0 = vld1q_f64(x), min1 = vld1q_f64(x + 2);
    float64x2_t max0 = min0, max1 = min1;
    size_t i = 4;
    for (; i + 4 <= n; i += 4) {
        const float64x2_t v0 = vld1q_f64(x + i), v1 = vld1q_f64(x + i + 2);
        min0 = vbslq_f64(vcltq_f64(v0, min0), v0, min0);
        min1 = vbslq_f64(vcltq_f64(v1, min1), v1, min1);
        max0 = vbslq_f64(vcgtq_f64(v0, max0), v0, max0);
        max1 = vbslq_f64(vcgtq_f64(v1, max1), v1, max1);
    }
    double lmin[4], lmax[4];
    vst1q_f64(lmin, min0);
    vst1q_f64(lmin + 2, min1);
    vst1q_f64(lmax, max0);
    vst1q_f64(lmax + 2, max1);
    for (; i < n; ++i) {
        const size_t j = i % 4;
        lmin[j] = (x[i] < lmin[j]) ? x[i] : lmin[j];
        lmax[j] = (x[i] > lmax[j]) ? x[i] : lmax[j];
    }
    double lo = lmin[0], hi = lmax[0];
    for (size_t j = 1; j < 4; ++j) {
        lo = (lmin[j] < lo) ? lmin[j] : lo;
        hi = (lmax[j] > hi) ? lmax[j] : hi;
    }
    *mn = lo;
    *mx = hi;
}

}  // namespace

const Backend& neon_backend() {
    static const Backend b{
        "neon",           philox_seq_neon, philox_strided_neon,
        striped_sum_neon, u01_neon,        axpb_neon,
        mul_neon,         minmax_neon,
    };
    return b;
}

}  // namespace perpetua::kern
