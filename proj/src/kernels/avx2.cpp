// AVX2 backend. Each kernel implements the same algorithm as the scalar
// reference (same lane striping, same operation order), so results are
// bit-identical. Compiled with -mavx2 only; no FMA.

#include "perpetua/kernels.hpp"
#include "common.hpp"

#include <immintrin.h>

namespace perpetua::kern {
namespace {

using namespace detail;

inline __m256i broadcast_u32(uint32_t v) {
    return _mm256_set1_epi64x(static_cast<long long>(static_cast<uint64_t>(v)));
}

// 4 blocks per iteration; each 64-bit lane carries one zero-extended u32 word.
void philox4_avx2(uint32_t k0, uint32_t k1, __m256i x0, __m256i x1, __m256i x2,
                  __m256i x3, uint32_t* out) {
    const __m256i m32 = _mm256_set1_epi64x(0xffffffffLL);
    const __m256i M0v = broadcast_u32(PHILOX_M0);
    const __m256i M1v = broadcast_u32(PHILOX_M1);
    for (int r = 0; r < 10; ++r) {
        const __m256i p0 = _mm256_mul_epu32(x0, M0v);
        const __m256i p1 = _mm256_mul_epu32(x2, M1v);
        const __m256i hi0 = _mm256_srli_epi64(p0, 32);
        const __m256i lo0 = _mm256_and_si256(p0, m32);
        const __m256i hi1 = _mm256_srli_epi64(p1, 32);
        const __m256i lo1 = _mm256_and_si256(p1, m32);
        x0 = _mm256_xor_si256(_mm256_xor_si256(hi1, x1), broadcast_u32(k0));
        x1 = lo1;
        x2 = _mm256_xor_si256(_mm256_xor_si256(hi0, x3), broadcast_u32(k1));
        x3 = lo0;
        k0 += PHILOX_W0;
        k1 += PHILOX_W1;
    }
    alignas(32) uint64_t t0[4], t1[4], t2[4], t3[4];
    _mm256_store_si256(reinterpret_cast<__m256i*>(t0), x0);
    _mm256_store_si256(reinterpret_cast<__m256i*>(t1), x1);
    _mm256_store_si256(reinterpret_cast<__m256i*>(t2), x2);
    _mm256_store_si256(reinterpret_cast<__m256i*>(t3), x3);
    for (int b = 0; b < 4; ++b) {
        out[4 * b + 0] = static_cast<uint32_t>(t0[b]);
        out[4 * b + 1] = static_cast<uint32_t>(t1[b]);
        out[4 * b + 2] = static_cast<uint32_t>(t2[b]);
        out[4 * b + 3] = static_cast<uint32_t>(t3[b]);
    }
}

void philox_seq_avx2(uint32_t k0, uint32_t k1, uint64_t hi, uint64_t lo0,
                     size_t nblocks, uint32_t* out) {
    const __m256i m32 = _mm256_set1_epi64x(0xffffffffLL);
    const __m256i x2c = broadcast_u32(static_cast<uint32_t>(hi));
    const __m256i x3c = broadcast_u32(static_cast<uint32_t>(hi >> 32));
    size_t i = 0;
    for (; i + 4 <= nblocks; i += 4) {
        const __m256i lov = _mm256_add_epi64(
            _mm256_set1_epi64x(static_cast<long long>(lo0 + i)),
            _mm256_set_epi64x(3, 2, 1, 0));
        philox4_avx2(k0, k1, _mm256_and_si256(lov, m32),
                     _mm256_srli_epi64(lov, 32), x2c, x3c, out + 4 * i);
    }
    for (; i < nblocks; ++i) philox_block(k0, k1, hi, lo0 + i, out + 4 * i);
}

void philox_strided_avx2(uint32_t k0, uint32_t k1, uint64_t hi0,
                         uint64_t hi_stride, uint64_t lo, size_t nblocks,
                         uint32_t* out) {
    const __m256i m32 = _mm256_set1_epi64x(0xffffffffLL);
    const __m256i x0c = broadcast_u32(static_cast<uint32_t>(lo));
    const __m256i x1c = broadcast_u32(static_cast<uint32_t>(lo >> 32));
    size_t i = 0;
    for (; i + 4 <= nblocks; i += 4) {
        const __m256i hiv = _mm256_add_epi64(
            _mm256_set1_epi64x(static_cast<long long>(hi0 + i * hi_stride)),
            _mm256_set_epi64x(static_cast<long long>(3 * hi_stride),
                              static_cast<long long>(2 * hi_stride),
                              static_cast<long long>(hi_stride), 0));
        philox4_avx2(k0, k1, x0c, x1c, _mm256_and_si256(hiv, m32),
                     _mm256_srli_epi64(hiv, 32), out + 4 * i);
    }
    for (; i < nblocks; ++i)
        philox_block(k0, k1, hi0 + i * hi_stride, lo, out + 4 * i);
}

inline __m256d abs_pd(__m256d v) {
    return _mm256_andnot_pd(_mm256_set1_pd(-0.0), v);
}

// Branchless Neumaier update, orientation matching detail::neumaier_step.
inline void neumaier_step_pd(__m256d& s, __m256d& c, __m256d v) {
    const __m256d t = _mm256_add_pd(s, v);
    const __m256d mask = _mm256_cmp_pd(abs_pd(s), abs_pd(v), _CMP_GE_OQ);
    const __m256d big = _mm256_blendv_pd(v, s, mask);
    const __m256d small = _mm256_blendv_pd(s, v, mask);
    c = _mm256_add_pd(c, _mm256_add_pd(_mm256_sub_pd(big, t), small));
    s = t;
}

double striped_sum_avx2(const double* x, size_t n) {
    __m256d s0 = _mm256_setzero_pd(), s1 = _mm256_setzero_pd();
    __m256d c0 = _mm256_setzero_pd(), c1 = _mm256_setzero_pd();
    const size_t main_n = n - n % 8;
    for (size_t i = 0; i < main_n; i += 8) {
        neumaier_step_pd(s0, c0, _mm256_loadu_pd(x + i));
        neumaier_step_pd(s1, c1, _mm256_loadu_pd(x + i + 4));
    }
    alignas(32) double s[8], c[8];
    _mm256_store_pd(s, s0);
    _mm256_store_pd(s + 4, s1);
    _mm256_store_pd(c, c0);
    _mm256_store_pd(c + 4, c1);
    for (size_t i = main_n; i < n; ++i)
        neumaier_step(s[i - main_n], c[i - main_n], x[i]);
    return fold_lanes_16(s, c);
}

void u01_avx2(const uint64_t* bits, double* out, size_t n) {
    const __m256i exp52 = _mm256_set1_epi64x(0x4330000000000000LL);
    const __m256d two52 = _mm256_set1_pd(0x1p52);
    const __m256d half = _mm256_set1_pd(0.5);
    const __m256d scale = _mm256_set1_pd(0x1p-52);
    size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256i raw = _mm256_loadu_si256(
            reinterpret_cast<const __m256i*>(bits + i));
        const __m256i k = _mm256_srli_epi64(raw, 12);
        const __m256d dk =
            _mm256_sub_pd(_mm256_castsi256_pd(_mm256_or_si256(k, exp52)), two52);
        _mm256_storeu_pd(out + i,
                         _mm256_mul_pd(_mm256_add_pd(dk, half), scale));
    }
    for (; i < n; ++i) out[i] = u01_from_u64(bits[i]);
}

void axpb_avx2(const double* x, double a, double b, double* out, size_t n) {
    const __m256d av = _mm256_set1_pd(a), bv = _mm256_set1_pd(b);
    size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(
            out + i,
            _mm256_add_pd(_mm256_mul_pd(av, _mm256_loadu_pd(x + i)), bv));
    for (; i < n; ++i) out[i] = a * x[i] + b;
}

void mul_avx2(const double* x, const double* y, double* out, size_t n) {
    size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(
            out + i, _mm256_mul_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    for (; i < n; ++i) out[i] = x[i] * y[i];
}

void minmax_avx2(const double* x, size_t n, double* mn, double* mx) {
    if (n < 4) {
        scalar_backend().minmax(x, n, mn, mx);
        return;
    }
    __m256d vmin = _mm256_loadu_pd(x), vmax = vmin;
    size_t i = 4;
    for (; i + 4 <= n; i += 4) {
        const __m256d v = _mm256_loadu_pd(x + i);
        vmin = _mm256_min_pd(v, vmin);  // (v < m) ? v : m
        vmax = _mm256_max_pd(v, vmax);  // (v > m) ? v : m
    }
    alignas(32) double lmin[4], lmax[4];
    _mm256_store_pd(lmin, vmin);
    _mm256_store_pd(lmax, vmax);
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

bool avx2_supported() { return __builtin_cpu_supports("avx2"); }

const Backend& avx2_backend() {
    static const Backend b{
        "avx2",           philox_seq_avx2, philox_strided_avx2,
        striped_sum_avx2, u01_avx2,        axpb_avx2,
        mul_avx2,         minmax_avx2,
    };
    return b;
}

}  // namespace perpetua::kern
