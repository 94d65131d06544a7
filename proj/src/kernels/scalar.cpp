// Scalar reference backend. Defines the canonical results; the SIMD
// backends are tested bit-for-bit against this one.

#include "perpetua/kernels.hpp"
#include "common.hpp"

namespace perpetua::kern {
namespace {

using namespace detail;

void philox_seq_scalar(uint32_t k0, uint32_t k1, uint64_t hi, uint64_t lo0,
                       size_t nblocks, uint32_t* out) {
    for (size_t i = 0; i < nblocks; ++i)
        philox_block(k0, k1, hi, lo0 + i, out + 4 * i);
}

void philox_strided_scalar(uint32_t k0, uint32_t k1, uint64_t hi0,
                           uint64_t hi_stride, uint64_t lo, size_t nblocks,
                           uint32_t* out) {
    for (size_t i = 0; i < nblocks; ++i)
        philox_block(k0, k1, hi0 + i * hi_stride, lo, out + 4 * i);
}

double striped_sum_scalar(const double* x, size_t n) {
    double s[8] = {0, 0, 0, 0, 0, 0, 0, 0};
    double c[8] = {0, 0, 0, 0, 0, 0, 0, 0};
    const size_t main_n = n - n % 8;
    for (size_t i = 0; i < main_n; i += 8)
        for (int j = 0; j < 8; ++j) neumaier_step(s[j], c[j], x[i + j]);
    for (size_t i = main_n; i < n; ++i)
        neumaier_step(s[i - main_n], c[i - main_n], x[i]);
    return fold_lanes_16(s, c);
}

void u01_scalar(const uint64_t* bits, double* out, size_t n) {
    for (size_t i = 0; i < n; ++i) out[i] = u01_from_u64(bits[i]);
}

void axpb_scalar(const double* x, double a, double b, double* out, size_t n) {
    for (size_t i = 0; i < n; ++i) out[i] = a * x[i] + b;
}

void mul_scalar(const double* x, const double* y, double* out, size_t n) {
    for (size_t i = 0; i < n; ++i) out[i] = x[i] * y[i];
}

// 4-lane striped min/max with ternary (v < m ? v : m) semantics, lanes
// folded left to right. Matches the SIMD blend orientation on ties.
void minmax_scalar(const double* x, size_t n, double* mn, double* mx) {
    if (n == 0) {
        *mn = *mx = 0.0;
        return;
    }
    double lmin[4], lmax[4];
    const size_t lanes = n < 4 ? n : 4;
    for (size_t j = 0; j < lanes; ++j) lmin[j] = lmax[j] = x[j];
    for (size_t i = lanes; i < n; ++i) {
        const size_t j = i % 4;
        lmin[j] = (x[i] < lmin[j]) ? x[i] : lmin[j];
        lmax[j] = (x[i] > lmax[j]) ? x[i] : lmax[j];
    }
    double lo = lmin[0], hi = lmax[0];
    for (size_t j = 1; j < lanes; ++j) {
        lo = (lmin[j] < lo) ? lmin[j] : lo;
        hi = (lmax[j] > hi) ? lmax[j] : hi;
    }
    *mn = lo;
    *mx = hi;
}

}  // namespace

const Backend& scalar_backend() {
    static const Backend b{
        "scalar",          philox_seq_scalar, philox_strided_scalar,
        striped_sum_scalar, u01_scalar,       axpb_scalar,
        mul_scalar,        minmax_scalar,
    };
    return b;
}

}  // namespace perpetua::kern
