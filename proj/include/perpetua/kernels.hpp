#pragma once
// Data-parallel inner-loop kernels with runtime backend selection.
//
// Every backend implements the same fixed algorithm (same operations in the
// same order per lane), so scalar and SIMD variants return bit-identical
// results. The equivalence suite in tests/test_kernels.cpp enforces this.

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

namespace perpetua::kern {

// One Philox-4x32-10 block is 4 u32 outputs for a (key, 128-bit counter) pair.
// Counters are addressed as (hi, lo) u64 halves; hi carries the stream id,
// lo the block index within the stream.
struct Backend {
    const char* name;

    // out[4*i .. 4*i+3] = block for counter (hi, lo0 + i). The caller
    // guarantees lo0 + nblocks does not wrap.
    void (*philox_seq)(uint32_t k0, uint32_t k1, uint64_t hi, uint64_t lo0,
                       size_t nblocks, uint32_t* out);

    // out[4*i ..] = block for counter (hi0 + i * hi_stride, lo). The caller
    // guarantees hi0 + nblocks * hi_stride does not wrap.
    void (*philox_strided)(uint32_t k0, uint32_t k1, uint64_t hi0,
                           uint64_t hi_stride, uint64_t lo, size_t nblocks,
                           uint32_t* out);

    // 8-lane striped Neumaier sum; element i feeds lane i % 8, lanes and
    // compensations folded in a fixed order at the end.
    double (*striped_sum)(const double* x, size_t n);

    // bits -> double in the open interval (0,1): ((bits >> 12) + 0.5) * 2^-52.
    void (*u01_from_bits)(const uint64_t* bits, double* out, size_t n);

    // out[i] = a * x[i] + b  (separate mul and add, no fma)
    void (*axpb)(const double* x, double a, double b, double* out, size_t n);

    // out[i] = x[i] * y[i]
    void (*mul)(const double* x, const double* y, double* out, size_t n);

    // min/max with the ternary semantics (v < acc ? v : acc); n must be > 0.
    void (*minmax)(const double* x, size_t n, double* mn, double* mx);
};

const Backend& scalar_backend();
#if defined(__x86_64__) || defined(_M_X64)
const Backend& avx2_backend();  // only call if avx2_supported()
bool avx2_supported();
#endif
#if defined(__aarch64__)
const Backend& neon_backend();
#endif

// Backends usable on this machine, scalar first.
std::vector<const Backend*> available_backends();

// Active backend; defaults to the widest supported one, overridable by the
// PERPETUA_KERNELS environment variable ("scalar", "avx2", "neon", "auto").
const Backend& active();
bool select(std::string_view name);  // false if unknown/unsupported

}  // namespace perpetua::kern
