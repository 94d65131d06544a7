#include "perpetua/rng.hpp"

#include "perpetua/errors.hpp"
#include "perpetua/kernels.hpp"

#include <cmath>
#include <numbers>

namespace perpetua::rng {

uint64_t splitmix64(uint64_t x) {
    uint64_t z = x + 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

Key make_key(uint64_t seed) {
    const uint64_t s = splitmix64(seed);
    return Key{static_cast<uint32_t>(s), static_cast<uint32_t>(s >> 32)};
}

Key fold_key(Key k, uint64_t salt) {
    const uint64_t base =
        (static_cast<uint64_t>(k.k0) << 32) | static_cast<uint64_t>(k.k1);
    const uint64_t s = splitmix64(base ^ splitmix64(salt));
    return Key{static_cast<uint32_t>(s), static_cast<uint32_t>(s >> 32)};
}

uint64_t stream_id(Domain d, uint64_t replicate, uint32_t gen, uint64_t unit) {
    const auto dv = static_cast<uint64_t>(d);
    if (dv > 63 || gen > kMaxGen || unit > kMaxUnit || replicate > kMaxReplicate)
        throw Error("rng: stream id field out of range");
    return (dv << 58) | (static_cast<uint64_t>(gen) << 52) | (unit << 28) |
           replicate;
}

uint64_t Stream::next_u64() {
    const uint64_t block = next_ >> 1;
    if (block != buf_block_) {
        kern::active().philox_seq(key_.k0, key_.k1, hi_, block, 1, buf_);
        buf_block_ = block;
    }
    const unsigned w = static_cast<unsigned>(next_ & 1);
    ++next_;
    return static_cast<uint64_t>(buf_[2 * w]) |
           (static_cast<uint64_t>(buf_[2 * w + 1]) << 32);
}

double Stream::next_u01() {
    const double k = static_cast<double>(next_u64() >> 12);
    return (k + 0.5) * 0x1p-52;
}

double Stream::next_exponential() { return -std::log(next_u01()); }

double Stream::next_normal() {
    const double u1 = next_u01();
    const double u2 = next_u01();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
}

void Stream::fill_u01(double* out, size_t n) {
    size_t done = 0;
    // Finish a half-consumed block first so bulk and single draws agree.
    while (done < n && (next_ & 1) != 0) out[done++] = next_u01();
    constexpr size_t kChunkBlocks = 256;
    uint32_t raw[4 * kChunkBlocks];
    uint64_t bits[2 * kChunkBlocks];
    while (n - done >= 2) {
        const size_t want = (n - done) / 2;
        const size_t blocks = want < kChunkBlocks ? want : kChunkBlocks;
        const auto& k = kern::active();
        k.philox_seq(key_.k0, key_.k1, hi_, next_ >> 1, blocks, raw);
        for (size_t i = 0; i < 2 * blocks; ++i)
            bits[i] = static_cast<uint64_t>(raw[2 * i]) |
                      (static_cast<uint64_t>(raw[2 * i + 1]) << 32);
        k.u01_from_bits(bits, out + done, 2 * blocks);
        done += 2 * blocks;
        next_ += 2 * blocks;
        buf_block_ = ~0ull;
    }
    while (done < n) out[done++] = next_u01();
}

}  // namespace perpetua::rng
