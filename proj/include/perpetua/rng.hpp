#pragma once
// Splittable counter-based random streams (Philox-4x32-10).
//
// A stream is addressed by (key, stream id); the stream id packs
// (domain, generation, unit, replicate) into the high counter word, the
// block index runs in the low word. Draws therefore depend only on the
// address, never on scheduling, which is what makes replicate-parallel
// runs bit-stable across worker counts.

#include <cstdint>
#include <cstddef>

namespace perpetua::rng {

struct Key {
    uint32_t k0 = 0, k1 = 0;
};

uint64_t splitmix64(uint64_t x);
Key make_key(uint64_t seed);

// Derived key for nested simulations (e.g. subtrees rooted off a path).
// Distinct salts give distinct keys for a fixed parent key.
Key fold_key(Key k, uint64_t salt);

enum class Domain : uint32_t {
    generic = 0,
    perp_path,
    zinf,
    ladder,
    wald,
    symm,
    brw_growth,
    spine,
    pilot,
    law_aux,
    fixpoint,
    estimate,
    diag,
};

// Stream id layout: [domain:6][gen:6][unit:24][replicate:28].
inline constexpr uint64_t kMaxReplicate = (1ull << 28) - 1;
inline constexpr uint64_t kMaxUnit = (1ull << 24) - 1;
inline constexpr uint32_t kMaxGen = 63;

uint64_t stream_id(Domain d, uint64_t replicate, uint32_t gen = 0,
                   uint64_t unit = 0);

class Stream {
  public:
    Stream(Key key, uint64_t sid) : key_(key), hi_(sid) {}

    uint64_t next_u64();
    double next_u01();  // strictly inside (0,1)
    double next_exponential();
    double next_normal();  // Box-Muller; consumes two uniforms

    void fill_u01(double* out, size_t n);

    uint64_t draws() const { return next_; }
    uint64_t id() const { return hi_; }

  private:
    Key key_;
    uint64_t hi_;
    uint64_t next_ = 0;              // index of next u64
    uint32_t buf_[4] = {0, 0, 0, 0};
    uint64_t buf_block_ = ~0ull;
};

inline Stream make_stream(Key key, Domain d, uint64_t replicate,
                          uint32_t gen = 0, uint64_t unit = 0) {
    return Stream(key, stream_id(d, replicate, gen, unit));
}

}  // namespace perpetua::rng
