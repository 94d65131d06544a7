#include "perpetua/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <string>

namespace perpetua::kern {
namespace {

const Backend* pick_default() {
#if defined(__x86_64__) || defined(_M_X64)
    if (avx2_supported()) return &avx2_backend();
#endif
#if defined(__aarch64__)
    return &neon_backend();
#endif
    return &scalar_backend();
}

const Backend* resolve(std::string_view name) {
    if (name == "scalar") return &scalar_backend();
    if (name == "auto") return pick_default();
#if defined(__x86_64__) || defined(_M_X64)
    if (name == "avx2" && avx2_supported()) return &avx2_backend();
#endif
#if defined(__aarch64__)
    if (name == "neon") return &neon_backend();
#endif
    return nullptr;
}

std::atomic<const Backend*>& slot() {
    static std::atomic<const Backend*> s{[] {
        if (const char* env = std::getenv("PERPETUA_KERNELS")) {
            if (const Backend* b = resolve(env)) return b;
        }
        return pick_default();
    }()};
    return s;
}

}  // namespace

std::vector<const Backend*> available_backends() {
    std::vector<const Backend*> v{&scalar_backend()};
#if defined(__x86_64__) || defined(_M_X64)
    if (avx2_supported()) v.push_back(&avx2_backend());
#endif
#if defined(__aarch64__)
    v.push_back(&neon_backend());
#endif
    return v;
}

const Backend& active() { return *slot().load(std::memory_order_relaxed); }

bool select(std::string_view name) {
    const Backend* b = resolve(name);
    if (!b) return false;
    slot().store(b, std::memory_order_relaxed);
    return true;
}

}  // namespace perpetua::kern
