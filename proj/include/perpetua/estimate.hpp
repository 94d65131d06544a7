#pragma once
// Monte Carlo estimate reports and streaming moment accumulators. Estimates
// are reproducible bit-exactly from (seed, law id, n, tag) because every
// producer draws from counter-based streams and reduces in a fixed order.

#include <cmath>
#include <cstdint>
#include <string>

#include "perpetua/mathutil.hpp"

namespace perpetua {

// Welford accumulator with Chan merging; merges in fixed block order keep
// results thread-count invariant.
struct Moments {
    uint64_t n = 0;
    double mean = 0.0;
    double m2 = 0.0;

    void add(double x) {
        ++n;
        const double d = x - mean;
        mean += d / static_cast<double>(n);
        m2 += d * (x - mean);
    }

    void merge(const Moments& o) {
        if (o.n == 0) return;
        if (n == 0) {
            *this = o;
            return;
        }
        const double d = o.mean - mean;
        const uint64_t t = n + o.n;
        mean += d * (static_cast<double>(o.n) / static_cast<double>(t));
        m2 += o.m2 + d * d * (static_cast<double>(n) *
                              static_cast<double>(o.n) / static_cast<double>(t));
        n = t;
    }

    double variance() const {
        return n > 1 ? m2 / static_cast<double>(n - 1) : 0.0;
    }
    double std_error() const {
        return n > 0 ? std::sqrt(variance() / static_cast<double>(n)) : 0.0;
    }
};

struct EstimateReport {
    double estimate = 0.0;
    double std_error = 0.0;
    uint64_t n = 0;
    double ci_lo = 0.0, ci_hi = 0.0;
    double confidence = 0.99;
    uint64_t seed = 0;
    std::string law_id;
    std::string tag;
};

inline EstimateReport make_report(const Moments& m, double confidence,
                                  uint64_t seed, std::string law_id,
                                  std::string tag) {
    EstimateReport r;
    r.estimate = m.mean;
    r.std_error = m.std_error();
    r.n = m.n;
    const double z = mathutil::z_value(confidence);
    r.ci_lo = r.estimate - z * r.std_error;
    r.ci_hi = r.estimate + z * r.std_error;
    r.confidence = confidence;
    r.seed = seed;
    r.law_id = std::move(law_id);
    r.tag = std::move(tag);
    return r;
}

}  // namespace perpetua
