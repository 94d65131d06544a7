#pragma once
// Finite discrete laws used by exact enumeration and convolution oracles.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "perpetua/rng.hpp"

namespace perpetua {

struct Atom {
    double value;
    double mass;
};

// Atoms sorted by value; neighbors within `merge_tol` (absolute + relative)
// are pooled, masses below `mass_floor` dropped with the deficit recorded.
class DiscreteLaw {
  public:
    static constexpr double kMergeTol = 1e-12;
    static constexpr double kMassFloor = 1e-15;

    DiscreteLaw() = default;

    static DiscreteLaw from_atoms(std::vector<Atom> atoms,
                                  double merge_tol = kMergeTol,
                                  double mass_floor = kMassFloor) {
        DiscreteLaw law;
        std::sort(atoms.begin(), atoms.end(),
                  [](const Atom& a, const Atom& b) { return a.value < b.value; });
        for (const Atom& a : atoms) {
            if (!law.atoms_.empty()) {
                Atom& last = law.atoms_.back();
                const double scale =
                    std::max({1.0, std::fabs(last.value), std::fabs(a.value)});
                if (a.value - last.value <= merge_tol * scale) {
                    // mass-weighted representative keeps exact ties exact
                    const double m = last.mass + a.mass;
                    last.value = (last.value * last.mass + a.value * a.mass) / m;
                    last.mass = m;
                    continue;
                }
            }
            law.atoms_.push_back(a);
        }
        std::vector<Atom> kept;
        kept.reserve(law.atoms_.size());
        for (const Atom& a : law.atoms_) {
            if (a.mass < mass_floor)
                law.floor_deficit_ += a.mass;
            else
                kept.push_back(a);
        }
        law.atoms_ = std::move(kept);
        law.rebuild_cdf();
        return law;
    }

    const std::vector<Atom>& atoms() const { return atoms_; }
    double floor_deficit() const { return floor_deficit_; }

    double total_mass() const {
        double s = 0;
        for (const Atom& a : atoms_) s += a.mass;
        return s;
    }

    double mean() const {
        double s = 0;
        for (const Atom& a : atoms_) s += a.value * a.mass;
        return s;
    }

    double expect(const std::function<double(double)>& f) const {
        double s = 0;
        for (const Atom& a : atoms_) s += f(a.value) * a.mass;
        return s;
    }

    // P{X <= x}
    double cdf(double x) const {
        double s = 0;
        for (const Atom& a : atoms_) {
            if (a.value > x) break;
            s += a.mass;
        }
        return s;
    }

    double sample(rng::Stream& rs) const {
        const double u = rs.next_u01() * cum_.back();
        const auto it = std::lower_bound(cum_.begin(), cum_.end(), u);
        const size_t i = static_cast<size_t>(it - cum_.begin());
        return atoms_[std::min(i, atoms_.size() - 1)].value;
    }

    bool empty() const { return atoms_.empty(); }

  private:
    void rebuild_cdf() {
        cum_.clear();
        cum_.reserve(atoms_.size());
        double s = 0;
        for (const Atom& a : atoms_) {
            s += a.mass;
            cum_.push_back(s);
        }
    }

    std::vector<Atom> atoms_;
    std::vector<double> cum_;
    double floor_deficit_ = 0;
};

}  // namespace perpetua
