#pragma once
// Regularly varying base functions, their concave surrogates, and the
// subadditive slowly varying quotient built from a truncated-log-moment
// evaluator. Everything here is deterministic and certified on grids.

#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "perpetua/errors.hpp"

namespace perpetua::rvkit {

enum class BFamily { power, power_log_iter, power_exp_logpow };

// b(x) = x^alpha * l(x) with l(x) = 1, log_k(x) (k-fold log), or
// exp(beta * (log x)^gamma_exp). Below x_min (the smallest point where every
// iterated log is defined and >= 1) the function is extended by the constant
// eval(x_min), keeping it total and locally bounded on [0, inf).
struct BFunctionSpec {
    BFamily family = BFamily::power;
    double alpha = 1.0;
    int k = 1;               // power_log_iter only
    double beta = 0.0;       // power_exp_logpow only
    double gamma_exp = 0.5;  // power_exp_logpow only, in (0,1)

    void validate() const;
    double x_min() const;
    double eval(double x) const;
    double deriv(double x) const;  // 0 on the plateau
    std::string to_string() const;
    static BFunctionSpec parse(std::string_view text);
};

struct Grid {
    std::vector<double> pts;
    static Grid geometric(double lo, double hi, int per_decade = 64);
};

const Grid& default_validation_grid();  // geometric 1e-3 .. 1e6, 64/decade
const Grid& tail_certification_grid();  // sparse, reaches 1e15

enum class SurrogateKind { f, g };

// f(x) = b(log(c+x)) - b(log c); g(x) = f(x) * log(c+x).
class ConcaveSurrogate {
  public:
    ConcaveSurrogate(BFunctionSpec b, double c, SurrogateKind kind);

    double operator()(double x) const;
    double right_derivative_at_zero() const;

    SurrogateKind kind() const { return kind_; }
    double shift() const { return c_; }
    const BFunctionSpec& bspec() const { return b_; }

  private:
    BFunctionSpec b_;
    double c_;
    double b_log_c_;
    SurrogateKind kind_;
};

struct SurrogateCertificate {
    bool nondecreasing = false;
    bool concave = false;
    bool positive_right_derivative = false;
    double worst_slope_increase = 0.0;  // > 0 means a convex kink was seen
    bool pass() const {
        return nondecreasing && concave && positive_right_derivative;
    }
};

SurrogateCertificate certify_surrogate(const ConcaveSurrogate& s,
                                       const Grid& grid,
                                       double abs_tol = 1e-9,
                                       double rel_tol = 1e-9);

// Certified constructor; throws ConcavityViolation when the grid checks
// fail (the caller should raise c).
ConcaveSurrogate make_surrogate(const BFunctionSpec& b, double c,
                                SurrogateKind kind,
                                const Grid& grid = default_validation_grid());

// Smallest c in {e, 2e, 4e, ...} <= cap for which both surrogate kinds pass
// certification. Throws NoAdmissibleC otherwise.
double select_c(const BFunctionSpec& b,
                const Grid& grid = default_validation_grid(),
                double cap = 1e9);

// phi(x) = g(x) / A(log(x+1)) with A supplied by a law evaluator;
// phi(0) = 0 by continuity. Throws DivisionDegeneracy when A vanishes on
// (0, inf), which signals P{|M| < 1} = 0.
class PhiFunction {
  public:
    PhiFunction(ConcaveSurrogate g, std::function<double(double)> a_evaluator);
    double operator()(double x) const;
    const ConcaveSurrogate& surrogate() const { return g_; }

  private:
    ConcaveSurrogate g_;
    std::function<double(double)> a_;
};

struct RegVarReport {
    double y = 0;
    double target = 1;               // y^exponent
    double worst_tail_deviation = 0; // max |h(xy)/h(x) - target| on last decade
    double deviation_at_max = 0;
    double tol = 0;
    bool pass = false;
};

// For slowly varying handles pass exponent = 0; for b itself pass alpha.
RegVarReport check_regular_variation(const std::function<double(double)>& h,
                                     double exponent, double y, const Grid& xs,
                                     double tol = 0.05);

// Empirical constant C with f(xy) <= C (f(x) + f(y)) over all grid pairs.
double empirical_submultiplicative_constant(
    const std::function<double(double)>& f, const Grid& grid);

}  // namespace perpetua::rvkit
