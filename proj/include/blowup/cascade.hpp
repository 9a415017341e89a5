#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "blowup/core.hpp"
#include "blowup/ode.hpp"
#include "blowup/quadrature.hpp"

namespace blowup::cascade {

/// Coefficient family a_{n,j}(t) driving dx_n/dt = x_n * sum_{j<n} a_{n,j}(t) x_j.
///
/// Random families are piecewise constant on a dyadic partition of [t_min, 0]
/// (2^depth equal cells); each (n, j, cell) value is a seeded hash, so the family is
/// reproducible and independent of evaluation order.
struct CoefficientSpec {
    enum class Kind { One, Constant, RandomPiecewise, Measured };
    Kind kind = Kind::One;
    double value = 1.0;          // Constant
    double lo = 1.0, hi = 1.0;   // RandomPiecewise band
    std::uint64_t seed = 0;
    int depth = 5;
    bool shared = false;         // a_{n,j} = a_j (independent of n)
    /// Measured: a_j(t) supplied externally (level independent).
    std::function<double(std::size_t j, double t)> measured;

    static CoefficientSpec one() { return {}; }
    static CoefficientSpec constant(double c) {
        CoefficientSpec s;
        s.kind = Kind::Constant;
        s.value = c;
        s.lo = s.hi = c;
        return s;
    }
    static CoefficientSpec random(double lo, double hi, std::uint64_t seed, bool shared = false,
                                  int depth = 5) {
        CoefficientSpec s;
        s.kind = Kind::RandomPiecewise;
        s.lo = lo;
        s.hi = hi;
        s.seed = seed;
        s.shared = shared;
        s.depth = depth;
        return s;
    }
};

struct CascadeParams {
    double A = 1.1;
    std::size_t n_levels = 10;
    double coeff_lo = 1.0;
    double coeff_hi = 1.0;
    double t_min = -1.0;
    CoefficientSpec coeffs;
    double rtol = 1e-10;
    /// Exponent on the driving levels: dy_n/dt = sum a_{n,j} x_j^p / A^{(p-1) j}.
    /// p = 1 is the 1D model; p = 5/4 is the axisymmetric variant.
    double drive_power = 1.0;

    void validate() const;
};

/// Evaluates a coefficient family; times outside [t_min, 0] clamp to the nearest cell.
class Coefficients {
public:
    Coefficients(CoefficientSpec spec, double t_min);
    [[nodiscard]] double operator()(std::size_t n, std::size_t j, double t) const;
    /// Times where any coefficient may jump, sorted from 0 down to t_min.
    [[nodiscard]] std::vector<double> breakpoints() const;
    [[nodiscard]] const CoefficientSpec& spec() const { return spec_; }
    [[nodiscard]] std::string describe() const;
    [[nodiscard]] bool level_independent() const;
    /// Bounds actually taken by the family (for precondition checks).
    [[nodiscard]] std::pair<double, double> range() const;

private:
    CoefficientSpec spec_;
    double t_min_;
};

/// x_k(t) on a time grid plus dense access.
class CascadeTrajectory {
public:
    std::vector<double> times;                  // sorted ascending
    std::vector<std::vector<double>> x;         // x[i][k] at times[i]
    std::vector<std::vector<double>> y;         // ln x
    std::vector<std::vector<double>> z;         // int_0^t x_k(s) ds (signed)
    double A = 1.0;
    std::string coeffs_used;
    bool level_independent = true;
    std::vector<double> breakpoints;            // non-smooth times inside the span
    std::pair<double, double> coeff_range{1.0, 1.0};

    [[nodiscard]] std::size_t levels() const { return x.empty() ? 0 : x.front().size(); }
    /// Dense x_k(t).
    [[nodiscard]] double x_at(std::size_t k, double t) const;
    /// int_t^0 x_k(s) ds >= 0 for t <= 0, certified to `tol`.
    [[nodiscard]] quad::Estimate integral_to_zero(std::size_t k, double t, double tol = 1e-9) const;

    std::function<double(std::size_t, double)> dense;  // x_k(t)
};

/// Exact solution for a_{n,j} = 1: z_0 = t, z_{k+1} = A(e^{z_k} - 1), x_k = A^k exp(sum_{j<k} z_j).
CascadeTrajectory closed_form_cascade(double A, std::size_t n_levels, const std::vector<double>& times);

/// Adaptive Dormand-Prince integration of y_k = ln x_k backward from x_k(0) = A^k.
/// Throws NumericalError (with the last valid time) on step-size underflow.
CascadeTrajectory integrate_cascade(const CascadeParams& params, const std::vector<double>& times);

/// Smallest positive root of a = A e^{(b-1)a}(1 - e^{-a}), |residual| <= 1e-12.
double fixed_point_a(double A, double b);

/// Upper bound 2(A-1)/(3/2-b) from the explicit quadratic minorant; nullopt when its
/// hypotheses (b <= 3/2, (3/2-b)^2 >= 2(b-1)(A-1)) fail.
std::optional<double> fixed_point_upper_bound(double A, double b);

/// Checks int_{-a}^0 x_n <= a (+ quadrature tolerance) for every level.
std::vector<Verdict> verify_int_le(const CascadeTrajectory& traj, double A, double b,
                                   double tol = 1e-9);

/// The proof's chained bound Z_{n+1} = A e^{(b-1)a}(1 - e^{-Z_n}), Z_0 = a.
std::vector<double> int_le_chain(double A, double b, double a, std::size_t n_levels);

struct LowerEnvelope {
    std::vector<double> I_abs;     // I_0 = |t| convention (used for the verdicts)
    std::vector<double> I_signed;  // I_0 = t as printed, reported for comparison
    std::vector<double> integrals; // int_t^0 x_n
    std::vector<Verdict> verdicts;
    std::optional<double> limit;   // a' when A e^{(1-b)t} > 1
};

/// Lower bound int_t^0 x_n >= I_n(t), I_{n+1} = A e^{(1-b)t}(1 - e^{-I_n}).
LowerEnvelope lower_envelope(const CascadeTrajectory& traj, double A, double b, double t,
                             double tol = 1e-9);

/// Root a' of a' = Ae^{(1-b)t}(1 - e^{-a'}); nullopt when Ae^{(1-b)t} <= 1 (no positive root).
std::optional<double> envelope_limit(double A, double b, double t);

/// x_n / x_k non-decreasing in t for all n > k, consecutive grid times, within `tol`.
Verdict verify_monotone_ratio(const CascadeTrajectory& traj, double tol = 1e-10);

struct HolderPrediction {
    double a_prime = 0.0;
    double s = 0.0;
    double a0 = 0.0;       // t -> 0 limit: a0 = A(1 - e^{-a0})
    double s_limit = 0.0;  // exponent built from a0
    bool a0_exceeds_lnA = false;
    bool positive = false;
    std::string note;
};

/// s = (a' - ln A)/(a' - ln r).
HolderPrediction holder_exponent_prediction(double A, double r, double b, double t);

/// Rows t, k, x_k, y_k, z_k.
std::string trajectory_csv(const CascadeTrajectory& traj);

}  // namespace blowup::cascade
