#pragma once

#include <array>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "blowup/core.hpp"

namespace blowup::profiles {

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
    [[nodiscard]] bool contains(double x) const { return x >= lo && x <= hi; }
    [[nodiscard]] double width() const { return hi - lo; }
};

/// Value and derivatives 0..4 at a point.
using Derivs = std::array<double, 5>;

/// Compactly supported profile with exact derivative access and recorded certificates.
/// The evaluators are immutable after construction, so a profile can be shared across threads.
class BumpProfile {
public:
    BumpProfile() = default;
    BumpProfile(std::string shape, json params, std::vector<Interval> support,
                std::function<double(double)> value, std::function<Derivs(double)> derivs);

    [[nodiscard]] double operator()(double x) const;
    /// k-th derivative, 0 <= k <= 4 (zero outside the support).
    [[nodiscard]] double derivative(double x, int k) const;
    [[nodiscard]] Derivs derivatives(double x) const;

    [[nodiscard]] const std::vector<Interval>& support() const { return support_; }
    [[nodiscard]] double support_min() const;
    [[nodiscard]] double support_max() const;
    /// Support endpoints, sorted; every point where the profile may fail to be analytic.
    [[nodiscard]] std::vector<double> breakpoints() const;
    [[nodiscard]] const std::string& shape() const { return shape_; }
    [[nodiscard]] const json& params() const { return params_; }

    /// Name -> residual of a normalization identity, as measured when the profile was built.
    json certificates = json::object();

    [[nodiscard]] Field1D sample(double lo, double hi, std::size_t n) const;
    /// Shape name, parameters, support and certificates.
    [[nodiscard]] json descriptor() const;

    /// Finite-difference consistency of the supplied derivatives at `points`: returns, for each
    /// order k = 1..4, the observed convergence order of the centred difference of f^(k-1)
    /// between steps h and h/2 (expected ~2).
    [[nodiscard]] std::array<double, 4> derivative_consistency(const std::vector<double>& points,
                                                               double h) const;

private:
    std::string shape_;
    json params_ = json::object();
    std::vector<Interval> support_;
    std::function<double(double)> value_;
    std::function<Derivs(double)> derivs_;
};

/// psi(u) = exp(-1/(1-u^2)) on (-1, 1), zero outside, with derivatives.
double mollifier(double u);
Derivs mollifier_derivs(double u);

/// rho >= 0 on [1-r, 1+r], symmetric about 1, scaled so int rho(y)/y dy = pi/2.
BumpProfile build_bump(double r);

/// phi(x) = rho(-x) - rho(x): odd, negative for x > 0, H phi(0) = 1.
BumpProfile build_phi(const BumpProfile& rho);

/// Convenience: build_phi(build_bump(r)).
BumpProfile reference_phi(double r);

/// Odd smooth bump: amplitude * (psi((x-c)/w) - psi((x+c)/w)), c > w > 0.
BumpProfile odd_bump(double center, double halfwidth, double amplitude);

/// a + scale * b, supports merged.
BumpProfile add_profiles(const BumpProfile& a, const BumpProfile& b, double scale = 1.0);

/// ||f'||_2 by quadrature over the support.
double derivative_l2(const BumpProfile& f);

struct MultiBumpData {
    std::size_t n = 0;
    double A = 1.0;
    double r = 0.2;
    BumpProfile phi;
    std::vector<double> heights;                 // A^k (x_k for frozen data)
    std::vector<double> scales;                  // r^k (r^k x_k / A^k for frozen data)
    std::vector<std::vector<Interval>> supports; // physical support of bump k

    /// w(x) = sum_k heights[k] phi(x / scales[k]).
    [[nodiscard]] double operator()(double x) const;
    [[nodiscard]] double bump(std::size_t k, double x) const;
    /// Predicted vortex-free interval between bumps k+1 and k (positive side).
    [[nodiscard]] Interval gap(std::size_t k) const;
    /// Samples w on a uniform grid; throws ResolutionError when the innermost bump gets fewer
    /// than `min_points` samples across its support.
    [[nodiscard]] Field1D sample(double lo, double hi, std::size_t n_points,
                                 std::size_t min_points = 32) const;
};

MultiBumpData assemble_multibump(std::size_t n, double A, double r, const BumpProfile& phi);

/// Same bump shapes with heights x_k and widths r^k x_k / A^k: the frozen-profile picture of the
/// solution at a time t < 0 when x_k = x_k(t).
MultiBumpData frozen_multibump(double A, double r, const BumpProfile& phi, const std::vector<double>& heights);

struct HolderResult {
    double value = 0.0;
    double x = 0.0;
    double y = 0.0;
    std::size_t pairs = 0;
};

/// sup |f(x)-f(y)|/|x-y|^s over dyadic-distance stratified pairs of grid nodes.
HolderResult holder_seminorm(const Field1D& f, double s);

/// Same on a profile, sampled with `points_per_support` points on each support interval
/// (plus the interval endpoints); all pairs are compared.
HolderResult holder_seminorm(const BumpProfile& f, double s, std::size_t points_per_support = 400);

/// Multi-bump datum: `points_per_bump` points on every support of bumps k >= first_bump, all
/// pairs compared (first_bump > 0 isolates the small-scale tail).
HolderResult holder_seminorm(const MultiBumpData& w, double s, std::size_t points_per_bump = 200,
                             std::size_t first_bump = 0);

/// Maximal runs of grid nodes with |w| < floor, as intervals [first node, last node].
std::vector<Interval> support_gaps(const Field1D& w, double floor);

/// Radial profile on [1-d, 1+d] scaled so (3B/4) int r^{-11/12} phi(r) dr = 1, B = Beta(25/24, 35/24).
BumpProfile build_phi3d(double d);

/// B(25/24, 35/24).
double beta_25_35();

/// Even plateau function: 1 on [-Z, Z], in [0, 1], zero outside [-2Z, 2Z].
BumpProfile build_rho_z(double Z);

/// Odd profile equal to rho_z(z)|z|^{1/12} sgn z for |z| > h, h = eps_s e^{-6ak},
/// and an odd quintic matching value and two derivatives at +-h inside.
BumpProfile smooth_rho(const BumpProfile& rho_z, std::size_t k, double eps_s, double a);

struct SmoothingCertificate {
    double K = 0.0;
    double h = 0.0;
    double integral = 0.0;       // iint r^2 z phi |rho(Kz)(Kz)^{1/12} - rho_k(Kz)| / (z^2+r^2)^{5/2}
    double bound = 0.0;          // 16 h^{25/12} / (25 K^2 B)
    double bound_exact_mass = 0.0;  // same with int phi / r^3 measured instead of 4/(3B)
    bool pass = false;
};

/// Perturbation integral caused by the smoothing, by tensor Gauss quadrature.
SmoothingCertificate smoothing_certificate(const BumpProfile& phi3d, const BumpProfile& rho_z,
                                           const BumpProfile& rho_k, double K);

/// CSV with columns x, value (and the k-th derivatives when `with_derivatives`).
std::string profile_csv(const BumpProfile& p, double lo, double hi, std::size_t n,
                        bool with_derivatives = false);

}  // namespace blowup::profiles
