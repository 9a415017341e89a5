#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace blowup::quad {

using Integrand = std::function<double(double)>;

struct Rule {
    std::vector<double> nodes;    // on [-1, 1]
    std::vector<double> weights;
};

/// n-point Gauss-Legendre rule (Newton iteration on P_n), cached per n.
const Rule& gauss_legendre(std::size_t n);

/// Composite Gauss-Legendre over the listed breakpoints, `panels` equal panels per segment.
double composite_gl(const Integrand& f, std::span<const double> breaks, std::size_t panels,
                    std::size_t order = 16);

struct Estimate {
    double value = 0.0;
    double error = 0.0;  // certified by comparing two refinement levels
};

/// Composite Gauss-Legendre with panel doubling until two levels agree to `tol`.
Estimate refine_gl(const Integrand& f, std::span<const double> breaks, double tol,
                   std::size_t order = 16, std::size_t max_panels = 1u << 14);

/// Relative tolerances below this are raised to it.
inline constexpr double kMinRelativeTol = 1e-13;

/// Adaptive Gauss-Kronrod (15-point) on [a, b]; a or b may be infinite. `tol` is relative to
/// the integral of |f|, so exactly cancelling pieces terminate.
Estimate adaptive(const Integrand& f, double a, double b, double tol = 1e-13,
                  unsigned max_depth = 20);

/// Adaptive integration split at interior breakpoints.
Estimate adaptive(const Integrand& f, std::span<const double> breaks, double tol = 1e-13,
                  unsigned max_depth = 20);

/// Composite Simpson with Richardson step-halving certificate.
/// `breaks` must contain every point where f loses smoothness.
Estimate simpson(const Integrand& f, std::span<const double> breaks, double tol = 1e-9,
                 std::size_t min_intervals = 16, std::size_t max_intervals = 1u << 20);

}  // namespace blowup::quad
