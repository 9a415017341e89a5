#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace blowup::ode {

using State = std::vector<double>;
/// dy/dt = f(t, y), written into `dydt`.
using Rhs = std::function<void(double t, std::span<const double> y, std::span<double> dydt)>;

/// One accepted step with its continuous extension (Dormand-Prince dense output).
struct DenseSegment {
    double t0 = 0.0;
    double t1 = 0.0;
    std::vector<double> r1, r2, r3, r4, r5;

    [[nodiscard]] double eval(std::size_t i, double t) const;
    void eval(double t, std::span<double> out) const;
    [[nodiscard]] bool contains(double t) const;
};

struct Options {
    double rtol = 1e-10;
    double atol = 1e-12;
    double h_initial = 0.0;  // 0 = automatic
    double h_min = 1e-14;    // relative to |t1 - t0|
    std::size_t max_steps = 10'000'000;
    /// Called with every accepted step; with keep_segments = false the solution stores none,
    /// which keeps long runs of large systems in bounded memory.
    std::function<void(const DenseSegment&)> observer;
    bool keep_segments = true;
};

/// Result of a Dormand-Prince 5(4) integration from t0 to t1 (either direction).
struct Solution {
    std::vector<DenseSegment> segments;
    State y_final;
    double t_reached = 0.0;
    bool completed = false;
    std::string failure;  // set when the step size underflowed
    std::size_t accepted = 0;
    std::size_t rejected = 0;

    /// Dense evaluation at any t between the start and t_reached.
    void eval(double t, std::span<double> out) const;
    [[nodiscard]] double eval(std::size_t i, double t) const;
};

Solution dopri5(const Rhs& f, double t0, State y0, double t1, const Options& opt = {});

/// Integrates across the listed breakpoints (monotone from t0 to t1), restarting the
/// step controller at each one; segments from all pieces are concatenated.
Solution dopri5_piecewise(const Rhs& f, std::span<const double> breakpoints, State y0,
                          const Options& opt = {});

}  // namespace blowup::ode
