#include "blowup/ode.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "blowup/core.hpp"

namespace blowup::ode {

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784,
                 a76 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;
constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                 d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                 d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;

}  // namespace

bool DenseSegment::contains(double t) const {
    return (t - t0) * (t - t1) <= 0.0;
}

double DenseSegment::eval(std::size_t i, double t) const {
    double h = t1 - t0;
    double th = h != 0.0 ? (t - t0) / h : 0.0;
    double th1 = 1.0 - th;
    return r1[i] + th * (r2[i] + th1 * (r3[i] + th * (r4[i] + th1 * r5[i])));
}

void DenseSegment::eval(double t, std::span<double> out) const {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = eval(i, t);
}

namespace {

const DenseSegment& find_segment(const std::vector<DenseSegment>& segs, double t) {
    if (segs.empty()) throw NumericalError("dense output requested from an empty solution");
    bool forward = segs.front().t1 >= segs.front().t0;
    // segments are ordered in the direction of integration
    auto it = std::lower_bound(segs.begin(), segs.end(), t, [forward](const DenseSegment& s, double v) {
        return forward ? s.t1 < v : s.t1 > v;
    });
    if (it == segs.end()) return segs.back();
    return *it;
}

}  // namespace

void Solution::eval(double t, std::span<double> out) const { find_segment(segments, t).eval(t, out); }

double Solution::eval(std::size_t i, double t) const { return find_segment(segments, t).eval(i, t); }

Solution dopri5(const Rhs& f, double t0, State y0, double t1, const Options& opt) {
    const std::size_t n = y0.size();
    Solution sol;
    sol.t_reached = t0;
    if (t1 == t0) {
        sol.y_final = std::move(y0);
        sol.completed = true;
        return sol;
    }
    const double dir = t1 > t0 ? 1.0 : -1.0;
    const double span = std::abs(t1 - t0);
    const double h_min = opt.h_min * std::max(1.0, span);

    State y = std::move(y0), ynew(n), ytmp(n);
    State k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n);
    f(t0, y, k1);

    auto scale = [&](std::size_t, double a, double b) {
        return opt.atol + opt.rtol * std::max(std::abs(a), std::abs(b));
    };

    double h = opt.h_initial;
    if (h <= 0.0) {
        // Hairer's starting-step heuristic
        double d0 = 0.0, d1n = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double sc = scale(i, y[i], y[i]);
            d0 += (y[i] / sc) * (y[i] / sc);
            d1n += (k1[i] / sc) * (k1[i] / sc);
        }
        d0 = std::sqrt(d0 / std::max<std::size_t>(n, 1));
        d1n = std::sqrt(d1n / std::max<std::size_t>(n, 1));
        h = (d0 < 1e-5 || d1n < 1e-5) ? 1e-6 : 0.01 * d0 / d1n;
        h = std::min(h, span);
    }
    h = std::min(h, span);

    double t = t0;
    bool last_rejected = false;
    while (sol.accepted + sol.rejected < opt.max_steps) {
        bool final_step = false;
        if (h >= std::abs(t1 - t)) {
            h = std::abs(t1 - t);
            final_step = true;
        }
        const double hs = dir * h;
        for (std::size_t i = 0; i < n; ++i) ytmp[i] = y[i] + hs * a21 * k1[i];
        f(t + c2 * hs, ytmp, k2);
        for (std::size_t i = 0; i < n; ++i) ytmp[i] = y[i] + hs * (a31 * k1[i] + a32 * k2[i]);
        f(t + c3 * hs, ytmp, k3);
        for (std::size_t i = 0; i < n; ++i) ytmp[i] = y[i] + hs * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
        f(t + c4 * hs, ytmp, k4);
        for (std::size_t i = 0; i < n; ++i)
            ytmp[i] = y[i] + hs * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
        f(t + c5 * hs, ytmp, k5);
        for (std::size_t i = 0; i < n; ++i)
            ytmp[i] = y[i] + hs * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
        f(t + hs, ytmp, k6);
        for (std::size_t i = 0; i < n; ++i)
            ynew[i] = y[i] + hs * (a71 * k1[i] + a73 * k3[i] + a74 * k4[i] + a75 * k5[i] + a76 * k6[i]);
        f(t + hs, ynew, k7);

        double err = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double e = hs * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
            double sc = scale(i, y[i], ynew[i]);
            err += (e / sc) * (e / sc);
        }
        err = std::sqrt(err / std::max<std::size_t>(n, 1));
        if (!std::isfinite(err)) err = 1e10;

        if (err <= 1.0) {
            DenseSegment seg;
            seg.t0 = t;
            seg.t1 = final_step ? t1 : t + hs;
            seg.r1 = y;
            seg.r2.resize(n);
            seg.r3.resize(n);
            seg.r4.resize(n);
            seg.r5.resize(n);
            for (std::size_t i = 0; i < n; ++i) {
                double dy = ynew[i] - y[i];
                double bspl = hs * k1[i] - dy;
                seg.r2[i] = dy;
                seg.r3[i] = bspl;
                seg.r4[i] = dy - hs * k7[i] - bspl;
                seg.r5[i] = hs * (d1 * k1[i] + d3 * k3[i] + d4 * k4[i] + d5 * k5[i] + d6 * k6[i] + d7 * k7[i]);
            }
            if (opt.observer) opt.observer(seg);
            if (opt.keep_segments) sol.segments.push_back(std::move(seg));
            ++sol.accepted;
            t = final_step ? t1 : t + hs;
            std::swap(y, ynew);
            std::swap(k1, k7);
            sol.t_reached = t;
            if (final_step) {
                sol.completed = true;
                break;
            }
            double fac = 0.9 * std::pow(std::max(err, 1e-10), -0.2);
            fac = std::clamp(fac, 0.2, last_rejected ? 1.0 : 10.0);
            h *= fac;
            last_rejected = false;
        } else {
            ++sol.rejected;
            h *= std::max(0.2, 0.9 * std::pow(err, -0.2));
            last_rejected = true;
        }
        if (h < h_min) {
            sol.failure = "step size underflow at t = " + format_double(t);
            break;
        }
    }
    if (!sol.completed && sol.failure.empty()) sol.failure = "maximum step count exceeded";
    sol.y_final = y;
    return sol;
}

Solution dopri5_piecewise(const Rhs& f, std::span<const double> breakpoints, State y0,
                          const Options& opt) {
    Solution total;
    if (breakpoints.size() < 2) {
        total.y_final = std::move(y0);
        total.completed = true;
        return total;
    }
    total.t_reached = breakpoints.front();
    State y = std::move(y0);
    for (std::size_t s = 0; s + 1 < breakpoints.size(); ++s) {
        Solution part = dopri5(f, breakpoints[s], y, breakpoints[s + 1], opt);
        total.accepted += part.accepted;
        total.rejected += part.rejected;
        for (auto& seg : part.segments) total.segments.push_back(std::move(seg));
        total.t_reached = part.t_reached;
        y = part.y_final;
        if (!part.completed) {
            total.failure = part.failure;
            total.y_final = y;
            return total;
        }
    }
    total.completed = true;
    total.y_final = y;
    return total;
}

}  // namespace blowup::ode
