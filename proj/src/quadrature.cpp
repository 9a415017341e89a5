#include "blowup/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "blowup/core.hpp"

namespace blowup::quad {

namespace {

Rule make_gauss_legendre(std::size_t n) {
    Rule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    for (std::size_t i = 0; i < (n + 1) / 2; ++i) {
        double x = std::cos(kPi * (static_cast<double>(i) + 0.75) / (static_cast<double>(n) + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (std::size_t k = 2; k <= n; ++k) {
                double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / static_cast<double>(k);
                p0 = p1;
                p1 = p2;
            }
            if (n == 1) p0 = 1.0;
            dp = static_cast<double>(n) * (x * p1 - p0) / (x * x - 1.0);
            double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        // recompute derivative at the converged node
        double p0 = 1.0, p1 = x;
        for (std::size_t k = 2; k <= n; ++k) {
            double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / static_cast<double>(k);
            p0 = p1;
            p1 = p2;
        }
        dp = (n == 1) ? 1.0 : static_cast<double>(n) * (x * p1 - p0) / (x * x - 1.0);
        double w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule.nodes[i] = -x;
        rule.nodes[n - 1 - i] = x;
        rule.weights[i] = w;
        rule.weights[n - 1 - i] = w;
    }
    if (n == 1) {
        rule.nodes[0] = 0.0;
        rule.weights[0] = 2.0;
    }
    return rule;
}

}  // namespace

const Rule& gauss_legendre(std::size_t n) {
    static std::map<std::size_t, Rule> cache;
    static std::mutex mu;
    std::lock_guard lock(mu);
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.emplace(n, make_gauss_legendre(n)).first;
    return it->second;
}

double composite_gl(const Integrand& f, std::span<const double> breaks, std::size_t panels,
                    std::size_t order) {
    const Rule& rule = gauss_legendre(order);
    double total = 0.0;
    for (std::size_t s = 0; s + 1 < breaks.size(); ++s) {
        double a = breaks[s], b = breaks[s + 1];
        double h = (b - a) / static_cast<double>(panels);
        for (std::size_t p = 0; p < panels; ++p) {
            double lo = a + static_cast<double>(p) * h;
            double mid = lo + 0.5 * h;
            double acc = 0.0;
            for (std::size_t q = 0; q < order; ++q) acc += rule.weights[q] * f(mid + 0.5 * h * rule.nodes[q]);
            total += 0.5 * h * acc;
        }
    }
    return total;
}

Estimate refine_gl(const Integrand& f, std::span<const double> breaks, double tol,
                   std::size_t order, std::size_t max_panels) {
    std::size_t panels = 1;
    double prev = composite_gl(f, breaks, panels, order);
    while (panels < max_panels) {
        panels *= 2;
        double next = composite_gl(f, breaks, panels, order);
        double err = std::abs(next - prev);
        if (err <= tol) return {next, err};
        prev = next;
    }
    return {prev, std::abs(prev - composite_gl(f, breaks, panels / 2, order))};
}

namespace {

struct Panel {
    double value, error, l1;
};

// 15-point Kronrod with the embedded 7-point Gauss rule as error estimate.
Panel gk15(const Integrand& f, double a, double b) {
    using Kronrod = boost::math::quadrature::gauss_kronrod<double, 15>;
    using Gauss = boost::math::quadrature::gauss<double, 7>;
    const auto& x = Kronrod::abscissa();
    const auto& wk = Kronrod::weights();
    const auto& wg = Gauss::weights();
    const double c = 0.5 * (a + b), h = 0.5 * (b - a);
    const double f0 = f(c);
    double k = f0 * wk[0], g = f0 * wg[0], l1 = std::abs(f0) * wk[0];
    for (std::size_t i = 1; i < x.size(); ++i) {
        const double fp = f(c + h * x[i]), fm = f(c - h * x[i]);
        k += (fp + fm) * wk[i];
        l1 += (std::abs(fp) + std::abs(fm)) * wk[i];
        if (i % 2 == 0) g += (fp + fm) * wg[i / 2];
    }
    return {k * h, std::abs(k - g) * std::abs(h), l1 * std::abs(h)};
}

// Bisects until the panel error meets its share of the absolute tolerance or reaches the
// roundoff floor of its own |f| integral.
void bisect(const Integrand& f, double a, double b, const Panel& p, double abs_tol, unsigned depth,
            Estimate& acc) {
    constexpr double kRoundoff = 64.0 * 2.220446049250313e-16;
    if (depth == 0 || p.error <= abs_tol || p.error <= kRoundoff * p.l1) {
        acc.value += p.value;
        acc.error += p.error;
        return;
    }
    const double m = 0.5 * (a + b);
    bisect(f, a, m, gk15(f, a, m), 0.5 * abs_tol, depth - 1, acc);
    bisect(f, m, b, gk15(f, m, b), 0.5 * abs_tol, depth - 1, acc);
}

// integral of |f| from a coarse composite rule, used to turn the relative tolerance into an
// absolute one that survives cancelling integrands
double coarse_l1(const Integrand& f, double a, double b) {
    double l1 = 0.0;
    constexpr int kPanels = 8;
    for (int i = 0; i < kPanels; ++i)
        l1 += gk15(f, a + (b - a) * i / kPanels, a + (b - a) * (i + 1) / kPanels).l1;
    return l1;
}

}  // namespace

Estimate adaptive(const Integrand& f, double a, double b, double tol, unsigned max_depth) {
    tol = std::max(tol, kMinRelativeTol);
    if (!std::isfinite(a) || !std::isfinite(b)) {
        double err = 0.0;
        double v = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(f, a, b, max_depth, tol, &err);
        return {v, err};
    }
    if (a == b) return {};
    Estimate acc;
    bisect(f, a, b, gk15(f, a, b), tol * coarse_l1(f, a, b), max_depth, acc);
    return acc;
}

Estimate adaptive(const Integrand& f, std::span<const double> breaks, double tol,
                  unsigned max_depth) {
    tol = std::max(tol, kMinRelativeTol);
    double l1 = 0.0, width = 0.0;
    for (std::size_t s = 0; s + 1 < breaks.size(); ++s) {
        if (breaks[s + 1] <= breaks[s]) continue;
        l1 += coarse_l1(f, breaks[s], breaks[s + 1]);
        width += breaks[s + 1] - breaks[s];
    }
    Estimate total;
    for (std::size_t s = 0; s + 1 < breaks.size(); ++s) {
        const double a = breaks[s], b = breaks[s + 1];
        if (b <= a) continue;
        bisect(f, a, b, gk15(f, a, b), tol * l1 * (b - a) / width, max_depth, total);
    }
    return total;
}

namespace {

double simpson_fixed(const Integrand& f, double a, double b, std::size_t m) {
    // m even
    double h = (b - a) / static_cast<double>(m);
    double s = f(a) + f(b);
    for (std::size_t i = 1; i < m; ++i) s += f(a + static_cast<double>(i) * h) * ((i % 2) ? 4.0 : 2.0);
    return s * h / 3.0;
}

}  // namespace

Estimate simpson(const Integrand& f, std::span<const double> breaks, double tol,
                 std::size_t min_intervals, std::size_t max_intervals) {
    Estimate total;
    std::size_t nseg = breaks.size() > 1 ? breaks.size() - 1 : 1;
    for (std::size_t s = 0; s + 1 < breaks.size(); ++s) {
        double a = breaks[s], b = breaks[s + 1];
        if (!(b > a)) continue;
        std::size_t m = std::max<std::size_t>(min_intervals, 2);
        m += m % 2;
        double coarse = simpson_fixed(f, a, b, m);
        double fine = simpson_fixed(f, a, b, 2 * m);
        double err = std::abs(fine - coarse) / 15.0;
        while (err > tol / static_cast<double>(nseg) && 2 * m < max_intervals) {
            m *= 2;
            coarse = fine;
            fine = simpson_fixed(f, a, b, 2 * m);
            err = std::abs(fine - coarse) / 15.0;
        }
        total.value += fine + (fine - coarse) / 15.0;
        total.error += err;
    }
    return total;
}

}  // namespace blowup::quad
