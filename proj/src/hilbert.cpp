#include "blowup/hilbert.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <mutex>
#include <sstream>

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <fftw3.h>

namespace blowup::hilbert {

using profiles::BumpProfile;

namespace {

// FFTW's planner is not re-entrant.
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

// Sampled maximum of g on [lo, hi], polished by golden section around the best sample.
double maximize(const std::function<double(double)>& g, double lo, double hi, std::size_t samples) {
    double best = -INFINITY, best_x = lo;
    const double step = (hi - lo) / static_cast<double>(samples - 1);
    for (std::size_t i = 0; i < samples; ++i) {
        double x = lo + static_cast<double>(i) * step;
        double v = g(x);
        if (v > best) {
            best = v;
            best_x = x;
        }
    }
    double a = std::max(lo, best_x - step), b = std::min(hi, best_x + step);
    const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - gr * (b - a), d = a + gr * (b - a);
    double gc = g(c), gd = g(d);
    while (b - a > 1e-9 * std::max(1.0, std::abs(a))) {
        if (gc > gd) {
            b = d;
            d = c;
            gd = gc;
            c = b - gr * (b - a);
            gc = g(c);
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + gr * (b - a);
            gd = g(d);
        }
    }
    return std::max({best, gc, gd});
}

// 8th-order centred first difference, zero extension outside the grid.
double central_d1(std::span<const double> f, std::size_t i, double dx) {
    static constexpr std::array<double, 4> c{4.0 / 5.0, -1.0 / 5.0, 4.0 / 105.0, -1.0 / 280.0};
    const auto n = static_cast<std::ptrdiff_t>(f.size());
    auto at = [&](std::ptrdiff_t j) { return (j < 0 || j >= n) ? 0.0 : f[static_cast<std::size_t>(j)]; };
    const auto ii = static_cast<std::ptrdiff_t>(i);
    double s = 0.0;
    for (std::ptrdiff_t m = 1; m <= 4; ++m) s += c[static_cast<std::size_t>(m - 1)] * (at(ii + m) - at(ii - m));
    return s / dx;
}

// antiderivative of ln|u|
double log_primitive(double u) { return u == 0.0 ? 0.0 : u * std::log(std::abs(u)) - u; }

bool symmetric_grid(const Field1D& f) {
    return std::abs(f.x_min + f.x_max) <= 1e-12 * (f.x_max - f.x_min);
}

double odd_defect(const Field1D& f) {
    double d = 0.0;
    const std::size_t n = f.size();
    for (std::size_t i = 0; i < n; ++i) d = std::max(d, std::abs(f.values[i] + f.values[n - 1 - i]));
    return d;
}

}  // namespace

quad::Estimate hilbert_pv(const BumpProfile& f, double x, double tol, int order) {
    if (order < 0 || order > 1) throw PreconditionError("hilbert_pv supports order 0 or 1");
    std::vector<double> cuts{0.0};
    double narrowest = INFINITY;
    for (const auto& s : f.support()) narrowest = std::min(narrowest, s.width());
    for (double e : f.breakpoints()) cuts.push_back(std::abs(x - e));
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    if (cuts.size() < 2) return {};

    const profiles::Derivs at_x = f.derivatives(x);
    const double d1 = at_x[static_cast<std::size_t>(order + 1)];
    const double d3 = at_x[static_cast<std::size_t>(order + 3)];
    // below s0 the paired difference loses digits; its Taylor expansion is exact to O(s^4)
    const double s0 = 1e-6 * narrowest;
    auto g = [&](double s) {
        if (s < s0) return -2.0 * d1 - d3 * s * s / 3.0;
        return (f.derivative(x - s, order) - f.derivative(x + s, order)) / s;
    };
    quad::Estimate e = quad::adaptive(g, cuts, tol);
    return {e.value / kPi, e.error / kPi};
}

std::vector<double> hilbert_pv(const BumpProfile& f, std::span<const double> xs, double tol, int order) {
    std::vector<double> out(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) out[i] = hilbert_pv(f, xs[i], tol, order).value;
    return out;
}

SampledTransform hilbert_pv(const Field1D& f) {
    f.validate();
    const std::size_t n = f.size();
    const double dx = f.dx();
    SampledTransform out{Field1D(f.x_min, f.x_max, std::vector<double>(n), f.time), 0.0};
    for (std::size_t i = 0; i < n; ++i) {
        const double g0 = -2.0 * central_d1(f.values, i, dx);
        const std::size_t reach = std::max(i, n - 1 - i);
        double fine = 0.5 * g0, coarse = 0.5 * g0;
        for (std::size_t m = 1; m <= reach; ++m) {
            double left = m <= i ? f.values[i - m] : 0.0;
            double right = i + m < n ? f.values[i + m] : 0.0;
            double g = (left - right) / (static_cast<double>(m) * dx);
            fine += g;
            if (m % 2 == 0) coarse += g;
        }
        fine *= dx / kPi;
        coarse *= 2.0 * dx / kPi;
        out.field.values[i] = fine;
        out.error = std::max(out.error, std::abs(fine - coarse));
    }
    return out;
}

double hilbert_pv_at(const Field1D& f, double x) {
    f.validate();
    const double dx = f.dx();
    const double pos = (x - f.x_min) / dx;
    const double node = std::round(pos);
    if (std::abs(pos - node) > 1e-9 || node < 0.0 || node > static_cast<double>(f.size() - 1))
        throw PreconditionError("hilbert_pv: x is not a grid node; off-node values need a smooth evaluator");
    const auto i = static_cast<std::size_t>(node);
    const std::size_t n = f.size();
    double s = -central_d1(f.values, i, dx);
    for (std::size_t m = 1; m <= std::max(i, n - 1 - i); ++m) {
        double left = m <= i ? f.values[i - m] : 0.0;
        double right = i + m < n ? f.values[i + m] : 0.0;
        s += (left - right) / (static_cast<double>(m) * dx);
    }
    return s * dx / kPi;
}

struct SpectralOps::Plan {
    std::size_t m;
    double* real;
    fftw_complex* spec;
    fftw_plan fwd;
    fftw_plan bwd;

    explicit Plan(std::size_t len) : m(len) {
        real = fftw_alloc_real(m);
        spec = fftw_alloc_complex(m / 2 + 1);
        std::lock_guard lock(planner_mutex());
        fwd = fftw_plan_dft_r2c_1d(static_cast<int>(m), real, spec, FFTW_ESTIMATE);
        bwd = fftw_plan_dft_c2r_1d(static_cast<int>(m), spec, real, FFTW_ESTIMATE);
    }
    ~Plan() {
        {
            std::lock_guard lock(planner_mutex());
            fftw_destroy_plan(fwd);
            fftw_destroy_plan(bwd);
        }
        fftw_free(real);
        fftw_free(spec);
    }
    Plan(const Plan&) = delete;
    Plan& operator=(const Plan&) = delete;

    std::complex<double>* modes() { return reinterpret_cast<std::complex<double>*>(spec); }
};

SpectralOps::SpectralOps(std::size_t n, double dx, bool periodic, std::size_t padding_factor)
    : n_(n), dx_(dx), periodic_(periodic) {
    if (n < 4) throw PreconditionError("SpectralOps needs at least 4 points");
    if (!periodic && padding_factor < 2) throw PreconditionError("padding_factor must be >= 2");
    m_ = periodic ? n : padding_factor * n;
    plan_ = std::make_unique<Plan>(m_);
    if (!periodic) {
        // kernel (1 - cos(pi j))/(pi j) on lags -(n-1)..(n-1), wrapped onto the padded circle
        std::fill(plan_->real, plan_->real + m_, 0.0);
        for (std::size_t j = 1; j < n; j += 2) {
            double k = 2.0 / (kPi * static_cast<double>(j));
            plan_->real[j] = k;
            plan_->real[m_ - j] = -k;
        }
        fftw_execute(plan_->fwd);
        kernel_hat_.assign(plan_->modes(), plan_->modes() + m_ / 2 + 1);
    }
}

SpectralOps::~SpectralOps() = default;

void SpectralOps::hilbert(std::span<const double> in, std::span<double> out) {
    if (in.size() != n_ || out.size() != n_) throw PreconditionError("SpectralOps: size mismatch");
    std::fill(plan_->real, plan_->real + m_, 0.0);
    std::copy(in.begin(), in.end(), plan_->real);
    fftw_execute(plan_->fwd);
    auto* c = plan_->modes();
    const std::size_t half = m_ / 2;
    if (periodic_) {
        c[0] = 0.0;
        for (std::size_t k = 1; k <= half; ++k) c[k] *= std::complex<double>(0.0, -1.0);
        if (m_ % 2 == 0) c[half] = 0.0;
    } else {
        for (std::size_t k = 0; k <= half; ++k) c[k] *= kernel_hat_[k];
    }
    fftw_execute(plan_->bwd);
    const double scale = 1.0 / static_cast<double>(m_);
    for (std::size_t i = 0; i < n_; ++i) out[i] = plan_->real[i] * scale;
}

void SpectralOps::derivative(std::span<const double> in, std::span<double> out) {
    if (in.size() != n_ || out.size() != n_) throw PreconditionError("SpectralOps: size mismatch");
    std::fill(plan_->real, plan_->real + m_, 0.0);
    std::copy(in.begin(), in.end(), plan_->real);
    fftw_execute(plan_->fwd);
    auto* c = plan_->modes();
    const std::size_t half = m_ / 2;
    const double base = 2.0 * kPi / (static_cast<double>(m_) * dx_);
    for (std::size_t k = 0; k <= half; ++k) c[k] *= std::complex<double>(0.0, base * static_cast<double>(k));
    if (m_ % 2 == 0) c[half] = 0.0;
    fftw_execute(plan_->bwd);
    const double scale = 1.0 / static_cast<double>(m_);
    for (std::size_t i = 0; i < n_; ++i) out[i] = plan_->real[i] * scale;
}

void SpectralOps::dealias(std::span<double> data, double fraction) {
    if (data.size() != n_) throw PreconditionError("SpectralOps: size mismatch");
    std::fill(plan_->real, plan_->real + m_, 0.0);
    std::copy(data.begin(), data.end(), plan_->real);
    fftw_execute(plan_->fwd);
    auto* c = plan_->modes();
    const std::size_t half = m_ / 2;
    const auto cutoff = static_cast<std::size_t>(fraction * static_cast<double>(half));
    for (std::size_t k = cutoff + 1; k <= half; ++k) c[k] = 0.0;
    fftw_execute(plan_->bwd);
    const double scale = 1.0 / static_cast<double>(m_);
    for (std::size_t i = 0; i < n_; ++i) data[i] = plan_->real[i] * scale;
}

SpectralResult hilbert_spectral(const Field1D& f, std::size_t padding_factor, SpectralKernel kernel) {
    f.validate();
    if (padding_factor < 2) throw PreconditionError("hilbert_spectral requires padding_factor >= 2");
    const std::size_t n = f.size();
    SpectralResult out{Field1D(f.x_min, f.x_max, std::vector<double>(n), f.time), {}};

    const double sup = f.sup_abs();
    if (sup > 0.0) {
        const std::size_t band = std::max<std::size_t>(1, n / 10);
        bool touches = false;
        for (std::size_t i = 0; i < band; ++i)
            touches = touches || std::abs(f.values[i]) > 1e-14 * sup || std::abs(f.values[n - 1 - i]) > 1e-14 * sup;
        if (touches) out.warnings.emplace_back("wrap-around contamination: support within 10% of the grid boundary");
    }

    if (kernel == SpectralKernel::FreeSpace) {
        SpectralOps ops(n, f.dx(), false, padding_factor);
        ops.hilbert(f.values, out.field.values);
    } else {
        const std::size_t m = padding_factor * n;
        std::vector<double> padded(m, 0.0), result(m);
        std::copy(f.values.begin(), f.values.end(), padded.begin());
        SpectralOps ops(m, f.dx(), true);
        ops.hilbert(padded, result);
        std::copy(result.begin(), result.begin() + static_cast<std::ptrdiff_t>(n), out.field.values.begin());
    }
    return out;
}

Field1D hilbert_periodic(const Field1D& f) {
    f.validate();
    Field1D out(f.x_min, f.x_max, std::vector<double>(f.size()), f.time);
    SpectralOps ops(f.size(), f.dx(), true);
    ops.hilbert(f.values, out.values);
    return out;
}

std::vector<double> cumulative_integral(std::span<const double> f, double dx) {
    const std::size_t n = f.size();
    if (n < 4) throw PreconditionError("cumulative_integral needs at least 4 samples");
    std::vector<double> out(n, 0.0);
    const double w = dx / 24.0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        double piece;
        if (i == 0)
            piece = w * (9.0 * f[0] + 19.0 * f[1] - 5.0 * f[2] + f[3]);
        else if (i + 2 >= n)
            piece = w * (f[n - 4] - 5.0 * f[n - 3] + 19.0 * f[n - 2] + 9.0 * f[n - 1]);
        else
            piece = w * (-f[i - 1] + 13.0 * f[i] + 13.0 * f[i + 1] - f[i + 2]);
        out[i + 1] = out[i] + piece;
    }
    return out;
}

Velocity velocity_from_hw(const Field1D& hw, bool w_is_odd) {
    hw.validate();
    if (hw.x_min > 0.0 || hw.x_max < 0.0) throw PreconditionError("velocity_from_w: grid must contain x = 0");
    const std::size_t n = hw.size();
    const double dx = hw.dx();
    std::vector<double> I = cumulative_integral(hw.values, dx);

    // value of the running integral at x = 0
    const double pos = -hw.x_min / dx;
    auto i0 = static_cast<std::size_t>(std::floor(pos));
    i0 = std::min(i0, n - 1);
    double at_zero = I[i0];
    const double frac = pos - static_cast<double>(i0);
    if (frac > 1e-12) {
        // integrate the cubic through four neighbouring nodes from x_{i0} to 0
        const std::size_t j0 = std::min(i0 > 0 ? i0 - 1 : 0, n - 4);
        auto interp = [&](double x) {
            double s = 0.0;
            for (std::size_t a = 0; a < 4; ++a) {
                double l = 1.0;
                for (std::size_t b = 0; b < 4; ++b)
                    if (b != a) l *= (x - hw.x(j0 + b)) / (hw.x(j0 + a) - hw.x(j0 + b));
                s += l * hw.values[j0 + a];
            }
            return s;
        };
        const auto& rule = quad::gauss_legendre(4);
        const double lo = hw.x(i0), half = (0.0 - lo) / 2.0;
        for (std::size_t q = 0; q < rule.nodes.size(); ++q)
            at_zero += half * rule.weights[q] * interp(lo + half * (rule.nodes[q] + 1.0));
    }

    Velocity v{Field1D(hw.x_min, hw.x_max, std::vector<double>(n), hw.time), 0.0, false};
    for (std::size_t i = 0; i < n; ++i) v.u.values[i] = I[i] - at_zero;
    if (w_is_odd && symmetric_grid(hw)) {
        v.odd_deviation = odd_defect(v.u) / 2.0;
        std::vector<double> sym(n);
        for (std::size_t i = 0; i < n; ++i) sym[i] = 0.5 * (v.u.values[i] - v.u.values[n - 1 - i]);
        v.u.values = std::move(sym);
        v.symmetrized = true;
    }
    return v;
}

Velocity velocity_from_w(const Field1D& w) {
    w.validate();
    const double sup = w.sup_abs();
    const bool odd = symmetric_grid(w) && odd_defect(w) <= 1e-12 * std::max(sup, 1e-300);
    SpectralResult hw = hilbert_spectral(w);
    return velocity_from_hw(hw.field, odd);
}

double antiderivative_H(const BumpProfile& phi, double x, double tol) {
    if (x < 0.0) return -antiderivative_H(phi, -x, tol);
    if (x == 0.0) return 0.0;
    // (1/pi) int_0^inf phi(y) [ln|x - y| - ln(x + y)] dy, the log singularity subtracted analytically
    const double px = phi(x);
    double total = 0.0;
    for (const auto& s : phi.support()) {
        if (s.hi <= 0.0) continue;
        const double a = std::max(0.0, s.lo), b = s.hi;
        std::vector<double> br{a};
        if (x > a && x < b) br.push_back(x);
        br.push_back(b);
        bool inside = s.contains(x);
        auto g = [&](double y) {
            double v = -phi(y) * std::log(x + y);
            double d = std::abs(x - y);
            if (d > 0.0) v += (phi(y) - (inside ? px : 0.0)) * std::log(d);
            return v;
        };
        // tanh-sinh clusters nodes at the log-singular endpoint y = x
        static thread_local boost::math::quadrature::tanh_sinh<double> ts;
        for (std::size_t p = 0; p + 1 < br.size(); ++p) total += ts.integrate(g, br[p], br[p + 1], tol);
        if (inside) total += px * (log_primitive(b - x) - log_primitive(a - x));
    }
    return total / kPi;
}

PhiNorms phi_norms(const BumpProfile& phi) {
    PhiNorms n;
    const double hi = phi.support_max();
    auto br = phi.breakpoints();
    n.max_phi = maximize([&](double x) { return std::abs(phi(x)); }, 0.0, hi, 801);
    n.max_H_phi = maximize([&](double x) { return std::abs(hilbert_pv(phi, x).value); }, 0.0, 2.0 * hi, 401);
    n.max_Phi = maximize([&](double x) { return std::abs(antiderivative_H(phi, x)); }, 0.0, 3.0 * hi, 301);
    n.l1_phi = quad::adaptive([&](double x) { return std::abs(phi(x)); }, br, 1e-14).value;
    n.l2_dphi = profiles::derivative_l2(phi);
    n.l2_d2phi = std::sqrt(
        quad::adaptive([&](double x) { double d = phi.derivative(x, 2); return d * d; }, br, 1e-14).value);
    return n;
}

void to_json(json& j, const PhiNorms& n) {
    j = {{"max_phi", n.max_phi},   {"max_H_phi", n.max_H_phi}, {"max_Phi", n.max_Phi},
         {"l1_phi", n.l1_phi},     {"l2_dphi", n.l2_dphi},     {"l2_d2phi", n.l2_d2phi}};
}

void to_json(json& j, const InteractionConstants& c) {
    j = {{"inputs", {{"r", c.r}, {"eps", c.eps}, {"A", c.A}, {"mass_corrected", c.mass_corrected}}},
         {"c_r", c.c_r},
         {"mass", c.mass},
         {"C1", c.C1},
         {"C2", c.C2},
         {"C3", c.C3},
         {"C4", c.C4},
         {"C5", c.C5},
         {"C6", c.C6},
         {"C7", c.C7},
         {"C1_uniform", c.C1_uniform},
         {"C2_uniform", c.C2_uniform},
         {"I_bound", c.I_bound},
         {"support_margin", c.support_margin},
         {"energy_margin", c.energy_margin},
         {"phi_norms", c.norms}};
}

namespace {

struct DerivedConstants {
    double C3, C4, C5, C6, C7;
};

DerivedConstants derive(double r, double eps, double C1, double C2, const PhiNorms& nm) {
    DerivedConstants d{};
    const double sr = std::sqrt(r / kPi);
    d.C3 = 2.0 * eps * sr + (1.0 + 2.0 * r) * C1 + C2;
    d.C4 = 2.0 * eps * (1.0 + 2.0 * r) * sr + (1.0 + 2.0 * r) * (1.0 + 2.0 * r) * C1 + 7.0 * C2 / 4.0;
    d.C5 = eps + 2.0 * std::sqrt(2.0 * r) * (C1 + 32.0 * C2 / (7.0 - 14.0 * r));
    d.C6 = nm.max_H_phi + d.C3 + 2.0 * std::sqrt(2.0 * r) * (nm.l2_dphi / kPi + d.C5) / kPi;
    d.C7 = 2.0 * (nm.max_phi * (nm.l2_dphi + d.C5) + nm.l2_d2phi * (nm.max_H_phi + d.C4));
    return d;
}

}  // namespace

InteractionConstants interaction_constants(double r, double eps, double A, const PhiNorms& norms,
                                           bool mass_corrected) {
    if (!(r > 0.0 && r <= 0.25)) throw DomainError("interaction_constants requires 0 < r <= 1/4 (1 - 3r - 2r^2 > 0)");
    if (!(eps > 0.0)) throw DomainError("interaction_constants requires eps > 0");
    if (!(A > 1.0 && A < 2.0)) throw DomainError("interaction_constants requires A in (1, 2)");
    InteractionConstants c;
    c.r = r;
    c.eps = eps;
    c.A = A;
    c.norms = norms;
    c.mass_corrected = mass_corrected;
    c.c_r = std::sqrt(32.0 * r * r * r / 3.0) / (kPi * (1.0 - 2.0 * r));
    const double tail = kPi * (1.0 - 2.0 * r) * c.c_r * eps;
    c.mass = (mass_corrected ? kPi : 1.0) + tail;

    const double q = 1.0 - 3.0 * r - 2.0 * r * r;
    auto C1_at = [&](double a) { return c.mass * (r / a) / (kPi * q * q * (1.0 - r / a)); };
    auto C2_at = [&](double a) {
        return 16.0 * c.mass * (1.0 + 2.0 * r) * a * r * r / (7.0 * kPi * (1.0 - 2.0 * r) * (1.0 - 2.0 * r) * (1.0 - a * r * r));
    };
    c.C1 = C1_at(A);
    c.C2 = C2_at(A);
    c.C1_uniform = C1_at(1.0);
    c.C2_uniform = C2_at(2.0);
    DerivedConstants d = derive(r, eps, c.C1, c.C2, norms);
    c.C3 = d.C3;
    c.C4 = d.C4;
    c.C5 = d.C5;
    c.C6 = d.C6;
    c.C7 = d.C7;

    // the closing inequalities use the A-uniform constants
    DerivedConstants u = derive(r, eps, c.C1_uniform, c.C2_uniform, norms);
    const double denom = 1.0 - 5.0 * c.c_r * eps;
    if (!(denom > 0.0)) throw DomainError("interaction_constants requires 5 c(r) eps < 1");
    c.I_bound = 4.0 * (A - 1.0) / denom;
    c.support_margin = r - (norms.max_Phi + u.C4) * c.I_bound;
    c.energy_margin = eps - u.C7 * c.I_bound * std::exp(u.C6 * c.I_bound / 2.0) / 2.0;
    return c;
}

std::optional<double> admissible_A(double r, double eps, const PhiNorms& norms, bool mass_corrected) {
    auto ok = [&](double A) {
        auto c = interaction_constants(r, eps, A, norms, mass_corrected);
        return c.support_margin > 0.0 && c.energy_margin > 0.0;
    };
    double lo = 1.0, hi = 2.0 - 1e-12;
    if (ok(hi)) return hi;
    if (!ok(1.0 + 1e-15)) return std::nullopt;
    for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
        double mid = 0.5 * (lo + hi);
        (ok(mid) ? lo : hi) = mid;
    }
    return lo;
}

FarfieldReport verify_farfield_bounds(const BumpProfile& W, const BumpProfile& phi, double r, double eps,
                                      std::size_t n_points) {
    if (!(r > 0.0 && r <= 0.25)) throw DomainError("verify_farfield_bounds requires 0 < r <= 1/4");
    const double R = 1.0 + 2.0 * r;
    for (const auto& s : W.support()) {
        const double m = std::min(std::abs(s.lo), std::abs(s.hi));
        const double M = std::max(std::abs(s.lo), std::abs(s.hi));
        if ((s.lo < 0.0 && s.hi > 0.0) || m < 1.0 - 2.0 * r - 1e-12 || M > R + 1e-12)
            throw PreconditionError("verify_farfield_bounds: support of W leaves +-[1-2r, 1+2r]");
    }
    FarfieldReport rep;
    BumpProfile diff = profiles::add_profiles(W, phi, -1.0);
    rep.h1_distance = profiles::derivative_l2(diff);
    if (rep.h1_distance > eps * (1.0 + 1e-9))
        throw PreconditionError("verify_farfield_bounds: ||(W - phi)'||_2 exceeds eps");
    auto br = W.breakpoints();
    rep.l1_mass = quad::adaptive([&](double x) { return std::abs(W(x)); }, br, 1e-14).value;

    const double c_r = std::sqrt(32.0 * r * r * r / 3.0) / (kPi * (1.0 - 2.0 * r));
    const double printed_mass = 1.0 + kPi * (1.0 - 2.0 * r) * c_r * eps;

    // far points: |x| = R * (1 + geometric offsets), both signs; near points cover [0, 1-2r)
    std::vector<double> far, near;
    for (std::size_t i = 0; i < n_points; ++i) {
        double t = static_cast<double>(i) / static_cast<double>(n_points - 1);
        double x = R * (1.0 + 1e-3 * std::pow(1e5, t));
        far.push_back(x);
        far.push_back(-x);
        double y = (1.0 - 2.0 * r) * (0.98 * t);
        near.push_back(y);
    }

    struct Family {
        const char* name;
        std::vector<double> measured, bound_unit;  // bound_unit = bound / mass
    };
    Family fH{"farfield_HW", {}, {}}, fD{"farfield_dHW", {}, {}}, fN{"nearfield_dHW", {}, {}};
    for (double x : far) {
        const double den = x * x - R * R;
        fH.measured.push_back(std::abs(hilbert_pv(W, x).value));
        fH.bound_unit.push_back(R / (kPi * den));
        fD.measured.push_back(std::abs(hilbert_pv(W, x, 1e-12, 1).value));
        fD.bound_unit.push_back(2.0 * R * std::abs(x) / (kPi * den * den));
    }
    for (double x : near) {
        const double gap = 1.0 - 2.0 * r - x;
        const double bound = 1.0 / (kPi * gap * gap);
        fN.measured.push_back(std::max(std::abs(hilbert_pv(W, x, 1e-12, 1).value),
                                       std::abs(hilbert_pv(W, -x, 1e-12, 1).value)));
        fN.bound_unit.push_back(bound);
    }

    auto judge = [&](const Family& f, double mass, const char* variant) {
        Verdict v;
        v.lemma = std::string(f.name) + "_" + variant;
        v.tolerance = 1e-10;
        double worst = INFINITY, worst_x = 0.0;
        const auto& pts = (std::string(f.name) == "nearfield_dHW") ? near : far;
        for (std::size_t i = 0; i < f.measured.size(); ++i) {
            const double b = mass * f.bound_unit[i];
            const double rel = (b - f.measured[i]) / b;
            if (rel < worst) {
                worst = rel;
                worst_x = pts[i];
            }
        }
        v.margin = worst;
        v.pass = worst >= -v.tolerance;
        v.params = {{"r", r}, {"eps", eps}, {"mass", mass}, {"points", f.measured.size()}, {"worst_x", worst_x}};
        v.note = "margin is min over points of (bound - |measured|)/bound";
        return v;
    };
    for (const Family* f : {&fH, &fD, &fN}) {
        rep.printed.push_back(judge(*f, printed_mass, "printed_mass"));
        rep.corrected.push_back(judge(*f, rep.l1_mass, "measured_mass"));
    }
    return rep;
}

std::string field_csv(const Field1D& f) {
    std::ostringstream os;
    os << "x,value\n";
    for (std::size_t i = 0; i < f.size(); ++i) os << format_double(f.x(i)) << ',' << format_double(f.values[i]) << '\n';
    return os.str();
}

}  // namespace blowup::hilbert
