#include "blowup/axisym.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <tuple>

#include "blowup/quadrature.hpp"

namespace blowup::axisym {

namespace {

constexpr double kE = 2.718281828459045235360287471352662498;
constexpr double kTwelfth = 1.0 / 12.0;

double signed_twelfth_root(double z) { return z < 0.0 ? -std::pow(-z, kTwelfth) : std::pow(z, kTwelfth); }

// ---- tensor Gauss-Legendre on [r_lo, r_hi] x [0, z_top] -------------------------------------
//
// z-panels are graded geometrically toward 0; the first panel uses z = z1 u^12 so that
// |z|^{1/12} becomes u. Both families are subdivided `m` times per level.

struct Nodes {
    std::vector<double> x, w;
};

Nodes r_nodes(const std::vector<double>& breaks, std::size_t m, std::size_t order) {
    const auto& gl = quad::gauss_legendre(order);
    Nodes out;
    for (std::size_t s = 0; s + 1 < breaks.size(); ++s) {
        double h = (breaks[s + 1] - breaks[s]) / static_cast<double>(m);
        for (std::size_t p = 0; p < m; ++p) {
            double lo = breaks[s] + h * static_cast<double>(p);
            for (std::size_t i = 0; i < gl.nodes.size(); ++i) {
                out.x.push_back(lo + 0.5 * h * (gl.nodes[i] + 1.0));
                out.w.push_back(0.5 * h * gl.weights[i]);
            }
        }
    }
    return out;
}

Nodes z_nodes(const std::vector<double>& breaks, std::size_t m, std::size_t order) {
    const auto& gl = quad::gauss_legendre(order);
    Nodes out;
    // first panel, substituted
    const double z1 = breaks[1];
    for (std::size_t p = 0; p < m; ++p) {
        double ulo = static_cast<double>(p) / static_cast<double>(m), h = 1.0 / static_cast<double>(m);
        for (std::size_t i = 0; i < gl.nodes.size(); ++i) {
            double u = ulo + 0.5 * h * (gl.nodes[i] + 1.0);
            double u11 = std::pow(u, 11);
            out.x.push_back(z1 * u11 * u);
            out.w.push_back(0.5 * h * gl.weights[i] * 12.0 * z1 * u11);
        }
    }
    std::vector<double> rest(breaks.begin() + 1, breaks.end());
    Nodes tail = r_nodes(rest, m, order);
    out.x.insert(out.x.end(), tail.x.begin(), tail.x.end());
    out.w.insert(out.w.end(), tail.w.begin(), tail.w.end());
    return out;
}

std::vector<double> graded_breaks(double z_top, double z_floor, const std::vector<double>& extra) {
    std::vector<double> b{0.0};
    for (double z = z_top; z > z_floor; z *= 0.5) b.push_back(z);
    b.push_back(std::min(z_floor, z_top));
    for (double e : extra)
        if (e > 0.0 && e < z_top) b.push_back(e);
    std::sort(b.begin(), b.end());
    b.erase(std::unique(b.begin(), b.end(), [](double x, double y) { return std::abs(x - y) <= 1e-14 * std::abs(y); }),
            b.end());
    return b;
}

template <class F>
KernelValue tensor_quad(F&& f, const std::vector<double>& rb, const std::vector<double>& zb, double tol,
                        std::size_t order = 20) {
    auto level = [&](std::size_t m, std::size_t& evals) {
        Nodes R = r_nodes(rb, m, order), Zn = z_nodes(zb, m, order);
        double total = 0.0;
        for (std::size_t j = 0; j < Zn.x.size(); ++j) {
            double row = 0.0;
            for (std::size_t i = 0; i < R.x.size(); ++i) row += R.w[i] * f(R.x[i], Zn.x[j]);
            total += Zn.w[j] * row;
        }
        evals += R.x.size() * Zn.x.size();
        return total;
    };
    KernelValue out;
    double prev = level(1, out.evaluations);
    for (std::size_t m = 2; m <= 16; m *= 2) {
        double cur = level(m, out.evaluations);
        out.value = cur;
        out.error = std::abs(cur - prev);
        if (out.error <= tol) return out;
        prev = cur;
    }
    throw NumericalError("tensor quadrature did not reach tolerance " + format_double(tol) + " (last change " +
                         format_double(out.error) + ")");
}

double z_top_of(const AxisymProfile& w) {
    double zt = w.z_max / w.K;
    if (!std::isfinite(zt)) zt = 1e8 * std::max(1.0, w.r_hi);
    return zt;
}

std::vector<double> radial_breaks(const AxisymProfile& w, std::size_t segments) {
    std::vector<double> b{w.r_lo};
    for (double x : w.r_breaks)
        if (x > w.r_lo && x < w.r_hi) b.push_back(x);
    b.push_back(w.r_hi);
    std::sort(b.begin(), b.end());
    std::vector<double> out{b.front()};
    for (std::size_t s = 0; s + 1 < b.size(); ++s)
        for (std::size_t p = 1; p <= segments; ++p)
            out.push_back(b[s] + (b[s + 1] - b[s]) * static_cast<double>(p) / static_cast<double>(segments));
    return out;
}

std::vector<double> scaled_z_breaks(const AxisymProfile& w) {
    std::vector<double> out;
    for (double z : w.z_breaks) out.push_back(z / w.K);
    return out;
}

std::uint64_t mix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

double unit(std::uint64_t& state) {
    state = mix(state);
    return static_cast<double>(state >> 11) * 0x1.0p-53;
}

}  // namespace

// ---- configuration ---------------------------------------------------------------------------

void AxisymConfig::validate() const {
    if (!(d > 0.0 && d <= 0.25)) throw ConfigError("axisym: d must lie in (0, 1/4]");
    if (!(Z > 0.0) || !std::isfinite(Z)) throw ConfigError("axisym: Z must be positive");
    if (!(A > 1.0) || !std::isfinite(A)) throw ConfigError("axisym: A must exceed 1");
    if (!(alpha > 0.0 && alpha < 0.5)) throw ConfigError("axisym: alpha must lie in (0, 1/2)");
    if (!(beta >= 0.0) || !std::isfinite(beta)) throw ConfigError("axisym: beta must be non-negative");
    if (!(eps_s > 0.0)) throw ConfigError("axisym: eps_s must be positive");
    if (!(a_cascade >= 0.0) || !std::isfinite(a_cascade)) throw ConfigError("axisym: a_cascade must be >= 0");
    if (!(sio_constant > 0.0) || !std::isfinite(sio_constant))
        throw ConfigError("axisym: sio_constant must be positive");
}

AxisymConfig AxisymConfig::from_json(const json& j) {
    if (!j.is_object()) throw ConfigError("axisym config must be an object");
    AxisymConfig c;
    for (const auto& [key, v] : j.items()) {
        try {
            if (key == "d") c.d = v.get<double>();
            else if (key == "Z") c.Z = v.get<double>();
            else if (key == "A") c.A = v.get<double>();
            else if (key == "alpha") c.alpha = v.get<double>();
            else if (key == "beta") c.beta = v.get<double>();
            else if (key == "eps_s") c.eps_s = v.get<double>();
            else if (key == "a_cascade") c.a_cascade = v.get<double>();
            else if (key == "sio_constant") c.sio_constant = v.get<double>();
            else throw ConfigError("unknown axisym key '" + key + "'");
        } catch (const json::exception& e) {
            throw ConfigError("axisym." + key + ": " + e.what());
        }
    }
    c.validate();
    return c;
}

json AxisymConfig::to_json() const {
    return {{"d", d},         {"Z", Z},         {"A", A},
            {"alpha", alpha}, {"beta", beta},   {"eps_s", eps_s},
            {"a_cascade", a_cascade}, {"sio_constant", sio_constant}};
}

// ---- profiles --------------------------------------------------------------------------------

std::string AxisymProfile::grid_csv(std::size_t nr, std::size_t nz, double z_clip) const {
    if (nr < 2 || nz < 2) throw PreconditionError("grid_csv needs at least 2 points per direction");
    double zt = std::min(z_clip, z_top_of(*this));
    std::ostringstream os;
    os << "r,z,w\n";
    for (std::size_t i = 0; i < nr; ++i) {
        double r = r_lo + (r_hi - r_lo) * static_cast<double>(i) / static_cast<double>(nr - 1);
        for (std::size_t j = 0; j < nz; ++j) {
            double z = -zt + 2.0 * zt * static_cast<double>(j) / static_cast<double>(nz - 1);
            os << format_double(r) << ',' << format_double(z) << ',' << format_double((*this)(r, z)) << '\n';
        }
    }
    return os.str();
}

double AxisymProfile::odd_defect(std::size_t nr, std::size_t nz) const {
    double zt = std::min(z_top_of(*this), 1e3 * std::max(1.0, r_hi));
    double big = 0.0, defect = 0.0;
    for (std::size_t i = 0; i < nr; ++i) {
        double r = r_lo + (r_hi - r_lo) * (static_cast<double>(i) + 0.5) / static_cast<double>(nr);
        for (std::size_t j = 0; j < nz; ++j) {
            // geometric heights so thin features near z = 0 are seen
            double z = zt * std::pow(1e-6, static_cast<double>(j) / static_cast<double>(nz - 1));
            double a = (*this)(r, z), b = (*this)(r, -z);
            big = std::max({big, std::abs(a), std::abs(b)});
            defect = std::max(defect, std::abs(a + b));
        }
    }
    return big > 0.0 ? defect / big : 0.0;
}

AxisymProfile initial_profile(const profiles::BumpProfile& phi, const profiles::BumpProfile& rho) {
    AxisymProfile p;
    p.name = "phi_rho_z112";
    p.w = [phi, rho](double r, double z) { return phi(r) * rho(z) * signed_twelfth_root(z); };
    p.r_lo = phi.support_min();
    p.r_hi = phi.support_max();
    const double Z = rho.params().at("Z").get<double>();
    p.z_max = 2.0 * Z;
    p.z_breaks = {Z, 2.0 * Z};
    return p;
}

AxisymProfile normalized_profile(const profiles::BumpProfile& phi) {
    AxisymProfile p;
    p.name = "phi_z112";
    p.w = [phi](double r, double z) { return phi(r) * signed_twelfth_root(z); };
    p.r_lo = phi.support_min();
    p.r_hi = phi.support_max();
    p.z_max = std::numeric_limits<double>::infinity();
    return p;
}

AxisymProfile rescaled(const AxisymProfile& base, double mu) {
    if (!(mu > 0.0)) throw PreconditionError("rescaled needs mu > 0");
    AxisymProfile p = base;
    p.name = base.name + "|scaled(" + format_double(mu) + ")";
    auto W0 = base.w;
    p.w = [W0, mu](double r, double z) { return W0(r / mu, z / mu); };
    p.r_lo *= mu;
    p.r_hi *= mu;
    p.z_max *= mu;
    for (auto& z : p.z_breaks) z *= mu;
    for (auto& r : p.r_breaks) r *= mu;
    return p;
}

AxisymProfile random_odd_profile(std::uint64_t seed) {
    std::uint64_t state = seed * 0x9e3779b97f4a7c15ULL + 3;
    struct Term {
        double c, h, amp, s;
        bool rough;
        profiles::BumpProfile rho;
    };
    std::vector<Term> terms;
    AxisymProfile p;
    p.name = "random_odd(" + std::to_string(seed) + ")";
    p.r_lo = std::numeric_limits<double>::infinity();
    p.r_hi = 0.0;
    p.z_max = 0.0;
    for (int i = 0; i < 3; ++i) {
        Term t;
        t.c = 0.6 + unit(state);
        t.h = 0.1 + 0.2 * unit(state);
        t.amp = (unit(state) < 0.5 ? -1.0 : 1.0) * (0.5 + unit(state));
        t.rough = unit(state) < 0.5;
        t.s = 0.3 + 1.7 * unit(state);
        if (t.rough) {
            double Z = 1.0 + 4.0 * unit(state);
            t.rho = profiles::build_rho_z(Z);
            p.z_breaks.push_back(Z);
            p.z_breaks.push_back(2.0 * Z);
            p.z_max = std::max(p.z_max, 2.0 * Z);
        } else {
            p.z_max = std::max(p.z_max, 12.0 * t.s);
        }
        p.r_lo = std::min(p.r_lo, t.c - t.h);
        p.r_hi = std::max(p.r_hi, t.c + t.h);
        p.r_breaks.push_back(t.c - t.h);
        p.r_breaks.push_back(t.c + t.h);
        terms.push_back(std::move(t));
    }
    p.w = [terms](double r, double z) {
        double v = 0.0;
        for (const auto& t : terms) {
            double radial = profiles::mollifier((r - t.c) / t.h);
            if (radial == 0.0) continue;
            double zf = t.rough ? t.rho(z) * signed_twelfth_root(z) : z * std::exp(-(z / t.s) * (z / t.s));
            v += t.amp * radial * zf;
        }
        return v;
    };
    return p;
}

Distortion Distortion::identity(double d) {
    return {[](double, double) { return 1.0; }, [](double, double) { return 1.0; }, d, "identity"};
}

Distortion Distortion::constant(double d, double lr, double lz) {
    if (!(lr >= 1.0 / (1.0 + d) - 1e-15 && lr <= 1.0 + d + 1e-15 && lz >= 1.0 / (1.0 + d) - 1e-15 &&
          lz <= 1.0 + d + 1e-15))
        throw PreconditionError("distortion factors must lie in [1/(1+d), 1+d]");
    std::ostringstream os;
    os << "constant(" << format_double(lr) << "," << format_double(lz) << ")";
    return {[lr](double, double) { return lr; }, [lz](double, double) { return lz; }, d, os.str()};
}

Distortion Distortion::random(double d, std::uint64_t seed) {
    if (!(d > 0.0)) throw PreconditionError("distortion needs d > 0");
    if (seed % 5 == 0) {
        // the four corners of the admissible box, in turn
        const double hi = 1.0 + d, lo = 1.0 / (1.0 + d);
        switch ((seed / 5) % 4) {
            case 0: return constant(d, hi, hi);
            case 1: return constant(d, lo, lo);
            case 2: return constant(d, hi, lo);
            default: return constant(d, lo, hi);
        }
    }
    struct Mode {
        double amp, wr, pr, wz, pz;
    };
    std::uint64_t state = seed * 0x2545f4914f6cdd1dULL + 17;
    auto field = [&state]() {
        std::vector<Mode> modes(4);
        double norm = 0.0;
        for (auto& m : modes) {
            m.amp = 2.0 * unit(state) - 1.0;
            m.wr = 12.0 * unit(state);
            m.pr = 2.0 * kPi * unit(state);
            m.wz = 6.0 * unit(state);
            m.pz = 2.0 * kPi * unit(state);
            norm += std::abs(m.amp);
        }
        // push the extremes out to the boundary of the class
        double gain = 0.6 + 0.4 * unit(state);
        for (auto& m : modes) m.amp *= gain / norm;
        return modes;
    };
    auto eval = [d](const std::vector<Mode>& modes) {
        const double l = std::log1p(d);
        return [modes, l](double r, double z) {
            double s = 0.0;
            for (const auto& m : modes) s += m.amp * std::sin(m.wr * r + m.pr) * std::cos(m.wz * std::atan(z) + m.pz);
            return std::exp(l * s);
        };
    };
    auto fr = field();
    auto fz = field();
    return {eval(fr), eval(fz), d, "random(" + std::to_string(seed) + ")"};
}

AxisymProfile distorted(const AxisymProfile& base, const Distortion& dist) {
    AxisymProfile p = base;
    p.name = base.name + "|" + dist.describe;
    auto W0 = base.w;
    double K0 = base.K;
    auto lr = dist.lambda_r, lz = dist.lambda_z;
    p.w = [W0, K0, lr, lz](double r, double z) {
        double a = lr(r, z), b = lz(r, z);
        return W0(a * r, K0 * b * z) / a;
    };
    p.K = 1.0;
    const double g = 1.0 + dist.d;
    p.r_lo = base.r_lo / g;
    p.r_hi = base.r_hi * g;
    p.z_max = base.z_max / base.K * g;
    // the support ends move with lambda; only z = 0 stays fixed
    p.z_breaks.clear();
    p.r_breaks.clear();
    return p;
}

// ---- kernels ---------------------------------------------------------------------------------

KernelValue axis_velocity_uz(const AxisymProfile& w, double z, double tol) {
    if (!(w.r_lo > 0.0 && w.r_hi > w.r_lo)) throw PreconditionError("axis_velocity_uz: support must avoid r = 0");
    const double zt = z_top_of(w) + std::abs(z);
    std::vector<double> extra = scaled_z_breaks(w);
    for (double s : {0.0, 0.5, 1.0, 2.0, 4.0}) {
        extra.push_back(std::abs(z) + s * w.r_lo);
        extra.push_back(std::abs(z) - s * w.r_lo);
    }
    auto zb = graded_breaks(zt, 1e-4 * std::min(w.r_lo, zt), extra);
    auto rb = radial_breaks(w, 6);
    auto kern = [&w, z](double r, double zp) {
        auto one = [&](double s) {
            double dz = z - s;
            double q = dz * dz + r * r;
            return r * r * w(r, s) / (2.0 * q * std::sqrt(q));
        };
        return -(one(zp) + one(-zp));
    };
    return tensor_quad(kern, rb, zb, tol);
}

KernelValue stretching_rate(const AxisymProfile& w, double tol) {
    double defect = w.odd_defect();
    if (defect > 1e-12)
        throw PreconditionError("stretching_rate requires w odd in z (relative defect " + format_double(defect) + ")");
    const double zt = z_top_of(w);
    auto zb = graded_breaks(zt, 1e-4 * std::min(w.r_lo, zt), scaled_z_breaks(w));
    auto rb = radial_breaks(w, 6);
    auto kern = [&w](double r, double z) {
        double q = z * z + r * r;
        return 1.5 * r * r * z * w(r, z) / (q * q * std::sqrt(q));
    };
    return tensor_quad(kern, rb, zb, tol);
}

KernelValue stretching_rate_full(const AxisymProfile& w, double tol) {
    const double zt = z_top_of(w);
    auto zb = graded_breaks(zt, 1e-4 * std::min(w.r_lo, zt), scaled_z_breaks(w));
    auto rb = radial_breaks(w, 6);
    auto kern = [&w](double r, double z) {
        double q = z * z + r * r;
        return 0.75 * r * r * z * (w(r, z) - w(r, -z)) / (q * q * std::sqrt(q));
    };
    return tensor_quad(kern, rb, zb, tol);
}

double stretching_from_axis(const AxisymProfile& w, double h) {
    if (!(h > 0.0)) throw PreconditionError("stretching_from_axis needs h > 0");
    auto u = [&w](double z) { return axis_velocity_uz(w, z, 1e-12).value; };
    // sixth-order centred first derivative
    double d1 = (u(3 * h) - 9.0 * u(2 * h) + 45.0 * u(h) - 45.0 * u(-h) + 9.0 * u(-2 * h) - u(-3 * h)) / (60.0 * h);
    return -0.5 * d1;
}

BetaCheck beta_identity_check(const std::vector<double>& r_values, double tol) {
    BetaCheck out;
    const double B = profiles::beta_25_35();
    out.verdict.lemma = "beta_identity";
    out.verdict.tolerance = tol;
    if (r_values.empty()) throw PreconditionError("beta_identity_check needs at least one r");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (double r : r_values) {
        if (!(r > 0.0)) throw PreconditionError("beta_identity_check requires r > 0");
        auto f = [r](double z) {
            double q = z * z + r * r;
            return std::pow(z, 13.0 / 12.0) / (q * q * std::sqrt(q));
        };
        std::array<double, 3> br{0.0, r, 8.0 * r};
        double head = quad::adaptive(f, br, 1e-14).value;
        double tail = quad::adaptive(f, 8.0 * r, std::numeric_limits<double>::infinity(), 1e-14).value;
        double q = head + tail;
        double exact = 0.5 * B * std::pow(r, -35.0 / 12.0);
        out.r.push_back(r);
        out.quadrature.push_back(q);
        out.closed_form.push_back(exact);
        out.max_rel_error = std::max(out.max_rel_error, std::abs(q - exact) / exact);
        double lx = std::log(r), ly = std::log(q);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    const double m = static_cast<double>(r_values.size());
    out.fitted_power = r_values.size() > 1 ? (m * sxy - sx * sy) / (m * sxx - sx * sx) : 0.0;
    out.verdict.params = {{"B", B}, {"r_count", r_values.size()}, {"fitted_power", out.fitted_power}};
    out.verdict.margin = tol - out.max_rel_error;
    out.verdict.pass = out.max_rel_error <= tol && B > 0.0;
    out.verdict.note = "max relative error " + format_double(out.max_rel_error);
    return out;
}

double c_dz(double d, double Z) {
    if (!(d > 0.0 && d < 1.0) || !(Z > 0.0)) throw DomainError("c(d, Z) needs 0 < d < 1 and Z > 0");
    using LD = long double;
    const LD ld = d, lz = Z, B = profiles::beta_25_35();
    const LD lp = std::log1p(ld), lm = std::log1p(-ld);
    LD first = 2.0L * std::expm1(8.0L * lp) * std::exp(35.0L / 6.0L * (lp - lm)) / 3.0L;
    LD second = 32.0L * std::exp(35.0L / 6.0L * lp) / (35.0L * B * std::pow(lz, 35.0L / 12.0L));
    return static_cast<double>(first + second);
}

Hw1Result hw1_integral(const profiles::BumpProfile& phi, const profiles::BumpProfile& rho, double K,
                       const Distortion& dist, double tol) {
    if (!(K >= 0.0 && K <= 1.0)) throw PreconditionError("hw1_integral requires K in [0, 1]");
    const double d = phi.params().at("d").get<double>();
    const double Z = rho.params().at("Z").get<double>();
    if (dist.d > d + 1e-15) throw PreconditionError("distortion wider than the class 1/(1+d) <= lambda <= 1+d");
    Hw1Result out;
    out.K = K;
    out.target = 2.0 * std::pow(K, kTwelfth) / 3.0;
    out.bound = c_dz(d, Z) * std::pow(K, kTwelfth);
    out.verdict.lemma = "HW-1";
    out.verdict.params = {{"d", d}, {"Z", Z}, {"K", K}, {"distortion", dist.describe}};
    out.verdict.tolerance = out.bound;
    if (K > 0.0) {
        AxisymProfile W = distorted(initial_profile(phi, rho), dist);
        // integrate in z' = K z: K^3 iint r^2 z' W(r, z') / (z'^2 + K^2 r^2)^{5/2}
        auto rb = radial_breaks(W, 8);
        std::vector<double> extra{K * W.r_lo, K * W.r_hi, Z / (1.0 + d), Z * (1.0 + d)};
        auto zb = graded_breaks(W.z_max, 1e-4 * K * W.r_lo, extra);
        const double K3 = K * K * K, K2 = K * K;
        auto kern = [&W, K3, K2](double r, double z) {
            double q = z * z + K2 * r * r;
            return K3 * r * r * z * W.w(r, z) / (q * q * std::sqrt(q));
        };
        auto v = tensor_quad(kern, rb, zb, tol * std::pow(K, kTwelfth));
        out.value = v.value;
        out.error = v.error;
    }
    double dev = std::abs(out.value - out.target);
    out.verdict.margin = out.bound - dev - out.error;
    out.verdict.pass = out.verdict.margin >= 0.0;
    out.verdict.note = "value " + format_double(out.value) + ", deviation " + format_double(dev);
    return out;
}

// ---- the 5/4 cascade -------------------------------------------------------------------------

WindowA a_axisym(double d, double Z, double A) {
    WindowA w;
    w.c = c_dz(d, Z);
    if (!(3.0 * w.c < 2.0)) throw NumericalError("a(d, Z, A): 3c(d, Z) >= 2, the coefficient band reaches 0");
    w.b = (2.0 + 3.0 * w.c) / (2.0 - 3.0 * w.c);
    w.a_rescaled = cascade::fixed_point_a(A, w.b);
    w.a = w.a_rescaled * 8.0 / (5.0 * (2.0 - 3.0 * w.c));
    w.bound = 15.0 * w.c < 2.0 ? 4.0 * (2.0 - 3.0 * w.c) * (A - 1.0) / (2.0 - 15.0 * w.c)
                               : std::numeric_limits<double>::infinity();
    return w;
}

Cascade54Result cascade_5_4(const AxisymConfig& cfg, std::size_t n, const cascade::CoefficientSpec& coeffs,
                            std::size_t samples) {
    cfg.validate();
    if (n == 0) throw PreconditionError("cascade_5_4 needs at least one level");
    if (samples < 3) throw PreconditionError("cascade_5_4 needs at least 3 samples");
    Cascade54Result out;
    out.window = a_axisym(cfg.d, cfg.Z, cfg.A);
    const double c = out.window.c;
    const double a = cfg.a_cascade > 0.0 ? cfg.a_cascade : out.window.a;

    cascade::Coefficients probe(coeffs, -a);
    auto [lo, hi] = probe.range();
    if (lo < 1.0 - 1.5 * c - 1e-15 || hi > 1.0 + 1.5 * c + 1e-15)
        throw PreconditionError("cascade_5_4: coefficients leave the band |a - 1| <= 3c(d, Z)/2");

    cascade::CascadeParams p;
    p.A = cfg.A;
    p.n_levels = n;
    p.coeff_lo = lo;
    p.coeff_hi = hi;
    p.t_min = -a;
    p.coeffs = coeffs;
    p.rtol = 1e-12;
    p.drive_power = 1.25;
    std::vector<double> times(samples);
    for (std::size_t i = 0; i < samples; ++i)
        times[i] = -a + a * static_cast<double>(i) / static_cast<double>(samples - 1);
    times.back() = 0.0;
    out.traj = cascade::integrate_cascade(p, times);

    const double lnA = std::log(cfg.A);
    auto lnX = [&](std::size_t k, double t) {
        return 1.25 * std::log(out.traj.dense(k, t)) - 0.25 * static_cast<double>(k) * lnA;
    };

    // (i) d/dt ln X_k = (5/4) sum_j a_j X_j, by centred differences away from coefficient jumps
    const double h = 1e-4 * a;
    double worst = 0.0;
    for (std::size_t i = 1; i + 1 < samples; ++i) {
        double t = times[i];
        bool near_jump = std::any_of(out.traj.breakpoints.begin(), out.traj.breakpoints.end(),
                                     [&](double b) { return std::abs(b - t) < 3.0 * h; });
        if (near_jump) continue;
        for (std::size_t k = 1; k < n; ++k) {
            double lhs = (lnX(k, t + h) - lnX(k, t - h)) / (2.0 * h);
            double rhs = 0.0;
            for (std::size_t j = 0; j < k; ++j) rhs += probe(k, j, t) * std::exp(lnX(j, t));
            rhs *= 1.25;
            worst = std::max(worst, std::abs(lhs - rhs) / std::max(1.0, std::abs(rhs)));
        }
    }
    out.max_transform_residual = worst;
    Verdict v1;
    v1.lemma = "xk+1-ge/transform";
    v1.tolerance = 1e-6;
    v1.margin = v1.tolerance - worst;
    v1.pass = worst <= v1.tolerance;
    v1.params = {{"n", n}, {"A", cfg.A}, {"c", c}, {"coeffs", out.traj.coeffs_used}};
    v1.seed = coeffs.seed;
    v1.note = "max relative residual of dX/X = (5/4) sum a_j X_j: " + format_double(worst);
    out.verdicts.push_back(v1);

    // (ii) x_{k+1} >= A e^{-2a} x_k on [-a, 0]
    double margin = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < samples; ++i)
        for (std::size_t k = 0; k + 1 < n; ++k)
            margin = std::min(margin, out.traj.y[i][k + 1] - out.traj.y[i][k] - lnA + 2.0 * a);
    out.min_ratio_margin = margin;
    Verdict v2;
    v2.lemma = "xk+1-ge";
    v2.tolerance = 1e-12;
    v2.margin = n > 1 ? margin : 0.0;
    v2.pass = n == 1 || margin >= -v2.tolerance;
    v2.params = {{"n", n}, {"A", cfg.A}, {"a", a}, {"c", c}};
    v2.seed = coeffs.seed;
    v2.note = "min ln(x_{k+1}/(A e^{-2a} x_k)) = " + format_double(v2.margin);
    out.verdicts.push_back(v2);

    Verdict v3;
    v3.lemma = "xk+1-ge/a-bound";
    v3.tolerance = 0.0;
    v3.margin = out.window.bound - out.window.a;
    v3.pass = out.window.a > 0.0 && out.window.a <= out.window.bound;
    v3.params = {{"A", cfg.A}, {"c", c}, {"a", out.window.a}, {"a_rescaled", out.window.a_rescaled},
                 {"bound", out.window.bound}};
    v3.note = "a = " + format_double(out.window.a) + " vs 4(2-3c)(A-1)/(2-15c) = " + format_double(out.window.bound);
    out.verdicts.push_back(v3);
    return out;
}

// ---- positive-time recursion lemmas ----------------------------------------------------------

RecursionResult recursion_int_ge2(double alpha, double c, double I0, std::size_t n) {
    if (!(alpha > 0.0 && alpha < 0.5)) throw DomainError("int-ge2 requires alpha in (0, 1/2)");
    if (!(c > 0.0)) throw DomainError("int-ge2 requires c > 0 (A' > 1)");
    if (!(I0 >= 0.0)) throw DomainError("int-ge2 requires I0 >= 0");
    const double lnAp = (3.0 - 2.0 * alpha) * c / 4.0;
    const double Ap = std::exp(lnAp);
    RecursionResult out;
    out.I.push_back(I0);
    for (std::size_t k = 0; k < n; ++k) out.I.push_back(-Ap * std::expm1(-out.I.back()));
    const double threshold = c * std::exp(2.0 / (1.0 - 2.0 * alpha) - static_cast<double>(n) * lnAp);
    const bool hyp = I0 >= threshold;
    Verdict& v = out.verdict;
    v.lemma = "int-ge2";
    v.tolerance = 1e-12 * c;
    v.params = {{"alpha", alpha}, {"c", c}, {"A_prime", Ap}, {"I0", I0}, {"n", n}, {"threshold", threshold}};
    v.margin = out.I.back() - c;
    v.pass = !hyp || v.margin >= -v.tolerance;
    v.note = hyp ? "I_n - c = " + format_double(v.margin) : "hypothesis I0 >= c A'^{-n} e^{2/(1-2a)} not met";
    return out;
}

double c_alpha_beta(double alpha, double beta) {
    double s = 3.0 - 2.0 * alpha;
    return 4.0 * (s - 8.0 * std::exp(2.0 / (1.0 - 2.0 * alpha)) * beta) / (s * s);
}

double beta_max_t_le(double alpha) {
    return (3.0 - 2.0 * alpha) * std::exp(-(1.0 + 2.0 * alpha) / (1.0 - 2.0 * alpha)) / 16.0;
}

double beta_max_int_le2(double alpha) {
    return (3.0 - 2.0 * alpha) * (1.0 - 2.0 * alpha) * std::exp(-2.0 / (1.0 - 2.0 * alpha)) / (32.0 - 32.0 * alpha);
}

TleResult solve_t_le(double alpha, double beta, double A, std::size_t n) {
    if (!(alpha > 0.0 && alpha < 0.5)) throw DomainError("t-le requires alpha in (0, 1/2)");
    if (!(A > 1.0)) throw DomainError("t-le requires A > 1");
    if (!(beta >= 0.0)) throw DomainError("t-le requires beta >= 0");
    const double E = 2.0 / (1.0 - 2.0 * alpha);
    const double s = 3.0 - 2.0 * alpha;
    const double lnA = std::log(A);
    const double nn = static_cast<double>(n);
    auto g = [&](double t) {
        double lnAp = lnA - beta * t;
        return 4.0 * lnAp / s * std::exp(E - nn * lnAp) - t;
    };
    TleResult out;
    const double K0 = 4.0 * std::exp(E - nn * lnA) * lnA / s;
    out.lower = 16.0 * std::exp(E - nn * lnA) * lnA / (12.0 + 3.0 * kE);
    out.upper = 2.0 * K0;
    Verdict& v = out.verdict;
    v.lemma = "t-le";
    v.params = {{"alpha", alpha}, {"beta", beta}, {"A", A}, {"n", n}};
    v.tolerance = 1e-13;
    const double disc = 1.0 - 4.0 * nn * beta * K0;
    if (beta > beta_max_t_le(alpha) * (1.0 + 1e-15) || disc < 0.0) {
        v.pass = false;
        v.margin = -1.0;
        v.note = "lemma hypothesis violated: beta above (3-2a)e^{-(1+2a)/(1-2a)}/16 or no real t_+";
        out.t = std::numeric_limits<double>::quiet_NaN();
        return out;
    }
    out.t_plus = 2.0 * K0 / (1.0 + std::sqrt(disc));
    // at beta = 0 the root sits exactly at t_+, so allow rounding room
    double lo = 0.0, hi = out.t_plus * (1.0 + 1e-12);
    if (!(g(hi) <= 0.0)) {
        v.pass = false;
        v.margin = -1.0;
        v.note = "no sign change on [0, t_+]";
        out.t = std::numeric_limits<double>::quiet_NaN();
        return out;
    }
    for (int it = 0; it < 400 && hi - lo > 1e-16 * hi; ++it) {
        double mid = 0.5 * (lo + hi);
        (g(mid) > 0.0 ? lo : hi) = mid;
    }
    out.t = 0.5 * (lo + hi);
    v.margin = std::min(out.t - out.lower, out.upper - out.t) / out.t;
    v.pass = out.t > out.lower && out.t <= out.upper * (1.0 + v.tolerance);
    v.params["t"] = out.t;
    v.params["lower"] = out.lower;
    v.params["upper"] = out.upper;
    v.note = "t = " + format_double(out.t) + " in (" + format_double(out.lower) + ", " + format_double(out.upper) + "]";
    return out;
}

quad::Estimate envelope_integral(double alpha, double beta, double A, double lnA, std::size_t n, double U) {
    if (!(U > 0.0)) return {0.0, 0.0};
    const double nn = static_cast<double>(n);
    auto f = [=](double t) {
        double I = t, S = 0.0;
        double Ab = A * std::exp(-beta * t);
        for (std::size_t k = 0; k < n; ++k) {
            S += I;
            I = -Ab * std::expm1(-I);
        }
        return std::exp(nn * lnA - (1.0 - alpha) * S);
    };
    // sum I >= I_0 = t, so past this point the integrand is below e^{-750}
    const double cut = n == 0 ? U : std::min(U, (nn * lnA + 750.0) / (1.0 - alpha));
    std::vector<double> br{0.0};
    for (double x = cut; x > 1e-8 * cut; x *= 0.25) br.push_back(x);
    std::sort(br.begin(), br.end());
    return quad::refine_gl(f, br, 1e-13 * std::max(1.0, std::exp(nn * lnA)) * std::max(1.0, cut));
}

IntLe2Result verify_int_le2(double alpha, double beta, double A, std::size_t n) {
    if (!(alpha > 0.0 && alpha < 0.5)) throw DomainError("int-le2 requires alpha in (0, 1/2)");
    if (!(A > 1.0)) throw DomainError("int-le2 requires A > 1");
    if (!(beta >= 0.0 && beta < beta_max_int_le2(alpha)))
        throw DomainError("int-le2 requires 0 <= beta < (3-2a)(1-2a)e^{-2/(1-2a)}/(32-32a)");
    const double E = 2.0 / (1.0 - 2.0 * alpha);
    const double lnA = std::log(A);
    IntLe2Result out;
    out.upper_limit = 16.0 * std::exp(E) * lnA / (12.0 + 3.0 * kE);
    auto est = envelope_integral(alpha, beta, A, lnA, n, out.upper_limit);
    out.integral = est.value;
    out.error = est.error;
    const double cab = c_alpha_beta(alpha, beta);
    const double q = -std::expm1((1.0 - (1.0 - alpha) * cab) * lnA);
    out.bound = A * (1.0 + (A - 1.0) / q) * 8.0 * std::exp(E) * lnA / (3.0 - 2.0 * alpha);
    Verdict& v = out.verdict;
    v.lemma = "int-le2";
    v.params = {{"alpha", alpha}, {"beta", beta}, {"A", A}, {"n", n}, {"c_alpha_beta", cab}};
    v.tolerance = out.error;
    v.margin = out.bound - out.integral;
    v.pass = cab > 1.0 / (1.0 - alpha) && out.integral + out.error < out.bound;
    v.note = "integral " + format_double(out.integral) + " < bound " + format_double(out.bound);
    return out;
}

// ---- closing the bootstrap -------------------------------------------------------------------

namespace {

struct DZConstants {
    double c = 0.0;
    double holder = 0.0;
    double max_f = 0.0;
    double C_dz = 0.0;
};

DZConstants dz_constants(double d, double Z) {
    DZConstants k;
    k.c = c_dz(d, Z);
    auto phi = profiles::build_phi3d(d);
    auto rho = profiles::build_rho_z(Z);
    // |f g|_{C^s} <= max|f| |g|_{C^s} + max|g| |f|_{C^s} for f = phi/r, g = rho |z|^{1/12} sgn z
    auto fval = [phi](double r) { return phi(r) / r; };
    auto gval = [rho](double z) { return rho(z) * signed_twelfth_root(z); };
    profiles::BumpProfile f("phi_over_r", json::object(), phi.support(), fval,
                            [fval](double r) { return profiles::Derivs{fval(r), 0, 0, 0, 0}; });
    profiles::BumpProfile g("rho_z112", json::object(), rho.support(), gval,
                            [gval](double z) { return profiles::Derivs{gval(z), 0, 0, 0, 0}; });
    double hf = profiles::holder_seminorm(f, kTwelfth, 600).value;
    double hg = profiles::holder_seminorm(g, kTwelfth, 600).value;
    double mf = 0.0, mg = 0.0;
    for (int i = 0; i <= 4000; ++i) {
        double r = phi.support_min() + (phi.support_max() - phi.support_min()) * i / 4000.0;
        mf = std::max(mf, std::abs(fval(r)));
        double z = 2.0 * Z * i / 4000.0;
        mg = std::max(mg, std::abs(gval(z)));
    }
    k.holder = mf * hg + mg * hf;
    k.max_f = mf;
    k.C_dz = std::pow(2.0, kTwelfth) * (1.0 + d) * (1.0 + d) *
             (k.holder + std::pow(2.0 * Z, kTwelfth) * std::pow(1.0 + d, 11.0 / 6.0) * mf);
    return k;
}

ClosureReport closure_with(const DZConstants& k, double d, double Z, double A, double sio, std::size_t levels) {
    ClosureReport r;
    r.d = d;
    r.Z = Z;
    r.A = A;
    r.c = k.c;
    r.sio_constant = sio;
    r.holder_seminorm = k.holder;
    r.max_phi_over_r = k.max_f;
    r.C_dz = k.C_dz;
    const long double e30 = std::exp(30.0L);
    r.beta = 6.0 * k.c / (2.0 + 3.0 * k.c);
    r.beta_max = static_cast<double>(31.0L / (960.0L * e30));
    r.beta_ok = r.beta < r.beta_max;
    if (!r.beta_ok)
        r.failures.push_back("beta = " + format_double(r.beta) + " is not below 31e^{-30}/960 = " +
                             format_double(r.beta_max));
    r.c_alpha_beta = c_alpha_beta(7.0 / 15.0, r.beta);
    try {
        r.window = a_axisym(d, Z, A);
        r.window_exists = true;
    } catch (const NumericalError& e) {
        r.failures.push_back(std::string("no window a(d, Z, A): ") + e.what());
    }
    const double q = 1.0 - 3.0 * d - d * d - d * d * d;
    if (!r.window_exists || !(q > 0.0)) {
        r.lhs = r.margin = std::numeric_limits<double>::quiet_NaN();
        if (!(q > 0.0)) r.failures.push_back("1 - 3d - d^2 - d^3 <= 0");
        return r;
    }
    const double a = r.window->a;
    const double d12 = std::pow(d, kTwelfth);
    const double lnA = std::log(A);
    double sm = d12 * std::exp(2.0 * a);
    double sp = std::pow(d, 23.0 / 12.0) * A * std::exp(a / 3.0);
    double s0 = d * d * A;
    if (sm >= 1.0 || sp >= 1.0 || s0 >= 1.0) {
        r.failures.push_back("a geometric ratio in C_-/C_+/C_+^0 reaches 1");
        r.lhs = r.margin = std::numeric_limits<double>::quiet_NaN();
        return r;
    }
    r.C_minus = 4.0 * k.C_dz * sm / (1.0 - sm) * std::log(std::pow(1.0 + d, 3.0) / q);
    r.C_plus = 2.0 * k.C_dz * std::pow(1.0 + d, 6.0) * sp / (q * q * (1.0 - sp));
    r.C_plus0 = 4.0 * (3.0 * d + d * d * d) * std::pow(2.0 * Z, kTwelfth) * s0 * k.max_f / (3.0 * q * q * (1.0 - s0));
    r.C_dZA = (3.0 * sio * k.C_dz + r.C_minus + r.C_plus) * (std::pow(1.0 + d, 1.0 / 6.0) + std::pow(2.0 * Z, kTwelfth)) +
              1.0 + 1.5 * k.c + r.C_plus0;

    const long double scale = 128.0L * e30 * static_cast<long double>(lnA) / ((60.0L + 15.0L * kE) * (2.0L + 3.0L * k.c));
    r.T = std::min(a, static_cast<double>(scale));
    // the envelope runs in s = 5(2+3c)t/8
    const double lam = 5.0 * (2.0 + 3.0 * k.c) / 8.0;
    r.integral = 0.0;
    for (std::size_t lvl = 0; lvl <= levels; ++lvl) {
        double v = envelope_integral(7.0 / 15.0, r.beta, A, lnA, lvl, lam * r.T).value / lam;
        if (v > r.integral) {
            r.integral = v;
            r.worst_level = lvl;
        }
    }
    if (r.c_alpha_beta > 15.0 / 8.0) {
        long double p = 1.0L - 8.0L * r.c_alpha_beta / 15.0L;
        long double ratio = static_cast<long double>(A - 1.0) / -std::expm1(p * static_cast<long double>(lnA));
        r.integral_bound = static_cast<double>((1.0L + ratio) * 192.0L * A * e30 * lnA / (31.0L * (2.0L + 3.0L * k.c)));
    } else {
        r.integral_bound = std::numeric_limits<double>::infinity();
    }
    r.lhs = r.C_dZA * r.integral;
    r.margin = 1.0 + d - r.lhs;
    r.inequality_holds = r.margin > 0.0;
    if (!r.inequality_holds)
        r.failures.push_back("C(d, Z, A) * integral = " + format_double(r.lhs) + " >= 1 + d");
    return r;
}

json nan_safe(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

json ClosureReport::to_json() const {
    json j = {{"d", d},
              {"Z", Z},
              {"A", A},
              {"c", c},
              {"beta", beta},
              {"beta_max", beta_max},
              {"c_alpha_beta", c_alpha_beta},
              {"T", T},
              {"holder_seminorm_bound", holder_seminorm},
              {"max_phi_over_r", max_phi_over_r},
              {"C_dZ", C_dz},
              {"C_minus", C_minus},
              {"C_plus", C_plus},
              {"C_plus0", C_plus0},
              {"C_dZA", C_dZA},
              {"sio_constant", sio_constant},
              {"integral", integral},
              {"worst_level", worst_level},
              {"integral_bound", nan_safe(integral_bound)},
              {"lhs", nan_safe(lhs)},
              {"margin", nan_safe(margin)},
              {"window_exists", window_exists},
              {"beta_ok", beta_ok},
              {"inequality_holds", inequality_holds},
              {"closes", closes()},
              {"failures", failures}};
    if (window)
        j["window"] = {{"a", window->a}, {"a_rescaled", window->a_rescaled}, {"b", window->b}, {"bound", nan_safe(window->bound)}};
    return j;
}

ClosureReport closure_at(double d, double Z, double A, double sio_constant, std::size_t levels) {
    if (!(A > 1.0)) throw DomainError("closure requires A > 1");
    return closure_with(dz_constants(d, Z), d, Z, A, sio_constant, levels);
}

json ClosureSearch::to_json() const {
    json trail_j = json::array();
    for (const auto& r : trail) trail_j.push_back({{"A", r.A}, {"margin", nan_safe(r.margin)}, {"closes", r.closes()}});
    json v;
    blowup::to_json(v, verdict);
    return {{"at_start", at_start.to_json()},
            {"admissible", admissible ? admissible->to_json() : json(nullptr)},
            {"inequality_at", inequality_at ? inequality_at->to_json() : json(nullptr)},
            {"trail", trail_j},
            {"d_required", d_required},
            {"verdict", v}};
}

ClosureSearch closure_check(const AxisymConfig& cfg) {
    cfg.validate();
    if (cfg.A > 1.5) throw PreconditionError("closure_check searches A in (1, 1.5]");
    const auto k = dz_constants(cfg.d, cfg.Z);
    ClosureSearch s;
    s.at_start = closure_with(k, cfg.d, cfg.Z, cfg.A, cfg.sio_constant, 40);
    s.trail.push_back(s.at_start);

    // smallest d for which c(d, inf) still allows beta < 31e^{-30}/960
    {
        using LD = long double;
        const LD bmax = 31.0L / (960.0L * std::exp(30.0L));
        const LD cstar = 2.0L * bmax / (6.0L - 3.0L * bmax);
        auto c_inf = [](LD d) {
            LD lp = std::log1p(d), lm = std::log1p(-d);
            return 2.0L * std::expm1(8.0L * lp) * std::exp(35.0L / 6.0L * (lp - lm)) / 3.0L;
        };
        LD lo = std::log(1e-30L), hi = std::log(0.25L);
        for (int it = 0; it < 200; ++it) {
            LD mid = 0.5L * (lo + hi);
            (c_inf(std::exp(mid)) < cstar ? lo : hi) = mid;
        }
        s.d_required = static_cast<double>(std::exp(lo));
    }

    auto at = [&](double delta) {
        auto r = closure_with(k, cfg.d, cfg.Z, 1.0 + delta, cfg.sio_constant, 40);
        s.trail.push_back(r);
        return r;
    };
    // the inequality is searched on its own; the beta hypothesis does not depend on A
    std::optional<ClosureReport> holds;
    if (s.at_start.inequality_holds) {
        holds = s.at_start;
    } else {
        // walk down by decades, then bisect in log(A - 1) between the last failure and the first success
        double fail = cfg.A - 1.0;
        std::optional<double> ok;
        for (double delta = fail / 10.0; delta >= 1e-12; delta /= 10.0) {
            auto r = at(delta);
            if (r.inequality_holds) {
                ok = delta;
                holds = r;
                break;
            }
            fail = delta;
        }
        if (ok) {
            double lo = std::log(*ok), hi = std::log(fail);
            for (int it = 0; it < 20; ++it) {
                double mid = 0.5 * (lo + hi);
                auto r = at(std::exp(mid));
                if (r.inequality_holds) {
                    lo = mid;
                    holds = r;
                } else {
                    hi = mid;
                }
            }
        }
    }
    s.inequality_at = holds;
    if (holds && holds->closes()) s.admissible = holds;
    Verdict& v = s.verdict;
    v.lemma = "closure";
    v.params = cfg.to_json();
    v.pass = s.admissible.has_value();
    if (s.admissible) {
        v.margin = s.admissible->margin;
        v.note = "admissible A = " + format_double(s.admissible->A);
    } else {
        const auto& last = holds ? *holds : s.trail.back();
        v.margin = std::isfinite(last.margin) ? last.margin : -1.0;
        std::string why;
        for (const auto& f : last.failures) why += (why.empty() ? "" : "; ") + f;
        v.note = "no admissible A in [1 + 1e-12, " + format_double(cfg.A) + "]: " + why;
        if (holds) v.note += " (the inequality alone holds for A <= " + format_double(holds->A) + ")";
    }
    return s;
}

json MarginTrend::to_json() const {
    auto pts = [](const std::vector<MarginPoint>& v) {
        json a = json::array();
        for (const auto& p : v)
            a.push_back({{"d", p.d},
                         {"Z", p.Z},
                         {"A", p.A},
                         {"c", p.c},
                         {"window_margin", p.window_margin},
                         {"log_beta_margin", p.log_beta_margin},
                         {"closing_margin", p.closing_margin ? json(*p.closing_margin) : json(nullptr)}});
        return a;
    };
    json v;
    blowup::to_json(v, verdict);
    return {{"d_sweep", pts(d_sweep)},   {"Z_sweep", pts(Z_sweep)},       {"A_sweep", pts(A_sweep)},
            {"d_monotone", d_monotone}, {"Z_monotone", Z_monotone},     {"A_monotone", A_monotone},
            {"verdict", v}};
}

MarginTrend closure_margin_trend(const std::vector<double>& ds, double Z_fixed, const std::vector<double>& Zs,
                                 double d_fixed, const std::vector<double>& As, double d_for_A, double Z_for_A,
                                 double sio_constant) {
    auto point = [&](const DZConstants& k, double d, double Z, double A) {
        MarginPoint p;
        p.d = d;
        p.Z = Z;
        p.A = A;
        p.c = k.c;
        p.window_margin = 2.0 / 15.0 - k.c;
        auto r = closure_with(k, d, Z, A, sio_constant, 40);
        p.log_beta_margin = std::log(r.beta_max / r.beta);
        if (std::isfinite(r.margin)) p.closing_margin = r.margin;
        return p;
    };
    const double A0 = As.empty() ? 1.01 : As.front();
    MarginTrend t;
    for (double d : ds) t.d_sweep.push_back(point(dz_constants(d, Z_fixed), d, Z_fixed, A0));
    for (double Z : Zs) t.Z_sweep.push_back(point(dz_constants(d_fixed, Z), d_fixed, Z, A0));
    const auto kA = dz_constants(d_for_A, Z_for_A);
    for (double A : As) t.A_sweep.push_back(point(kA, d_for_A, Z_for_A, A));

    auto improving = [](const std::vector<MarginPoint>& v, bool use_closing) {
        if (v.size() < 2) return false;
        for (std::size_t i = 1; i < v.size(); ++i) {
            if (use_closing) {
                if (!v[i].closing_margin || !v[i - 1].closing_margin) return false;
                if (!(*v[i].closing_margin > *v[i - 1].closing_margin)) return false;
            } else {
                if (!(v[i].c < v[i - 1].c && v[i].log_beta_margin > v[i - 1].log_beta_margin &&
                      v[i].window_margin > v[i - 1].window_margin))
                    return false;
            }
        }
        return true;
    };
    t.d_monotone = improving(t.d_sweep, false);
    t.Z_monotone = improving(t.Z_sweep, false);
    t.A_monotone = improving(t.A_sweep, true);
    t.verdict.lemma = "closure/margin-trend";
    t.verdict.pass = t.d_monotone && t.Z_monotone && t.A_monotone;
    t.verdict.margin = t.A_sweep.empty() || !t.A_sweep.back().closing_margin ? -1.0 : *t.A_sweep.back().closing_margin;
    t.verdict.note = std::string("d: ") + (t.d_monotone ? "improving" : "not monotone") +
                     ", Z: " + (t.Z_monotone ? "improving" : "not monotone") +
                     ", A: " + (t.A_monotone ? "improving" : "not monotone");
    return t;
}

std::string kernel_csv(const std::vector<std::tuple<std::string, double, KernelValue>>& rows) {
    std::ostringstream os;
    os << "name,input,value,error\n";
    for (const auto& [name, input, kv] : rows)
        os << name << ',' << format_double(input) << ',' << format_double(kv.value) << ',' << format_double(kv.error)
           << '\n';
    return os.str();
}

}  // namespace blowup::axisym
