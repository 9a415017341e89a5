#include "blowup/profiles.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "blowup/jet.hpp"
#include "blowup/quadrature.hpp"

namespace blowup::profiles {

using J4 = Jet<4>;

namespace {

Derivs to_derivs(const J4& j) {
    Derivs d{};
    for (int k = 0; k <= 4; ++k) d[k] = j.derivative(k);
    return d;
}

// exp(-1/q) with q a jet; below q = 1/700 the value and all derivatives underflow to zero.
J4 exp_inverse(const J4& q) {
    if (q.c[0] <= 1.0 / 700.0) return J4(0.0);
    return exp(J4(-1.0) / q);
}

J4 mollifier_jet(const J4& u) {
    if (std::abs(u.c[0]) >= 1.0) return J4(0.0);
    return exp_inverse(J4(1.0) - u * u);
}

// smooth step: 0 for u <= 0, 1 for u >= 1
J4 smooth_step(const J4& u) {
    if (u.c[0] <= 0.0) return J4(0.0);
    if (u.c[0] >= 1.0) return J4(1.0);
    J4 f0 = exp_inverse(u);
    J4 f1 = exp_inverse(J4(1.0) - u);
    return f0 / (f0 + f1);
}

}  // namespace

BumpProfile::BumpProfile(std::string shape, json params, std::vector<Interval> support,
                         std::function<double(double)> value, std::function<Derivs(double)> derivs)
    : shape_(std::move(shape)),
      params_(std::move(params)),
      support_(std::move(support)),
      value_(std::move(value)),
      derivs_(std::move(derivs)) {
    std::sort(support_.begin(), support_.end(), [](const Interval& a, const Interval& b) { return a.lo < b.lo; });
}

double BumpProfile::operator()(double x) const {
    for (const auto& s : support_)
        if (s.contains(x)) return value_(x);
    return 0.0;
}

Derivs BumpProfile::derivatives(double x) const {
    for (const auto& s : support_)
        if (s.contains(x)) return derivs_(x);
    return Derivs{};
}

double BumpProfile::derivative(double x, int k) const {
    if (k < 0 || k > 4) throw PreconditionError("derivative order must be in [0, 4]");
    if (k == 0) return (*this)(x);
    return derivatives(x)[k];
}

double BumpProfile::support_min() const { return support_.empty() ? 0.0 : support_.front().lo; }

double BumpProfile::support_max() const {
    double m = support_.empty() ? 0.0 : support_.front().hi;
    for (const auto& s : support_) m = std::max(m, s.hi);
    return m;
}

std::vector<double> BumpProfile::breakpoints() const {
    std::vector<double> b;
    for (const auto& s : support_) {
        b.push_back(s.lo);
        b.push_back(s.hi);
    }
    std::sort(b.begin(), b.end());
    b.erase(std::unique(b.begin(), b.end()), b.end());
    return b;
}

Field1D BumpProfile::sample(double lo, double hi, std::size_t n) const {
    return Field1D::sample(lo, hi, n, [this](double x) { return (*this)(x); });
}

json BumpProfile::descriptor() const {
    json sup = json::array();
    for (const auto& s : support_) sup.push_back({s.lo, s.hi});
    return {{"shape", shape_}, {"params", params_}, {"support", sup}, {"certificates", certificates}};
}

std::array<double, 4> BumpProfile::derivative_consistency(const std::vector<double>& points, double h) const {
    std::array<double, 4> order{};
    for (int k = 1; k <= 4; ++k) {
        auto err = [&](double step) {
            double e = 0.0;
            for (double x : points) {
                double fd = (derivative(x + step, k - 1) - derivative(x - step, k - 1)) / (2 * step);
                e = std::max(e, std::abs(fd - derivative(x, k)));
            }
            return e;
        };
        double e1 = err(h), e2 = err(h / 2);
        order[k - 1] = (e1 > 0.0 && e2 > 0.0) ? std::log2(e1 / e2) : 2.0;
    }
    return order;
}

double mollifier(double u) {
    if (std::abs(u) >= 1.0) return 0.0;
    double q = 1.0 - u * u;
    return q <= 1.0 / 700.0 ? 0.0 : std::exp(-1.0 / q);
}

Derivs mollifier_derivs(double u) { return to_derivs(mollifier_jet(J4::variable(u))); }

BumpProfile build_bump(double r) {
    if (!(r > 0.0 && r <= 0.25)) throw DomainError("build_bump requires 0 < r <= 1/4");
    auto shape = [r](double y) { return mollifier((y - 1.0) / r); };
    auto weighted = [&](double y) { return shape(y) / y; };
    double integral = quad::adaptive(weighted, 1.0 - r, 1.0 + r, 1e-13).value;
    const double scale = (kPi / 2.0) / integral;

    auto value = [r, scale](double y) { return scale * mollifier((y - 1.0) / r); };
    auto derivs = [r, scale](double y) {
        Derivs d = mollifier_derivs((y - 1.0) / r);
        double f = scale;
        for (int k = 0; k <= 4; ++k, f /= r) d[k] *= f;
        return d;
    };
    BumpProfile rho("rho", {{"r", r}, {"scale", scale}}, {{1.0 - r, 1.0 + r}}, value, derivs);
    // recheck the normalization with an independent rule
    std::array<double, 2> br{1.0 - r, 1.0 + r};
    double check = quad::refine_gl([&](double y) { return value(y) / y; }, br, 1e-13).value;
    rho.certificates["int_rho_over_y_minus_half_pi"] = check - kPi / 2.0;
    rho.certificates["mass"] = quad::refine_gl(value, br, 1e-13).value;
    return rho;
}

BumpProfile build_phi(const BumpProfile& rho) {
    auto value = [rho](double x) { return rho(-x) - rho(x); };
    auto derivs = [rho](double x) {
        Derivs a = rho.derivatives(-x), b = rho.derivatives(x);
        Derivs d{};
        double sign = 1.0;
        for (int k = 0; k <= 4; ++k, sign = -sign) d[k] = sign * a[k] - b[k];
        return d;
    };
    std::vector<Interval> sup;
    for (const auto& s : rho.support()) {
        sup.push_back({-s.hi, -s.lo});
        sup.push_back(s);
    }
    BumpProfile phi("phi", {{"rho", rho.descriptor()}}, sup, value, derivs);
    // H phi(0) = -(1/pi) int phi(y)/y dy = (2/pi) int rho(y)/y dy
    double lo = rho.support_min(), hi = rho.support_max();
    double h0 = (2.0 / kPi) * quad::adaptive([&](double y) { return rho(y) / y; }, lo, hi, 1e-13).value;
    phi.certificates["H_phi_0_minus_1"] = h0 - 1.0;
    return phi;
}

BumpProfile reference_phi(double r) { return build_phi(build_bump(r)); }

BumpProfile odd_bump(double center, double halfwidth, double amplitude) {
    if (!(halfwidth > 0.0 && center > halfwidth)) throw DomainError("odd_bump requires center > halfwidth > 0");
    auto value = [=](double x) {
        return amplitude * (mollifier((x - center) / halfwidth) - mollifier((x + center) / halfwidth));
    };
    auto derivs = [=](double x) {
        Derivs a = mollifier_derivs((x - center) / halfwidth), b = mollifier_derivs((x + center) / halfwidth);
        Derivs d{};
        double f = amplitude;
        for (int k = 0; k <= 4; ++k, f /= halfwidth) d[k] = f * (a[k] - b[k]);
        return d;
    };
    return BumpProfile("odd_bump", {{"center", center}, {"halfwidth", halfwidth}, {"amplitude", amplitude}},
                       {{-center - halfwidth, -center + halfwidth}, {center - halfwidth, center + halfwidth}},
                       value, derivs);
}

BumpProfile add_profiles(const BumpProfile& a, const BumpProfile& b, double scale) {
    std::vector<Interval> all = a.support();
    all.insert(all.end(), b.support().begin(), b.support().end());
    std::sort(all.begin(), all.end(), [](const Interval& p, const Interval& q) { return p.lo < q.lo; });
    std::vector<Interval> merged;
    for (const auto& s : all) {
        if (!merged.empty() && s.lo <= merged.back().hi)
            merged.back().hi = std::max(merged.back().hi, s.hi);
        else
            merged.push_back(s);
    }
    auto value = [a, b, scale](double x) { return a(x) + scale * b(x); };
    auto derivs = [a, b, scale](double x) {
        Derivs p = a.derivatives(x), q = b.derivatives(x);
        for (int k = 0; k <= 4; ++k) p[k] += scale * q[k];
        return p;
    };
    return BumpProfile("sum", {{"a", a.descriptor()}, {"b", b.descriptor()}, {"scale", scale}}, merged, value,
                       derivs);
}

double derivative_l2(const BumpProfile& f) {
    auto br = f.breakpoints();
    double s = quad::adaptive([&](double x) { double d = f.derivative(x, 1); return d * d; }, br, 1e-14).value;
    return std::sqrt(s);
}

double MultiBumpData::bump(std::size_t k, double x) const { return heights[k] * phi(x / scales[k]); }

double MultiBumpData::operator()(double x) const {
    double s = 0.0;
    for (std::size_t k = 0; k < heights.size(); ++k) {
        for (const auto& iv : supports[k])
            if (iv.contains(x)) {
                s += bump(k, x);
                break;
            }
    }
    return s;
}

Interval MultiBumpData::gap(std::size_t k) const {
    // phi is supported in |x| in [1-r, 1+r]
    return {(1.0 + r) * scales[k + 1], (1.0 - r) * scales[k]};
}

Field1D MultiBumpData::sample(double lo, double hi, std::size_t n_points, std::size_t min_points) const {
    Field1D f = Field1D::sample(lo, hi, n_points, [this](double x) { return (*this)(x); });
    double width = 2.0 * r * scales.back();
    if (width / f.dx() < static_cast<double>(min_points))
        throw ResolutionError("innermost bump gets " + std::to_string(static_cast<int>(width / f.dx())) +
                              " samples across its support, need " + std::to_string(min_points));
    return f;
}

MultiBumpData assemble_multibump(std::size_t n, double A, double r, const BumpProfile& phi) {
    if (!(r > 0.0 && r <= 0.25)) throw DomainError("assemble_multibump requires 0 < r <= 1/4");
    if (!(A > 1.0 && A < 2.0)) throw DomainError("assemble_multibump requires A in (1, 2)");
    MultiBumpData m;
    m.n = n;
    m.A = A;
    m.r = r;
    m.phi = phi;
    for (std::size_t k = 0; k <= n; ++k) {
        double h = std::pow(A, static_cast<double>(k)), s = std::pow(r, static_cast<double>(k));
        m.heights.push_back(h);
        m.scales.push_back(s);
        std::vector<Interval> sup;
        for (const auto& iv : phi.support()) sup.push_back({iv.lo * s, iv.hi * s});
        m.supports.push_back(std::move(sup));
    }
    return m;
}

MultiBumpData frozen_multibump(double A, double r, const BumpProfile& phi, const std::vector<double>& heights) {
    if (heights.empty()) throw PreconditionError("frozen_multibump needs at least one height");
    MultiBumpData m = assemble_multibump(heights.size() - 1, A, r, phi);
    for (std::size_t k = 0; k < heights.size(); ++k) {
        if (!(heights[k] > 0.0)) throw PreconditionError("heights must be positive");
        double s = m.scales[k] * heights[k] / m.heights[k];
        m.heights[k] = heights[k];
        m.scales[k] = s;
        for (std::size_t i = 0; i < phi.support().size(); ++i)
            m.supports[k][i] = {phi.support()[i].lo * s, phi.support()[i].hi * s};
    }
    return m;
}

HolderResult holder_seminorm(const Field1D& f, double s) {
    if (!(s > 0.0 && s <= 1.0)) throw PreconditionError("Holder exponent must lie in (0, 1]");
    HolderResult res;
    const std::size_t n = f.size();
    const double dx = f.dx();
    for (std::size_t base = 1; base < n; base *= 2) {
        for (std::size_t d : {base, 3 * base}) {
            if (d >= n) continue;
            double denom = std::pow(static_cast<double>(d) * dx, s);
            for (std::size_t i = 0; i + d < n; ++i) {
                double q = std::abs(f.values[i + d] - f.values[i]) / denom;
                ++res.pairs;
                if (q > res.value) {
                    res.value = q;
                    res.x = f.x(i);
                    res.y = f.x(i + d);
                }
            }
        }
    }
    return res;
}

namespace {

HolderResult holder_all_pairs(const std::vector<std::pair<double, double>>& pts, double s) {
    HolderResult res;
    for (std::size_t i = 0; i < pts.size(); ++i)
        for (std::size_t j = i + 1; j < pts.size(); ++j) {
            double dist = std::abs(pts[j].first - pts[i].first);
            if (dist <= 0.0) continue;
            double q = std::abs(pts[j].second - pts[i].second) / std::pow(dist, s);
            ++res.pairs;
            if (q > res.value) {
                res.value = q;
                res.x = pts[i].first;
                res.y = pts[j].first;
            }
        }
    return res;
}

}  // namespace

HolderResult holder_seminorm(const BumpProfile& f, double s, std::size_t points_per_support) {
    if (!(s > 0.0 && s <= 1.0)) throw PreconditionError("Holder exponent must lie in (0, 1]");
    std::vector<std::pair<double, double>> pts;
    for (const auto& iv : f.support())
        for (std::size_t i = 0; i <= points_per_support; ++i) {
            double x = iv.lo + iv.width() * static_cast<double>(i) / static_cast<double>(points_per_support);
            pts.emplace_back(x, f(x));
        }
    return holder_all_pairs(pts, s);
}

HolderResult holder_seminorm(const MultiBumpData& w, double s, std::size_t points_per_bump, std::size_t first_bump) {
    if (!(s > 0.0 && s <= 1.0)) throw PreconditionError("Holder exponent must lie in (0, 1]");
    std::vector<std::pair<double, double>> pts;
    for (std::size_t k = first_bump; k < w.supports.size(); ++k)
        for (const auto& iv : w.supports[k])
            for (std::size_t i = 0; i <= points_per_bump; ++i) {
                double x = iv.lo + iv.width() * static_cast<double>(i) / static_cast<double>(points_per_bump);
                pts.emplace_back(x, w(x));
            }
    return holder_all_pairs(pts, s);
}

std::vector<Interval> support_gaps(const Field1D& w, double floor) {
    if (!(floor > 0.0)) throw PreconditionError("support_gaps requires a positive floor");
    std::vector<Interval> out;
    std::size_t i = 0;
    const std::size_t n = w.size();
    while (i < n) {
        if (std::abs(w.values[i]) < floor) {
            std::size_t j = i;
            while (j + 1 < n && std::abs(w.values[j + 1]) < floor) ++j;
            out.push_back({w.x(i), w.x(j)});
            i = j + 1;
        } else {
            ++i;
        }
    }
    return out;
}

double beta_25_35() { return std::beta(25.0 / 24.0, 35.0 / 24.0); }

BumpProfile build_phi3d(double d) {
    if (!(d > 0.0 && d <= 0.25)) throw DomainError("build_phi3d requires 0 < d <= 1/4");
    const double B = beta_25_35();
    double moment = quad::adaptive([d](double r) { return std::pow(r, -11.0 / 12.0) * mollifier((r - 1.0) / d); },
                                   1.0 - d, 1.0 + d, 1e-13)
                        .value;
    const double scale = 1.0 / (0.75 * B * moment);
    auto value = [d, scale](double r) { return scale * mollifier((r - 1.0) / d); };
    auto derivs = [d, scale](double r) {
        Derivs v = mollifier_derivs((r - 1.0) / d);
        double f = scale;
        for (int k = 0; k <= 4; ++k, f /= d) v[k] *= f;
        return v;
    };
    BumpProfile p("phi3d", {{"d", d}, {"scale", scale}}, {{1.0 - d, 1.0 + d}}, value, derivs);
    std::array<double, 2> br{1.0 - d, 1.0 + d};
    double check = quad::refine_gl([&](double r) { return std::pow(r, -11.0 / 12.0) * value(r); }, br, 1e-13).value;
    p.certificates["normalization_minus_1"] = 0.75 * B * check - 1.0;
    return p;
}

BumpProfile build_rho_z(double Z) {
    if (!(Z > 0.0)) throw DomainError("build_rho_z requires Z > 0");
    auto jet = [Z](double z) {
        double sgn = z < 0.0 ? -1.0 : 1.0;
        J4 az = J4::variable(z) * sgn;  // |z| as a jet
        return smooth_step((J4(2.0 * Z) - az) * (1.0 / Z));
    };
    auto value = [jet, Z](double z) {
        double a = std::abs(z);
        if (a <= Z) return 1.0;  // plateau and exterior skip the jet arithmetic
        if (a >= 2.0 * Z) return 0.0;
        return jet(z).c[0];
    };
    auto derivs = [jet](double z) { return to_derivs(jet(z)); };
    return BumpProfile("rho_z", {{"Z", Z}}, {{-2.0 * Z, 2.0 * Z}}, value, derivs);
}

BumpProfile smooth_rho(const BumpProfile& rho_z, std::size_t k, double eps_s, double a) {
    if (!(eps_s > 0.0)) throw DomainError("smooth_rho requires eps_s > 0");
    if (!(a > 0.0)) throw DomainError("smooth_rho requires a > 0");
    const double Z = rho_z.params().at("Z").get<double>();
    const double h = eps_s * std::exp(-6.0 * a * static_cast<double>(k));
    if (h >= Z) throw DomainError("smoothing window too large: h_k >= Z");

    // outer branch g(z) = rho_z(z) z^{1/12} for z > 0, extended oddly
    auto outer = [rho_z](double z) {
        Derivs rd = rho_z.derivatives(z);
        J4 rj;
        for (int i = 0; i <= 4; ++i) {
            double f = 1.0;
            for (int m = 2; m <= i; ++m) f *= m;
            rj.c[i] = rd[i] / f;
        }
        return rj * pow(J4::variable(z), 1.0 / 12.0);
    };
    J4 gh = outer(h);
    double g0 = gh.derivative(0), g1 = gh.derivative(1), g2 = gh.derivative(2);
    // p(z) = c1 z + c3 z^3 + c5 z^5 with p, p', p'' matching g at h
    const double h2 = h * h, h3 = h2 * h, h4 = h3 * h, h5 = h4 * h;
    // rows: [h, h^3, h^5 | g0], [1, 3h^2, 5h^4 | g1], [0, 6h, 20h^3 | g2]
    double m[3][4] = {{h, h3, h5, g0}, {1.0, 3 * h2, 5 * h4, g1}, {0.0, 6 * h, 20 * h3, g2}};
    for (int c = 0; c < 3; ++c) {
        int piv = c;
        for (int r = c + 1; r < 3; ++r)
            if (std::abs(m[r][c]) > std::abs(m[piv][c])) piv = r;
        for (int j = 0; j < 4; ++j) std::swap(m[c][j], m[piv][j]);
        for (int r = 0; r < 3; ++r) {
            if (r == c) continue;
            double f = m[r][c] / m[c][c];
            for (int j = 0; j < 4; ++j) m[r][j] -= f * m[c][j];
        }
    }
    const double c1 = m[0][3] / m[0][0], c3 = m[1][3] / m[1][1], c5 = m[2][3] / m[2][2];

    auto jet = [outer, h, c1, c3, c5](double z) {
        if (std::abs(z) < h) {
            J4 v = J4::variable(z);
            J4 v2 = v * v;
            return v * (J4(c1) + v2 * (J4(c3) + v2 * c5));
        }
        if (z > 0.0) return outer(z);
        // odd extension: p(z) = -g(-z)
        J4 g = outer(-z);
        for (int i = 0; i <= 4; i += 2) g.c[i] = -g.c[i];
        return g;
    };
    auto value = [jet](double z) { return jet(z).c[0]; };
    auto derivs = [jet](double z) { return to_derivs(jet(z)); };
    BumpProfile p("rho_k", {{"Z", Z}, {"k", k}, {"eps_s", eps_s}, {"a", a}, {"h", h}, {"c1", c1}, {"c3", c3}, {"c5", c5}},
                  {{-2.0 * Z, 2.0 * Z}}, value, derivs);
    return p;
}

SmoothingCertificate smoothing_certificate(const BumpProfile& phi3d, const BumpProfile& rho_z,
                                           const BumpProfile& rho_k, double K) {
    if (!(K > 0.0 && K <= 1.0)) throw PreconditionError("smoothing_certificate requires K in (0, 1]");
    SmoothingCertificate c;
    c.K = K;
    c.h = rho_k.params().at("h").get<double>();
    const double B = beta_25_35();
    const double zmax = c.h / K;
    const double rlo = phi3d.support_min(), rhi = phi3d.support_max();
    const auto& gl = quad::gauss_legendre(24);

    // z-panels graded geometrically toward z = 0, where (Kz)^{1/12} has an unbounded derivative
    std::vector<double> zb{0.0};
    for (int m = 60; m >= 0; --m) zb.push_back(zmax * std::pow(0.5, m));
    auto diff = [&](double z) {
        double u = K * z;
        return std::abs(rho_z(u) * std::pow(u, 1.0 / 12.0) - rho_k(u));
    };
    double total = 0.0;
    const int rpanels = 8;
    for (std::size_t zi = 0; zi + 1 < zb.size(); ++zi) {
        double za = zb[zi], zc = zb[zi + 1];
        for (std::size_t qz = 0; qz < gl.nodes.size(); ++qz) {
            double z = 0.5 * (za + zc) + 0.5 * (zc - za) * gl.nodes[qz];
            double wz = 0.5 * (zc - za) * gl.weights[qz];
            double dz = diff(z);
            if (dz == 0.0) continue;
            double inner = 0.0;
            for (int p = 0; p < rpanels; ++p) {
                double ra = rlo + (rhi - rlo) * p / rpanels, rb = rlo + (rhi - rlo) * (p + 1) / rpanels;
                for (std::size_t qr = 0; qr < gl.nodes.size(); ++qr) {
                    double r = 0.5 * (ra + rb) + 0.5 * (rb - ra) * gl.nodes[qr];
                    double wr = 0.5 * (rb - ra) * gl.weights[qr];
                    inner += wr * r * r * phi3d(r) / std::pow(z * z + r * r, 2.5);
                }
            }
            total += wz * z * dz * inner;
        }
    }
    c.integral = total;
    c.bound = 16.0 * std::pow(c.h, 25.0 / 12.0) / (25.0 * K * K * B);
    double inv_r3 = quad::adaptive([&](double r) { return phi3d(r) / (r * r * r); }, rlo, rhi, 1e-14).value;
    c.bound_exact_mass = (12.0 / 25.0) * std::pow(c.h, 25.0 / 12.0) / (K * K) * inv_r3;
    c.pass = c.integral <= c.bound;
    return c;
}

std::string profile_csv(const BumpProfile& p, double lo, double hi, std::size_t n, bool with_derivatives) {
    std::ostringstream os;
    os << (with_derivatives ? "x,value,d1,d2,d3,d4\n" : "x,value\n");
    for (std::size_t i = 0; i < n; ++i) {
        double x = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
        os << format_double(x);
        if (with_derivatives) {
            Derivs d = p.derivatives(x);
            for (double v : d) os << ',' << format_double(v);
        } else {
            os << ',' << format_double(p(x));
        }
        os << '\n';
    }
    return os.str();
}

}  // namespace blowup::profiles
