#include "blowup/cascade.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <sstream>

namespace blowup::cascade {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

double unit_hash(std::uint64_t seed, std::uint64_t n, std::uint64_t j, std::uint64_t cell) {
    std::uint64_t h = splitmix64(seed);
    h = splitmix64(h ^ (n * 0x100000001b3ULL));
    h = splitmix64(h ^ (j * 0xc2b2ae3d27d4eb4fULL));
    h = splitmix64(h ^ (cell * 0x165667b19e3779f9ULL));
    return static_cast<double>(h >> 11) * 0x1.0p-53;
}

}  // namespace

void CascadeParams::validate() const {
    if (!(A > 1.0)) throw DomainError("cascade requires A > 1");
    if (n_levels == 0) throw DomainError("cascade requires at least one level");
    if (!(coeff_lo <= coeff_hi)) throw DomainError("coefficient band is empty");
    if (!(t_min < 0.0)) throw DomainError("cascade requires t_min < 0");
    if (!(rtol > 0.0)) throw DomainError("tolerance must be positive");
}

Coefficients::Coefficients(CoefficientSpec spec, double t_min) : spec_(std::move(spec)), t_min_(t_min) {}

double Coefficients::operator()(std::size_t n, std::size_t j, double t) const {
    switch (spec_.kind) {
        case CoefficientSpec::Kind::One:
            return 1.0;
        case CoefficientSpec::Kind::Constant:
            return spec_.value;
        case CoefficientSpec::Kind::Measured:
            return spec_.measured(j, t);
        case CoefficientSpec::Kind::RandomPiecewise: {
            const std::size_t cells = std::size_t{1} << spec_.depth;
            double u = std::clamp(t / t_min_, 0.0, 1.0);  // 0 at t = 0, 1 at t_min
            auto cell = std::min<std::size_t>(static_cast<std::size_t>(u * static_cast<double>(cells)), cells - 1);
            double h = unit_hash(spec_.seed, spec_.shared ? 0 : n, j, cell);
            return spec_.lo + (spec_.hi - spec_.lo) * h;
        }
    }
    return 1.0;
}

std::vector<double> Coefficients::breakpoints() const {
    std::vector<double> out;
    if (spec_.kind != CoefficientSpec::Kind::RandomPiecewise) return out;
    const std::size_t cells = std::size_t{1} << spec_.depth;
    for (std::size_t c = 1; c < cells; ++c) out.push_back(t_min_ * static_cast<double>(c) / static_cast<double>(cells));
    return out;
}

std::string Coefficients::describe() const {
    std::ostringstream os;
    switch (spec_.kind) {
        case CoefficientSpec::Kind::One: os << "constant 1"; break;
        case CoefficientSpec::Kind::Constant: os << "constant " << format_double(spec_.value); break;
        case CoefficientSpec::Kind::Measured: os << "measured (level independent)"; break;
        case CoefficientSpec::Kind::RandomPiecewise:
            os << "random piecewise-constant in [" << format_double(spec_.lo) << ", "
               << format_double(spec_.hi) << "], seed " << spec_.seed << ", 2^" << spec_.depth
               << " dyadic cells" << (spec_.shared ? ", shared across levels" : "");
            break;
    }
    return os.str();
}

bool Coefficients::level_independent() const {
    return spec_.kind != CoefficientSpec::Kind::RandomPiecewise || spec_.shared;
}

std::pair<double, double> Coefficients::range() const {
    switch (spec_.kind) {
        case CoefficientSpec::Kind::One: return {1.0, 1.0};
        case CoefficientSpec::Kind::Constant: return {spec_.value, spec_.value};
        default: return {spec_.lo, spec_.hi};
    }
}

double CascadeTrajectory::x_at(std::size_t k, double t) const { return dense(k, t); }

quad::Estimate CascadeTrajectory::integral_to_zero(std::size_t k, double t, double tol) const {
    if (t > 0.0) throw PreconditionError("integral_to_zero expects t <= 0");
    if (t == 0.0) return {0.0, 0.0};
    std::vector<double> br{t};
    for (double b : breakpoints)
        if (b > t && b < 0.0) br.push_back(b);
    br.push_back(0.0);
    std::sort(br.begin(), br.end());
    auto f = [this, k](double s) { return dense(k, s); };
    return quad::simpson(f, br, tol);
}

namespace {

void check_times(const std::vector<double>& times) {
    if (times.empty()) throw PreconditionError("empty time grid");
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (times[i] > 0.0) throw PreconditionError("cascade times must be <= 0");
        if (i > 0 && !(times[i] > times[i - 1])) throw PreconditionError("time grid must be strictly increasing");
    }
}

}  // namespace

CascadeTrajectory closed_form_cascade(double A, std::size_t n_levels, const std::vector<double>& times) {
    if (!(A > 1.0)) throw DomainError("closed_form_cascade requires A > 1");
    check_times(times);
    if (static_cast<double>(n_levels) * std::log(A) > 700.0)
        throw DomainError("closed_form_cascade: n_levels * ln A exceeds the double exponent range");

    auto z_levels = [A, n_levels](double t) {
        std::vector<double> z(n_levels);
        double zk = t;
        for (std::size_t k = 0; k < n_levels; ++k) {
            z[k] = zk;
            zk = A * std::expm1(zk);
        }
        return z;
    };

    CascadeTrajectory tr;
    tr.A = A;
    tr.coeffs_used = "constant 1 (closed form)";
    tr.times = times;
    const double lnA = std::log(A);
    for (double t : times) {
        auto z = z_levels(t);
        std::vector<double> y(n_levels), x(n_levels);
        double acc = 0.0;
        for (std::size_t k = 0; k < n_levels; ++k) {
            y[k] = static_cast<double>(k) * lnA + acc;
            x[k] = std::exp(y[k]);
            acc += z[k];
        }
        tr.x.push_back(std::move(x));
        tr.y.push_back(std::move(y));
        tr.z.push_back(std::move(z));
    }
    tr.dense = [A, lnA](std::size_t k, double t) {
        double zk = t, acc = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            acc += zk;
            zk = A * std::expm1(zk);
        }
        return std::exp(static_cast<double>(k) * lnA + acc);
    };
    return tr;
}

CascadeTrajectory integrate_cascade(const CascadeParams& params, const std::vector<double>& times) {
    params.validate();
    check_times(times);
    if (times.front() < params.t_min) throw PreconditionError("requested time before t_min");

    const std::size_t n = params.n_levels;
    const double lnA = std::log(params.A);
    const double p = params.drive_power;
    auto coeffs = std::make_shared<Coefficients>(params.coeffs, params.t_min);
    // positivity: the state is y_k = ln x_k, augmented with z_k' = x_k
    ode::Rhs rhs = [coeffs, n, lnA, p](double t, std::span<const double> s, std::span<double> ds) {
        for (std::size_t k = 0; k < n; ++k) {
            double acc = 0.0;
            for (std::size_t j = 0; j < k; ++j)
                acc += (*coeffs)(k, j, t) * std::exp(p * s[j] - (p - 1.0) * static_cast<double>(j) * lnA);
            ds[k] = acc;
            ds[n + k] = std::exp(s[k]);
        }
    };

    ode::State y0(2 * n, 0.0);
    for (std::size_t k = 0; k < n; ++k) y0[k] = static_cast<double>(k) * lnA;

    std::vector<double> breaks{0.0};
    for (double b : coeffs->breakpoints())
        if (b > params.t_min) breaks.push_back(b);
    breaks.push_back(params.t_min);

    ode::Options opt;
    opt.rtol = params.rtol;
    opt.atol = params.rtol * 1e-2;
    auto sol = std::make_shared<ode::Solution>(ode::dopri5_piecewise(rhs, breaks, y0, opt));
    if (!sol->completed)
        throw NumericalError("integrate_cascade: " + sol->failure + " (last valid time " +
                             format_double(sol->t_reached) + ")");

    CascadeTrajectory tr;
    tr.A = params.A;
    tr.coeffs_used = coeffs->describe();
    tr.level_independent = coeffs->level_independent();
    tr.coeff_range = coeffs->range();
    tr.times = times;
    for (double b : coeffs->breakpoints()) tr.breakpoints.push_back(b);
    std::vector<double> buf(2 * n);
    for (double t : times) {
        sol->eval(t, buf);
        std::vector<double> y(buf.begin(), buf.begin() + static_cast<long>(n));
        std::vector<double> z(buf.begin() + static_cast<long>(n), buf.end());
        std::vector<double> x(n);
        for (std::size_t k = 0; k < n; ++k) x[k] = std::exp(y[k]);
        tr.x.push_back(std::move(x));
        tr.y.push_back(std::move(y));
        tr.z.push_back(std::move(z));
    }
    tr.dense = [sol](std::size_t k, double t) { return std::exp(sol->eval(k, t)); };
    return tr;
}

double fixed_point_a(double A, double b) {
    if (!(A > 1.0)) throw DomainError("fixed_point_a requires A > 1");
    if (!(b >= 1.0)) throw DomainError("fixed_point_a requires b >= 1");
    // h(a) = A e^{(b-1)a}(1-e^{-a})/a - 1 is A - 1 > 0 at 0+; the first sign change is the root
    auto h = [A, b](double a) { return A * std::exp((b - 1.0) * a) * (-std::expm1(-a)) / a - 1.0; };
    double guess = b < 1.5 ? 2.0 * (A - 1.0) / (1.5 - b) : 1.0;
    const double lo = 1e-15;
    const double hi = 10.0 * std::max(1.0, guess);
    const int samples = 4000;
    double prev = lo;
    double root_lo = 0.0, root_hi = 0.0;
    bool found = false;
    for (int i = 1; i <= samples; ++i) {
        double a = lo * std::pow(hi / lo, static_cast<double>(i) / samples);
        if (h(a) < 0.0) {
            root_lo = prev;
            root_hi = a;
            found = true;
            break;
        }
        prev = a;
    }
    if (!found) throw NumericalError("fixed_point_a: no fixed point found (no sign change in bracket)");
    for (int it = 0; it < 300 && root_hi - root_lo > 1e-17 * root_hi; ++it) {
        double mid = 0.5 * (root_lo + root_hi);
        (h(mid) > 0.0 ? root_lo : root_hi) = mid;
    }
    double a = 0.5 * (root_lo + root_hi);
    double residual = a - A * std::exp((b - 1.0) * a) * (-std::expm1(-a));
    if (std::abs(residual) > 1e-12) throw NumericalError("fixed_point_a: residual above 1e-12");
    return a;
}

std::optional<double> fixed_point_upper_bound(double A, double b) {
    if (b > 1.5) return std::nullopt;
    double q = (1.5 - b) * (1.5 - b);
    if (q < 2.0 * (b - 1.0) * (A - 1.0)) return std::nullopt;
    if (b == 1.5) return std::nullopt;
    return 2.0 * (A - 1.0) / (1.5 - b);
}

std::vector<double> int_le_chain(double A, double b, double a, std::size_t n_levels) {
    std::vector<double> Z(n_levels);
    double z = a;
    for (std::size_t k = 0; k < n_levels; ++k) {
        Z[k] = z;
        z = A * std::exp((b - 1.0) * a) * (-std::expm1(-z));
    }
    return Z;
}

std::vector<Verdict> verify_int_le(const CascadeTrajectory& traj, double A, double b, double tol) {
    auto [lo, hi] = traj.coeff_range;
    if (lo < 1.0 || hi > b) throw PreconditionError("verify_int_le: coefficients outside [1, b]");
    const double a = fixed_point_a(A, b);
    if (traj.times.front() > -a) throw PreconditionError("verify_int_le: trajectory does not reach t = -a");
    std::vector<Verdict> out;
    for (std::size_t k = 0; k < traj.levels(); ++k) {
        auto est = traj.integral_to_zero(k, -a, tol * 0.1);
        Verdict v;
        v.lemma = "int-le";
        v.params = {{"A", A}, {"b", b}, {"a", a}, {"level", k}, {"integral", est.value},
                    {"quadrature_error", est.error}};
        v.margin = a - est.value;
        v.tolerance = tol;
        v.pass = est.value <= a + tol;
        out.push_back(std::move(v));
    }
    return out;
}

std::optional<double> envelope_limit(double A, double b, double t) {
    double B = A * std::exp((1.0 - b) * t);
    if (!(B > 1.0)) return std::nullopt;
    return fixed_point_a(B, 1.0);
}

LowerEnvelope lower_envelope(const CascadeTrajectory& traj, double A, double b, double t, double tol) {
    auto [lo, hi] = traj.coeff_range;
    if (lo < b || hi > 1.0) throw PreconditionError("lower_envelope: coefficients outside [b, 1]");
    if (t > 0.0 || t < traj.times.front()) throw PreconditionError("lower_envelope: t outside the trajectory span");
    LowerEnvelope env;
    const double B = A * std::exp((1.0 - b) * t);
    double Ia = std::abs(t), Is = t;
    for (std::size_t k = 0; k < traj.levels(); ++k) {
        env.I_abs.push_back(Ia);
        env.I_signed.push_back(Is);
        auto est = traj.integral_to_zero(k, t, tol * 0.1);
        env.integrals.push_back(est.value);
        Verdict v;
        v.lemma = "int-ge";
        v.params = {{"A", A}, {"b", b}, {"t", t}, {"level", k}, {"I_n", Ia}, {"I_n_signed", Is},
                    {"integral", est.value}};
        v.margin = est.value - Ia;
        v.tolerance = tol;
        v.pass = est.value >= Ia - tol;
        env.verdicts.push_back(std::move(v));
        Ia = B * (-std::expm1(-Ia));
        Is = B * (-std::expm1(-Is));
    }
    env.limit = envelope_limit(A, b, t);
    return env;
}

Verdict verify_monotone_ratio(const CascadeTrajectory& traj, double tol) {
    if (!traj.level_independent)
        throw PreconditionError("verify_monotone_ratio: coefficients depend on the level");
    Verdict v;
    v.lemma = "monotone";
    v.tolerance = tol;
    double worst = std::numeric_limits<double>::infinity();
    std::size_t wn = 0, wk = 0, wi = 0;
    for (std::size_t i = 0; i + 1 < traj.times.size(); ++i) {
        for (std::size_t n = 1; n < traj.levels(); ++n) {
            for (std::size_t k = 0; k < n; ++k) {
                double r0 = traj.x[i][n] / traj.x[i][k];
                double r1 = traj.x[i + 1][n] / traj.x[i + 1][k];
                double inc = (r1 - r0) / std::max(1.0, std::abs(r0));
                if (inc < worst) {
                    worst = inc;
                    wn = n;
                    wk = k;
                    wi = i;
                }
            }
        }
    }
    if (!std::isfinite(worst)) worst = 0.0;
    v.margin = worst;
    v.pass = worst >= -tol;
    v.params = {{"levels", traj.levels()}, {"times", traj.times.size()}, {"worst_n", wn},
                {"worst_k", wk}, {"worst_time_index", wi}};
    return v;
}

HolderPrediction holder_exponent_prediction(double A, double r, double b, double t) {
    if (!(A > 1.0)) throw DomainError("holder_exponent_prediction requires A > 1");
    if (!(r > 0.0 && r <= 0.25)) throw DomainError("holder_exponent_prediction requires 0 < r <= 1/4");
    HolderPrediction out;
    const double lnA = std::log(A), lnr = std::log(r);
    out.a0 = fixed_point_a(A, 1.0);
    out.a0_exceeds_lnA = out.a0 > lnA;
    out.s_limit = (out.a0 - lnA) / (out.a0 - lnr);
    auto ap = envelope_limit(A, b, t);
    if (!ap) {
        out.note = "no positive exponent at this t (A e^{(1-b)t} <= 1)";
        return out;
    }
    out.a_prime = *ap;
    out.s = (out.a_prime - lnA) / (out.a_prime - lnr);
    out.positive = out.s > 0.0;
    if (!out.positive) out.note = "no positive exponent at this t (a' <= ln A)";
    return out;
}

std::string trajectory_csv(const CascadeTrajectory& traj) {
    std::ostringstream os;
    os << "t,k,x_k,y_k,z_k\n";
    for (std::size_t i = 0; i < traj.times.size(); ++i)
        for (std::size_t k = 0; k < traj.levels(); ++k)
            os << format_double(traj.times[i]) << ',' << k << ',' << format_double(traj.x[i][k]) << ','
               << format_double(traj.y[i][k]) << ',' << format_double(traj.z[i][k]) << '\n';
    return os.str();
}

}  // namespace blowup::cascade
