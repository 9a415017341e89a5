#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include <boost/numeric/odeint.hpp>

#include "blowup/cascade.hpp"

using namespace blowup;
using namespace blowup::cascade;

namespace {

std::vector<double> grid(double lo, double hi, int n) {
    std::vector<double> t(n);
    for (int i = 0; i < n; ++i) t[i] = lo + (hi - lo) * i / (n - 1);
    return t;
}

// Independent oracle: odeint's controlled Cash-Karp stepper on x directly (not ln x).
std::vector<double> odeint_levels(double A, std::size_t n, double t_end) {
    using state = std::vector<double>;
    state x(n);
    for (std::size_t k = 0; k < n; ++k) x[k] = std::pow(A, static_cast<double>(k));
    auto rhs = [n](const state& s, state& ds, double) {
        double acc = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            ds[k] = s[k] * acc;
            acc += s[k];
        }
    };
    namespace odeint = boost::numeric::odeint;
    odeint::integrate_adaptive(odeint::make_controlled<odeint::runge_kutta_cash_karp54<state>>(1e-13, 1e-13),
                               rhs, x, 0.0, t_end, -1e-4);
    return x;
}

double bisect_fixed_point(double A) {
    // a = A(1 - e^{-a}); positive root lies in (0, A)
    double lo = 1e-12, hi = A;
    for (int i = 0; i < 200; ++i) {
        double mid = 0.5 * (lo + hi);
        if (A * (1.0 - std::exp(-mid)) - mid > 0.0) lo = mid; else hi = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("closed form: trivial level and blow-up data") {
    auto tr = closed_form_cascade(1.3, 8, grid(-2.0, 0.0, 21));
    for (std::size_t i = 0; i < tr.times.size(); ++i) CHECK(tr.x[i][0] == doctest::Approx(1.0).epsilon(1e-15));
    for (std::size_t k = 0; k < 8; ++k) CHECK(tr.x.back()[k] == doctest::Approx(std::pow(1.3, k)).epsilon(1e-14));
    for (auto& row : tr.x)
        for (double v : row) CHECK(v > 0.0);
}

TEST_CASE("closed form matches an independent RK oracle") {
    auto tr = closed_form_cascade(1.1, 15, {-0.5, 0.0});
    auto ref = odeint_levels(1.1, 15, -0.5);
    for (std::size_t k = 0; k < 15; ++k) CHECK(std::abs(tr.x[0][k] / ref[k] - 1.0) <= 1e-8);
}

TEST_CASE("closed form satisfies the ODE by second-order differencing") {
    const double A = 1.2;
    auto tr = closed_form_cascade(A, 6, {-0.3});
    double prev_err = 0.0;
    for (double h : {1e-2, 5e-3, 2.5e-3}) {
        double worst = 0.0;
        for (std::size_t k = 1; k < 6; ++k) {
            double d = (tr.dense(k, -0.3 + h) - tr.dense(k, -0.3 - h)) / (2 * h);
            double rhs = 0.0;
            for (std::size_t j = 0; j < k; ++j) rhs += tr.dense(j, -0.3);
            rhs *= tr.dense(k, -0.3);
            worst = std::max(worst, std::abs(d - rhs));
        }
        if (prev_err > 0.0) CHECK(worst < prev_err / 3.5);
        prev_err = worst;
    }
}

TEST_CASE("closed form overflow guard") {
    CHECK_THROWS_AS(closed_form_cascade(2.0, 2000, {0.0}), DomainError);
    CHECK_THROWS_AS(closed_form_cascade(0.9, 3, {0.0}), DomainError);
}

TEST_CASE("integrate_cascade reproduces the closed form") {
    CascadeParams p;
    p.A = 1.1;
    p.n_levels = 15;
    p.t_min = -1.0;
    auto times = grid(-1.0, 0.0, 41);
    auto num = integrate_cascade(p, times);
    auto ex = closed_form_cascade(1.1, 15, times);
    for (std::size_t i = 0; i < times.size(); ++i)
        for (std::size_t k = 0; k < 15; ++k) CHECK(std::abs(num.x[i][k] / ex.x[i][k] - 1.0) <= 1e-8);
}

TEST_CASE("single level stays at 1 under arbitrary coefficients") {
    CascadeParams p;
    p.n_levels = 1;
    p.coeffs = CoefficientSpec::random(1.0, 2.0, 7);
    auto tr = integrate_cascade(p, grid(-1.0, 0.0, 11));
    for (auto& row : tr.x) CHECK(row[0] == 1.0);
}

TEST_CASE("constant coefficient b equals the closed form with time rescaled by b") {
    const double A = 1.15, b = 1.3;
    CascadeParams p;
    p.A = A;
    p.n_levels = 10;
    p.t_min = -1.0;
    p.rtol = 1e-12;
    p.coeffs = CoefficientSpec::constant(b);
    auto times = grid(-1.0, 0.0, 11);
    auto num = integrate_cascade(p, times);
    // x_k(t) = X_k(bt) with X the a = 1 cascade
    for (std::size_t i = 0; i < times.size(); ++i) {
        auto ex = closed_form_cascade(A, 10, {b * times[i]});
        for (std::size_t k = 0; k < 10; ++k) CHECK(std::abs(num.x[i][k] / ex.x[0][k] - 1.0) <= 1e-8);
    }
}

TEST_CASE("z recursion is reproduced by quadrature of the integrated trajectory") {
    CascadeParams p;
    p.A = 1.2;
    p.n_levels = 8;
    p.rtol = 1e-12;
    auto tr = integrate_cascade(p, {-0.7, 0.0});
    for (std::size_t k = 0; k + 1 < 8; ++k) {
        double zk = -tr.integral_to_zero(k, -0.7, 1e-11).value;
        double zk1 = -tr.integral_to_zero(k + 1, -0.7, 1e-11).value;
        CHECK(zk1 == doctest::Approx(1.2 * std::expm1(zk)).epsilon(1e-9));
        CHECK(tr.z[0][k] == doctest::Approx(zk).epsilon(1e-9));
    }
}

TEST_CASE("random coefficients are reproducible and in band") {
    Coefficients c(CoefficientSpec::random(1.0, 1.3, 42), -1.0);
    Coefficients d(CoefficientSpec::random(1.0, 1.3, 42), -1.0);
    for (double t : {-0.9, -0.5, -0.01}) {
        CHECK(c(3, 1, t) == d(3, 1, t));
        CHECK(c(3, 1, t) >= 1.0);
        CHECK(c(3, 1, t) <= 1.3);
    }
    CHECK(c.breakpoints().size() == 31);
    Coefficients shared(CoefficientSpec::random(0.5, 1.0, 1, true), -1.0);
    CHECK(shared(4, 2, -0.3) == shared(7, 2, -0.3));
}

TEST_CASE("fixed_point_a") {
    CHECK(fixed_point_a(1.1, 1.0) == doctest::Approx(bisect_fixed_point(1.1)).epsilon(1e-10));
    CHECK(fixed_point_a(1.1, 1.0) == doctest::Approx(0.194).epsilon(2e-3));
    CHECK(fixed_point_a(1.0 + 1e-9, 1.0) < 3e-9);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> uA(1.0001, 1.2), ub(1.0, 1.4);
    int checked = 0;
    for (int i = 0; i < 300; ++i) {
        double A = uA(rng), b = ub(rng);
        auto bound = fixed_point_upper_bound(A, b);
        if (!bound) continue;
        double a = fixed_point_a(A, b);
        CHECK(std::abs(a - A * std::exp((b - 1) * a) * (1 - std::exp(-a))) <= 1e-12);
        CHECK(a <= *bound);
        ++checked;
    }
    CHECK(checked > 50);
    CHECK_THROWS_AS(fixed_point_a(1.5, 1.45), NumericalError);
}

TEST_CASE("int-le: equality case and the proof's chained bound") {
    const double A = 1.1;
    const double a = fixed_point_a(A, 1.0);
    CascadeParams p;
    p.A = A;
    p.n_levels = 10;
    p.t_min = -a;
    p.rtol = 1e-12;
    auto tr = integrate_cascade(p, {-a, 0.0});
    auto verdicts = verify_int_le(tr, A, 1.0, 1e-9);
    auto chain = int_le_chain(A, 1.0, a, 10);
    for (std::size_t k = 0; k < 10; ++k) {
        CHECK(verdicts[k].pass);
        CHECK(verdicts[k].params["integral"].get<double>() == doctest::Approx(chain[k]).epsilon(1e-9));
        CHECK(chain[k] == doctest::Approx(a).epsilon(1e-12));
    }
}

TEST_CASE("int-le: seeded random trials") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const double A = 1.05, b = 1.3;
        const double a = fixed_point_a(A, b);
        CascadeParams p;
        p.A = A;
        p.n_levels = 12;
        p.t_min = -a;
        p.rtol = 1e-12;
        p.coeffs = CoefficientSpec::random(1.0, b, seed);
        auto tr = integrate_cascade(p, {-a, 0.0});
        CHECK(all_pass(verify_int_le(tr, A, b, 1e-9)));
    }
}

TEST_CASE("int-le rejects coefficients outside [1, b]") {
    CascadeParams p;
    p.coeffs = CoefficientSpec::random(0.5, 1.0, 1);
    auto tr = integrate_cascade(p, {-1.0, 0.0});
    CHECK_THROWS_AS(verify_int_le(tr, 1.1, 1.2), PreconditionError);
}

TEST_CASE("lower envelope") {
    const double A = 1.2, b = 0.8, t = -0.6;
    CascadeParams p;
    p.A = A;
    p.n_levels = 12;
    p.rtol = 1e-12;
    p.coeffs = CoefficientSpec::random(b, 1.0, 3);
    auto tr = integrate_cascade(p, {-1.0, t, 0.0});
    auto env = lower_envelope(tr, A, b, t);
    CHECK(env.integrals[0] == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(all_pass(env.verdicts));
    CHECK(env.I_signed[0] == t);
    REQUIRE(env.limit);
    // the iteration converges monotonically to a'
    double I = std::abs(t), B = A * std::exp((1 - b) * t);
    double prev_gap = std::abs(I - *env.limit);
    for (int n = 0; n < 2000; ++n) {
        I = B * (1 - std::exp(-I));
        double gap = std::abs(I - *env.limit);
        CHECK(gap <= prev_gap + 1e-15);
        prev_gap = gap;
    }
    CHECK(prev_gap <= 1e-10);
    // Ae^{(1-b)t} <= 1: I_n decreases to 0
    CHECK_FALSE(envelope_limit(1.05, 0.5, -0.5));
}

TEST_CASE("monotone ratios") {
    auto tr = closed_form_cascade(1.3, 10, grid(-1.0, 0.0, 51));
    tr.level_independent = true;
    CHECK(verify_monotone_ratio(tr).pass);
    CascadeParams p;
    p.A = 1.2;
    p.n_levels = 10;
    p.coeffs = CoefficientSpec::random(0.2, 2.0, 11, true);
    auto rt = integrate_cascade(p, grid(-1.0, 0.0, 101));
    CHECK(verify_monotone_ratio(rt).pass);
    p.coeffs = CoefficientSpec::random(0.2, 2.0, 11, false);
    auto bad = integrate_cascade(p, grid(-1.0, 0.0, 11));
    CHECK_THROWS_AS(verify_monotone_ratio(bad), PreconditionError);
}

TEST_CASE("holder exponent prediction") {
    for (double A : {1.001, 1.05, 1.5, 3.0}) {
        auto h = holder_exponent_prediction(A, 0.2, 1.0, -0.1);
        CHECK(h.a0_exceeds_lnA);
        CHECK(h.positive);
    }
    auto tiny = holder_exponent_prediction(1.0 + 1e-8, 0.2, 1.0, 0.0);
    CHECK(tiny.s < 1e-7);

    // cascade asymptotics: ln x_k / ln(scale_k) with scale_k = r^k x_k(t)/A^k tends to s
    const double A = 1.05, r = 0.2, t = -1.0;
    auto h = holder_exponent_prediction(A, r, 1.0, t);
    auto tr = closed_form_cascade(A, 2001, {t});
    auto measured = [&](std::size_t k) {
        double y = tr.y[0][k];
        return y / (static_cast<double>(k) * std::log(r) + y - static_cast<double>(k) * std::log(A));
    };
    // the level-k ratio approaches s as the O(1/k) transient fades
    double e40 = std::abs(measured(40) - h.s), e160 = std::abs(measured(160) - h.s);
    double e640 = std::abs(measured(640) - h.s);
    CHECK(e160 < e40);
    CHECK(e640 < e160);
    // differencing between two levels removes the transient
    double dy = tr.y[0][2000] - tr.y[0][1000];
    double ds = dy / (1000 * std::log(r) + dy - 1000 * std::log(A));
    CHECK(ds == doctest::Approx(h.s).epsilon(1e-8));
}

TEST_CASE("trajectory csv") {
    auto tr = closed_form_cascade(1.1, 2, {-1.0, 0.0});
    auto csv = trajectory_csv(tr);
    CHECK(csv.rfind("t,k,x_k,y_k,z_k\n", 0) == 0);
    CHECK(csv.find("0,1,1.1,") != std::string::npos);
}
