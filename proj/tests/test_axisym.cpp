#include <doctest.h>

#include <cmath>
#include <vector>

#include "blowup/axisym.hpp"
#include "blowup/cascade.hpp"
#include "blowup/profiles.hpp"

using namespace blowup;
using namespace blowup::axisym;

namespace {

AxisymProfile even_profile(const profiles::BumpProfile& phi) {
    AxisymProfile p = normalized_profile(phi);
    p.name = "even";
    p.w = [phi](double r, double z) { return phi(r) * std::exp(-z * z); };
    p.z_max = 12.0;
    return p;
}

AxisymConfig small_c_config(double A) {
    AxisymConfig cfg;
    cfg.d = 0.005;
    cfg.Z = 200.0;
    cfg.A = A;
    return cfg;
}

}  // namespace

TEST_CASE("axisym config: JSON round trip and rejection") {
    AxisymConfig c;
    c.d = 0.02;
    c.sio_constant = 3.5;
    auto back = AxisymConfig::from_json(c.to_json());
    CHECK(back.to_json() == c.to_json());
    CHECK_THROWS_AS(AxisymConfig::from_json({{"d", 0.1}, {"bogus", 1}}), ConfigError);
    CHECK_THROWS_AS(AxisymConfig::from_json({{"d", 0.3}}), ConfigError);
    CHECK_THROWS_AS(AxisymConfig::from_json({{"A", 1.0}}), ConfigError);
    CHECK_THROWS_AS(AxisymConfig::from_json({{"alpha", 0.5}}), ConfigError);
    CHECK_THROWS_AS(AxisymConfig::from_json({{"Z", "ten"}}), ConfigError);
}

TEST_CASE("Beta identity by quadrature against the Gamma-function value") {
    auto one = beta_identity_check({1.0});
    CHECK(one.verdict.pass);
    CHECK(one.max_rel_error <= 1e-8);
    CHECK(profiles::beta_25_35() > 0.0);
    // substitution z -> r z predicts the -35/12 power across two decades
    auto sweep = beta_identity_check({0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0});
    CHECK(sweep.verdict.pass);
    CHECK(sweep.fitted_power == doctest::Approx(-35.0 / 12.0).epsilon(1e-9));
    CHECK_THROWS_AS(beta_identity_check({0.0}), PreconditionError);
}

TEST_CASE("normalized initial profile has unit stretching rate") {
    for (double d : {0.1, 0.05, 0.2}) {
        auto w = normalized_profile(profiles::build_phi3d(d));
        auto rate = stretching_rate(w);
        CHECK(std::abs(rate.value - 1.0) <= 1e-8);
        CHECK(rate.error <= 1e-10);
        // the quadrant form with 3/2 and the half-plane form with 3/4 coincide for odd w
        CHECK(std::abs(stretching_rate_full(w).value - rate.value) <= 1e-12);
    }
}

TEST_CASE("stretching rate: linearity, sign and the odd precondition") {
    auto phi = profiles::build_phi3d(0.1);
    auto w = normalized_profile(phi);
    auto scaled = w;
    scaled.w = [w0 = w.w](double r, double z) { return -2.5 * w0(r, z); };
    CHECK(stretching_rate(scaled).value == doctest::Approx(-2.5 * stretching_rate(w).value).epsilon(1e-12));
    CHECK(stretching_rate(w).value > 0.0);
    CHECK_THROWS_AS(stretching_rate(even_profile(phi)), PreconditionError);
}

TEST_CASE("axis velocity: trivial cases and parity") {
    auto phi = profiles::build_phi3d(0.1);
    auto zero = normalized_profile(phi);
    zero.w = [](double, double) { return 0.0; };
    zero.z_max = 5.0;
    CHECK(axis_velocity_uz(zero, 0.3).value == 0.0);

    auto odd = normalized_profile(phi);
    auto u0 = axis_velocity_uz(odd, 0.0);
    CHECK(std::abs(u0.value) <= 1e-12);
    CHECK(u0.error <= 1e-8);
    CHECK(axis_velocity_uz(odd, 0.4).value == doctest::Approx(-axis_velocity_uz(odd, -0.4).value).epsilon(1e-10));

    // even w: u^z(0, .) is even, so z = 0 is a critical point
    auto even = even_profile(phi);
    CHECK(std::abs(stretching_from_axis(even)) <= 1e-9);
    double c0 = axis_velocity_uz(even, 0.0).value;
    double cp = axis_velocity_uz(even, 0.05).value;
    CHECK(c0 < 0.0);
    CHECK(c0 < cp);  // w > 0 pulls fluid down most strongly at the centre
}

TEST_CASE("stretching kernel equals -1/2 d/dz of the axis velocity") {
    auto w = normalized_profile(profiles::build_phi3d(0.1));
    CHECK(std::abs(stretching_from_axis(w) - stretching_rate(w).value) <= 1e-6);
    for (std::uint64_t seed : {1u, 2u, 3u, 4u}) {
        auto p = random_odd_profile(seed);
        CAPTURE(seed);
        CHECK(p.odd_defect() <= 1e-14);
        CHECK(std::abs(stretching_from_axis(p) - stretching_rate(p).value) <= 1e-6);
    }
}

TEST_CASE("stretching rate is invariant under simultaneous rescaling") {
    auto base = random_odd_profile(7);
    double r0 = stretching_rate(base).value;
    for (double mu : {0.5, 2.0, 10.0}) {
        CAPTURE(mu);
        CHECK(stretching_rate(rescaled(base, mu)).value == doctest::Approx(r0).epsilon(1e-9));
    }
}

TEST_CASE("c(d, Z) decreases to 0 as d -> 0 and Z -> inf") {
    CHECK(c_dz(0.1, 10.0) > c_dz(0.05, 10.0));
    CHECK(c_dz(0.05, 10.0) > c_dz(0.05, 100.0));
    CHECK(c_dz(1e-6, 1e6) < 1e-4);
    // first-order behaviour 16d/3 for tiny d, computed without cancellation
    CHECK(c_dz(1e-12, 1e12) == doctest::Approx(16e-12 / 3.0).epsilon(1e-6));
}

TEST_CASE("HW-1: K = 0, identity distortion and the plateau tail") {
    const double d = 0.1, Z = 10.0;
    auto phi = profiles::build_phi3d(d);
    auto rho = profiles::build_rho_z(Z);
    auto zero = hw1_integral(phi, rho, 0.0, Distortion::identity(d));
    CHECK(zero.value == 0.0);
    CHECK(zero.verdict.pass);

    // only the cut-off beyond |z| = Z separates the value from 2/3
    auto one = hw1_integral(phi, rho, 1.0, Distortion::identity(d), 1e-10);
    const double tail = 32.0 * std::pow(1.0 + d, 35.0 / 6.0) / (35.0 * profiles::beta_25_35() * std::pow(Z, 35.0 / 12.0));
    CHECK(one.value < 2.0 / 3.0);
    CHECK(2.0 / 3.0 - one.value <= tail);
    CHECK(one.verdict.pass);

    // constant lambda_r = lambda_z = lambda rescales the integral by 1/lambda
    auto big = profiles::build_rho_z(1e6);
    auto lam = hw1_integral(phi, big, 1.0, Distortion::constant(d, 1.1, 1.1), 1e-10);
    auto ref = hw1_integral(phi, big, 1.0, Distortion::identity(d), 1e-10);
    CHECK(lam.value == doctest::Approx(ref.value / 1.1).epsilon(1e-8));
    CHECK_THROWS_AS(hw1_integral(phi, rho, 1.5, Distortion::identity(d)), PreconditionError);
    CHECK_THROWS_AS(hw1_integral(phi, rho, 0.5, Distortion::identity(0.2)), PreconditionError);
}

TEST_CASE("HW-1 bound over seeded distortions") {
    const double d = 0.1, Z = 10.0;
    auto phi = profiles::build_phi3d(d);
    auto rho = profiles::build_rho_z(Z);
    for (std::uint64_t seed = 0; seed < 10; ++seed)
        for (double K : {1.0, 1e-3, 1e-6}) {
            auto h = hw1_integral(phi, rho, K, Distortion::random(d, seed));
            CAPTURE(seed);
            CAPTURE(K);
            CHECK(h.verdict.pass);
        }
}

TEST_CASE("random distortions stay inside the class") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        auto dist = Distortion::random(0.1, seed);
        for (double r : {0.8, 0.95, 1.0, 1.13, 1.21})
            for (double z : {0.0, 1e-6, 0.3, 4.0, 25.0}) {
                for (double l : {dist.lambda_r(r, z), dist.lambda_z(r, z)}) {
                    CHECK(l >= 1.0 / 1.1 - 1e-15);
                    CHECK(l <= 1.1 + 1e-15);
                }
            }
    }
}

TEST_CASE("5/4 cascade: a = 1 matches the transformed closed form") {
    auto cfg = small_c_config(1.05);
    auto res = cascade_5_4(cfg, 8, cascade::CoefficientSpec::one(), 41);
    // X_k = x_k^{5/4}/A^{k/4} solves the 1D cascade in s = 5t/4
    auto closed = cascade::closed_form_cascade(cfg.A, 8, {-1.25 * res.window.a});
    double worst = 0.0;
    for (std::size_t i = 0; i < res.traj.times.size(); ++i) {
        double t = res.traj.times[i];
        for (std::size_t k = 0; k < 8; ++k) {
            double X = closed.dense(k, 1.25 * t);
            double x = std::pow(X * std::pow(cfg.A, 0.25 * static_cast<double>(k)), 0.8);
            worst = std::max(worst, std::abs(res.traj.x[i][k] - x) / x);
        }
        CHECK(res.traj.x[i][0] == doctest::Approx(1.0).epsilon(1e-14));
    }
    CHECK(worst <= 1e-8);
    CHECK(all_pass(res.verdicts));
}

TEST_CASE("5/4 cascade: xk+1-ge over random coefficients and the a bound") {
    for (double A : {1.01, 1.05}) {
        auto cfg = small_c_config(A);
        const double c = c_dz(cfg.d, cfg.Z);
        for (std::uint64_t seed = 0; seed < 25; ++seed) {
            auto res = cascade_5_4(cfg, 10, cascade::CoefficientSpec::random(1.0 - 1.5 * c, 1.0 + 1.5 * c, seed), 101);
            CAPTURE(seed);
            for (const auto& v : res.verdicts) {
                CAPTURE(v.lemma);
                CAPTURE(v.note);
                CHECK(v.pass);
            }
        }
        auto w = a_axisym(cfg.d, cfg.Z, A);
        CHECK(w.a <= w.bound);
        CHECK(w.a == doctest::Approx(w.a_rescaled * 8.0 / (5.0 * (2.0 - 3.0 * w.c))).epsilon(1e-15));
    }
    auto cfg = small_c_config(1.05);
    const double c = c_dz(cfg.d, cfg.Z);
    CHECK_THROWS_AS(cascade_5_4(cfg, 4, cascade::CoefficientSpec::random(1.0 - 3.0 * c, 1.0, 1)), PreconditionError);
    // 3c >= 2: the band reaches zero and no window exists
    CHECK_THROWS_AS(a_axisym(0.1, 10.0, 1.05), NumericalError);
}

TEST_CASE("int-ge2 recursion") {
    for (double alpha : {0.1, 0.25, 0.4})
        for (double c : {1e-3, 0.05, 0.5, 2.0})
            for (std::size_t n = 0; n <= 60; n += 3) {
                CAPTURE(alpha);
                CAPTURE(c);
                CAPTURE(n);
                auto at_c = recursion_int_ge2(alpha, c, c, n);
                CHECK(at_c.I.back() >= c);
                double thr = recursion_int_ge2(alpha, c, 0.0, n).verdict.params["threshold"].get<double>();
                CHECK(thr == doctest::Approx(c * std::exp(2.0 / (1.0 - 2.0 * alpha)) *
                                             std::exp(-static_cast<double>(n) * (3.0 - 2.0 * alpha) * c / 4.0))
                                 .epsilon(1e-12));
                auto edge = recursion_int_ge2(alpha, c, thr, n);
                CHECK(edge.verdict.pass);
                CHECK(edge.verdict.note.find("hypothesis") == std::string::npos);
            }
    // n = 0: I0 >= c e^{2/(1-2a)} >= c
    CHECK(recursion_int_ge2(0.25, 0.1, 0.1 * std::exp(4.0), 0).verdict.margin > 0.0);
    CHECK_THROWS_AS(recursion_int_ge2(0.5, 0.1, 0.1, 3), DomainError);
}

TEST_CASE("t-le: closed form at beta = 0, random brackets, A^{-n} scaling") {
    for (double alpha : {0.1, 0.3, 0.45})
        for (std::size_t n : {0u, 1u, 7u, 30u}) {
            const double A = 1.2;
            auto r = solve_t_le(alpha, 0.0, A, n);
            double exact = 4.0 * std::log(A) * std::pow(A, -static_cast<double>(n)) *
                           std::exp(2.0 / (1.0 - 2.0 * alpha)) / (3.0 - 2.0 * alpha);
            CHECK(r.t == doctest::Approx(exact).epsilon(1e-13));
            CHECK(r.verdict.pass);
        }

    std::uint64_t state = 99;
    auto uni = [&state]() {
        state = state * 6364136223846793005ULL + 1442695040888963407ULL;
        return static_cast<double>(state >> 11) * 0x1.0p-53;
    };
    for (int trial = 0; trial < 200; ++trial) {
        double alpha = 0.02 + 0.43 * uni();
        double beta = beta_max_t_le(alpha) * uni();
        double A = 1.0 + 1.5 * uni() + 1e-6;
        auto n = static_cast<std::size_t>(60.0 * uni());
        auto r = solve_t_le(alpha, beta, A, n);
        CAPTURE(trial);
        CAPTURE(r.verdict.note);
        CHECK(r.verdict.pass);
    }

    // log t against n has slope -ln A once e^{n beta t} is negligible
    const double A = 1.3, alpha = 0.25, beta = 0.5 * beta_max_t_le(alpha);
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int m = 0;
    for (std::size_t n = 20; n <= 60; n += 5, ++m) {
        double y = std::log(solve_t_le(alpha, beta, A, n).t);
        double x = static_cast<double>(n);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    CHECK(slope == doctest::Approx(-std::log(A)).epsilon(1e-3));

    auto bad = solve_t_le(0.25, 10.0 * beta_max_t_le(0.25), 1.2, 5);
    CHECK_FALSE(bad.verdict.pass);
    CHECK(bad.verdict.note.find("hypothesis") != std::string::npos);
}

TEST_CASE("int-le2 bound") {
    const double alpha = 7.0 / 15.0;
    auto zero = verify_int_le2(alpha, 0.0, 1.005, 0);
    CHECK(zero.integral == doctest::Approx(zero.upper_limit).epsilon(1e-12));
    CHECK(zero.verdict.pass);

    const double bmax = beta_max_int_le2(alpha);
    CHECK(c_alpha_beta(alpha, bmax * (1.0 - 1e-12)) > 1.0 / (1.0 - alpha));
    CHECK(c_alpha_beta(alpha, 0.0) > 1.0 / (1.0 - alpha));
    for (double A : {1.0001, 1.002, 1.01})
        for (double bf : {0.0, 0.5, 0.999})
            for (std::size_t n : {1u, 5u, 17u, 40u}) {
                auto r = verify_int_le2(alpha, bf * bmax, A, n);
                CAPTURE(A);
                CAPTURE(n);
                CHECK(r.verdict.pass);
                CHECK(r.integral > 0.0);
            }
    CHECK_THROWS_AS(verify_int_le2(alpha, bmax, 1.01, 3), DomainError);
    CHECK_THROWS_AS(verify_int_le2(alpha, 0.0, 1.0, 3), DomainError);
}

TEST_CASE("closure report at (d, Z) = (0.05, 50)") {
    AxisymConfig cfg;
    cfg.d = 0.05;
    cfg.Z = 50.0;
    cfg.A = 1.01;
    auto s = closure_check(cfg);
    CHECK_FALSE(s.verdict.pass);
    CHECK_FALSE(s.at_start.beta_ok);
    CHECK_FALSE(s.at_start.window_exists);  // c(0.05, 50) > 2/15
    CHECK(s.at_start.beta_max == doctest::Approx(31.0 * std::exp(-30.0) / 960.0).epsilon(1e-14));
    CHECK(s.d_required < 1e-15);
    CHECK(c_dz(s.d_required, 1e300) == doctest::Approx(2.0 * s.at_start.beta_max / 6.0).epsilon(1e-6));
    // same input, same bytes
    CHECK(closure_check(cfg).to_json().dump() == s.to_json().dump());
}

TEST_CASE("closing inequality: found as A -> 1 where the window exists, margins improve") {
    auto s = closure_check(small_c_config(1.01));
    REQUIRE(s.inequality_at.has_value());
    CHECK(s.inequality_at->margin > 0.0);
    CHECK(s.inequality_at->A < 1.01);
    CHECK_FALSE(s.admissible.has_value());  // beta stays far above 31e^{-30}/960

    auto t = closure_margin_trend({0.05, 0.02, 0.01, 0.005}, 50.0, {10.0, 50.0, 200.0, 1000.0}, 0.05,
                                  {1.01, 1.001, 1.0001, 1.00001}, 0.005, 200.0, 1.0);
    CHECK(t.d_monotone);
    CHECK(t.Z_monotone);
    CHECK(t.A_monotone);
    CHECK(t.verdict.pass);
    CHECK(*t.A_sweep.back().closing_margin > 0.0);
}

TEST_CASE("kernel CSV is deterministic") {
    auto w = normalized_profile(profiles::build_phi3d(0.1));
    std::vector<std::tuple<std::string, double, KernelValue>> rows;
    for (double z : {-0.5, 0.0, 0.5}) rows.emplace_back("uz", z, axis_velocity_uz(w, z));
    auto a = kernel_csv(rows);
    rows.clear();
    for (double z : {-0.5, 0.0, 0.5}) rows.emplace_back("uz", z, axis_velocity_uz(w, z));
    CHECK(a == kernel_csv(rows));
    CHECK(a.rfind("name,input,value,error\n", 0) == 0);
}
