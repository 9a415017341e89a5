#include <doctest.h>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <vector>

#include "blowup/cascade.hpp"
#include "blowup/hilbert.hpp"
#include "blowup/profiles.hpp"
#include "blowup/solver.hpp"

using namespace blowup;
using namespace blowup::solver;

namespace {

Field1D periodic_cos(std::size_t n) {
    Field1D f(0.0, 2.0 * kPi * static_cast<double>(n - 1) / static_cast<double>(n), std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i) f.values[i] = std::cos(f.x(i));
    return f;
}

// w0 = cos x gives w + iHw = 4 w0 / ((2 - t Hw0)^2 + t^2 w0^2) in the real part; blow-up at t = 2
double clm_exact(double x, double t) {
    const double w = std::cos(x), hw = std::sin(x);
    return 4.0 * w / ((2.0 - t * hw) * (2.0 - t * hw) + t * t * w * w);
}

double sup_diff(const Field1D& a, const Field1D& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.values[i] - b.values[i]));
    return m;
}

SolverConfig decomposed(double t_end, std::size_t particles = 201) {
    SolverConfig c;
    c.backend = Backend::Decomposed;
    c.t_end = t_end;
    c.particles = particles;
    return c;
}

}  // namespace

TEST_CASE("config: JSON round trip, unknown keys and invariants") {
    SolverConfig c;
    c.a = 0.5;
    c.backend = Backend::Decomposed;
    c.reversal = Reversal::Symmetry;
    c.log_times = {-0.05, -0.01};
    json j = c;
    auto back = solver_config_from_json(j);
    CHECK(json(back) == j);

    json bad = j;
    bad["cfl_fraction"] = 0.3;
    CHECK_THROWS_AS(solver_config_from_json(bad), ConfigError);
    bad = j;
    bad["cfl"] = 1.5;
    CHECK_THROWS_AS(solver_config_from_json(bad), ConfigError);
    bad = j;
    bad["backend"] = "spectral";
    CHECK_THROWS_AS(solver_config_from_json(bad), ConfigError);
    bad = j;
    bad["t_end"] = 0.0;
    CHECK_THROWS_AS(solver_config_from_json(bad), ConfigError);
    bad = j;
    bad["log_times"] = {-0.5};
    CHECK_THROWS_AS(solver_config_from_json(bad), ConfigError);

    auto s = back.schedule();
    REQUIRE(s.size() == 2);
    CHECK(s[0] == -0.01);
    CHECK(s[1] == -0.05);
}

TEST_CASE("monolithic: zero data stays zero") {
    Field1D zero(-2.0, 2.0, std::vector<double>(513, 0.0));
    for (double a : {0.0, 1.0}) {
        SolverConfig c;
        c.a = a;
        c.t_end = -0.1;
        auto run = solve_monolithic(zero, c);
        CHECK(run.completed);
        for (const auto& f : run.snapshots)
            for (double v : f.values) CHECK(v == 0.0);
    }
}

TEST_CASE("monolithic: CLM closed form up to 90% of the blow-up time at N = 2^14") {
    SolverConfig c;
    c.a = 0.0;
    c.periodic = true;
    c.t_start = 0.0;
    c.t_end = 1.8;
    c.n_log = 10;
    const auto t0 = std::chrono::steady_clock::now();
    auto run = solve_monolithic(periodic_cos(1 << 14), c);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    REQUIRE(run.completed);
    REQUIRE(run.snapshots.size() == 10);
    double worst = 0.0;
    for (const auto& f : run.snapshots)
        for (std::size_t i = 0; i < f.size(); ++i) worst = std::max(worst, std::abs(f.values[i] - clm_exact(f.x(i), *f.time)));
    CHECK(worst <= 1e-4);
    CHECK(secs < 30.0);
    // at x = 0 the closed form reduces to 4/(4 + t^2)
    CHECK(run.snapshots.back().values[0] == doctest::Approx(4.0 / (4.0 + 1.8 * 1.8)).epsilon(1e-6));
}

TEST_CASE("monolithic: past the CLM blow-up the run stops with a reason and its last frame") {
    SolverConfig c;
    c.a = 0.0;
    c.periodic = true;
    c.t_end = 2.5;
    c.n_log = 6;
    c.sup_max = 20.0;  // near blow-up sup|w| ~ 1/(2 - t), so this stops at t ~ 1.95
    auto run = solve_monolithic(periodic_cos(4096), c);
    CHECK_FALSE(run.completed);
    CHECK_FALSE(run.aborted);
    CHECK(run.termination.find("sup|w| exceeded") != std::string::npos);
    CHECK(run.t_reached < 1.97);
    CHECK(run.t_reached > 1.93);
    CHECK_FALSE(run.snapshots.empty());

    c.sup_max = 1e12;
    c.dt_min = 1e-4;
    auto under = solve_monolithic(periodic_cos(4096), c);
    CHECK_FALSE(under.completed);
    CHECK(under.termination.find("dt underflow") != std::string::npos);
}

TEST_CASE("monolithic: backward runs by signed dt and by reflection agree; forward-backward returns") {
    auto phi = profiles::reference_phi(0.2);
    auto w0 = phi.sample(-3.0, 3.0, 2049);
    SolverConfig c;
    c.t_end = -0.03;
    c.n_log = 4;
    auto signed_dt = solve_monolithic(w0, c);
    c.reversal = Reversal::Symmetry;
    auto reflected = solve_monolithic(w0, c);
    REQUIRE(signed_dt.completed);
    REQUIRE(reflected.completed);
    REQUIRE(signed_dt.snapshots.size() == reflected.snapshots.size());
    for (std::size_t i = 0; i < signed_dt.snapshots.size(); ++i) {
        CHECK(*signed_dt.snapshots[i].time == doctest::Approx(*reflected.snapshots[i].time));
        CHECK(sup_diff(signed_dt.snapshots[i], reflected.snapshots[i]) <= 1e-12);
    }
    CHECK(*signed_dt.snapshots.back().time == doctest::Approx(-0.03));

    // there and back again: the round-trip defect is a resolution error and shrinks spectrally
    std::vector<double> defect;
    for (std::size_t m : {2049, 4097}) {
        auto data = phi.sample(-3.0, 3.0, m);
        SolverConfig bwd;
        bwd.t_end = -0.03;
        bwd.n_log = 2;
        SolverConfig fwd = bwd;
        fwd.t_start = -0.03;
        fwd.t_end = 0.0;
        auto back = solve_monolithic(solve_monolithic(data, bwd).snapshots.back(), fwd);
        REQUIRE(back.completed);
        defect.push_back(sup_diff(back.snapshots.back(), data));
    }
    MESSAGE("round-trip defects " << defect[0] << " " << defect[1]);
    CHECK(defect[1] < defect[0] / 8.0);
    CHECK(defect[1] <= 1e-6);
}

TEST_CASE("monolithic: oddness is preserved") {
    auto phi = profiles::reference_phi(0.2);
    SolverConfig c;
    c.t_end = -0.05;
    c.n_log = 5;
    auto run = solve_monolithic(phi.sample(-3.0, 3.0, 2049), c);
    REQUIRE(run.completed);
    for (double d : run.odd_deviation) CHECK(d <= 1e-11);
}

TEST_CASE("monolithic: grid doubling converges faster than any fixed order on smooth data") {
    auto bump = profiles::odd_bump(0.8, 0.3, 1.0);
    SolverConfig c;
    c.t_end = -0.05;
    c.n_log = 2;
    std::vector<Field1D> out;
    for (std::size_t m : {257, 513, 1025, 2049}) out.push_back(solve_monolithic(bump.sample(-2.0, 2.0, m), c).snapshots.back());
    std::vector<double> diff;
    for (std::size_t q = 0; q + 1 < out.size(); ++q) {
        double d = 0.0;
        for (std::size_t i = 0; i < out[q].size(); ++i) d = std::max(d, std::abs(out[q].values[i] - out[q + 1].values[2 * i]));
        diff.push_back(d);
    }
    MESSAGE("doubling differences " << diff[0] << " " << diff[1] << " " << diff[2]);
    CHECK(diff[0] / diff[1] > 4.0);
    CHECK(diff[1] / diff[2] > diff[0] / diff[1]);
    CHECK(diff[2] < 1e-5);
}

TEST_CASE("monolithic: support reaching the boundary band aborts") {
    auto bump = profiles::odd_bump(1.85, 0.1, 1.0);
    SolverConfig c;
    c.t_end = -0.1;
    auto run = solve_monolithic(bump.sample(-2.0, 2.0, 1025), c);
    CHECK(run.aborted);
    CHECK_FALSE(run.completed);
    CHECK(run.termination.find("boundary") != std::string::npos);
    CHECK_THROWS_AS(solve_monolithic(bump.sample(0.5, 2.0, 257), c), PreconditionError);
}

TEST_CASE("decomposed: a single bump keeps its height and starts at E = 0") {
    auto phi = profiles::reference_phi(0.2);
    auto run = solve_decomposed(profiles::assemble_multibump(0, 1.05, 0.2, phi), decomposed(-0.05));
    REQUIRE(run.completed);
    CHECK(run.diag.records.front().energy[0] == 0.0);
    for (const auto& rec : run.diag.records) {
        CHECK(rec.x[0] == 1.0);
        CHECK(rec.Hw_minus_0[0] == 0.0);
    }
    auto inter = measure_interaction(run.frames.back(), 0, 0.2, 0.05, 1.05);
    CHECK(inter.Hw_minus_0 == 0.0);
    CHECK(inter.HW0.empty());
}

TEST_CASE("decomposed: single bump agrees with the monolithic solver") {
    auto phi = profiles::reference_phi(0.2);
    auto md = profiles::assemble_multibump(1, 1.05, 0.2, phi);
    SolverConfig c = decomposed(-0.01, 401);
    c.n_log = 2;
    c.cfl = 0.2;
    auto dec = solve_decomposed(md, c);
    auto mono = solve_monolithic(md.sample(-2.0, 2.0, 16385), c);
    REQUIRE(dec.completed);
    REQUIRE(mono.completed);
    const auto& f = mono.snapshots.back();
    double err = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) err = std::max(err, std::abs(dec.reconstruct(1, f.x(i)) - f.values[i]));
    CHECK(err <= 1e-6);
}

TEST_CASE("decomposed vs monolithic on the n = 3 datum") {
    auto phi = profiles::reference_phi(0.2);
    auto md = profiles::assemble_multibump(3, 1.05, 0.2, phi);
    SolverConfig c = decomposed(-0.0025, 401);
    c.n_log = 3;
    c.cfl = 0.9;
    auto dec = solve_decomposed(md, c);
    auto mono = solve_monolithic(md.sample(-1.4, 1.4, 98305), c);
    REQUIRE(dec.completed);
    REQUIRE(mono.completed);
    double err = 0.0;
    for (std::size_t rec = 0; rec < mono.snapshots.size(); ++rec) {
        const auto& f = mono.snapshots[rec];
        CHECK(*f.time == doctest::Approx(dec.diag.records[rec].t));
        for (std::size_t i = 0; i < f.size(); ++i) err = std::max(err, std::abs(dec.reconstruct(rec, f.x(i)) - f.values[i]));
    }
    MESSAGE("n = 3 backend difference " << err);
    CHECK(err <= 1e-3);
}

TEST_CASE("decomposed: HW_j(0, 0) = 1 and the inner-bump field stays under C2 x_k") {
    auto phi = profiles::reference_phi(0.2);
    auto run = solve_decomposed(profiles::assemble_multibump(4, 1.05, 0.2, phi), decomposed(-0.02));
    REQUIRE(run.completed);
    for (double h : run.diag.records.front().HW0) CHECK(std::abs(h - 1.0) <= 1e-8);
    auto at0 = measure_interaction(run.frames.front(), 4, 0.2, 0.05, 1.05);
    for (double h : at0.HW0) CHECK(std::abs(h - 1.0) <= 1e-8);
    CHECK(at0.within_c_eps);
    for (const auto& frames : {run.frames.front(), run.frames.back()})
        for (std::size_t k = 0; k < 4; ++k) {
            auto in = measure_interaction(frames, k, 0.2, 0.05, 1.05);
            CHECK(in.Hw_plus_sup <= in.Hw_plus_bound);
        }
    // particle sums (record) and frame quadrature (measure_interaction) for Hw_-(0)
    const auto& rec = run.diag.records.back();
    for (std::size_t k = 1; k <= 4; ++k)
        CHECK(measure_interaction(run.frames.back(), k, 0.2, 0.05, 1.05).Hw_minus_0 ==
              doctest::Approx(rec.Hw_minus_0[k]).epsilon(1e-6));
}

TEST_CASE("decomposed: heights follow the cascade fed with measured HW_j(0, t)") {
    auto phi = profiles::reference_phi(0.2);
    SolverConfig c = decomposed(-0.04);
    c.n_log = 17;
    auto run = solve_decomposed(profiles::assemble_multibump(4, 1.05, 0.2, phi), c);
    REQUIRE(run.completed);
    auto cmp = compare_with_cascade(run);
    CHECK(cmp.max_rel_height <= 0.05);
    CHECK(cmp.max_rel_log_rate <= 0.02);
}

TEST_CASE("decomposed: particle refinement and determinism") {
    auto phi = profiles::reference_phi(0.2);
    SolverConfig c = decomposed(-0.03, 101);
    c.n_log = 4;
    auto rep = refinement_study({1, 2, 3}, {101, 201, 401}, 1.05, phi, c);
    REQUIRE(rep.particle_change.size() == 2);
    CHECK(rep.particle_change[1] < rep.particle_change[0] / 4.0);
    CHECK(rep.particle_change[1] < 1e-4);
    CHECK(rep.deterministic);
    REQUIRE(rep.tail_ratio.size() == 3);
    for (double q : rep.tail_ratio) CHECK(q < 1.0);
}

TEST_CASE("decomposed: supports leaving [1-2r, 1+2r] stop the run as a bootstrap violation") {
    auto phi = profiles::reference_phi(0.2);
    auto run = solve_decomposed(profiles::assemble_multibump(2, 1.05, 0.2, phi), decomposed(-1.0));
    CHECK(run.bootstrap_violation);
    CHECK_FALSE(run.completed);
    CHECK(run.termination.find("bootstrap violation") != std::string::npos);
    CHECK_FALSE(run.diag.records.empty());
}

TEST_CASE("profile energy against direct quadrature of a known perturbation") {
    auto phi = profiles::reference_phi(0.2);
    auto pert = profiles::odd_bump(1.0, 0.1, 0.01);
    ProfileFrame f;
    const std::size_t N = 801;
    f.h = 0.4 / static_cast<double>(N - 1);
    for (std::size_t i = 0; i < N; ++i) {
        const double s = 0.8 + f.h * static_cast<double>(i);
        f.xi.push_back(s);
        f.J.push_back(1.0);
        f.W.push_back(phi(s) + pert(s));
        f.G.push_back(phi.derivative(s, 1) + pert.derivative(s, 1));
    }
    auto e = profile_energy(f, phi, 0.2);
    // 2 int_{0.9}^{1.1} (pert')^2 by Simpson
    const int m = 4000;
    double s = 0.0;
    for (int i = 0; i <= m; ++i) {
        const double y = 0.9 + 0.2 * i / m, d = pert.derivative(y, 1);
        s += (i == 0 || i == m ? 1.0 : (i % 2 ? 4.0 : 2.0)) * d * d;
    }
    const double expect = 2.0 * s * (0.2 / m) / 3.0;
    CHECK(e.E == doctest::Approx(expect).epsilon(1e-6));
    CHECK(e.l1 <= e.l1_bound);
    CHECK(e.sup_H <= e.sup_H_bound);
    CHECK(e.sup_H > 0.0);
}

TEST_CASE("rate fit: too few samples, 1/|t| growth and a flat window") {
    RunDiagnostics d;
    for (double t : {-0.1, -0.05, -0.02}) {
        RunRecord r;
        r.t = t;
        r.sup_w = 1.0;
        d.records.push_back(r);
    }
    CHECK_THROWS_AS(blowup_rate_fit(d), NumericalError);

    RunDiagnostics blow, flat;
    for (int i = 0; i <= 20; ++i) {
        const double t = -std::pow(10.0, -1.0 - 2.0 * i / 20.0);
        RunRecord r;
        r.t = t;
        r.sup_w = (2.0 + 0.5 * std::sin(5.0 * i)) / std::abs(t);
        blow.records.push_back(r);
        r.sup_w = 3.0;
        flat.records.push_back(r);
    }
    auto fb = blowup_rate_fit(blow);
    CHECK(fb.blowup);
    CHECK(fb.samples == 21);
    CHECK(fb.min_product >= 1.5);
    CHECK(fb.max_product <= 2.5);
    CHECK(fb.C == doctest::Approx(std::max(fb.max_product, 1.0 / fb.min_product)));
    auto ff = blowup_rate_fit(flat);
    CHECK_FALSE(ff.blowup);
    CHECK(ff.note.find("no blow-up") != std::string::npos);
    CHECK(blowup_rate_fit(blow, 1e-2, 1e-1).samples == 11);
}

TEST_CASE("rate envelope and default window") {
    const double A = 1.05, r = 0.2, eps = 0.05;
    const double c = std::sqrt(32.0 * r * r * r / 3.0) / (kPi * (1.0 - 2.0 * r));
    const double b = (1.0 + c * eps) / (1.0 - c * eps);
    auto env = rate_envelope(A, r, eps, 2.0);
    CHECK(env.a == doctest::Approx(cascade::fixed_point_a(A, b)));
    CHECK(env.C_prime == doctest::Approx((1.0 + c * eps) / (A - 1.0)));
    CHECK(env.lower < env.upper);
    CHECK(default_window(A, r, eps) == doctest::Approx(env.a / (1.0 - c * eps)));
}

TEST_CASE("run directory and diagnostics CSV") {
    auto phi = profiles::reference_phi(0.2);
    SolverConfig c = decomposed(-0.01, 101);
    c.n_log = 3;
    auto run = solve_decomposed(profiles::assemble_multibump(1, 1.05, 0.2, phi), c);
    auto csv = diagnostics_csv(run.diag);
    CHECK(csv.rfind("t,sup_w,x_0,x_1,Hw_minus_0_0,Hw_minus_0_1,E_0,E_1\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
    const auto dir = std::filesystem::temp_directory_path() / "blowup_solver_test_run";
    std::filesystem::remove_all(dir);
    write_run_directory(dir.string(), c, run, {}, true);
    for (const char* name : {"config.json", "diagnostics.csv", "verdicts.json", "snapshots.csv"})
        CHECK(std::filesystem::exists(dir / name));
    std::filesystem::remove_all(dir);
}
