#include "blowup/solver.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "blowup/hilbert.hpp"
#include "blowup/ode.hpp"
#include "blowup/quadrature.hpp"

namespace blowup::solver {

using profiles::BumpProfile;
using profiles::Interval;

namespace {

double c_of_r(double r) { return std::sqrt(32.0 * r * r * r / 3.0) / (kPi * (1.0 - 2.0 * r)); }

}  // namespace

void SolverConfig::validate() const {
    if (!std::isfinite(a)) throw ConfigError("solver: a must be finite");
    if (!(cfl > 0.0 && cfl <= 1.0)) throw ConfigError("solver: cfl must lie in (0, 1]");
    if (!(t_end != t_start) || !std::isfinite(t_end) || !std::isfinite(t_start))
        throw ConfigError("solver: t_start and t_end must be finite and distinct");
    if (!(max_dt > 0.0)) throw ConfigError("solver: max_dt must be positive");
    if (!(tol > 0.0)) throw ConfigError("solver: tol must be positive");
    if (padding < 2) throw ConfigError("solver: padding must be >= 2");
    if (!(r > 0.0 && r <= 0.25)) throw ConfigError("solver: r must lie in (0, 1/4]");
    if (!(eps > 0.0)) throw ConfigError("solver: eps must be positive");
    if (particles < 16) throw ConfigError("solver: at least 16 particles per bump");
    if (log_times.empty() && n_log < 2) throw ConfigError("solver: n_log must be >= 2");
    const double lo = std::min(t_start, t_end), hi = std::max(t_start, t_end);
    for (double t : log_times)
        if (t < lo || t > hi) throw ConfigError("solver: log time outside [t_start, t_end]");
}

std::vector<double> SolverConfig::schedule() const {
    std::vector<double> out;
    if (log_times.empty()) {
        for (std::size_t i = 0; i < n_log; ++i)
            out.push_back(t_start + (t_end - t_start) * static_cast<double>(i) / static_cast<double>(n_log - 1));
        out.back() = t_end;
    } else {
        out = log_times;
        const bool fwd = t_end > t_start;
        std::sort(out.begin(), out.end(), [fwd](double x, double y) { return fwd ? x < y : x > y; });
        out.erase(std::unique(out.begin(), out.end()), out.end());
    }
    return out;
}

void to_json(json& j, const SolverConfig& c) {
    j = {{"a", c.a},
         {"backend", c.backend == Backend::Monolithic ? "monolithic" : "decomposed"},
         {"t_start", c.t_start},
         {"t_end", c.t_end},
         {"cfl", c.cfl},
         {"max_dt", c.max_dt},
         {"tol", c.tol},
         {"dealias_fraction", c.dealias_fraction},
         {"periodic", c.periodic},
         {"padding", c.padding},
         {"reversal", c.reversal == Reversal::SignedDt ? "signed_dt" : "symmetry"},
         {"gap_floor", c.gap_floor},
         {"n_log", c.n_log},
         {"log_times", c.log_times},
         {"particles", c.particles},
         {"r", c.r},
         {"eps", c.eps},
         {"dt_min", c.dt_min},
         {"sup_max", c.sup_max}};
}

SolverConfig solver_config_from_json(const json& j) {
    if (!j.is_object()) throw ConfigError("solver config must be an object");
    SolverConfig c;
    for (const auto& [key, v] : j.items()) {
        try {
            if (key == "a") c.a = v.get<double>();
            else if (key == "backend") {
                auto s = v.get<std::string>();
                if (s == "monolithic") c.backend = Backend::Monolithic;
                else if (s == "decomposed") c.backend = Backend::Decomposed;
                else throw ConfigError("solver.backend must be monolithic or decomposed");
            } else if (key == "t_start") c.t_start = v.get<double>();
            else if (key == "t_end") c.t_end = v.get<double>();
            else if (key == "cfl") c.cfl = v.get<double>();
            else if (key == "max_dt") c.max_dt = v.get<double>();
            else if (key == "tol") c.tol = v.get<double>();
            else if (key == "dealias_fraction") c.dealias_fraction = v.get<double>();
            else if (key == "periodic") c.periodic = v.get<bool>();
            else if (key == "padding") c.padding = v.get<std::size_t>();
            else if (key == "reversal") {
                auto s = v.get<std::string>();
                if (s == "signed_dt") c.reversal = Reversal::SignedDt;
                else if (s == "symmetry") c.reversal = Reversal::Symmetry;
                else throw ConfigError("solver.reversal must be signed_dt or symmetry");
            } else if (key == "gap_floor") c.gap_floor = v.get<double>();
            else if (key == "n_log") c.n_log = v.get<std::size_t>();
            else if (key == "log_times") c.log_times = v.get<std::vector<double>>();
            else if (key == "particles") c.particles = v.get<std::size_t>();
            else if (key == "r") c.r = v.get<double>();
            else if (key == "eps") c.eps = v.get<double>();
            else if (key == "dt_min") c.dt_min = v.get<double>();
            else if (key == "sup_max") c.sup_max = v.get<double>();
            else throw ConfigError("unknown solver key '" + key + "'");
        } catch (const json::exception& e) {
            throw ConfigError("solver." + key + ": " + e.what());
        }
    }
    c.validate();
    return c;
}

double default_window(double A, double r, double eps) {
    const double ce = c_of_r(r) * eps;
    if (!(ce < 1.0)) throw DomainError("default_window requires c(r) eps < 1");
    return cascade::fixed_point_a(A, (1.0 + ce) / (1.0 - ce)) / (1.0 - ce);
}

// ---------------------------------------------------------------------------------------------
// Monolithic

namespace {

// below this fraction of sup|w| a value counts as filter noise rather than support
constexpr double kSupportLevel = 1e-4;

bool symmetric(const Field1D& f) { return std::abs(f.x_min + f.x_max) <= 1e-12 * (f.x_max - f.x_min); }

double odd_dev(const std::vector<double>& v) {
    double m = 0.0;
    const std::size_t n = v.size();
    for (std::size_t i = 0; i < n / 2; ++i) m = std::max(m, std::abs(v[i] + v[n - 1 - i]));
    return m;
}

struct MonolithicRhs {
    const Field1D& grid;
    const SolverConfig& cfg;
    double a;
    hilbert::SpectralOps ops;
    std::vector<double> hw, u, wx;
    double max_u = 0.0, max_hw = 0.0;

    MonolithicRhs(const Field1D& g, const SolverConfig& c, double a_)
        : grid(g), cfg(c), a(a_), ops(g.size(), g.dx(), c.periodic, c.padding), hw(g.size()), u(g.size()),
          wx(g.size()) {}

    void velocity() {
        const std::size_t n = hw.size();
        if (cfg.periodic) {
            auto I = hilbert::cumulative_integral(hw, grid.dx());
            double mean = 0.0;
            for (double v : I) mean += v;
            mean /= static_cast<double>(n);
            for (std::size_t i = 0; i < n; ++i) u[i] = I[i] - mean;
        } else {
            Field1D h(grid.x_min, grid.x_max, hw);
            u = hilbert::velocity_from_hw(h, false).u.values;
        }
    }

    void operator()(const std::vector<double>& w, std::vector<double>& out) {
        const std::size_t n = w.size();
        ops.hilbert(w, hw);
        max_hw = 0.0;
        for (double v : hw) max_hw = std::max(max_hw, std::abs(v));
        max_u = 0.0;
        if (a != 0.0) {
            velocity();
            ops.derivative(w, wx);
            for (double v : u) max_u = std::max(max_u, std::abs(v));
        }
        for (std::size_t i = 0; i < n; ++i) out[i] = w[i] * hw[i] - (a != 0.0 ? a * u[i] * wx[i] : 0.0);
        if (cfg.dealias_fraction > 0.0) ops.dealias(out, cfg.dealias_fraction);
    }
};

// RK4 for dv/ds = time_sign * F(v), v(0) = sign_w * w0, over the offsets `marks` (ascending);
// logs sign_w * v.
MonolithicRun rk4_march(const Field1D& w0, const SolverConfig& cfg, const std::vector<double>& marks,
                        double sign_w, double time_sign) {
    const double a = cfg.a;
    MonolithicRun run;
    MonolithicRhs rhs(w0, cfg, a);
    const std::size_t n = w0.size();
    std::vector<double> w = w0.values, k1(n), k2(n), k3(n), k4(n), tmp(n);
    for (auto& v : w) v *= sign_w;
    const double dx = w0.dx();
    const bool sym = symmetric(w0);
    const std::size_t band = std::max<std::size_t>(1, n / 20);

    auto log_state = [&](double s) {
        Field1D f(w0.x_min, w0.x_max, w, s);
        for (auto& v : f.values) v *= sign_w;
        run.sup_w.push_back(f.sup_abs());
        run.odd_deviation.push_back(sym ? odd_dev(f.values) : 0.0);
        run.snapshots.push_back(std::move(f));
    };

    double s = 0.0;
    std::size_t next = 0;
    while (next < marks.size() && marks[next] <= 0.0) log_state(marks[next++]);
    run.completed = true;
    while (next < marks.size()) {
        rhs(w, k1);
        double sup = 0.0;
        for (double v : w) sup = std::max(sup, std::abs(v));
        if (!cfg.periodic) {
            double edge = 0.0;
            for (std::size_t i = 0; i < band; ++i) edge = std::max({edge, std::abs(w[i]), std::abs(w[n - 1 - i])});
            if (edge > kSupportLevel * sup) {
                run.completed = false;
                run.aborted = true;
                run.termination = "support reached the boundary band";
                break;
            }
        }
        if (sup > cfg.sup_max) {
            run.completed = false;
            run.termination = "sup|w| exceeded " + format_double(cfg.sup_max);
            break;
        }
        double dt = cfg.max_dt;
        if (rhs.max_hw > 0.0) dt = std::min(dt, cfg.cfl / rhs.max_hw);
        if (a != 0.0 && rhs.max_u > 0.0) dt = std::min(dt, cfg.cfl * dx / (std::abs(a) * rhs.max_u));
        if (dt < cfg.dt_min) {
            run.completed = false;
            run.termination = "dt underflow (" + format_double(dt) + ")";
            break;
        }
        bool hit = false;
        if (s + dt >= marks[next]) {
            dt = marks[next] - s;
            hit = true;
        }
        const double h = time_sign * dt;
        for (std::size_t i = 0; i < n; ++i) tmp[i] = w[i] + 0.5 * h * k1[i];
        rhs(tmp, k2);
        for (std::size_t i = 0; i < n; ++i) tmp[i] = w[i] + 0.5 * h * k2[i];
        rhs(tmp, k3);
        for (std::size_t i = 0; i < n; ++i) tmp[i] = w[i] + h * k3[i];
        rhs(tmp, k4);
        for (std::size_t i = 0; i < n; ++i) w[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        s = hit ? marks[next] : s + dt;
        ++run.steps;
        while (next < marks.size() && marks[next] <= s) log_state(marks[next++]);
    }
    run.t_reached = s;
    if (run.completed) run.termination = "completed";
    return run;
}

}  // namespace

MonolithicRun solve_monolithic(const Field1D& w0, const SolverConfig& cfg) {
    cfg.validate();
    w0.validate();
    if (!cfg.periodic && (w0.x_min > 0.0 || w0.x_max < 0.0))
        throw PreconditionError("solve_monolithic: grid must contain x = 0");
    const auto sched = cfg.schedule();
    const double dir = cfg.t_end > cfg.t_start ? 1.0 : -1.0;
    std::vector<double> marks;
    for (double t : sched) marks.push_back(std::abs(t - cfg.t_start));

    MonolithicRun run;
    if (dir > 0.0)
        run = rk4_march(w0, cfg, marks, 1.0, 1.0);
    else if (cfg.reversal == Reversal::Symmetry)
        run = rk4_march(w0, cfg, marks, -1.0, 1.0);  // v(x, s) = -w(x, t_start - s) runs forward
    else
        run = rk4_march(w0, cfg, marks, 1.0, -1.0);
    for (auto& f : run.snapshots) f.time = cfg.t_start + dir * f.time.value_or(0.0);
    run.t_reached = cfg.t_start + dir * run.t_reached;
    return run;
}

}  // namespace blowup::solver
