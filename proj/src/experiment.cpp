#include "blowup/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "blowup/cascade.hpp"
#include "blowup/hilbert.hpp"
#include "blowup/profiles.hpp"
#include "blowup/quadrature.hpp"
#include "blowup/solver.hpp"

namespace blowup::experiment {

namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

// splitmix64; doubles from the top 53 bits so draws do not depend on the standard library
class Rng {
public:
    explicit Rng(std::uint64_t seed) : s_(seed) {}
    std::uint64_t next() {
        std::uint64_t z = (s_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }
    double uni() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
    // (lo, hi]
    double open_closed(double lo, double hi) { return hi - (hi - lo) * uni(); }
    double closed(double lo, double hi) { return lo + (hi - lo) * uni(); }
    std::size_t index(std::size_t lo, std::size_t hi) {  // [lo, hi]
        return lo + static_cast<std::size_t>(uni() * static_cast<double>(hi - lo + 1));
    }

private:
    std::uint64_t s_;
};

std::uint64_t criterion_seed(std::uint64_t base, int id) {
    Rng r(base * 1000003ULL + static_cast<std::uint64_t>(id));
    return r.next();
}

std::string fmt(double v) { return format_double(v); }

class CsvBuilder {
public:
    explicit CsvBuilder(std::string header) : out_(std::move(header) + "\n") {}
    template <class... Ts>
    void row(const Ts&... cells) {
        bool first = true;
        ((out_ += (first ? "" : ","), out_ += cell(cells), first = false), ...);
        out_ += "\n";
    }
    [[nodiscard]] const std::string& str() const { return out_; }

private:
    static std::string cell(double v) { return fmt(v); }
    static std::string cell(const std::string& s) { return s; }
    static std::string cell(const char* s) { return s; }
    static std::string cell(bool b) { return b ? "1" : "0"; }
    template <class I>
        requires std::is_integral_v<I>
    static std::string cell(I v) { return std::to_string(v); }
    std::string out_;
};

std::vector<double> grid(double lo, double hi, std::size_t n) {
    std::vector<double> t(n);
    for (std::size_t i = 0; i < n; ++i) t[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    t.back() = hi;
    return t;
}

Verdict make(std::string lemma, double margin, double tol, std::uint64_t seed, json params = json::object(),
             std::string note = {}) {
    Verdict v;
    v.lemma = std::move(lemma);
    v.margin = margin;
    v.tolerance = tol;
    v.seed = seed;
    v.params = std::move(params);
    v.pass = margin >= 0.0;
    v.note = std::move(note);
    return v;
}

CriterionResult started(int id, std::string title) {
    CriterionResult r;
    r.id = id;
    r.title = std::move(title);
    return r;
}

// aggregate of many checks: passes on zero violations, margin is the smallest one seen
Verdict tally(std::string lemma, std::size_t violations, double min_margin, double tol, std::uint64_t seed,
              json params = json::object(), std::string note = {}) {
    Verdict v = make(std::move(lemma), min_margin, tol, seed, std::move(params), std::move(note));
    v.pass = violations == 0;
    return v;
}

Verdict runtime_verdict(double secs, double budget) {
    return make("runtime", budget - secs, budget, 0, {{"seconds", secs}}, "wall-clock budget in seconds");
}

// ---- config parsing ---------------------------------------------------------------------------

template <class F>
void for_keys(const json& j, const std::string& section, F&& f) {
    if (!j.is_object()) throw ConfigError(section + " must be an object");
    for (const auto& [key, v] : j.items()) {
        try {
            if (!f(key, v)) throw ConfigError("unknown " + section + " key '" + key + "'");
        } catch (const json::exception& e) {
            throw ConfigError(section + "." + key + ": " + e.what());
        }
    }
}

void require(bool ok, const std::string& what) {
    if (!ok) throw ConfigError(what);
}

}  // namespace

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const ConfigError*>(&e)) return kExitConfig;
    if (dynamic_cast<const BootstrapViolation*>(&e)) return kExitBootstrap;
    if (dynamic_cast<const ResolutionError*>(&e)) return kExitResolution;
    return kExitFail;
}

CascadeBlock CascadeBlock::from_json(const json& j) {
    CascadeBlock b;
    for_keys(j, "cascade", [&](const std::string& k, const json& v) {
        if (k == "A") b.A = v.get<double>();
        else if (k == "n_levels") b.n_levels = v.get<std::size_t>();
        else if (k == "trials") b.trials = v.get<std::size_t>();
        else if (k == "monotone_trials") b.monotone_trials = v.get<std::size_t>();
        else if (k == "A_max") b.A_max = v.get<double>();
        else if (k == "b_max") b.b_max = v.get<double>();
        else if (k == "b_min") b.b_min = v.get<double>();
        else if (k == "n_max") b.n_max = v.get<std::size_t>();
        else return false;
        return true;
    });
    require(b.A > 1.0, "cascade.A must exceed 1");
    require(b.n_levels >= 1 && b.n_levels <= 200, "cascade.n_levels must lie in [1, 200]");
    require(b.A_max > 1.0, "cascade.A_max must exceed 1");
    require(b.b_max >= 1.0 && b.b_max <= 1.5, "cascade.b_max must lie in [1, 3/2]");
    require(b.b_min > 0.0 && b.b_min <= 1.0, "cascade.b_min must lie in (0, 1]");
    require(b.n_max >= 1 && b.n_max <= 100, "cascade.n_max must lie in [1, 100]");
    return b;
}

json CascadeBlock::to_json() const {
    return {{"A", A},         {"n_levels", n_levels}, {"trials", trials}, {"monotone_trials", monotone_trials},
            {"A_max", A_max}, {"b_max", b_max},       {"b_min", b_min},   {"n_max", n_max}};
}

SolverBlock SolverBlock::from_json(const json& j) {
    SolverBlock b;
    for_keys(j, "solver", [&](const std::string& k, const json& v) {
        if (k == "a") b.a = v.get<double>();
        else if (k == "n") b.n = v.get<std::size_t>();
        else if (k == "A") b.A = v.get<double>();
        else if (k == "r") b.r = v.get<double>();
        else if (k == "eps") b.eps = v.get<double>();
        else if (k == "particles") b.particles = v.get<std::size_t>();
        else if (k == "n_log") b.n_log = v.get<std::size_t>();
        else if (k == "t_end") b.t_end = v.get<double>();
        else if (k == "rate_n") b.rate_n = v.get<std::size_t>();
        else if (k == "clm_points") b.clm_points = v.get<std::size_t>();
        else return false;
        return true;
    });
    require(b.A > 1.0 && b.A < 2.0, "solver.A must lie in (1, 2)");
    require(b.r > 0.0 && b.r <= 0.25, "solver.r must lie in (0, 1/4]");
    require(b.eps > 0.0, "solver.eps must be positive");
    require(b.n <= 60 && b.rate_n <= 60, "solver.n and solver.rate_n must be at most 60");
    require(b.particles >= 51, "solver.particles must be at least 51");
    require(b.n_log >= 3, "solver.n_log must be at least 3");
    require(!b.t_end || *b.t_end < 0.0, "solver.t_end must be negative");
    require(b.clm_points >= 64, "solver.clm_points must be at least 64");
    return b;
}

json SolverBlock::to_json() const {
    json j = {{"a", a},         {"n", n},         {"A", A},         {"r", r},
              {"eps", eps},     {"particles", particles}, {"n_log", n_log},
              {"rate_n", rate_n}, {"clm_points", clm_points}};
    if (t_end) j["t_end"] = *t_end;
    return j;
}

AxisymBlock AxisymBlock::from_json(const json& j) {
    AxisymBlock b;
    for_keys(j, "axisym", [&](const std::string& k, const json& v) {
        if (k == "hw1_d") b.hw1_d = v.get<double>();
        else if (k == "hw1_Z") b.hw1_Z = v.get<double>();
        else if (k == "hw1_seeds") b.hw1_seeds = v.get<std::size_t>();
        else if (k == "hw1_decades") b.hw1_decades = v.get<int>();
        else if (k == "odd_profiles") b.odd_profiles = v.get<std::size_t>();
        else if (k == "tle_trials") b.tle_trials = v.get<std::size_t>();
        else if (k == "closure") b.closure = axisym::AxisymConfig::from_json(v);
        else return false;
        return true;
    });
    require(b.hw1_d > 0.0 && b.hw1_d < 0.25, "axisym.hw1_d must lie in (0, 1/4)");
    require(b.hw1_Z >= 1.0, "axisym.hw1_Z must be at least 1");
    require(b.hw1_decades >= 0 && b.hw1_decades <= 12, "axisym.hw1_decades must lie in [0, 12]");
    return b;
}

json AxisymBlock::to_json() const {
    return {{"hw1_d", hw1_d},
            {"hw1_Z", hw1_Z},
            {"hw1_seeds", hw1_seeds},
            {"hw1_decades", hw1_decades},
            {"odd_profiles", odd_profiles},
            {"tle_trials", tle_trials},
            {"closure", closure.to_json()}};
}

const std::map<std::string, double>& tolerance_keys() {
    static const std::map<std::string, double> keys{
        {"c1.rel", 1e-8},         {"c1.seconds", 1.0},       {"c2.quad", 1e-9},
        {"c3.quad", 1e-9},        {"c3.limit", 1e-10},       {"c4.ratio", 1e-10},
        {"c5.pv", 1e-8},          {"c5.spectral", 1e-6},     {"c5.normalization", 1e-10},
        {"c5.beta", 1e-8},        {"c6.sup", 1e-4},          {"c6.seconds", 30.0},
        {"c7.lograte", 0.02},     {"c7.height", 0.05},       {"c7.gap", 1e-10},
        {"c7.seconds", 600.0},    {"c8.factor", 3.0},        {"c10.seconds", 60.0},
        {"c11.axis", 1e-6},       {"c11.rate", 1e-8},
    };
    return keys;
}

const std::map<std::string, std::vector<int>>& presets() {
    static const std::map<std::string, std::vector<int>> p{
        {"all", {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12}},
        {"cascade-lemmas", {1, 2, 3, 4}},
        {"profiles", {5}},
        {"clm", {6}},
        {"degregorio-n4", {7, 9}},
        {"rate-n20", {8}},
        {"hw1", {10}},
        {"stretching", {11}},
        {"recursions", {12}},
        {"axisym", {10, 11, 12}},
        {"lemmas", {2, 3, 4, 12}},
    };
    return p;
}

std::vector<int> criteria_for(const std::string& experiment) {
    if (experiment == "solve1d") return {};
    if (auto it = presets().find(experiment); it != presets().end()) return it->second;
    if (experiment.size() >= 2 && experiment[0] == 'c') {
        int id = 0;
        try {
            std::size_t used = 0;
            id = std::stoi(experiment.substr(1), &used);
            if (used != experiment.size() - 1) id = 0;
        } catch (const std::exception&) {
            id = 0;
        }
        if (id >= 1 && id <= 12) return {id};
    }
    throw ConfigError("unknown experiment '" + experiment + "'");
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
    ExperimentConfig c;
    for_keys(j, "config", [&](const std::string& k, const json& v) {
        if (k == "experiment") c.experiment = v.get<std::string>();
        else if (k == "seed") c.seed = v.get<std::uint64_t>();
        else if (k == "out_dir") c.out_dir = v.get<std::string>();
        else if (k == "cascade") c.cascade = CascadeBlock::from_json(v);
        else if (k == "solver") c.solver = SolverBlock::from_json(v);
        else if (k == "axisym") c.axisym = AxisymBlock::from_json(v);
        else if (k == "tolerances") {
            for_keys(v, "tolerances", [&](const std::string& tk, const json& tv) {
                if (!tolerance_keys().contains(tk)) return false;
                double t = tv.get<double>();
                require(t > 0.0 && std::isfinite(t), "tolerances." + tk + " must be positive");
                c.tolerances[tk] = t;
                return true;
            });
        } else if (k == "sweep") {
            require(v.is_object(), "sweep must be an object");
            c.sweep = v;
        } else return false;
        return true;
    });
    criteria_for(c.experiment);  // rejects unknown names
    if (!c.sweep.is_null()) sweep_points(c);
    return c;
}

json ExperimentConfig::to_json() const {
    json j = {{"experiment", experiment},      {"seed", seed},
              {"out_dir", out_dir},            {"cascade", cascade.to_json()},
              {"solver", solver.to_json()},    {"axisym", axisym.to_json()},
              {"tolerances", json(tolerances)}};
    if (!sweep.is_null()) j["sweep"] = sweep;
    return j;
}

double ExperimentConfig::tol(const std::string& key) const {
    if (auto it = tolerances.find(key); it != tolerances.end()) return it->second;
    return tolerance_keys().at(key);
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config '" + path + "'");
    json j;
    try {
        j = json::parse(in, nullptr, true, /*ignore_comments=*/true);
    } catch (const json::exception& e) {
        throw ConfigError("config '" + path + "': " + e.what());
    }
    return ExperimentConfig::from_json(j);
}

void to_json(json& j, const CriterionResult& r) {
    j = json{{"criterion", r.id},          {"title", r.title},   {"pass", r.pass()},
             {"verdicts", r.verdicts},     {"summary", r.summary}, {"seconds", r.seconds}};
    if (r.abort_code != 0) j["abort_code"] = r.abort_code;
    json names = json::array();
    for (const auto& a : r.artifacts) names.push_back(a.name);
    j["artifacts"] = names;
}

std::string verdicts_csv(const std::vector<Verdict>& verdicts) {
    CsvBuilder csv("lemma,seed,pass,margin,tolerance,params");
    for (const auto& v : verdicts) {
        if (v.lemma == "runtime") continue;
        std::string params = v.params.dump();
        // params are JSON; quote for CSV
        std::string quoted = "\"";
        for (char ch : params) quoted += (ch == '"') ? std::string("\"\"") : std::string(1, ch);
        quoted += "\"";
        csv.row(v.lemma, v.seed, v.pass, v.margin, v.tolerance, quoted);
    }
    return csv.str();
}

// ---- the 1D runs ------------------------------------------------------------------------------

namespace {

struct DegregorioRun {
    solver::DecomposedRun run;
    hilbert::InteractionConstants ic;
    double T = 0.0;  // |t_end|
    double seconds = 0.0;
    std::size_t n = 0;
};

DegregorioRun degregorio_run(const SolverBlock& b, std::size_t n) {
    DegregorioRun out;
    out.n = n;
    auto phi = profiles::reference_phi(b.r);
    auto md = profiles::assemble_multibump(n, b.A, b.r, phi);
    solver::SolverConfig c;
    c.a = b.a;
    c.backend = solver::Backend::Decomposed;
    c.particles = b.particles;
    c.r = b.r;
    c.eps = b.eps;
    c.n_log = b.n_log;
    out.T = b.t_end ? -*b.t_end : solver::default_window(b.A, b.r, b.eps);
    c.t_end = -out.T;
    const auto t0 = Clock::now();
    out.run = solver::solve_decomposed(md, c);
    out.seconds = seconds_since(t0);
    out.ic = hilbert::interaction_constants(b.r, b.eps, b.A, hilbert::phi_norms(phi));
    return out;
}

int abort_code_of(const solver::DecomposedRun& run) { return run.bootstrap_violation ? kExitBootstrap : 0; }

Verdict completion_verdict(const solver::DecomposedRun& run, std::uint64_t seed) {
    return make("run-completed", run.completed ? 0.0 : -1.0, 0.0, seed,
                {{"records", run.diag.records.size()}}, run.termination);
}

// mechanism checks of the n-bump run
void mechanism_verdicts(const DegregorioRun& d, const ExperimentConfig& cfg, CriterionResult& res) {
    const auto& recs = d.run.diag.records;
    auto cmp = solver::compare_with_cascade(d.run);
    const double c_eps = d.ic.c_r * cfg.solver.eps;
    double dev = 0.0, gap = 0.0, sqrtE = 0.0;
    for (const auto& r : recs) {
        for (double h : r.HW0) dev = std::max(dev, std::abs(h - 1.0));
        for (double g : r.gap_sup) gap = std::max(gap, r.sup_w > 0.0 ? g / r.sup_w : 0.0);
        for (double e : r.energy) sqrtE = std::max(sqrtE, std::sqrt(e));
    }
    const double tr = cfg.tol("c7.lograte"), th = cfg.tol("c7.height"), tg = cfg.tol("c7.gap");
    res.verdicts.push_back(completion_verdict(d.run, cfg.seed));
    res.verdicts.push_back(make("log-rate", tr - cmp.max_rel_log_rate, tr, cfg.seed,
                                {{"max_rel", cmp.max_rel_log_rate}},
                                "finite-difference d/dt ln x_k against sum_{j<k} x_j HW_j(0, t)"));
    res.verdicts.push_back(make("heights", th - cmp.max_rel_height, th, cfg.seed, {{"max_rel", cmp.max_rel_height}},
                                "heights against the cascade fed with measured coefficients"));
    res.verdicts.push_back(make("HW0-near-1", c_eps - dev, c_eps, cfg.seed, {{"max_dev", dev}, {"c_r", d.ic.c_r}},
                                "max_j |HW_j(0, t) - 1| against c(r) eps"));
    res.verdicts.push_back(make("gaps", tg - gap, tg, cfg.seed, {{"max_rel", gap}}, "max |w| on the gaps / sup |w|"));
    res.verdicts.push_back(make("energy-eps", cfg.solver.eps - sqrtE, cfg.solver.eps, cfg.seed, {{"max_sqrtE", sqrtE}},
                                "sqrt(E_{n,k}) against eps"));
    res.summary += "log-rate " + fmt(cmp.max_rel_log_rate) + ", heights " + fmt(cmp.max_rel_height) +
                   ", max|HW0-1| " + fmt(dev) + " (c eps " + fmt(c_eps) + "), gaps " + fmt(gap) + ", max sqrtE " +
                   fmt(sqrtE);
    CsvBuilder csv("check,value,tolerance");
    csv.row("max_rel_log_rate", cmp.max_rel_log_rate, tr);
    csv.row("max_rel_height", cmp.max_rel_height, th);
    csv.row("max_rel_proxy", cmp.max_rel_proxy, std::string());
    csv.row("max_HW0_deviation", dev, c_eps);
    csv.row("max_gap_rel", gap, tg);
    csv.row("max_sqrtE", sqrtE, cfg.solver.eps);
    res.artifacts.push_back({"mechanism.csv", csv.str()});
}

// sqrt(E_k) <= C7 I e^{C6 I / 2} / 2 with I = int_t^0 x_k; left sums with the smaller endpoint
// value, which undercount I for increasing heights and so only tighten the bound
void energy_verdicts(const DegregorioRun& d, const ExperimentConfig& cfg, CriterionResult& res) {
    const auto& recs = d.run.diag.records;
    const double C6 = d.ic.C6, C7 = d.ic.C7;
    CsvBuilder csv("t,k,sqrtE,I,bound");
    double worst = -1e300, worst_ratio = 0.0;
    std::size_t violations = 0, checks = 0;
    if (recs.empty()) {
        res.verdicts.push_back(make("energy-bound", -1.0, 0.0, cfg.seed, json::object(), "no records"));
        return;
    }
    std::vector<double> I(recs.front().x.size(), 0.0);
    for (std::size_t i = 0; i < recs.size(); ++i) {
        if (i > 0)
            for (std::size_t k = 0; k < I.size(); ++k)
                I[k] += std::min(recs[i].x[k], recs[i - 1].x[k]) * std::abs(recs[i].t - recs[i - 1].t);
        for (std::size_t k = 0; k < I.size(); ++k) {
            const double s = std::sqrt(recs[i].energy[k]);
            const double bound = 0.5 * C7 * I[k] * std::exp(0.5 * C6 * I[k]);
            csv.row(recs[i].t, k, s, I[k], bound);
            ++checks;
            const double m = bound - s;
            if (m < 0.0) ++violations;
            if (bound > 0.0) worst_ratio = std::max(worst_ratio, s / bound);
            worst = std::max(worst, -m);
        }
    }
    res.verdicts.push_back(tally("energy-bound", violations, -worst, 0.0,
                                cfg.seed,
                                {{"checks", checks}, {"violations", violations}, {"C6", C6}, {"C7", C7},
                                 {"max_ratio", worst_ratio}},
                                "sqrt(E) <= C7 I e^{C6 I/2}/2 at every logged time and level"));
    res.summary += (res.summary.empty() ? "" : "; ") + std::string("energy ratio max ") + fmt(worst_ratio) + " over " +
                   std::to_string(checks) + " checks";
    res.artifacts.push_back({"energy.csv", csv.str()});
}

void rate_verdicts(const DegregorioRun& d, const ExperimentConfig& cfg, CriterionResult& res) {
    const auto& b = cfg.solver;
    auto phi = profiles::reference_phi(b.r);
    auto env = solver::rate_envelope(b.A, b.r, b.eps, hilbert::phi_norms(phi).max_phi);
    const double f = cfg.tol("c8.factor");
    solver::RateFit fit;
    try {
        fit = solver::blowup_rate_fit(d.run.diag, d.T / 10.0, d.T);
    } catch (const NumericalError& e) {
        res.verdicts.push_back(make("rate-band", -1.0, f, cfg.seed, json::object(), e.what()));
        return;
    }
    double t_lo = 1e300, t_hi = 0.0;
    for (const auto& r : d.run.diag.records) {
        const double at = std::abs(r.t);
        if (at >= d.T / 10.0 && at <= d.T) {
            t_lo = std::min(t_lo, at);
            t_hi = std::max(t_hi, at);
        }
    }
    const double decades = t_hi > 0.0 ? std::log10(t_hi / t_lo) : 0.0;
    json params = {{"min_product", fit.min_product}, {"max_product", fit.max_product}, {"samples", fit.samples},
                   {"decades", decades}, {"envelope_lower", env.lower}, {"envelope_upper", env.upper}};
    res.verdicts.push_back(make("rate-growth", fit.blowup && decades >= 1.0 - 1e-12 ? 0.0 : -1.0, 0.0, cfg.seed,
                                params, fit.note.empty() ? "one decade of |t| with no decay of max|w||t|" : fit.note));
    res.verdicts.push_back(make("rate-upper", f * env.upper - fit.max_product, f, cfg.seed, params,
                                "max|w||t| <= factor * envelope upper constant"));
    res.verdicts.push_back(make("rate-lower", fit.min_product - env.lower / f, f, cfg.seed, params,
                                "max|w||t| >= envelope lower constant / factor"));
    CsvBuilder csv("t,sup_w,product");
    for (const auto& r : d.run.diag.records) csv.row(r.t, r.sup_w, r.sup_w * std::abs(r.t));
    res.artifacts.push_back({"rate.csv", csv.str()});
    res.summary += (res.summary.empty() ? "" : "; ") + std::string("max|w||t| in [") + fmt(fit.min_product) + ", " +
                   fmt(fit.max_product) + "] over " + fmt(decades) + " decades, envelope [" + fmt(env.lower) + ", " +
                   fmt(env.upper) + "]";
}

}  // namespace

struct Session::Cache {
    std::optional<DegregorioRun> n4;
};

Session::Session(ExperimentConfig cfg) : cfg_(std::move(cfg)), cache_(std::make_unique<Cache>()) {}
Session::~Session() = default;

namespace {

CriterionResult c1_closed_form(const ExperimentConfig& cfg) {
    auto res = started(1, "closed-form cascade oracle");
    cascade::CascadeParams p;
    p.A = cfg.cascade.A;
    p.n_levels = cfg.cascade.n_levels;
    p.t_min = -1.0;
    const auto times = grid(-1.0, 0.0, 41);
    const auto t0 = Clock::now();
    auto num = cascade::integrate_cascade(p, times);
    const double secs = seconds_since(t0);
    auto ex = cascade::closed_form_cascade(p.A, p.n_levels, times);
    double worst = 0.0;
    for (std::size_t i = 0; i < times.size(); ++i)
        for (std::size_t k = 0; k < p.n_levels; ++k) worst = std::max(worst, std::abs(num.x[i][k] / ex.x[i][k] - 1.0));
    const double tol = cfg.tol("c1.rel");
    res.verdicts.push_back(make("closed-form", tol - worst, tol, cfg.seed,
                                {{"A", p.A}, {"n_levels", p.n_levels}, {"max_rel", worst}}));
    res.verdicts.push_back(runtime_verdict(secs, cfg.tol("c1.seconds")));
    res.artifacts.push_back({"trajectory.csv", cascade::trajectory_csv(num)});
    res.summary = "max rel error " + fmt(worst);
    return res;
}

CriterionResult c2_int_le(const ExperimentConfig& cfg) {
    auto res = started(2, "int-le suite");
    const auto& b = cfg.cascade;
    const double tol = cfg.tol("c2.quad");
    Rng rng(criterion_seed(cfg.seed, 2));
    CsvBuilder csv("trial,seed,A,b,levels,a,a_bound,min_margin,pass");
    std::size_t done = 0, draws = 0, no_window = 0, violations = 0, bound_checks = 0, bound_violations = 0;
    double min_margin = 1e300, min_bound_margin = 1e300;
    while (done < b.trials) {
        if (++draws > 50 * b.trials + 100) throw NumericalError("int-le suite: too many draws without a window");
        const double A = rng.open_closed(1.0, b.A_max);
        const double bb = rng.closed(1.0, b.b_max);
        const std::size_t levels = rng.index(2, b.n_max + 1);
        const std::uint64_t seed = rng.next();
        double a = 0.0;
        try {
            a = cascade::fixed_point_a(A, bb);
        } catch (const NumericalError&) {
            ++no_window;  // no fixed point: the lemma has nothing to say
            continue;
        }
        cascade::CascadeParams p;
        p.A = A;
        p.n_levels = levels;
        p.t_min = -a;
        p.rtol = 1e-12;
        p.coeffs = cascade::CoefficientSpec::random(1.0, bb, seed);
        auto tr = cascade::integrate_cascade(p, {-a, 0.0});
        auto vs = cascade::verify_int_le(tr, A, bb, tol);
        double m = 1e300;
        for (const auto& v : vs) {
            m = std::min(m, v.margin);
            if (!v.pass) ++violations;
        }
        min_margin = std::min(min_margin, m);
        auto ub = cascade::fixed_point_upper_bound(A, bb);
        if (ub) {
            ++bound_checks;
            const double bm = *ub - a;
            if (bm < 0.0) ++bound_violations;
            min_bound_margin = std::min(min_bound_margin, bm);
        }
        csv.row(done, seed, A, bb, levels, a, ub ? fmt(*ub) : std::string(), m, all_pass(vs));
        ++done;
    }
    res.verdicts.push_back(tally("int-le", violations, min_margin, tol, cfg.seed,
                                {{"trials", done}, {"violations", violations}, {"no_window_draws", no_window}},
                                "int_{-a}^0 x_n <= a at every level"));
    res.verdicts.push_back(tally("int-le-bound", bound_violations, bound_checks ? min_bound_margin : 0.0,
                                0.0, cfg.seed, {{"checked", bound_checks}, {"violations", bound_violations}},
                                "a <= 2(A-1)/(3/2-b) where its hypotheses hold"));
    res.artifacts.push_back({"trials.csv", csv.str()});
    res.summary = std::to_string(done) + " trials, " + std::to_string(violations) + " violations, bound checked " +
                  std::to_string(bound_checks) + " times, " + std::to_string(no_window) + " draws without a window";
    return res;
}

CriterionResult c3_int_ge(const ExperimentConfig& cfg) {
    auto res = started(3, "int-ge suite");
    const auto& b = cfg.cascade;
    const double tol = cfg.tol("c3.quad"), ltol = cfg.tol("c3.limit");
    Rng rng(criterion_seed(cfg.seed, 3));
    CsvBuilder csv("trial,seed,A,b,t,levels,min_margin,limit,limit_gap,iterations");
    std::size_t violations = 0, limit_checks = 0, limit_failures = 0;
    double min_margin = 1e300, worst_gap = 0.0;
    for (std::size_t trial = 0; trial < b.trials; ++trial) {
        const double A = rng.open_closed(1.0, b.A_max);
        const double bb = rng.closed(b.b_min, 1.0);
        const double t = -rng.closed(0.05, 1.0);
        const std::size_t levels = rng.index(2, b.n_max + 1);
        const std::uint64_t seed = rng.next();
        cascade::CascadeParams p;
        p.A = A;
        p.n_levels = levels;
        p.t_min = t;
        p.rtol = 1e-12;
        p.coeffs = cascade::CoefficientSpec::random(bb, 1.0, seed);
        auto tr = cascade::integrate_cascade(p, {t, 0.0});
        auto env = cascade::lower_envelope(tr, A, bb, t, tol);
        double m = 1e300;
        for (const auto& v : env.verdicts) {
            m = std::min(m, v.margin);
            if (!v.pass) ++violations;
        }
        min_margin = std::min(min_margin, m);
        std::string lim, gap_s, its;
        if (env.limit) {
            // iterate the envelope until it stops moving
            const double B = A * std::exp((1.0 - bb) * t);
            double I = std::abs(t);
            std::size_t it = 0;
            for (; it < 10'000'000; ++it) {
                const double next = B * (1.0 - std::exp(-I));
                if (next == I) break;
                I = next;
            }
            const double gap = std::abs(I - *env.limit);
            ++limit_checks;
            if (gap > ltol) ++limit_failures;
            worst_gap = std::max(worst_gap, gap);
            lim = fmt(*env.limit);
            gap_s = fmt(gap);
            its = std::to_string(it);
        }
        csv.row(trial, seed, A, bb, t, levels, m, lim, gap_s, its);
    }
    res.verdicts.push_back(tally("int-ge", violations, min_margin, tol,
                                cfg.seed, {{"trials", b.trials}, {"violations", violations}},
                                "int_t^0 x_n >= I_n(t) at every level"));
    res.verdicts.push_back(make("int-ge-limit", ltol - worst_gap, ltol, cfg.seed,
                                {{"checked", limit_checks}, {"failures", limit_failures}, {"max_gap", worst_gap}},
                                "I_n -> a' when A e^{(1-b)t} > 1"));
    res.artifacts.push_back({"trials.csv", csv.str()});
    res.summary = std::to_string(b.trials) + " trials, " + std::to_string(violations) + " violations, limit checked " +
                  std::to_string(limit_checks) + " times, worst gap " + fmt(worst_gap);
    return res;
}

CriterionResult c4_monotone(const ExperimentConfig& cfg) {
    auto res = started(4, "monotone suite");
    const auto& b = cfg.cascade;
    const double tol = cfg.tol("c4.ratio");
    Rng rng(criterion_seed(cfg.seed, 4));
    CsvBuilder csv("trial,seed,A,levels,lo,hi,margin,pass");
    std::size_t violations = 0;
    double min_margin = 1e300;
    const auto times = grid(-1.0, 0.0, 101);
    for (std::size_t trial = 0; trial < b.monotone_trials; ++trial) {
        const double A = rng.open_closed(1.0, b.A_max);
        const double lo = rng.closed(0.2, 1.0), hi = lo + rng.closed(0.0, 1.0);
        const std::size_t levels = rng.index(2, b.n_max + 1);
        const std::uint64_t seed = rng.next();
        cascade::CascadeParams p;
        p.A = A;
        p.n_levels = levels;
        p.rtol = 1e-12;
        p.coeffs = cascade::CoefficientSpec::random(lo, hi, seed, /*shared=*/true);
        auto tr = cascade::integrate_cascade(p, times);
        auto v = cascade::verify_monotone_ratio(tr, tol);
        if (!v.pass) ++violations;
        min_margin = std::min(min_margin, v.margin);
        csv.row(trial, seed, A, levels, lo, hi, v.margin, v.pass);
    }
    res.verdicts.push_back(tally("monotone", violations, min_margin, tol,
                                cfg.seed, {{"trials", b.monotone_trials}, {"violations", violations}},
                                "x_n/x_k non-decreasing for shared coefficients"));
    res.artifacts.push_back({"trials.csv", csv.str()});
    res.summary = std::to_string(b.monotone_trials) + " trials, " + std::to_string(violations) + " violations";
    return res;
}

CriterionResult c5_profiles(const ExperimentConfig& cfg) {
    auto res = started(5, "profile certificates");
    CsvBuilder csv("check,parameter,value,target,deviation");
    const double tpv = cfg.tol("c5.pv"), tsp = cfg.tol("c5.spectral"), tn = cfg.tol("c5.normalization"),
                 tb = cfg.tol("c5.beta");
    double worst_rho = 0.0, worst_phi = 0.0;
    for (double r : {0.1, 0.2, 0.25}) {
        const double hr = hilbert::hilbert_pv(profiles::build_bump(r), 0.0).value;
        const double hp = hilbert::hilbert_pv(profiles::reference_phi(r), 0.0).value;
        worst_rho = std::max(worst_rho, std::abs(hr + 0.5));
        worst_phi = std::max(worst_phi, std::abs(hp - 1.0));
        csv.row("H_rho_0", r, hr, -0.5, std::abs(hr + 0.5));
        csv.row("H_phi_0", r, hp, 1.0, std::abs(hp - 1.0));
    }
    res.verdicts.push_back(make("H-rho-0", tpv - worst_rho, tpv, cfg.seed, {{"max_dev", worst_rho}}));
    res.verdicts.push_back(make("H-phi-0", tpv - worst_phi, tpv, cfg.seed, {{"max_dev", worst_phi}}));

    // spectral against PV on the supports of the n = 3 datum
    auto phi = profiles::reference_phi(0.2);
    auto md = profiles::assemble_multibump(3, 1.05, 0.2, phi);
    auto f = md.sample(-1.5, 1.5, 262145);
    auto hs = hilbert::hilbert_spectral(f).field;
    double worst_sp = 0.0;
    std::size_t checked = 0;
    for (std::size_t i = 0; i < f.size(); i += 3) {
        bool on = false;
        for (const auto& sup : md.supports)
            for (const auto& iv : sup) on = on || iv.contains(f.x(i));
        if (!on) continue;
        double ref = 0.0;
        for (std::size_t k = 0; k < md.heights.size(); ++k)
            ref += md.heights[k] * hilbert::hilbert_pv(phi, f.x(i) / md.scales[k]).value;
        worst_sp = std::max(worst_sp, std::abs(hs.values[i] - ref));
        ++checked;
    }
    csv.row("spectral_vs_pv", 262145.0, worst_sp, 0.0, worst_sp);
    res.verdicts.push_back(make("spectral-vs-pv", tsp - worst_sp, tsp, cfg.seed,
                                {{"points", checked}, {"max_abs", worst_sp}}));

    const double B = profiles::beta_25_35();
    double worst_n = 0.0;
    for (double d : {0.02, 0.05, 0.1, 0.25}) {
        auto p = profiles::build_phi3d(d);
        auto I = quad::adaptive([&](double r) { return std::pow(r, -11.0 / 12.0) * p(r); }, 1.0 - d, 1.0 + d, 1e-14);
        const double v = 0.75 * B * I.value;
        worst_n = std::max(worst_n, std::abs(v - 1.0));
        csv.row("normalization_3d", d, v, 1.0, std::abs(v - 1.0));
    }
    res.verdicts.push_back(make("normalization-3d", tn - worst_n, tn, cfg.seed, {{"max_dev", worst_n}}));

    auto bc = axisym::beta_identity_check({0.25, 0.5, 1.0, 2.0, 4.0}, tb);
    for (std::size_t i = 0; i < bc.r.size(); ++i)
        csv.row("beta_identity", bc.r[i], bc.quadrature[i], bc.closed_form[i],
                std::abs(bc.quadrature[i] / bc.closed_form[i] - 1.0));
    res.verdicts.push_back(bc.verdict);
    res.artifacts.push_back({"certificates.csv", csv.str()});
    res.summary = "H rho(0) " + fmt(worst_rho) + ", H phi(0) " + fmt(worst_phi) + ", spectral " + fmt(worst_sp) +
                  ", 3D normalization " + fmt(worst_n) + ", Beta " + fmt(bc.max_rel_error);
    return res;
}

CriterionResult c6_clm(const ExperimentConfig& cfg) {
    auto res = started(6, "CLM oracle");
    const std::size_t n = cfg.solver.clm_points;
    Field1D w0(0.0, 2.0 * kPi * static_cast<double>(n - 1) / static_cast<double>(n), std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i) w0.values[i] = std::cos(w0.x(i));
    solver::SolverConfig c;
    c.a = 0.0;
    c.periodic = true;
    c.t_end = 1.8;  // 90% of the blow-up time 2
    c.n_log = 10;
    const auto t0 = Clock::now();
    auto run = solver::solve_monolithic(w0, c);
    const double secs = seconds_since(t0);
    CsvBuilder csv("t,sup_w,sup_error");
    double worst = 0.0;
    for (const auto& f : run.snapshots) {
        const double t = *f.time;
        double e = 0.0;
        for (std::size_t i = 0; i < f.size(); ++i) {
            const double w = std::cos(f.x(i)), hw = std::sin(f.x(i));
            const double exact = 4.0 * w / ((2.0 - t * hw) * (2.0 - t * hw) + t * t * w * w);
            e = std::max(e, std::abs(f.values[i] - exact));
        }
        worst = std::max(worst, e);
        csv.row(t, f.sup_abs(), e);
    }
    const double tol = cfg.tol("c6.sup");
    res.verdicts.push_back(make("run-completed", run.completed ? 0.0 : -1.0, 0.0, cfg.seed,
                                {{"steps", run.steps}}, run.termination));
    res.verdicts.push_back(make("clm-sup-error", tol - worst, tol, cfg.seed, {{"points", n}, {"max_abs", worst}}));
    res.verdicts.push_back(runtime_verdict(secs, cfg.tol("c6.seconds")));
    if (run.aborted) res.abort_code = kExitResolution;
    res.artifacts.push_back({"clm.csv", csv.str()});
    res.summary = "sup error " + fmt(worst) + " up to t = 1.8 in " + std::to_string(run.steps) + " steps";
    return res;
}

CriterionResult c10_hw1(const ExperimentConfig& cfg) {
    auto res = started(10, "HW-1 over distortions");
    const auto& b = cfg.axisym;
    auto phi = profiles::build_phi3d(b.hw1_d);
    auto rho = profiles::build_rho_z(b.hw1_Z);
    CsvBuilder csv("seed,K,value,error,target,bound,margin");
    std::size_t violations = 0, checks = 0;
    double min_margin = 1e300, worst_ratio = 0.0;
    const auto t0 = Clock::now();
    for (std::size_t s = 0; s < b.hw1_seeds; ++s) {
        const std::uint64_t seed = cfg.seed + s;
        auto dist = axisym::Distortion::random(b.hw1_d, seed);
        for (int e = 0; e <= b.hw1_decades; ++e) {
            const double K = std::pow(10.0, -e);
            auto h = axisym::hw1_integral(phi, rho, K, dist);
            ++checks;
            if (!h.verdict.pass) ++violations;
            min_margin = std::min(min_margin, h.verdict.margin);
            worst_ratio = std::max(worst_ratio, std::abs(h.value - h.target) / h.bound);
            csv.row(seed, K, h.value, h.error, h.target, h.bound, h.verdict.margin);
        }
    }
    const double secs = seconds_since(t0);
    const double c = axisym::c_dz(b.hw1_d, b.hw1_Z);
    res.verdicts.push_back(tally("HW-1", violations, min_margin, c, cfg.seed,
                                {{"d", b.hw1_d}, {"Z", b.hw1_Z}, {"checks", checks}, {"violations", violations},
                                 {"max_ratio", worst_ratio}},
                                "|value - 2K^{1/12}/3| <= c(d, Z) K^{1/12}"));
    res.verdicts.push_back(runtime_verdict(secs, cfg.tol("c10.seconds")));
    res.artifacts.push_back({"hw1.csv", csv.str()});
    res.summary = std::to_string(checks) + " integrals, " + std::to_string(violations) +
                  " violations, worst deviation/bound " + fmt(worst_ratio);
    return res;
}

CriterionResult c11_stretching(const ExperimentConfig& cfg) {
    auto res = started(11, "stretching-rate consistency");
    const double ta = cfg.tol("c11.axis"), tr = cfg.tol("c11.rate");
    std::vector<std::tuple<std::string, double, axisym::KernelValue>> rows;
    double worst = 0.0;
    for (std::size_t i = 0; i < cfg.axisym.odd_profiles; ++i) {
        const std::uint64_t seed = cfg.seed + 1 + i;
        auto p = axisym::random_odd_profile(seed);
        auto rate = axisym::stretching_rate(p);
        const double fd = axisym::stretching_from_axis(p);
        worst = std::max(worst, std::abs(rate.value - fd));
        rows.emplace_back("rate", static_cast<double>(seed), rate);
        rows.emplace_back("axis_fd", static_cast<double>(seed), axisym::KernelValue{fd, 0.0, 0});
    }
    res.verdicts.push_back(make("rate-vs-axis", ta - worst, ta, cfg.seed,
                                {{"profiles", cfg.axisym.odd_profiles}, {"max_abs", worst}},
                                "stretching_rate against -1/2 d/dz u^z(0, 0)"));
    double worst_n = 0.0;
    for (double d : {0.05, 0.1, 0.2}) {
        auto rate = axisym::stretching_rate(axisym::normalized_profile(profiles::build_phi3d(d)));
        worst_n = std::max(worst_n, std::abs(rate.value - 1.0));
        rows.emplace_back("normalized", d, rate);
    }
    res.verdicts.push_back(make("normalized-rate", tr - worst_n, tr, cfg.seed, {{"max_dev", worst_n}}));
    res.artifacts.push_back({"kernels.csv", axisym::kernel_csv(rows)});
    res.summary = "rate vs axis " + fmt(worst) + ", normalized rate deviation " + fmt(worst_n);
    return res;
}

CriterionResult c12_recursions(const ExperimentConfig& cfg) {
    auto res = started(12, "recursion suites and closure");
    Rng rng(criterion_seed(cfg.seed, 12));

    CsvBuilder ge("alpha,c,n,threshold,I0,I_n,pass");
    std::size_t ge_checks = 0, ge_fail = 0;
    double ge_min = 1e300;
    for (double alpha : {0.1, 0.25, 0.4})
        for (double c : {1e-3, 0.05, 0.5, 2.0})
            for (std::size_t n = 0; n <= 60; ++n) {
                const double thr = axisym::recursion_int_ge2(alpha, c, 0.0, n).verdict.params["threshold"].get<double>();
                for (double I0 : {thr, thr * (1.0 + 4.0 * rng.uni())}) {
                    auto r = axisym::recursion_int_ge2(alpha, c, I0, n);
                    ++ge_checks;
                    if (!r.verdict.pass) ++ge_fail;
                    ge_min = std::min(ge_min, r.verdict.margin);
                    ge.row(alpha, c, n, thr, I0, r.I.back(), r.verdict.pass);
                }
            }
    res.verdicts.push_back(tally("int-ge2", ge_fail, ge_min, 0.0, cfg.seed,
                                {{"checks", ge_checks}, {"violations", ge_fail}}));

    CsvBuilder tle("trial,alpha,beta,A,n,t,lower,upper,pass");
    std::size_t tle_fail = 0;
    double tle_min = 1e300;
    for (std::size_t trial = 0; trial < cfg.axisym.tle_trials; ++trial) {
        const double alpha = 0.02 + 0.43 * rng.uni();
        const double beta = axisym::beta_max_t_le(alpha) * rng.uni();
        const double A = 1.0 + 1e-6 + 1.5 * rng.uni();
        const auto n = static_cast<std::size_t>(60.0 * rng.uni());
        auto r = axisym::solve_t_le(alpha, beta, A, n);
        if (!r.verdict.pass) ++tle_fail;
        tle_min = std::min(tle_min, r.verdict.margin);
        tle.row(trial, alpha, beta, A, n, r.t, r.lower, r.upper, r.verdict.pass);
    }
    res.verdicts.push_back(tally("t-le", tle_fail, tle_min, 0.0, cfg.seed,
                                {{"trials", cfg.axisym.tle_trials}, {"violations", tle_fail}}));

    CsvBuilder le2("A,beta,n,integral,bound,pass");
    const double alpha = 7.0 / 15.0, bmax = axisym::beta_max_int_le2(alpha);
    std::size_t le2_checks = 0, le2_fail = 0;
    double le2_min = 1e300;
    for (double A : {1.0001, 1.001, 1.005, 1.01})
        for (double bf : {0.0, 0.5, 0.999})
            for (std::size_t n : {0u, 1u, 2u, 5u, 10u, 20u, 40u}) {
                auto r = axisym::verify_int_le2(alpha, bf * bmax, A, n);
                ++le2_checks;
                if (!r.verdict.pass) ++le2_fail;
                le2_min = std::min(le2_min, r.verdict.margin);
                le2.row(A, bf * bmax, n, r.integral, r.bound, r.verdict.pass);
            }
    res.verdicts.push_back(tally("int-le2", le2_fail, le2_min, 0.0, cfg.seed,
                                {{"checks", le2_checks}, {"violations", le2_fail}}));

    auto search = axisym::closure_check(cfg.axisym.closure);
    auto trend = axisym::closure_margin_trend({0.05, 0.02, 0.01, 0.005}, 50.0, {10.0, 50.0, 200.0, 1000.0}, 0.05,
                                              {1.01, 1.001, 1.0001, 1.00001}, 0.005, 200.0,
                                              cfg.axisym.closure.sio_constant);
    const bool admissible = search.admissible.has_value();
    const bool ok = admissible || trend.verdict.pass;
    res.verdicts.push_back(make("closure", ok ? 0.0 : -1.0, 0.0, cfg.seed,
                                {{"admissible", admissible},
                                 {"d_monotone", trend.d_monotone},
                                 {"Z_monotone", trend.Z_monotone},
                                 {"A_monotone", trend.A_monotone},
                                 {"d_required", search.d_required}},
                                admissible ? "admissible A found"
                                           : "no admissible A at the configured (d, Z); judged on the margin trend "
                                             "(d and Z on c, 2/15 - c and ln(beta_max/beta), A on the closing "
                                             "margin). " + search.verdict.note));
    CsvBuilder tr("sweep,d,Z,A,c,window_margin,log_beta_margin,closing_margin");
    auto rows = [&tr](const char* name, const std::vector<axisym::MarginPoint>& pts) {
        for (const auto& p : pts)
            tr.row(name, p.d, p.Z, p.A, p.c, p.window_margin, p.log_beta_margin,
                   p.closing_margin ? fmt(*p.closing_margin) : std::string());
    };
    rows("d", trend.d_sweep);
    rows("Z", trend.Z_sweep);
    rows("A", trend.A_sweep);

    res.artifacts.push_back({"int_ge2.csv", ge.str()});
    res.artifacts.push_back({"t_le.csv", tle.str()});
    res.artifacts.push_back({"int_le2.csv", le2.str()});
    res.artifacts.push_back({"margin_trend.csv", tr.str()});
    res.artifacts.push_back({"closure.json", search.to_json().dump(2) + "\n"});
    res.summary = "int-ge2 " + std::to_string(ge_fail) + "/" + std::to_string(ge_checks) + ", t-le " +
                  std::to_string(tle_fail) + "/" + std::to_string(cfg.axisym.tle_trials) + ", int-le2 " +
                  std::to_string(le2_fail) + "/" + std::to_string(le2_checks) + " failing; closure " +
                  (admissible ? std::string("admissible") : std::string("trend monotone: ") +
                                                                 (trend.verdict.pass ? "yes" : "no"));
    return res;
}

}  // namespace

CriterionResult Session::criterion(int id) {
    const auto t0 = Clock::now();
    CriterionResult res;
    switch (id) {
        case 1: res = c1_closed_form(cfg_); break;
        case 2: res = c2_int_le(cfg_); break;
        case 3: res = c3_int_ge(cfg_); break;
        case 4: res = c4_monotone(cfg_); break;
        case 5: res = c5_profiles(cfg_); break;
        case 6: res = c6_clm(cfg_); break;
        case 7:
        case 9: {
            if (!cache_->n4) cache_->n4 = degregorio_run(cfg_.solver, cfg_.solver.n);
            const auto& d = *cache_->n4;
            res.id = id;
            if (id == 7) {
                res.title = "De Gregorio mechanism run";
                mechanism_verdicts(d, cfg_, res);
                res.verdicts.push_back(runtime_verdict(d.seconds, cfg_.tol("c7.seconds")));
                res.artifacts.push_back({"diagnostics.csv", solver::diagnostics_csv(d.run.diag)});
            } else {
                res.title = "energy bound";
                res.verdicts.push_back(completion_verdict(d.run, cfg_.seed));
                energy_verdicts(d, cfg_, res);
            }
            res.abort_code = abort_code_of(d.run);
            break;
        }
        case 8: {
            auto d = degregorio_run(cfg_.solver, cfg_.solver.rate_n);
            res.id = 8;
            res.title = "blow-up rate";
            res.verdicts.push_back(completion_verdict(d.run, cfg_.seed));
            rate_verdicts(d, cfg_, res);
            res.artifacts.push_back({"diagnostics.csv", solver::diagnostics_csv(d.run.diag)});
            res.abort_code = abort_code_of(d.run);
            break;
        }
        case 10: res = c10_hw1(cfg_); break;
        case 11: res = c11_stretching(cfg_); break;
        case 12: res = c12_recursions(cfg_); break;
        default: throw ConfigError("no criterion " + std::to_string(id));
    }
    res.seconds = seconds_since(t0);
    res.artifacts.push_back({"verdicts.csv", verdicts_csv(res.verdicts)});
    char dir[8];
    std::snprintf(dir, sizeof dir, "c%02d/", id);
    for (auto& a : res.artifacts) a.name = dir + a.name;
    return res;
}

CriterionResult Session::solve1d() {
    const auto t0 = Clock::now();
    auto d = degregorio_run(cfg_.solver, cfg_.solver.n);
    CriterionResult res;
    res.title = "decomposed run";
    mechanism_verdicts(d, cfg_, res);
    energy_verdicts(d, cfg_, res);
    rate_verdicts(d, cfg_, res);
    res.abort_code = abort_code_of(d.run);
    res.artifacts.push_back({"diagnostics.csv", solver::diagnostics_csv(d.run.diag)});
    res.artifacts.push_back({"verdicts.csv", verdicts_csv(res.verdicts)});
    for (auto& a : res.artifacts) a.name = "solve1d/" + a.name;
    res.seconds = seconds_since(t0);
    return res;
}

json ExperimentReport::to_json() const {
    return {{"config", config},
            {"results", results},
            {"wall_clock", wall_clock},
            {"manifest", manifest},
            {"tool_version", tool_version},
            {"exit_code", exit_code}};
}

int aggregate_exit(const std::vector<CriterionResult>& results) {
    int code = kExitPass;
    for (const auto& r : results) {
        if (r.abort_code == kExitResolution) return kExitResolution;
        if (r.abort_code == kExitBootstrap) code = kExitBootstrap;
        else if (code == kExitPass && !r.pass()) code = kExitFail;
    }
    return code;
}

namespace {

void write_file(const fs::path& p, const std::string& content) {
    fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    out << content;
}

}  // namespace

ExperimentReport run(const ExperimentConfig& cfg) {
    const auto t0 = Clock::now();
    ExperimentReport rep;
    rep.config = cfg.to_json();
    Session session(cfg);
    auto guarded = [&](auto&& body, int id, const std::string& title) {
        try {
            rep.results.push_back(body());
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception& e) {
            CriterionResult r;
            r.id = id;
            r.title = title;
            r.abort_code = exit_code_for(e) == kExitFail ? 0 : exit_code_for(e);
            r.verdicts.push_back(make("error", -1.0, 0.0, cfg.seed, json::object(), e.what()));
            r.summary = e.what();
            rep.results.push_back(std::move(r));
        }
    };
    if (cfg.experiment == "solve1d") guarded([&] { return session.solve1d(); }, 0, "decomposed run");
    else
        for (int id : criteria_for(cfg.experiment))
            guarded([&] { return session.criterion(id); }, id, "criterion " + std::to_string(id));
    rep.exit_code = aggregate_exit(rep.results);
    rep.wall_clock = seconds_since(t0);
    if (!cfg.out_dir.empty()) write_outputs(rep, cfg.out_dir);
    return rep;
}

void write_outputs(ExperimentReport& rep, const std::string& out_dir) {
    const fs::path root(out_dir);
    rep.manifest.clear();
    for (const auto& r : rep.results)
        for (const auto& a : r.artifacts) {
            write_file(root / a.name, a.content);
            rep.manifest.push_back(a.name);
        }
    write_file(root / "config.json", rep.config.dump(2) + "\n");
    rep.manifest.push_back("config.json");
    rep.manifest.push_back("report.json");
    write_file(root / "report.json", rep.to_json().dump(2) + "\n");
}

// ---- sweeps -----------------------------------------------------------------------------------

std::vector<json> sweep_points(const ExperimentConfig& cfg) {
    std::vector<json> pts;
    if (cfg.sweep.is_null()) return pts;
    const json& s = cfg.sweep;
    for (const auto& [k, v] : s.items())
        if (k != "grid" && k != "points") throw ConfigError("unknown sweep key '" + k + "'");
    if (s.contains("grid") && s.contains("points")) throw ConfigError("sweep takes either grid or points");
    if (s.contains("points")) {
        if (!s["points"].is_array()) throw ConfigError("sweep.points must be an array");
        for (const auto& p : s["points"]) {
            if (!p.is_object()) throw ConfigError("sweep points must be objects");
            pts.push_back(p);
        }
    } else if (s.contains("grid")) {
        const json& g = s["grid"];
        if (!g.is_object()) throw ConfigError("sweep.grid must be an object");
        pts.push_back(json::object());
        for (const auto& [key, values] : g.items()) {  // nlohmann::json keeps keys sorted
            if (!values.is_array()) throw ConfigError("sweep.grid." + key + " must be an array");
            std::vector<json> next;
            for (const auto& p : pts)
                for (const auto& v : values) {
                    json q = p;
                    q[key] = v;
                    next.push_back(std::move(q));
                }
            pts = std::move(next);
        }
    }
    for (const auto& p : pts) with_overrides(cfg, p);  // validate every point up front
    return pts;
}

ExperimentConfig with_overrides(const ExperimentConfig& cfg, const json& point) {
    json j = cfg.to_json();
    j.erase("sweep");
    for (const auto& [key, v] : point.items()) {
        const auto dot = key.find('.');
        if (dot == std::string::npos) {
            if (key == "sweep" || key == "out_dir") throw ConfigError("sweep cannot override '" + key + "'");
            j[key] = v;
            continue;
        }
        const std::string section = key.substr(0, dot), field = key.substr(dot + 1);
        if (!j.contains(section) || !j[section].is_object())
            throw ConfigError("sweep override '" + key + "' names no section");
        j[section][field] = v;
    }
    return ExperimentConfig::from_json(j);
}

std::string SweepReport::csv() const {
    std::set<std::string> keys;
    for (const auto& r : rows)
        for (const auto& [k, v] : r.point.items()) keys.insert(k);
    std::string header = "run";
    for (const auto& k : keys) header += "," + k;
    header += ",verdicts,failed,min_margin,exit_code,note";
    CsvBuilder out(header);
    for (const auto& r : rows) {
        std::string line = std::to_string(r.index);
        for (const auto& k : keys) {
            line += ",";
            if (!r.point.contains(k)) continue;
            const auto& v = r.point[k];
            line += v.is_number() ? fmt(v.get<double>()) : v.dump();
        }
        std::string note = r.note;
        std::replace(note.begin(), note.end(), ',', ';');
        std::replace(note.begin(), note.end(), '\n', ' ');
        out.row(line, r.verdicts, r.failed, r.min_margin, r.exit_code, note);
    }
    return out.str();
}

json SweepReport::to_json() const {
    json rs = json::array();
    for (const auto& r : rows)
        rs.push_back({{"run", r.index},
                      {"point", r.point},
                      {"verdicts", r.verdicts},
                      {"failed", r.failed},
                      {"min_margin", r.min_margin},
                      {"exit_code", r.exit_code},
                      {"note", r.note}});
    return {{"rows", rs}, {"exit_code", exit_code}, {"tool_version", kToolVersion}};
}

SweepReport sweep(const ExperimentConfig& cfg, std::size_t jobs) {
    const auto pts = sweep_points(cfg);
    SweepReport rep;
    rep.rows.resize(pts.size());
    rep.runs.resize(pts.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (std::size_t i = next++; i < pts.size(); i = next++) {
            SweepRow& row = rep.rows[i];
            row.index = i;
            row.point = pts[i];
            try {
                auto c = with_overrides(cfg, pts[i]);
                if (!cfg.out_dir.empty()) {
                    char name[16];
                    std::snprintf(name, sizeof name, "run_%04zu", i);
                    c.out_dir = (fs::path(cfg.out_dir) / name).string();
                }
                rep.runs[i] = run(c);
                row.exit_code = rep.runs[i].exit_code;
                double m = 1e300;
                for (const auto& r : rep.runs[i].results)
                    for (const auto& v : r.verdicts) {
                        if (v.lemma == "runtime") continue;
                        ++row.verdicts;
                        if (!v.pass) ++row.failed;
                        m = std::min(m, v.margin);
                    }
                row.min_margin = row.verdicts ? m : 0.0;
            } catch (const std::exception& e) {
                row.exit_code = exit_code_for(e);
                row.note = e.what();
            }
        }
    };
    const std::size_t n_threads = std::max<std::size_t>(1, std::min(jobs, pts.size()));
    std::vector<std::thread> pool;
    for (std::size_t t = 1; t < n_threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    for (const auto& r : rep.rows)
        if (r.exit_code != kExitPass) rep.exit_code = kExitFail;
    if (!cfg.out_dir.empty()) {
        write_file(fs::path(cfg.out_dir) / "sweep.csv", rep.csv());
        write_file(fs::path(cfg.out_dir) / "sweep.json", rep.to_json().dump(2) + "\n");
    }
    return rep;
}

std::vector<json> read_reports(const std::string& dir) {
    std::vector<json> out;
    const fs::path root(dir);
    if (!fs::is_directory(root)) throw ConfigError("no such directory '" + dir + "'");
    std::vector<fs::path> files;
    if (fs::exists(root / "report.json")) files.push_back(root / "report.json");
    for (const auto& e : fs::directory_iterator(root))
        if (e.is_directory() && e.path().filename().string().rfind("run_", 0) == 0 &&
            fs::exists(e.path() / "report.json"))
            files.push_back(e.path() / "report.json");
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
        std::ifstream in(f);
        try {
            out.push_back(json::parse(in));
        } catch (const json::exception& e) {
            throw ConfigError(f.string() + ": " + e.what());
        }
    }
    return out;
}

}  // namespace blowup::experiment
