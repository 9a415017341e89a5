#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "blowup/cascade.hpp"
#include "blowup/core.hpp"
#include "blowup/profiles.hpp"

// dw/dt + a u dw/dx = w Hw,  du/dx = Hw,  u(0) = 0.

namespace blowup::solver {

enum class Backend { Monolithic, Decomposed };

/// How a run toward earlier times is carried out. SignedDt steps with dt < 0; Symmetry solves
/// the reflected problem v(x, s) = -w(x, -s) forward in s and maps back.
enum class Reversal { SignedDt, Symmetry };

struct SolverConfig {
    double a = 1.0;  // 0: CLM, 1: De Gregorio
    Backend backend = Backend::Monolithic;
    double t_start = 0.0;  // time of the data
    double t_end = -0.1;   // either side of t_start
    double cfl = 0.5;
    double max_dt = 1e-2;
    double tol = 1e-9;  // relative tolerance of the decomposed integrator
    double dealias_fraction = 2.0 / 3.0;  // <= 0 disables the filter
    bool periodic = false;                // monolithic: samples are one period
    std::size_t padding = 2;
    Reversal reversal = Reversal::SignedDt;
    double gap_floor = 1e-10;  // relative to sup|w|
    std::size_t n_log = 21;    // logged times, uniform in t (ignored when log_times is set)
    std::vector<double> log_times;
    std::size_t particles = 401;  // decomposed: labels per bump on the positive side
    double r = 0.2;
    double eps = 0.05;
    double dt_min = 1e-12;
    double sup_max = 1e12;

    void validate() const;
    /// Logged times ordered from t_start toward t_end.
    [[nodiscard]] std::vector<double> schedule() const;
};
void to_json(json& j, const SolverConfig& c);
/// Reads the keys of to_json; unknown keys throw ConfigError.
SolverConfig solver_config_from_json(const json& j);

/// Length of the window on which the bootstrap closes: a(A, b)/(1 - c(r) eps) with
/// b = (1 + c eps)/(1 - c eps).
double default_window(double A, double r, double eps);

// ---------------------------------------------------------------------------------------------
// Monolithic backend

struct MonolithicRun {
    std::vector<Field1D> snapshots;  // at the logged times that were reached
    std::vector<double> sup_w;
    std::vector<double> odd_deviation;  // max |w(x) + w(-x)| on symmetric grids, else 0
    std::string termination;
    bool completed = false;
    bool aborted = false;  // support reached the boundary band
    std::size_t steps = 0;
    double t_reached = 0.0;
};

/// Classical RK4 method of lines; Hilbert transform and derivative through the padded spectral
/// path (or the periodic one), 2/3-rule filter on the right-hand side,
/// dt = cfl * min(dx / (|a| max|u|), 1 / max|Hw|).
MonolithicRun solve_monolithic(const Field1D& w0, const SolverConfig& cfg);

// ---------------------------------------------------------------------------------------------
// Decomposed backend

/// One bump in its rescaled frame, carried by label particles on the positive side
/// (the profile is odd). Physical position of a frame point xi is scale * xi.
struct ProfileFrame {
    std::size_t k = 0;
    double t = 0.0;
    double x = 1.0;      // height x_{n,k}(t)
    double scale = 1.0;  // L_k = r^k (x_k / A^k)^a
    double h = 0.0;      // label spacing
    std::vector<double> xi, J, W, G;  // position, dxi/dlabel, value, dW/dlabel

    /// Odd extension, cubic Hermite between particles, zero outside the particle range.
    [[nodiscard]] double operator()(double s) const;
    [[nodiscard]] double derivative(double s) const;
    [[nodiscard]] double support_lo() const { return xi.front(); }
    [[nodiscard]] double support_hi() const { return xi.back(); }
    [[nodiscard]] double max_abs() const;
    /// W_k(s) for |s| off the support by Gauss-Legendre on the Hermite pieces; the PV case uses
    /// the particle sums.
    [[nodiscard]] double hilbert_at(double s) const;
};

struct RunRecord {
    double t = 0.0;
    double sup_w = 0.0;
    std::vector<double> x;           // heights from the height ODE
    std::vector<double> x_proxy;     // x_k max|W_k| / max|phi|
    std::vector<double> HW0;         // HW_{n,k}(0, t)
    std::vector<double> Hw_minus_0;  // sum_{j<k} x_j HW_j(0, t)
    std::vector<double> energy;      // E_{n,k}
    std::vector<double> support_lo, support_hi;
    std::vector<profiles::Interval> gaps;  // [(1+2r) L_{k+1}, (1-2r) L_k]
    std::vector<double> gap_sup;           // max |w| sampled on each gap
};

struct RunDiagnostics {
    std::vector<RunRecord> records;
    std::vector<std::string> warnings;
};
void to_json(json& j, const RunDiagnostics& d);
/// Columns t, sup_w, x_k..., Hw_minus_0_k..., E_k...
std::string diagnostics_csv(const RunDiagnostics& d);

struct DecomposedRun {
    std::vector<std::vector<ProfileFrame>> frames;  // [record][k]
    RunDiagnostics diag;
    std::string termination;
    bool completed = false;
    bool bootstrap_violation = false;
    std::size_t rhs_evaluations = 0;
    double A = 1.0, r = 0.2, a = 1.0;

    /// w(x) at a logged record from the frames.
    [[nodiscard]] double reconstruct(std::size_t record, double x) const;
    [[nodiscard]] Field1D sample(std::size_t record, double lo, double hi, std::size_t n) const;
};

/// Evolves every W_{n,k} in its own frame with the heights from
/// d/dt ln x_k = sum_{j<k} x_j HW_j(0). Interactions between disjoint bumps use moment series
/// (direct sums when the scale ratio is not small); self terms use odd-point and
/// corrected-trapezoid rules on the label grid.
DecomposedRun solve_decomposed(const profiles::MultiBumpData& data, const SolverConfig& cfg);

// ---------------------------------------------------------------------------------------------
// Diagnostics

struct Interaction {
    double Hw_minus_0 = 0.0;
    std::vector<double> HW0;  // HW_{n,j}(0, t), j < k, by quadrature of the frames
    double Hw_plus_sup = 0.0; // sup |Hw_+| over supp w_{n,k}
    double Hw_plus_bound = 0.0;  // C2(r, eps) x_{n,k}
    double max_HW0_deviation = 0.0;  // max_j |HW_j(0) - 1|
    double c_eps = 0.0;              // c(r) eps
    bool within_c_eps = false;
};
Interaction measure_interaction(const std::vector<ProfileFrame>& frames, std::size_t k, double r, double eps,
                                double A);

struct ProfileEnergy {
    double E = 0.0;
    double l1 = 0.0;             // ||W - phi||_1
    double l1_bound = 0.0;       // sqrt(32 r^3 / 3) sqrt(E)
    double sup_H = 0.0;          // sup |HW - H phi| on the particles
    double sup_H_bound = 0.0;    // 2 sqrt(E) sqrt(r / pi)
};
ProfileEnergy profile_energy(const ProfileFrame& frame, const profiles::BumpProfile& phi, double r,
                             bool with_sup = true);

struct RateFit {
    double min_product = 0.0;  // min over the window of max|w| |t|
    double max_product = 0.0;
    double C = 0.0;            // max(max_product, 1/min_product)
    std::size_t samples = 0;
    bool blowup = true;        // false when the product decays toward t = 0
    std::string note;
};
/// Uses the records with |t| in [t_lo, t_hi] (all nonzero times by default).
RateFit blowup_rate_fit(const RunDiagnostics& diag, double t_lo = 0.0, double t_hi = 1e300);

/// Envelope constants from the rate proof: upper (max phi + eps sqrt(r/3)) a / (1 - c eps),
/// lower e^{-C'} (max phi - eps sqrt(r/3)) / A with C' = (1 + c eps)/(A - 1).
struct RateEnvelope {
    double upper = 0.0;
    double lower = 0.0;
    double a = 0.0;
    double C_prime = 0.0;
};
RateEnvelope rate_envelope(double A, double r, double eps, double max_phi);

/// Heights of a run against the cascade driven by its own measured HW_j(0, t).
struct CascadeComparison {
    double max_rel_height = 0.0;     // heights vs cascade with measured coefficients
    double max_rel_log_rate = 0.0;   // finite-difference d/dt ln x_k vs sum x_j HW_j(0)
    double max_rel_proxy = 0.0;      // max-based heights vs ODE heights
};
CascadeComparison compare_with_cascade(const DecomposedRun& run);

struct RefinementReport {
    std::vector<std::size_t> n_values;
    std::vector<double> outer_height_change;  // between consecutive n, at t_end, max over shared k
    std::vector<double> l2_tail;              // sum_{j > 0} ||w_{n,j}||_2 at t = 0 per n
    std::vector<double> tail_ratio;           // ||w_j+1||/||w_j|| at t = 0
    std::vector<std::size_t> particle_values;
    std::vector<double> particle_change;      // heights at t_end between consecutive particle counts
    bool deterministic = false;               // repeated run bitwise identical
};
RefinementReport refinement_study(const std::vector<std::size_t>& n_values,
                                  const std::vector<std::size_t>& particle_values, double A,
                                  const profiles::BumpProfile& phi, const SolverConfig& cfg);

/// Writes config.json, diagnostics.csv, verdicts.json (and snapshots.csv when requested).
void write_run_directory(const std::string& dir, const SolverConfig& cfg, const DecomposedRun& run,
                         const std::vector<Verdict>& verdicts, bool snapshots = false);

}  // namespace blowup::solver
