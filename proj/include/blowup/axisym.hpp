#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "blowup/cascade.hpp"
#include "blowup/core.hpp"
#include "blowup/profiles.hpp"

namespace blowup::axisym {

struct AxisymConfig {
    double d = 0.05;
    double Z = 50.0;
    double A = 1.01;
    double alpha = 7.0 / 15.0;
    /// Drift in the positive-time recursion lemmas; closure_check derives its own value from c(d, Z).
    double beta = 0.0;
    double eps_s = 0.01;
    /// Window length; 0 means "derive from a_axisym(d, Z, A)".
    double a_cascade = 0.0;
    /// Hölder constant of the singular integral operator with the differentiated Biot-Savart
    /// kernel. The text never evaluates it, so it is an input here.
    double sio_constant = 1.0;

    void validate() const;
    static AxisymConfig from_json(const json& j);
    [[nodiscard]] json to_json() const;
};

/// Scalar vorticity w(r, z) of an axisymmetric no-swirl flow, given as an evaluator with a
/// support box r in [r_lo, r_hi] (r_lo > 0), |z| <= z_max (z_max may be +inf).
struct AxisymProfile {
    std::string name;
    std::function<double(double, double)> w;
    double r_lo = 0.0;
    double r_hi = 0.0;
    double z_max = 0.0;
    /// Positive heights where w(r, .) may lose smoothness, besides z = 0.
    std::vector<double> z_breaks;
    /// Radial breakpoints inside (r_lo, r_hi).
    std::vector<double> r_breaks;
    /// z-compression applied to the argument: value at (r, z) is w(r, K z).
    double K = 1.0;

    [[nodiscard]] double operator()(double r, double z) const { return w(r, K * z); }
    /// Samples on an nr x nz tensor grid over the support box (z clipped to +-z_clip).
    [[nodiscard]] std::string grid_csv(std::size_t nr, std::size_t nz, double z_clip) const;
    /// max |w(r,z) + w(r,-z)| / max |w| over a tensor grid.
    [[nodiscard]] double odd_defect(std::size_t nr = 33, std::size_t nz = 65) const;
};

/// phi(r) rho(z) |z|^{1/12} sgn z.
AxisymProfile initial_profile(const profiles::BumpProfile& phi, const profiles::BumpProfile& rho);
/// phi(r) |z|^{1/12} sgn z (no plateau cut-off; unbounded in z).
AxisymProfile normalized_profile(const profiles::BumpProfile& phi);

/// w(r/mu, z/mu), support scaled by mu.
AxisymProfile rescaled(const AxisymProfile& base, double mu);

/// Sum of three separable odd terms: radial mollifier bumps times either z e^{-(z/s)^2} or
/// rho_Z(z)|z|^{1/12} sgn z, with seeded centres, widths and amplitudes.
AxisymProfile random_odd_profile(std::uint64_t seed);

/// Diagonal distortion (r, z) -> (lambda_r r, lambda_z z) with 1/(1+d) <= lambda <= 1+d.
struct Distortion {
    std::function<double(double, double)> lambda_r;
    std::function<double(double, double)> lambda_z;
    double d = 0.0;
    std::string describe;

    static Distortion identity(double d);
    static Distortion constant(double d, double lr, double lz);
    /// Smooth random field: lambda = (1+d)^{s(r,z)}, s a normalized trigonometric sum in [-1, 1].
    /// Even seeds near the corners of the box are pinned to the extreme constants.
    static Distortion random(double d, std::uint64_t seed);
};

/// W(r, z) = r W0(X(r, z)) / X^r with X = (lambda_r r, lambda_z z).
AxisymProfile distorted(const AxisymProfile& base, const Distortion& dist);

struct KernelValue {
    double value = 0.0;
    double error = 0.0;  // difference between two refinement levels
    std::size_t evaluations = 0;
};

/// u^z(0, z) = -iint r^2 w(r, z') / (2((z - z')^2 + r^2)^{3/2}) dr dz'.
KernelValue axis_velocity_uz(const AxisymProfile& w, double z, double tol = 1e-10);

/// (3/2) iint_{r, z > 0} r^2 z w / (z^2 + r^2)^{5/2}; PreconditionError unless w is odd in z.
KernelValue stretching_rate(const AxisymProfile& w, double tol = 1e-11);
/// The half-plane form (3/4) iint_{r > 0, z in R}; equal to the above for odd w.
KernelValue stretching_rate_full(const AxisymProfile& w, double tol = 1e-11);

/// -1/2 d/dz u^z(0, 0) by a sixth-order central difference with step h.
double stretching_from_axis(const AxisymProfile& w, double h = 0.02);

struct BetaCheck {
    std::vector<double> r;
    std::vector<double> quadrature;
    std::vector<double> closed_form;  // (B/2) r^{-35/12}
    double max_rel_error = 0.0;
    /// Least-squares slope of log(quadrature) against log(r).
    double fitted_power = 0.0;
    Verdict verdict;
};

BetaCheck beta_identity_check(const std::vector<double>& r_values, double tol = 1e-8);

/// 2((1+d)^8 - 1)(1+d)^{35/6} / (3(1-d)^{35/6}) + 32(1+d)^{35/6} / (35 B Z^{35/12}).
double c_dz(double d, double Z);

struct Hw1Result {
    double K = 0.0;
    double value = 0.0;
    double error = 0.0;
    double target = 0.0;     // 2 K^{1/12} / 3
    double bound = 0.0;      // c(d, Z) K^{1/12}
    Verdict verdict;
};

/// iint r^2 z W(r, K z) / (z^2 + r^2)^{5/2} for W = distorted(phi rho |z|^{1/12} sgn z).
/// `tol` is the refinement tolerance relative to K^{1/12}; the bound it is judged against is O(c(d, Z)).
Hw1Result hw1_integral(const profiles::BumpProfile& phi, const profiles::BumpProfile& rho,
                       double K, const Distortion& dist, double tol = 1e-6);

struct WindowA {
    double c = 0.0;
    double b = 0.0;          // (2 + 3c)/(2 - 3c)
    double a_rescaled = 0.0; // fixed point of the rescaled cascade
    double a = 0.0;          // same window in the original time
    double bound = 0.0;      // 4(2 - 3c)(A - 1)/(2 - 15c), +inf when 15c >= 2
};

/// Window of Lemma xk+1-ge. The rescaled cascade runs on s = 5(2 - 3c)t/8; the window in t is
/// a_rescaled * 8 / (5(2 - 3c)). NumericalError when the fixed point does not exist.
WindowA a_axisym(double d, double Z, double A);

struct Cascade54Result {
    cascade::CascadeTrajectory traj;
    WindowA window;
    double max_transform_residual = 0.0;
    double min_ratio_margin = 0.0;  // min over levels/times of ln(x_{k+1} / (A e^{-2a} x_k))
    std::vector<Verdict> verdicts;
};

/// dx_k/dt / x_k = sum_{j<k} a_j(t) x_j^{5/4} / A^{j/4} with |a - 1| <= 3c(d, Z)/2.
/// Verdicts: transformed-level identity, x_{k+1} >= A e^{-2a} x_k on [-a, 0], and the a bound.
Cascade54Result cascade_5_4(const AxisymConfig& cfg, std::size_t n, const cascade::CoefficientSpec& coeffs,
                            std::size_t samples = 201);

// The remaining lemmas are stated for positive t = |time to blow-up|.

struct RecursionResult {
    std::vector<double> I;
    Verdict verdict;
};

/// I_{k+1} = A'(1 - e^{-I_k}) with A' = e^{(3-2 alpha) c / 4}; checks I0 >= c A'^{-n} e^{2/(1-2 alpha)} => I_n >= c.
RecursionResult recursion_int_ge2(double alpha, double c, double I0, std::size_t n);

struct TleResult {
    double t = 0.0;
    double lower = 0.0;
    double upper = 0.0;
    double t_plus = 0.0;
    Verdict verdict;
};

/// Root of c(t) A'(t)^{-n} e^{2/(1-2 alpha)} = t with A' = A e^{-beta t}, c = 4 ln A' / (3 - 2 alpha).
TleResult solve_t_le(double alpha, double beta, double A, std::size_t n);

double c_alpha_beta(double alpha, double beta);
double beta_max_t_le(double alpha);
double beta_max_int_le2(double alpha);

struct IntLe2Result {
    double upper_limit = 0.0;
    double integral = 0.0;
    double error = 0.0;
    double bound = 0.0;
    Verdict verdict;
};

/// Quadrature of int_0^U x_n^{1-alpha} A^{alpha n} dt, U = 16 e^{2/(1-2 alpha)} ln A / (12 + 3e).
IntLe2Result verify_int_le2(double alpha, double beta, double A, std::size_t n);

/// The recursion envelope on [0, U]: I_0 = t, I_{k+1} = A e^{-beta t}(1 - e^{-I_k}),
/// integral of (A^n e^{-sum I})^{1-alpha} A^{alpha n}. ln A is passed separately so A close to 1
/// keeps its digits.
quad::Estimate envelope_integral(double alpha, double beta, double A, double lnA, std::size_t n, double U);

struct ClosureReport {
    double d = 0.0, Z = 0.0, A = 0.0;
    double c = 0.0;
    double beta = 0.0;
    double beta_max = 0.0;            // 31 e^{-30} / 960
    double c_alpha_beta = 0.0;
    std::optional<WindowA> window;
    double T = 0.0;
    double holder_seminorm = 0.0;     // product-rule bound on |phi rho |z|^{1/12} sgn z / r|_{C^{1/12}}
    double max_phi_over_r = 0.0;
    double C_dz = 0.0;
    double C_minus = 0.0, C_plus = 0.0, C_plus0 = 0.0;
    double C_dZA = 0.0;
    double sio_constant = 1.0;
    double integral = 0.0;            // max_k of the envelope quadrature of int x^{2/3} A^{k/3}
    std::size_t worst_level = 0;
    double integral_bound = 0.0;      // closed form, when c(7/15, beta) > 15/8
    double lhs = 0.0;                 // C(d, Z, A) * integral
    double margin = 0.0;              // (1 + d) - lhs
    bool window_exists = false;
    bool beta_ok = false;
    bool inequality_holds = false;
    std::vector<std::string> failures;

    [[nodiscard]] bool closes() const { return window_exists && beta_ok && inequality_holds; }
    [[nodiscard]] json to_json() const;
};

/// Evaluates the closing inequality at one (d, Z, A). `levels` bounds the k used in the envelope.
ClosureReport closure_at(double d, double Z, double A, double sio_constant, std::size_t levels = 40);

struct ClosureSearch {
    ClosureReport at_start;                 // at cfg.A
    std::optional<ClosureReport> admissible;
    /// Largest A found where C(d, Z, A) * integral < 1 + d, hypotheses aside.
    std::optional<ClosureReport> inequality_at;
    std::vector<ClosureReport> trail;       // bisection steps, in order
    /// d below which beta = 6c/(2+3c) can meet 31 e^{-30}/960 even as Z -> inf.
    double d_required = 0.0;
    Verdict verdict;
    [[nodiscard]] json to_json() const;
};

/// Admissible-A search: decades then bisection on log(A - 1), from cfg.A - 1 down to 1e-12, for
/// the closing inequality; admissible when the window and beta hypotheses also hold.
ClosureSearch closure_check(const AxisymConfig& cfg);

struct MarginPoint {
    double d = 0.0, Z = 0.0, A = 0.0;
    double c = 0.0;
    double window_margin = 0.0;   // 2/15 - c: the a bound is finite
    double log_beta_margin = 0.0; // ln(beta_max / beta)
    std::optional<double> closing_margin;
};

struct MarginTrend {
    std::vector<MarginPoint> d_sweep, Z_sweep, A_sweep;
    bool d_monotone = false, Z_monotone = false, A_monotone = false;
    Verdict verdict;
    [[nodiscard]] json to_json() const;
};

/// Margins along d decreasing (Z fixed), Z increasing (d fixed) and A decreasing at a (d, Z)
/// where the window exists.
MarginTrend closure_margin_trend(const std::vector<double>& ds, double Z_fixed, const std::vector<double>& Zs,
                                 double d_fixed, const std::vector<double>& As, double d_for_A, double Z_for_A,
                                 double sio_constant);

/// CSV rows "name,input,value,error".
std::string kernel_csv(const std::vector<std::tuple<std::string, double, KernelValue>>& rows);

}  // namespace blowup::axisym
