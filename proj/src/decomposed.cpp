#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

#include "blowup/hilbert.hpp"
#include "blowup/ode.hpp"
#include "blowup/quadrature.hpp"
#include "blowup/solver.hpp"

namespace blowup::solver {

using profiles::BumpProfile;
using profiles::Interval;

namespace {

double c_of_r(double r) { return std::sqrt(32.0 * r * r * r / 3.0) / (kPi * (1.0 - 2.0 * r)); }

// Locates s in the sorted particle positions: index i with xi[i] <= s <= xi[i+1].
std::size_t bracket(const std::vector<double>& xi, double s) {
    auto it = std::upper_bound(xi.begin(), xi.end(), s);
    std::size_t i = it == xi.begin() ? 0 : static_cast<std::size_t>(it - xi.begin()) - 1;
    return std::min(i, xi.size() - 2);
}

// Self-interaction sums of one bump on its label grid (positive side, odd profile).
//   HW(xi_i)  = (1/pi)[2h sum_{j-i odd} g_j/(xi_i - xi_j) - h sum_j g_j/(xi_i + xi_j)],  g = W J
//   H(W')(xi_i) = (1/pi)[2h sum_{j-i odd} G_j/(xi_i - xi_j) + h sum_j G_j/(xi_i + xi_j)]
//   U(xi_i)   = (1/pi) int g(l) [ln|xi_i - xi(l)| - ln(xi_i + xi(l))] dl, punctured trapezoid with
//               the local correction h g_i [ln(h / 2 pi) + ln J_i]
struct SelfTerms {
    std::vector<double> HW, dHW, U;
};

void self_terms(std::size_t N, double h, const double* xi, const double* J, const double* W, const double* G,
                SelfTerms& out, bool with_velocity, bool with_derivative) {
    out.HW.assign(N, 0.0);
    if (with_derivative) out.dHW.assign(N, 0.0);
    if (with_velocity) out.U.assign(N, 0.0);
    std::vector<double> g(N);
    for (std::size_t j = 0; j < N; ++j) g[j] = W[j] * J[j];
    const double log_corr = std::log(h / (2.0 * kPi));
    for (std::size_t i = 0; i < N; ++i) {
        double s_odd = 0.0, s_ref = 0.0, d_odd = 0.0, d_ref = 0.0;
        for (std::size_t j = (i + 1) % 2; j < N; j += 2) {
            const double inv = 1.0 / (xi[i] - xi[j]);
            s_odd += g[j] * inv;
            if (with_derivative) d_odd += G[j] * inv;
        }
        for (std::size_t j = 0; j < N; ++j) {
            const double inv = 1.0 / (xi[i] + xi[j]);
            s_ref += g[j] * inv;
            if (with_derivative) d_ref += G[j] * inv;
        }
        out.HW[i] = (2.0 * h * s_odd - h * s_ref) / kPi;
        if (with_derivative) out.dHW[i] = (2.0 * h * d_odd + h * d_ref) / kPi;
    }
    if (with_velocity) {
        // symmetric kernel: each pair once
        for (std::size_t i = 0; i < N; ++i) {
            out.U[i] += g[i] * (log_corr + std::log(J[i])) - g[i] * std::log(2.0 * xi[i]);
            for (std::size_t j = i + 1; j < N; ++j) {
                const double k = std::log(std::abs(xi[i] - xi[j])) - std::log(xi[i] + xi[j]);
                out.U[i] += g[j] * k;
                out.U[j] += g[i] * k;
            }
        }
        for (auto& v : out.U) v *= h / kPi;
    }
}

double trapezoid_weight(std::size_t i, std::size_t N) { return (i == 0 || i + 1 == N) ? 0.5 : 1.0; }

constexpr std::size_t kMaxTerms = 60;

// Moments M(p) = int_0^inf W(y) y^p dy over the particles; odd p only.
struct Moments {
    std::vector<double> neg;  // neg[m] = M(-(2m+1))
    std::vector<double> pos;  // pos[m] = M(2m+1)
};

void moments(std::size_t N, double h, const double* xi, const double* J, const double* W, Moments& M) {
    M.neg.assign(kMaxTerms + 2, 0.0);
    M.pos.assign(kMaxTerms + 2, 0.0);
    for (std::size_t i = 0; i < N; ++i) {
        const double g = h * trapezoid_weight(i, N) * W[i] * J[i];
        if (g == 0.0) continue;
        const double inv = 1.0 / xi[i], inv2 = inv * inv, x2 = xi[i] * xi[i];
        double pn = g * inv, pp = g * xi[i];
        for (std::size_t m = 0; m < kMaxTerms + 2; ++m) {
            M.neg[m] += pn;
            M.pos[m] += pp;
            pn *= inv2;
            pp *= x2;
        }
    }
}

std::size_t terms_for(double q) {
    if (q <= 0.0) return 1;
    const double t = std::ceil(37.0 / (-2.0 * std::log(q))) + 2.0;
    return static_cast<std::size_t>(std::clamp(t, 1.0, static_cast<double>(kMaxTerms)));
}

constexpr double kSeriesLimit = 0.6;

class Engine {
public:
    Engine(const profiles::MultiBumpData& data, const SolverConfig& cfg)
        : nb_(data.n + 1), N_(cfg.particles), a_(cfg.a), A_(data.A), r_(data.r), phi_(data.phi) {
        // positive-side support of phi
        double plo = 1e300, phi_hi = 0.0;
        for (const auto& iv : phi_.support())
            if (iv.lo >= 0.0) {
                plo = std::min(plo, iv.lo);
                phi_hi = std::max(phi_hi, iv.hi);
            }
        if (!(plo < phi_hi)) throw PreconditionError("solve_decomposed: phi has no support on x > 0");
        lo_ = plo;
        hi_ = phi_hi;
        h_ = (hi_ - lo_) / static_cast<double>(N_ - 1);
        moments_.resize(nb_);
        self_.resize(nb_);
    }

    [[nodiscard]] std::size_t size() const { return 4 * N_ * nb_ + nb_; }
    [[nodiscard]] std::size_t nb() const { return nb_; }
    [[nodiscard]] std::size_t N() const { return N_; }
    [[nodiscard]] double h() const { return h_; }

    ode::State initial(const profiles::MultiBumpData& data) const {
        ode::State y(size());
        for (std::size_t k = 0; k < nb_; ++k) {
            for (std::size_t i = 0; i < N_; ++i) {
                const double al = lo_ + h_ * static_cast<double>(i);
                auto d = phi_.derivatives(al);
                y[xi_off(k) + i] = al;
                y[J_off(k) + i] = 1.0;
                y[W_off(k) + i] = d[0];
                y[G_off(k) + i] = d[1];
            }
            y[y_off(k)] = std::log(data.heights[k]);
            const double L = scale(k, y[y_off(k)]);
            if (std::abs(L - data.scales[k]) > 1e-10 * data.scales[k])
                throw PreconditionError("solve_decomposed: bump scales must equal r^k (x_k / A^k)^a");
        }
        return y;
    }

    [[nodiscard]] std::size_t xi_off(std::size_t k) const { return 4 * N_ * k; }
    [[nodiscard]] std::size_t J_off(std::size_t k) const { return 4 * N_ * k + N_; }
    [[nodiscard]] std::size_t W_off(std::size_t k) const { return 4 * N_ * k + 2 * N_; }
    [[nodiscard]] std::size_t G_off(std::size_t k) const { return 4 * N_ * k + 3 * N_; }
    [[nodiscard]] std::size_t y_off(std::size_t k) const { return 4 * N_ * nb_ + k; }

    [[nodiscard]] double scale(std::size_t k, double yk) const {
        const double kk = static_cast<double>(k);
        return std::pow(r_, kk) * std::exp(a_ * (yk - kk * std::log(A_)));
    }

    // HW_j(0) from the moment M(-1)
    [[nodiscard]] double hw0(std::span<const double> y, std::size_t j) const {
        double s = 0.0;
        const double* xi = &y[xi_off(j)];
        const double* J = &y[J_off(j)];
        const double* W = &y[W_off(j)];
        for (std::size_t i = 0; i < N_; ++i) s += trapezoid_weight(i, N_) * W[i] * J[i] / xi[i];
        return -2.0 / kPi * h_ * s;
    }

    void rhs(std::span<const double> y, std::span<double> dy) {
        ++evaluations;
        std::vector<double> x(nb_), L(nb_), H0(nb_);
        for (std::size_t k = 0; k < nb_; ++k) {
            x[k] = std::exp(y[y_off(k)]);
            L[k] = scale(k, y[y_off(k)]);
            moments(N_, h_, &y[xi_off(k)], &y[J_off(k)], &y[W_off(k)], moments_[k]);
            H0[k] = -2.0 / kPi * moments_[k].neg[0];
        }
        double drive = 0.0;
        for (std::size_t k = 0; k < nb_; ++k) {
            dy[y_off(k)] = drive;
            drive += x[k] * H0[k];
        }

        std::vector<double> v(N_), V(N_), dv(N_);
        for (std::size_t k = 0; k < nb_; ++k) {
            const double* xi = &y[xi_off(k)];
            const double* J = &y[J_off(k)];
            const double* W = &y[W_off(k)];
            const double* G = &y[G_off(k)];
            self_terms(N_, h_, xi, J, W, G, self_[k], true, true);
            for (std::size_t i = 0; i < N_; ++i) {
                v[i] = x[k] * self_[k].HW[i];
                V[i] = x[k] * self_[k].U[i];
                dv[i] = x[k] * self_[k].dHW[i];
            }
            for (std::size_t j = 0; j < nb_; ++j) {
                if (j == k) continue;
                add_cross(y, k, j, x, L, H0, v, V, dv);
            }
            double* dxi = &dy[xi_off(k)];
            double* dJ = &dy[J_off(k)];
            double* dW = &dy[W_off(k)];
            double* dG = &dy[G_off(k)];
            for (std::size_t i = 0; i < N_; ++i) {
                dxi[i] = a_ * V[i];
                dJ[i] = a_ * v[i] * J[i];
                dW[i] = v[i] * W[i];
                dG[i] = dv[i] * J[i] * W[i] + v[i] * G[i];
            }
        }
    }

    std::size_t evaluations = 0;
    std::size_t direct_fallbacks = 0;

private:
    // Contribution of bump j to v, V, dv/dxi on the particles of bump k.
    void add_cross(std::span<const double> y, std::size_t k, std::size_t j, const std::vector<double>& x,
                   const std::vector<double>& L, const std::vector<double>& H0, std::vector<double>& v,
                   std::vector<double>& V, std::vector<double>& dv) {
        const double* xk = &y[xi_off(k)];
        const double* xj = &y[xi_off(j)];
        const double rho = L[k] / L[j];  // s = rho * xi
        const double s_lo = rho * xk[0], s_hi = rho * xk[N_ - 1];
        const Moments& M = moments_[j];
        const double c = 2.0 / kPi;
        if (j < k) {
            const double q = s_hi / xj[0];
            if (q < kSeriesLimit) {
                const std::size_t T = terms_for(q);
                for (std::size_t i = 0; i < N_; ++i) {
                    const double s = rho * xk[i], s2 = s * s;
                    double Hd = 0.0, dHd = 0.0, Ud = 0.0, p = s2;  // p = s^{2m+2}
                    for (std::size_t m = 0; m < T; ++m) {
                        const double mm = static_cast<double>(m);
                        Hd += p * M.neg[m + 1];
                        dHd += (2.0 * mm + 2.0) * p / s * M.neg[m + 1];
                        Ud += p * s * M.neg[m + 1] / (2.0 * mm + 3.0);
                        p *= s2;
                    }
                    v[i] += x[j] * (-c * Hd);
                    dv[i] += x[j] * rho * (-c * dHd);
                    V[i] += x[j] / rho * (-c * Ud);
                }
                return;
            }
        } else {
            const double q = xj[N_ - 1] / s_lo;
            if (q < kSeriesLimit) {
                const std::size_t T = terms_for(q);
                for (std::size_t i = 0; i < N_; ++i) {
                    const double s = rho * xk[i], inv2 = 1.0 / (s * s);
                    double Hs = 0.0, dHs = 0.0, Us = 0.0, p = inv2;  // p = s^{-2m-2}
                    for (std::size_t m = 0; m < T; ++m) {
                        const double mm = static_cast<double>(m);
                        Hs += p * M.pos[m];
                        dHs -= (2.0 * mm + 2.0) * p / s * M.pos[m];
                        Us -= p * s * M.pos[m] / (2.0 * mm + 1.0);
                        p *= inv2;
                    }
                    v[i] += x[j] * c * Hs;
                    dv[i] += x[j] * rho * c * dHs;
                    V[i] += x[j] / rho * c * Us;
                }
                return;
            }
        }
        // direct sums over the particles of bump j (supports are disjoint)
        ++direct_fallbacks;
        const double* Jj = &y[J_off(j)];
        const double* Wj = &y[W_off(j)];
        for (std::size_t i = 0; i < N_; ++i) {
            const double s = rho * xk[i];
            double Hs = 0.0, dHs = 0.0, Us = 0.0;
            for (std::size_t l = 0; l < N_; ++l) {
                const double g = h_ * trapezoid_weight(l, N_) * Wj[l] * Jj[l];
                const double d = s * s - xj[l] * xj[l];
                Hs += g * 2.0 * xj[l] / d;
                dHs += g * (-4.0 * s * xj[l]) / (d * d);
                Us += g * std::log(std::abs((s - xj[l]) / (s + xj[l])));
            }
            Hs /= kPi;
            dHs /= kPi;
            Us /= kPi;
            if (j < k) {
                Hs -= H0[j];
                Us -= s * H0[j];
            }
            v[i] += x[j] * Hs;
            dv[i] += x[j] * rho * dHs;
            V[i] += x[j] / rho * Us;
        }
        (void)s_lo;
    }

    std::size_t nb_, N_;
    double a_, A_, r_;
    const BumpProfile& phi_;
    double lo_ = 0.0, hi_ = 0.0, h_ = 0.0;
    std::vector<Moments> moments_;
    std::vector<SelfTerms> self_;
};

struct BootstrapStop {
    double t;
    std::string what;
};

}  // namespace

// ---------------------------------------------------------------------------------------------
// ProfileFrame

double ProfileFrame::operator()(double s) const {
    const double sign = s < 0.0 ? -1.0 : 1.0;
    const double u = std::abs(s);
    if (xi.size() < 2 || u < xi.front() || u > xi.back()) return 0.0;
    const std::size_t i = bracket(xi, u);
    const double d = xi[i + 1] - xi[i], t = (u - xi[i]) / d;
    const double m0 = G[i] / J[i] * d, m1 = G[i + 1] / J[i + 1] * d;
    const double t2 = t * t, t3 = t2 * t;
    return sign * ((2 * t3 - 3 * t2 + 1) * W[i] + (t3 - 2 * t2 + t) * m0 + (-2 * t3 + 3 * t2) * W[i + 1] +
                   (t3 - t2) * m1);
}

double ProfileFrame::derivative(double s) const {
    const double u = std::abs(s);
    if (xi.size() < 2 || u < xi.front() || u > xi.back()) return 0.0;
    const std::size_t i = bracket(xi, u);
    const double d = xi[i + 1] - xi[i], t = (u - xi[i]) / d;
    const double m0 = G[i] / J[i] * d, m1 = G[i + 1] / J[i + 1] * d;
    const double t2 = t * t;
    return ((6 * t2 - 6 * t) * W[i] + (3 * t2 - 4 * t + 1) * m0 + (-6 * t2 + 6 * t) * W[i + 1] + (3 * t2 - 2 * t) * m1) /
           d;
}

double ProfileFrame::max_abs() const {
    double m = 0.0;
    for (double v : W) m = std::max(m, std::abs(v));
    return m;
}

double ProfileFrame::hilbert_at(double s) const {
    const double u = std::abs(s);
    if (u >= xi.front() && u <= xi.back())
        throw PreconditionError("ProfileFrame::hilbert_at: point inside the support");
    // HW(s) = (1/pi) int_0^inf W(y) 2y / (s^2 - y^2) dy, even in s
    const auto& rule = quad::gauss_legendre(6);
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < xi.size(); ++i) {
        const double a = xi[i], b = xi[i + 1], c = 0.5 * (a + b), hw = 0.5 * (b - a);
        for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
            const double yq = c + hw * rule.nodes[q];
            total += hw * rule.weights[q] * (*this)(yq) * 2.0 * yq / (u * u - yq * yq);
        }
    }
    return total / kPi;
}

// ---------------------------------------------------------------------------------------------
// Diagnostics helpers

namespace {

std::vector<ProfileFrame> frames_from_state(const Engine& eng, std::span<const double> y, double t, double r,
                                            double A, double a) {
    std::vector<ProfileFrame> out(eng.nb());
    const std::size_t N = eng.N();
    for (std::size_t k = 0; k < eng.nb(); ++k) {
        ProfileFrame& f = out[k];
        f.k = k;
        f.t = t;
        f.x = std::exp(y[eng.y_off(k)]);
        const double kk = static_cast<double>(k);
        f.scale = std::pow(r, kk) * std::pow(f.x / std::pow(A, kk), a);
        f.h = eng.h();
        f.xi.assign(&y[eng.xi_off(k)], &y[eng.xi_off(k)] + N);
        f.J.assign(&y[eng.J_off(k)], &y[eng.J_off(k)] + N);
        f.W.assign(&y[eng.W_off(k)], &y[eng.W_off(k)] + N);
        f.G.assign(&y[eng.G_off(k)], &y[eng.G_off(k)] + N);
    }
    return out;
}

double reconstruct_frames(const std::vector<ProfileFrame>& frames, double x) {
    double w = 0.0;
    for (const auto& f : frames) w += f.x * f(x / f.scale);
    return w;
}

double phi_max(const BumpProfile& phi) {
    double m = 0.0;
    for (const auto& iv : phi.support())
        for (int i = 0; i <= 400; ++i) m = std::max(m, std::abs(phi(iv.lo + iv.width() * i / 400.0)));
    return m;
}

RunRecord make_record(const std::vector<ProfileFrame>& frames, const BumpProfile& phi, double phimax, double r,
                      double t) {
    RunRecord rec;
    rec.t = t;
    const std::size_t nb = frames.size();
    double drive = 0.0;
    for (std::size_t k = 0; k < nb; ++k) {
        const auto& f = frames[k];
        rec.x.push_back(f.x);
        rec.x_proxy.push_back(f.x * f.max_abs() / phimax);
        double s = 0.0;
        for (std::size_t i = 0; i < f.xi.size(); ++i) s += trapezoid_weight(i, f.xi.size()) * f.W[i] * f.J[i] / f.xi[i];
        const double h0 = -2.0 / kPi * f.h * s;
        rec.HW0.push_back(h0);
        rec.Hw_minus_0.push_back(drive);
        drive += f.x * h0;
        rec.energy.push_back(profile_energy(f, phi, r, false).E);
        rec.support_lo.push_back(f.support_lo());
        rec.support_hi.push_back(f.support_hi());
        rec.sup_w = std::max(rec.sup_w, f.x * f.max_abs());
    }
    for (std::size_t k = 0; k + 1 < nb; ++k) {
        Interval g{(1.0 + 2.0 * r) * frames[k + 1].scale, (1.0 - 2.0 * r) * frames[k].scale};
        rec.gaps.push_back(g);
        double m = 0.0;
        if (g.hi > g.lo)
            for (int i = 0; i <= 64; ++i) m = std::max(m, std::abs(reconstruct_frames(frames, g.lo + g.width() * i / 64.0)));
        rec.gap_sup.push_back(m);
    }
    return rec;
}

}  // namespace

double DecomposedRun::reconstruct(std::size_t record, double x) const { return reconstruct_frames(frames.at(record), x); }

Field1D DecomposedRun::sample(std::size_t record, double lo, double hi, std::size_t n) const {
    Field1D f = Field1D::sample(lo, hi, n, [&](double x) { return reconstruct(record, x); });
    f.time = diag.records.at(record).t;
    return f;
}

DecomposedRun solve_decomposed(const profiles::MultiBumpData& data, const SolverConfig& cfg) {
    cfg.validate();
    if (data.heights.size() != data.n + 1 || data.scales.size() != data.n + 1)
        throw PreconditionError("solve_decomposed: inconsistent multi-bump data");
    if (std::abs(data.r - cfg.r) > 1e-15) throw PreconditionError("solve_decomposed: data.r differs from cfg.r");
    Engine eng(data, cfg);
    DecomposedRun run;
    run.A = data.A;
    run.r = data.r;
    run.a = cfg.a;
    const double r = data.r;
    const double phimax = phi_max(data.phi);
    const auto sched = cfg.schedule();
    std::size_t next = 0;
    std::vector<std::optional<double>> first_excess(eng.nb());
    std::vector<double> buf(eng.size());

    auto record = [&](std::span<const double> y, double t) {
        auto frames = frames_from_state(eng, y, t, r, data.A, cfg.a);
        auto rec = make_record(frames, data.phi, phimax, r, t);
        for (std::size_t k = 0; k < frames.size(); ++k)
            if (!first_excess[k] && rec.energy[k] > cfg.eps * cfg.eps) first_excess[k] = t;
        for (std::size_t k = 0; k < frames.size(); ++k)
            if (rec.x[k] > 0.0 && std::abs(rec.x_proxy[k] / rec.x[k] - 1.0) > 0.05) {
                const std::string w = "height proxy of bump " + std::to_string(k) + " deviates by more than 5%";
                if (std::find(run.diag.warnings.begin(), run.diag.warnings.end(), w) == run.diag.warnings.end())
                    run.diag.warnings.push_back(w);
            }
        run.frames.push_back(std::move(frames));
        run.diag.records.push_back(std::move(rec));
    };

    auto check_support = [&](std::span<const double> y, double t) {
        const std::size_t N = eng.N();
        for (std::size_t k = 0; k < eng.nb(); ++k) {
            const double lo = y[eng.xi_off(k)], hi = y[eng.xi_off(k) + N - 1];
            if (lo < 1.0 - 2.0 * r || hi > 1.0 + 2.0 * r)
                throw BootstrapStop{t, "support of W_" + std::to_string(k) + " left [1-2r, 1+2r]"};
        }
    };

    ode::State y0 = eng.initial(data);
    while (next < sched.size() && sched[next] == cfg.t_start) record(y0, sched[next++]);

    ode::Options opt;
    opt.rtol = cfg.tol;
    opt.atol = cfg.tol * 1e-3;
    opt.keep_segments = false;
    const bool fwd = cfg.t_end > cfg.t_start;
    opt.observer = [&](const ode::DenseSegment& seg) {
        while (next < sched.size() && (fwd ? sched[next] <= seg.t1 : sched[next] >= seg.t1)) {
            seg.eval(sched[next], buf);
            check_support(buf, sched[next]);
            record(buf, sched[next]);
            ++next;
        }
        seg.eval(seg.t1, buf);
        check_support(buf, seg.t1);
    };
    auto f = [&](double, std::span<const double> y, std::span<double> dy) { eng.rhs(y, dy); };
    try {
        auto sol = ode::dopri5(f, cfg.t_start, y0, cfg.t_end, opt);
        run.completed = sol.completed;
        run.termination = sol.completed ? "completed" : sol.failure;
    } catch (const BootstrapStop& stop) {
        run.completed = false;
        run.bootstrap_violation = true;
        run.termination = "bootstrap violation at t = " + format_double(stop.t) + ": " + stop.what;
    }
    run.rhs_evaluations = eng.evaluations;
    std::string excess;
    for (std::size_t k = 0; k < eng.nb(); ++k)
        if (first_excess[k]) excess += (excess.empty() ? "" : ", ") + std::to_string(k) + " (t = " + format_double(*first_excess[k]) + ")";
    if (!excess.empty()) run.diag.warnings.push_back("E_k exceeded eps^2 for k = " + excess);
    if (eng.direct_fallbacks > 0)
        run.diag.warnings.push_back("direct cross sums used " + std::to_string(eng.direct_fallbacks) + " times");
    return run;
}

// ---------------------------------------------------------------------------------------------

Interaction measure_interaction(const std::vector<ProfileFrame>& frames, std::size_t k, double r, double eps,
                                double A) {
    if (k >= frames.size()) throw PreconditionError("measure_interaction: no such bump");
    Interaction out;
    for (std::size_t j = 0; j < k; ++j) {
        const double h0 = frames[j].hilbert_at(0.0);
        out.HW0.push_back(h0);
        out.Hw_minus_0 += frames[j].x * h0;
    }
    for (const auto& f : frames) out.max_HW0_deviation = std::max(out.max_HW0_deviation, std::abs(f.hilbert_at(0.0) - 1.0));
    const auto& fk = frames[k];
    for (double s : fk.xi) {
        const double xphys = fk.scale * s;
        double hp = 0.0;
        for (std::size_t j = k + 1; j < frames.size(); ++j) hp += frames[j].x * frames[j].hilbert_at(xphys / frames[j].scale);
        out.Hw_plus_sup = std::max(out.Hw_plus_sup, std::abs(hp));
    }
    out.Hw_plus_bound = hilbert::interaction_constants(r, eps, A, hilbert::PhiNorms{}).C2 * fk.x;
    out.c_eps = c_of_r(r) * eps;
    out.within_c_eps = out.max_HW0_deviation <= out.c_eps;
    return out;
}

ProfileEnergy profile_energy(const ProfileFrame& f, const BumpProfile& phi, double r, bool with_sup) {
    ProfileEnergy e;
    const std::size_t N = f.xi.size();
    double sq = 0.0, l1 = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
        const double w = f.h * trapezoid_weight(i, N) * f.J[i];
        auto d = phi.derivatives(f.xi[i]);
        const double diff = f.G[i] / f.J[i] - d[1];
        sq += w * diff * diff;
        l1 += w * std::abs(f.W[i] - d[0]);
    }
    // phi outside the particle range (positive side)
    for (const auto& iv : phi.support()) {
        if (iv.hi <= 0.0) continue;
        auto add = [&](double a, double b) {
            if (!(b > a)) return;
            sq += quad::adaptive([&](double x) { double v = phi.derivative(x, 1); return v * v; }, a, b, 1e-12).value;
            l1 += quad::adaptive([&](double x) { return std::abs(phi(x)); }, a, b, 1e-12).value;
        };
        add(iv.lo, std::min(iv.hi, f.xi.front()));
        add(std::max(iv.lo, f.xi.back()), iv.hi);
    }
    e.E = 2.0 * sq;
    e.l1 = 2.0 * l1;
    e.l1_bound = std::sqrt(32.0 * r * r * r / 3.0) * std::sqrt(e.E);
    e.sup_H_bound = 2.0 * std::sqrt(e.E) * std::sqrt(r / kPi);
    if (with_sup) {
        SelfTerms st;
        self_terms(N, f.h, f.xi.data(), f.J.data(), f.W.data(), f.G.data(), st, false, false);
        for (std::size_t i = 0; i < N; ++i)
            e.sup_H = std::max(e.sup_H, std::abs(st.HW[i] - hilbert::hilbert_pv(phi, f.xi[i]).value));
    }
    return e;
}

RateFit blowup_rate_fit(const RunDiagnostics& diag, double t_lo, double t_hi) {
    RateFit fit;
    std::vector<double> lt, lw;
    fit.min_product = 1e300;
    for (const auto& rec : diag.records) {
        const double at = std::abs(rec.t);
        if (at == 0.0 || at < t_lo || at > t_hi) continue;
        const double p = rec.sup_w * at;
        fit.min_product = std::min(fit.min_product, p);
        fit.max_product = std::max(fit.max_product, p);
        lt.push_back(std::log(at));
        lw.push_back(std::log(rec.sup_w));
    }
    fit.samples = lt.size();
    if (fit.samples < 5) throw NumericalError("blowup_rate_fit: fewer than 5 time samples (insufficient data)");
    fit.C = std::max(fit.max_product, 1.0 / fit.min_product);
    // slope of ln sup|w| against ln |t|: -1 for the 1/|t| rate, 0 for no growth
    double mt = 0.0, mw = 0.0;
    for (std::size_t i = 0; i < lt.size(); ++i) {
        mt += lt[i];
        mw += lw[i];
    }
    mt /= static_cast<double>(lt.size());
    mw /= static_cast<double>(lw.size());
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < lt.size(); ++i) {
        num += (lt[i] - mt) * (lw[i] - mw);
        den += (lt[i] - mt) * (lt[i] - mt);
    }
    const double slope = den > 0.0 ? num / den : 0.0;
    fit.blowup = slope < -0.1;
    fit.note = "log-log slope of sup|w| against |t|: " + format_double(slope);
    if (!fit.blowup) fit.note += "; sup|w| does not grow toward t = 0 (no blow-up in this window)";
    return fit;
}

RateEnvelope rate_envelope(double A, double r, double eps, double max_phi) {
    RateEnvelope e;
    const double ce = c_of_r(r) * eps;
    const double dev = eps * std::sqrt(r / 3.0);
    e.a = cascade::fixed_point_a(A, (1.0 + ce) / (1.0 - ce));
    e.upper = (max_phi + dev) * e.a / (1.0 - ce);
    e.C_prime = (1.0 + ce) / (A - 1.0);
    e.lower = std::exp(-e.C_prime) * (max_phi - dev) / A;
    return e;
}

CascadeComparison compare_with_cascade(const DecomposedRun& run) {
    CascadeComparison out;
    const auto& recs = run.diag.records;
    if (recs.size() < 3) throw NumericalError("compare_with_cascade: fewer than 3 records");
    const std::size_t nb = recs.front().x.size();

    // measured coefficients, linear in t between records
    std::vector<double> ts;
    for (const auto& r : recs) ts.push_back(r.t);
    std::vector<std::size_t> order(ts.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return ts[x] < ts[y]; });
    std::vector<double> st;
    for (auto i : order) st.push_back(ts[i]);
    auto coeff = [&, order, st](std::size_t j, double t) {
        if (t <= st.front()) return recs[order.front()].HW0[j];
        if (t >= st.back()) return recs[order.back()].HW0[j];
        auto it = std::upper_bound(st.begin(), st.end(), t);
        const std::size_t b = static_cast<std::size_t>(it - st.begin()), a = b - 1;
        const double th = (t - st[a]) / (st[b] - st[a]);
        return (1.0 - th) * recs[order[a]].HW0[j] + th * recs[order[b]].HW0[j];
    };
    cascade::CascadeParams p;
    p.A = run.A;
    p.n_levels = nb;
    p.t_min = std::min(st.front(), -1e-12);
    p.coeffs.kind = cascade::CoefficientSpec::Kind::Measured;
    p.coeffs.measured = coeff;
    double lo = 1e300, hi = -1e300;
    for (const auto& r : recs)
        for (double c : r.HW0) {
            lo = std::min(lo, c);
            hi = std::max(hi, c);
        }
    p.coeff_lo = lo;
    p.coeff_hi = hi;
    p.rtol = 1e-11;
    std::vector<double> times;
    for (double t : st)
        if (t <= 0.0) times.push_back(t);
    auto traj = cascade::integrate_cascade(p, times);
    for (std::size_t i = 0; i < traj.times.size(); ++i) {
        const double t = traj.times[i];
        auto it = std::find(ts.begin(), ts.end(), t);
        const auto& rec = recs[static_cast<std::size_t>(it - ts.begin())];
        for (std::size_t k = 0; k < nb; ++k)
            out.max_rel_height = std::max(out.max_rel_height, std::abs(traj.x[i][k] / rec.x[k] - 1.0));
    }

    // d/dt ln x_k by centred differences against sum_j x_j HW_j(0) from frame quadrature
    for (std::size_t m = 1; m + 1 < order.size(); ++m) {
        const auto& a = recs[order[m - 1]];
        const auto& b = recs[order[m + 1]];
        const auto& c = recs[order[m]];
        const double ta = a.t, tb = b.t, tc = c.t;
        const auto& frames = run.frames[order[m]];
        for (std::size_t k = 1; k < nb; ++k) {
            // second-order difference on a possibly uneven stencil
            const double h1 = tc - ta, h2 = tb - tc;
            const double la = std::log(a.x[k]), lb = std::log(b.x[k]), lc = std::log(c.x[k]);
            const double meas = (h1 * h1 * (lb - lc) + h2 * h2 * (lc - la)) / (h1 * h2 * (h1 + h2));
            const auto inter = measure_interaction(frames, k, run.r, 0.05, run.A);
            const double pred = inter.Hw_minus_0;
            out.max_rel_log_rate = std::max(out.max_rel_log_rate, std::abs(meas - pred) / std::abs(pred));
        }
        (void)tc;
    }
    for (const auto& rec : recs)
        for (std::size_t k = 0; k < nb; ++k)
            out.max_rel_proxy = std::max(out.max_rel_proxy, std::abs(rec.x_proxy[k] / rec.x[k] - 1.0));
    return out;
}

RefinementReport refinement_study(const std::vector<std::size_t>& n_values,
                                  const std::vector<std::size_t>& particle_values, double A, const BumpProfile& phi,
                                  const SolverConfig& cfg) {
    RefinementReport rep;
    rep.n_values = n_values;
    rep.particle_values = particle_values;
    std::vector<DecomposedRun> runs;
    for (std::size_t n : n_values) runs.push_back(solve_decomposed(profiles::assemble_multibump(n, A, cfg.r, phi), cfg));

    auto frame_diff = [](const ProfileFrame& p, const ProfileFrame& q) {
        double m = 0.0, ref = 0.0;
        for (int i = 0; i <= 400; ++i) {
            const double s = 0.4 + 1.2 * i / 400.0;
            m = std::max(m, std::abs(p.x * p(s) - q.x * q(s)));
            ref = std::max(ref, std::abs(q.x * q(s)));
        }
        return m / ref;
    };
    for (std::size_t i = 0; i + 1 < runs.size(); ++i) {
        const auto& a = runs[i].frames.back();
        const auto& b = runs[i + 1].frames.back();
        double d = 0.0;
        for (std::size_t k = 0; k < std::min(a.size(), b.size()); ++k) d = std::max(d, frame_diff(b[k], a[k]));
        rep.outer_height_change.push_back(d);
    }
    if (!runs.empty()) {
        const auto& frames = runs.back().frames.back();
        std::vector<double> norms;
        for (const auto& f : frames) {
            double s = 0.0;
            const std::size_t N = f.xi.size();
            for (std::size_t i = 0; i < N; ++i) s += f.h * trapezoid_weight(i, N) * f.J[i] * f.W[i] * f.W[i];
            norms.push_back(f.x * std::sqrt(2.0 * s * f.scale));
        }
        for (std::size_t k = 0; k < norms.size(); ++k) {
            double tail = 0.0;
            for (std::size_t j = k + 1; j < norms.size(); ++j) tail += norms[j];
            rep.l2_tail.push_back(tail);
            if (k + 1 < norms.size()) rep.tail_ratio.push_back(norms[k + 1] / norms[k]);
        }
    }
    if (!n_values.empty()) {
        const std::size_t n = n_values.back();
        std::vector<DecomposedRun> pr;
        for (std::size_t N : particle_values) {
            SolverConfig c = cfg;
            c.particles = N;
            pr.push_back(solve_decomposed(profiles::assemble_multibump(n, A, cfg.r, phi), c));
        }
        for (std::size_t i = 0; i + 1 < pr.size(); ++i) {
            const auto& a = pr[i].frames.back();
            const auto& b = pr[i + 1].frames.back();
            double d = 0.0;
            for (std::size_t k = 0; k < std::min(a.size(), b.size()); ++k) d = std::max(d, frame_diff(b[k], a[k]));
            rep.particle_change.push_back(d);
        }
        auto again = solve_decomposed(profiles::assemble_multibump(n, A, cfg.r, phi), cfg);
        bool same = again.frames.size() == runs.back().frames.size();
        for (std::size_t i = 0; same && i < again.frames.size(); ++i)
            for (std::size_t k = 0; same && k < again.frames[i].size(); ++k) {
                const auto& p = again.frames[i][k];
                const auto& q = runs.back().frames[i][k];
                same = p.xi == q.xi && p.W == q.W && p.G == q.G && p.J == q.J && p.x == q.x;
            }
        rep.deterministic = same;
    }
    return rep;
}

// ---------------------------------------------------------------------------------------------

void to_json(json& j, const RunDiagnostics& d) {
    json recs = json::array();
    for (const auto& r : d.records) {
        json g = json::array();
        for (std::size_t i = 0; i < r.gaps.size(); ++i) g.push_back({{"lo", r.gaps[i].lo}, {"hi", r.gaps[i].hi}, {"sup_w", r.gap_sup[i]}});
        recs.push_back({{"t", r.t},
                        {"sup_w", r.sup_w},
                        {"x", r.x},
                        {"x_proxy", r.x_proxy},
                        {"HW0", r.HW0},
                        {"Hw_minus_0", r.Hw_minus_0},
                        {"E", r.energy},
                        {"support_lo", r.support_lo},
                        {"support_hi", r.support_hi},
                        {"gaps", g}});
    }
    j = {{"records", recs}, {"warnings", d.warnings}};
}

std::string diagnostics_csv(const RunDiagnostics& d) {
    std::ostringstream os;
    const std::size_t nb = d.records.empty() ? 0 : d.records.front().x.size();
    os << "t,sup_w";
    for (std::size_t k = 0; k < nb; ++k) os << ",x_" << k;
    for (std::size_t k = 0; k < nb; ++k) os << ",Hw_minus_0_" << k;
    for (std::size_t k = 0; k < nb; ++k) os << ",E_" << k;
    os << '\n';
    for (const auto& r : d.records) {
        os << format_double(r.t) << ',' << format_double(r.sup_w);
        for (double v : r.x) os << ',' << format_double(v);
        for (double v : r.Hw_minus_0) os << ',' << format_double(v);
        for (double v : r.energy) os << ',' << format_double(v);
        os << '\n';
    }
    return os.str();
}

void write_run_directory(const std::string& dir, const SolverConfig& cfg, const DecomposedRun& run,
                         const std::vector<Verdict>& verdicts, bool snapshots) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    json c = cfg;
    c["termination"] = run.termination;
    c["completed"] = run.completed;
    c["bootstrap_violation"] = run.bootstrap_violation;
    c["A"] = run.A;
    c["warnings"] = run.diag.warnings;
    std::ofstream(fs::path(dir) / "config.json") << c.dump(2) << '\n';
    std::ofstream(fs::path(dir) / "diagnostics.csv") << diagnostics_csv(run.diag);
    std::ofstream(fs::path(dir) / "verdicts.json") << json(verdicts).dump(2) << '\n';
    if (snapshots) {
        std::ofstream os(fs::path(dir) / "snapshots.csv");
        os << "t,x,w\n";
        for (std::size_t i = 0; i < run.frames.size(); ++i) {
            const double t = run.diag.records[i].t;
            for (int m = 0; m <= 800; ++m) {
                const double x = 1.5 * m / 800.0;
                os << format_double(t) << ',' << format_double(x) << ',' << format_double(run.reconstruct(i, x)) << '\n';
            }
        }
    }
}

}  // namespace blowup::solver
