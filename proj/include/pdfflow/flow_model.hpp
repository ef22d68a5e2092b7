#pragma once

/* Flow statistics and the coefficients of the velocity-PDF equation.
 *
 * A flow is described by its conditional average increment rho(x, y, u, t)
 * and conditional covariance sigma(x, y, u, t). From them:
 *
 *   b     = rho + u
 *   B^i_k = d rho^i / d y^k            at y = x
 *   A^i   = Laplacian_y rho^i          at y = x
 *   Q^i   = int (y-x)^i / (4 pi |y-x|^3) d_j d_k (sigma^jk + b^j b^k) dy
 *   C^i   = nu d B^i_k / d x^k - nu A^i + Q^i
 */

#include "pdfflow/quadrature.hpp"
#include "pdfflow/types.hpp"

#include <Eigen/Eigenvalues>

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace pdfflow {

enum class StatisticsClass { general, weakly_homogeneous, weakly_isotropic };
enum class Regime { general, weakly_homogeneous, weakly_isotropic, inviscid };

inline std::string to_string(StatisticsClass c)
{
    switch (c) {
    case StatisticsClass::general: return "general";
    case StatisticsClass::weakly_homogeneous: return "weakly_homogeneous";
    case StatisticsClass::weakly_isotropic: return "weakly_isotropic";
    }
    return "general";
}

inline std::string to_string(Regime r)
{
    switch (r) {
    case Regime::general: return "general";
    case Regime::weakly_homogeneous: return "weakly_homogeneous";
    case Regime::weakly_isotropic: return "weakly_isotropic";
    case Regime::inviscid: return "inviscid";
    }
    return "general";
}

inline Regime parse_regime(const std::string& s)
{
    if (s == "general") return Regime::general;
    if (s == "weakly_homogeneous") return Regime::weakly_homogeneous;
    if (s == "weakly_isotropic") return Regime::weakly_isotropic;
    if (s == "inviscid") return Regime::inviscid;
    throw ConfigError("unknown regime '" + s + "'");
}

using RhoFn = std::function<Vec3(const Vec3& x, const Vec3& y, const Vec3& u, double t)>;
using SigmaFn = std::function<Mat3(const Vec3& x, const Vec3& y, const Vec3& u, double t)>;

struct ConditionalStatistics {
    std::string name;
    RhoFn rho;
    SigmaFn sigma;
    StatisticsClass claimed_class = StatisticsClass::general;
    bool rho_is_zero = false;  // symbolic zero: B and A short-circuit to exact zeros
};

/// A vector field C(x, u, t) together with its u-divergence.
struct DriftField {
    std::string name;
    std::function<Vec3(const Vec3& x, const Vec3& u, double t)> value;
    std::function<double(const Vec3& x, const Vec3& u, double t)> divergence;  // optional
    bool identically_zero = false;
    bool x_independent = false;

    Vec3 operator()(const Vec3& x, const Vec3& u, double t) const
    {
        if (identically_zero)
            return Vec3::Zero();
        return value(x, u, t);
    }

    /// d C^k / d u^k, analytic when supplied, else central differences in u.
    double divergence_u(const Vec3& x, const Vec3& u, double t) const
    {
        if (identically_zero)
            return 0.0;
        if (divergence)
            return divergence(x, u, t);
        const double h = 1e-5 * (1.0 + u.norm());
        double div = 0.0;
        for (int k = 0; k < 3; ++k) {
            const Vec3 e = h * unit(k);
            div += (value(x, u + e, t)[k] - value(x, u - e, t)[k]) / (2.0 * h);
        }
        return div;
    }
};

inline DriftField zero_drift()
{
    DriftField d;
    d.name = "zero";
    d.value = [](const Vec3&, const Vec3&, double) -> Vec3 { return Vec3::Zero(); };
    d.divergence = [](const Vec3&, const Vec3&, double) { return 0.0; };
    d.identically_zero = true;
    d.x_independent = true;
    return d;
}

/// C = -k u: isotropic linear damping, u-divergence -3k.
inline DriftField damping_drift(double k)
{
    DriftField d;
    d.name = "damping";
    d.value = [k](const Vec3&, const Vec3& u, double) -> Vec3 { return -k * u; };
    d.divergence = [k](const Vec3&, const Vec3&, double) { return -3.0 * k; };
    d.x_independent = true;
    return d;
}

/// Positivity-free initial density p0(u; x) with its claimed decay exponent.
struct InitialDensity {
    std::string name;
    std::function<double(const Vec3& u, const Vec3& x)> p0;
    double decay_exponent = 1.0;
    bool x_independent = false;

    double operator()(const Vec3& u, const Vec3& x) const { return p0(u, x); }
};

/// The derived coefficients at (x, u, t). B, A and Q are absent when the flow
/// supplies C directly.
struct CoefficientField {
    Vec3 x = Vec3::Zero();
    Vec3 u = Vec3::Zero();
    double t = 0.0;
    std::optional<Mat3> B;
    std::optional<Vec3> A;
    std::optional<Vec3> Q;
    std::optional<Vec3> div_B;  // d B^i_k / d x^k
    Vec3 C = Vec3::Zero();
    bool q_converged = true;
};

/// Default finite-difference step, relative to the coordinate magnitudes.
inline double fd_step(const Vec3& x, const Vec3& u)
{
    return 1e-4 * (1.0 + x.norm() + u.norm());
}

namespace detail {

inline void require_finite(const Vec3& v, const char* what, const Vec3& x, const Vec3& u, double t)
{
    if (!v.allFinite())
        throw NumericError(std::string(what) + " is not finite at x=" + format_vec(x) +
                           " u=" + format_vec(u) + " t=" + std::to_string(t));
}

inline void require_finite(const Mat3& m, const char* what, const Vec3& x, const Vec3& u, double t)
{
    if (!m.allFinite())
        throw NumericError(std::string(what) + " is not finite at x=" + format_vec(x) +
                           " u=" + format_vec(u) + " t=" + std::to_string(t));
}

inline void check_step(double h)
{
    if (!(h >= 1e-12))
        throw DomainError("finite-difference step underflow (h = " + std::to_string(h) + ")");
}

} // namespace detail

/// Conditional mean b = rho + u.
inline Vec3 eval_b(const ConditionalStatistics& stats, const Vec3& x, const Vec3& y, const Vec3& u,
                   double t)
{
    if (stats.rho_is_zero)
        return u;
    const Vec3 r = stats.rho(x, y, u, t);
    detail::require_finite(r, "rho", x, u, t);
    return r + u;
}

/// B^i_k = d rho^i / d y^k at y = x; column k holds the derivative along e_k.
inline Mat3 eval_B(const ConditionalStatistics& stats, const Vec3& x, const Vec3& u, double t,
                   std::optional<double> step = std::nullopt)
{
    if (stats.rho_is_zero)
        return Mat3::Zero();
    const double h = step.value_or(fd_step(x, u));
    detail::check_step(h);
    Mat3 B;
    for (int k = 0; k < 3; ++k) {
        const Vec3 e = h * unit(k);
        const Vec3 col = (stats.rho(x, Vec3(x + e), u, t) - stats.rho(x, Vec3(x - e), u, t)) / (2.0 * h);
        B.col(k) = col;
    }
    detail::require_finite(B, "B", x, u, t);
    return B;
}

/// A^i = sum_k d^2 rho^i / d (y^k)^2 at y = x.
inline Vec3 eval_A(const ConditionalStatistics& stats, const Vec3& x, const Vec3& u, double t,
                   std::optional<double> step = std::nullopt)
{
    if (stats.rho_is_zero)
        return Vec3::Zero();
    const double h = step.value_or(fd_step(x, u));
    detail::check_step(h);
    const Vec3 centre = stats.rho(x, x, u, t);
    Vec3 A = Vec3::Zero();
    for (int k = 0; k < 3; ++k) {
        const Vec3 e = h * unit(k);
        A += (stats.rho(x, Vec3(x + e), u, t) - 2.0 * centre + stats.rho(x, Vec3(x - e), u, t)) / (h * h);
    }
    detail::require_finite(A, "A", x, u, t);
    return A;
}

/// T^{jk}(d) = sigma^{jk} + b^j b^k at y = x + d.
inline Mat3 second_moment_tensor(const ConditionalStatistics& stats, const Vec3& x, const Vec3& d,
                                 const Vec3& u, double t)
{
    const Vec3 y = x + d;
    const Vec3 b = eval_b(stats, x, y, u, t);
    const Mat3 s = stats.sigma(x, y, u, t);
    return s + b * b.transpose();
}

/// Q at (x, u, t). The convergence flag is only meaningful with quad.check_radius.
inline SingularIntegral eval_Q_detail(const ConditionalStatistics& stats, const Vec3& x,
                                      const Vec3& u, double t, const QuadratureConfig& quad)
{
    const double h = quad.stencil_step * (1.0 + x.norm() + u.norm());
    auto tensor = [&](const Vec3& d) -> Mat3 { return second_moment_tensor(stats, x, d, u, t); };
    SingularIntegral r = singular_kernel_integral(tensor, quad, h);
    detail::require_finite(r.value, "Q", x, u, t);
    return r;
}

inline Vec3 eval_Q(const ConditionalStatistics& stats, const Vec3& x, const Vec3& u, double t,
                   const QuadratureConfig& quad = {})
{
    return eval_Q_detail(stats, x, u, t, quad).value;
}

/// Divergence in x of the rows of B: sum_k d B^i_k / d x^k.
inline Vec3 eval_div_B(const ConditionalStatistics& stats, const Vec3& x, const Vec3& u, double t)
{
    if (stats.rho_is_zero)
        return Vec3::Zero();
    const double h_in = fd_step(x, u);
    const double h_out = 10.0 * h_in;
    Vec3 div = Vec3::Zero();
    for (int k = 0; k < 3; ++k) {
        const Vec3 e = h_out * unit(k);
        const Mat3 Bp = eval_B(stats, Vec3(x + e), u, t, h_in);
        const Mat3 Bm = eval_B(stats, Vec3(x - e), u, t, h_in);
        div += (Bp.col(k) - Bm.col(k)) / (2.0 * h_out);
    }
    return div;
}

// ---------------------------------------------------------------------------

struct FlowSpec {
    std::string name;
    double viscosity = 1.0;
    Regime regime = Regime::weakly_homogeneous;
    std::optional<ConditionalStatistics> statistics;
    // Directly supplied C (or Q when inviscid). Takes precedence in estimators.
    std::optional<DriftField> drift;

    void validate() const
    {
        if (!(viscosity >= 0.0))
            throw ConfigError("viscosity must be non-negative");
        if (regime == Regime::inviscid && viscosity != 0.0)
            throw ConfigError("regime 'inviscid' requires viscosity 0 (got " +
                              std::to_string(viscosity) + ")");
        if (!statistics && !drift)
            throw ConfigError("flow '" + name + "' has neither statistics nor a drift field");
        if (regime == Regime::weakly_isotropic && drift && !drift->identically_zero) {
            // C must ignore x: probe a few points.
            const Vec3 us[] = {Vec3(0.3, -0.2, 0.5), Vec3(-1.0, 0.7, 0.1)};
            const Vec3 xs[] = {Vec3(0, 0, 0), Vec3(1.5, -2.0, 0.25), Vec3(-3.0, 0.5, 4.0)};
            for (const Vec3& u : us) {
                for (double t : {0.0, 0.7}) {
                    const Vec3 ref = (*drift)(xs[0], u, t);
                    for (const Vec3& x : xs) {
                        if (((*drift)(x, u, t) - ref).cwiseAbs().maxCoeff() >
                            1e-12 * (1.0 + ref.norm()))
                            throw ConfigError("regime 'weakly_isotropic' requires C independent of x");
                    }
                }
            }
        }
    }
};

/// Assembles B, A, Q and C at (x, u, t).
inline CoefficientField eval_C(const FlowSpec& flow, const Vec3& x, const Vec3& u, double t,
                               const QuadratureConfig& quad = {})
{
    CoefficientField f;
    f.x = x;
    f.u = u;
    f.t = t;
    if (!flow.statistics) {
        if (!flow.drift)
            throw ConfigError("flow has no statistics and no drift");
        f.C = (*flow.drift)(x, u, t);
        detail::require_finite(f.C, "C", x, u, t);
        return f;
    }
    const ConditionalStatistics& s = *flow.statistics;
    const double nu = flow.viscosity;
    f.B = eval_B(s, x, u, t);
    f.A = eval_A(s, x, u, t);
    const SingularIntegral q = eval_Q_detail(s, x, u, t, quad);
    f.Q = q.value;
    f.q_converged = q.converged;
    f.div_B = (nu == 0.0) ? Vec3::Zero() : eval_div_B(s, x, u, t);
    f.C = nu * (*f.div_B) - nu * (*f.A) + *f.Q;
    return f;
}

/// C built from the statistics on every call (expensive: one kernel integral
/// per evaluation).
inline DriftField drift_from_statistics(const FlowSpec& flow, QuadratureConfig quad)
{
    DriftField d;
    d.name = flow.name + "/statistics";
    FlowSpec copy = flow;
    copy.drift.reset();
    d.value = [copy, quad](const Vec3& x, const Vec3& u, double t) -> Vec3 {
        return eval_C(copy, x, u, t, quad).C;
    };
    return d;
}

/// The drift used by the estimators: the supplied field if any, else C from
/// the statistics.
inline DriftField effective_drift(const FlowSpec& flow, const QuadratureConfig& quad = {})
{
    if (flow.drift)
        return *flow.drift;
    return drift_from_statistics(flow, quad);
}

// ---------------------------------------------------------------------------

struct DiffusionReport {
    Mat6 D = Mat6::Zero();
    bool symmetric = true;
    bool psd = true;
    double asymmetry = 0.0;                      // max |D - D^T|
    Eigen::Matrix<double, 6, 1> eigenvalues;     // of the symmetric part, ascending
};

/// Second-order coefficient matrix over (u, x): [[0, nu B], [nu B, nu I]].
/// Positive semi-definiteness refers to the quadratic form, i.e. to the
/// eigenvalues of (D + D^T) / 2.
inline DiffusionReport diffusion_matrix(const Mat3& B, double nu)
{
    DiffusionReport r;
    r.D.setZero();
    r.D.block<3, 3>(0, 3) = nu * B;
    r.D.block<3, 3>(3, 0) = nu * B;
    r.D.block<3, 3>(3, 3) = nu * Mat3::Identity();
    r.asymmetry = (r.D - r.D.transpose()).cwiseAbs().maxCoeff();
    r.symmetric = r.asymmetry < 1e-12;
    const Mat6 sym = 0.5 * (r.D + r.D.transpose());
    Eigen::SelfAdjointEigenSolver<Mat6> solver(sym, Eigen::EigenvaluesOnly);
    r.eigenvalues = solver.eigenvalues();
    r.psd = r.eigenvalues.minCoeff() >= -1e-10;
    return r;
}

// ---------------------------------------------------------------------------

struct SamplePoint {
    Vec3 x;
    Vec3 y;
    Vec3 u;
    double t;
};

struct ClassificationReport {
    StatisticsClass tag = StatisticsClass::general;
    double tol = 0.0;

    bool weakly_homogeneous = false;
    double max_abs_B = 0.0;

    bool weakly_isotropic = false;
    double rho_rotation_deviation = 0.0;
    double sigma_rotation_deviation = 0.0;
    double A_x_variation = 0.0;

    bool divergence_free = false;
    double max_div_rho = 0.0;        // |d rho^i / d y^i| at the sampled y
    double max_trace_B = 0.0;
    double max_A_contracted = 0.0;   // max_k |sum_i A^i_ik|

    // Largest |(B,A)(p) - (B,A)(p')| / (|x - x'| + |u - u'|) over sample pairs.
    // A probe of the Lipschitz assumption on the sample set, not a proof.
    double lipschitz_probe = 0.0;

    std::vector<std::string> notes;
};

namespace detail {

inline Mat3 axis_rotation(const Vec3& axis, double angle)
{
    return Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
}

inline const std::vector<Mat3>& probe_rotations()
{
    static const std::vector<Mat3> rots = {
        axis_rotation(Vec3(0, 0, 1), 0.9),
        axis_rotation(Vec3(1, 0, 0), 2.1),
        axis_rotation(Vec3(1, 1, 0), 1.3),
        axis_rotation(Vec3(0.3, -0.5, 0.8), 2.7),
    };
    return rots;
}

} // namespace detail

/// Samples weak homogeneity, weak isotropy and the divergence-free identities.
inline ClassificationReport classify_flow(const ConditionalStatistics& stats,
                                          const std::vector<SamplePoint>& samples, double tol)
{
    if (samples.empty())
        throw DomainError("classify_flow needs at least one sample point");
    ClassificationReport rep;
    rep.tol = tol;

    std::vector<Mat3> Bs;
    std::vector<Vec3> As;
    const Vec3 x_shifts[] = {Vec3(0.37, -0.21, 0.5), Vec3(-1.1, 0.8, -0.3)};

    for (const SamplePoint& p : samples) {
        const Mat3 B = eval_B(stats, p.x, p.u, p.t);
        const Vec3 A = eval_A(stats, p.x, p.u, p.t);
        Bs.push_back(B);
        As.push_back(A);
        rep.max_abs_B = std::max(rep.max_abs_B, B.cwiseAbs().maxCoeff());
        rep.max_trace_B = std::max(rep.max_trace_B, std::abs(B.trace()));

        // Rotations of y - x about x.
        const Vec3 r0 = stats.rho(p.x, p.y, p.u, p.t);
        const Mat3 s0 = stats.sigma(p.x, p.y, p.u, p.t);
        for (const Mat3& R : detail::probe_rotations()) {
            const Vec3 yr = p.x + R * (p.y - p.x);
            rep.rho_rotation_deviation = std::max(
                rep.rho_rotation_deviation, (stats.rho(p.x, yr, p.u, p.t) - r0).cwiseAbs().maxCoeff());
            rep.sigma_rotation_deviation =
                std::max(rep.sigma_rotation_deviation,
                         (stats.sigma(p.x, yr, p.u, p.t) - s0).cwiseAbs().maxCoeff());
        }
        for (const Vec3& dx : x_shifts) {
            const Vec3 A2 = eval_A(stats, Vec3(p.x + dx), p.u, p.t);
            rep.A_x_variation = std::max(rep.A_x_variation, (A2 - A).cwiseAbs().maxCoeff());
        }

        // d rho^i / d y^i at the sampled y.
        if (!stats.rho_is_zero) {
            const double h = fd_step(p.y, p.u);
            double div = 0.0;
            for (int i = 0; i < 3; ++i) {
                const Vec3 e = h * unit(i);
                div += (stats.rho(p.x, Vec3(p.y + e), p.u, p.t)[i] -
                        stats.rho(p.x, Vec3(p.y - e), p.u, p.t)[i]) /
                       (2.0 * h);
            }
            rep.max_div_rho = std::max(rep.max_div_rho, std::abs(div));

            // sum_i A^i_ik = sum_i d^2 rho^i / dy^i dy^k at y = x.
            const double hh = 10.0 * fd_step(p.x, p.u);
            for (int k = 0; k < 3; ++k) {
                double s = 0.0;
                for (int i = 0; i < 3; ++i) {
                    auto component = [&, i](const Vec3& y) { return stats.rho(p.x, y, p.u, p.t)[i]; };
                    s += central_second_mixed(component, p.x, i, k, hh);
                }
                rep.max_A_contracted = std::max(rep.max_A_contracted, std::abs(s));
            }
        }
    }

    for (std::size_t a = 0; a < samples.size(); ++a) {
        for (std::size_t b = a + 1; b < samples.size(); ++b) {
            const double dist = (samples[a].x - samples[b].x).norm() + (samples[a].u - samples[b].u).norm();
            if (dist <= 1e-12)
                continue;
            const double diff = std::max((Bs[a] - Bs[b]).cwiseAbs().maxCoeff(),
                                         (As[a] - As[b]).cwiseAbs().maxCoeff());
            rep.lipschitz_probe = std::max(rep.lipschitz_probe, diff / dist);
        }
    }

    rep.weakly_homogeneous = rep.max_abs_B <= tol;
    rep.weakly_isotropic = rep.rho_rotation_deviation <= tol && rep.sigma_rotation_deviation <= tol &&
                           rep.A_x_variation <= tol;
    rep.divergence_free = rep.max_div_rho <= tol && rep.max_trace_B <= tol && rep.max_A_contracted <= tol;

    if (rep.weakly_homogeneous && rep.weakly_isotropic)
        rep.tag = StatisticsClass::weakly_isotropic;
    else if (rep.weakly_homogeneous)
        rep.tag = StatisticsClass::weakly_homogeneous;
    else
        rep.tag = StatisticsClass::general;

    if (rep.rho_rotation_deviation > tol)
        rep.notes.push_back("rho depends on the direction of y - x (max deviation " +
                            std::to_string(rep.rho_rotation_deviation) + ")");
    if (rep.sigma_rotation_deviation > tol)
        rep.notes.push_back("sigma depends on the direction of y - x (max deviation " +
                            std::to_string(rep.sigma_rotation_deviation) + ")");
    if (rep.A_x_variation > tol)
        rep.notes.push_back("A depends on x (max variation " + std::to_string(rep.A_x_variation) + ")");
    if (stats.claimed_class == StatisticsClass::weakly_isotropic && !rep.weakly_isotropic)
        rep.notes.push_back("claimed weakly_isotropic but the isotropy probe failed");
    if (stats.claimed_class != StatisticsClass::general && !rep.weakly_homogeneous)
        rep.notes.push_back("claimed " + to_string(stats.claimed_class) + " but B != 0 at some sample");
    rep.notes.push_back("lipschitz_probe is the largest ratio observed on the samples, not a bound");
    return rep;
}

} // namespace pdfflow
