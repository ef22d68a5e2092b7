#pragma once

// Numerical checks of solution properties: mass, the first-moment divergence
// constraint, the PDE residual, the second-moment identity and the positivity
// audit of the showcase initial data.
//
// A check is either assertable (analytically forced, may fail a strict run) or
// diagnostic (reported as warn, never fail).

#include "pdfflow/flow_model.hpp"
#include "pdfflow/quadrature.hpp"
#include "pdfflow/showcase_core.hpp"
#include "pdfflow/types.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

namespace pdfflow {

inline std::string format_double_short(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

enum class Status { pass, warn, fail };

inline std::string to_string(Status s)
{
    switch (s) {
    case Status::pass: return "pass";
    case Status::warn: return "warn";
    case Status::fail: return "fail";
    }
    return "?";
}

struct VerificationReport {
    std::string name;
    double value = 0.0;  // headline measurement compared against tolerance
    double tolerance = 0.0;
    bool assertable = false;
    Status status = Status::pass;
    std::vector<std::pair<std::string, double>> measured;
    std::vector<std::pair<std::string, std::string>> config;
    std::vector<std::string> notes;

    double get(const std::string& key) const
    {
        for (const auto& [k, v] : measured)
            if (k == key)
                return v;
        throw Error("report '" + name + "' has no measurement '" + key + "'");
    }

    /// Sets status from value and tolerance; never fails a diagnostic check.
    VerificationReport& finish()
    {
        const bool within = std::isfinite(value) && std::abs(value) <= tolerance;
        if (within)
            status = notes.empty() || assertable ? Status::pass : Status::warn;
        else
            status = assertable ? Status::fail : Status::warn;
        return *this;
    }

    bool ok() const { return status != Status::fail; }
};

// ---------------------------------------------------------------------------
// Quadrature plans over u.

struct QuadraturePlan {
    std::vector<Vec3> nodes;
    std::vector<double> weights;
    std::vector<bool> edge;  // node lies in an outermost truncation cell
    std::string description;

    std::size_t size() const { return nodes.size(); }

    template <class F>
    double integrate(F&& f) const
    {
        double s = 0.0;
        for (std::size_t i = 0; i < nodes.size(); ++i)
            s += weights[i] * f(nodes[i]);
        return s;
    }
};

struct AxisRule {
    Rule rule;
    std::vector<bool> edge;
};

/// Composite Gauss-Legendre over consecutive breakpoints; pieces longer than
/// max_width are split evenly.
inline AxisRule composite_rule(const std::vector<double>& breaks, int order, double max_width)
{
    if (breaks.size() < 2)
        throw DomainError("composite_rule needs at least two breakpoints");
    AxisRule out;
    const std::size_t last = breaks.size() - 2;
    for (std::size_t p = 0; p + 1 < breaks.size(); ++p) {
        const double a = breaks[p], b = breaks[p + 1];
        if (!(a < b))
            throw DomainError("composite_rule breakpoints must increase");
        const int pieces = std::max(1, static_cast<int>(std::ceil((b - a) / max_width - 1e-12)));
        for (int q = 0; q < pieces; ++q) {
            const double lo = a + (b - a) * q / pieces;
            const double hi = a + (b - a) * (q + 1) / pieces;
            const Rule r = gauss_legendre_nodes(order, lo, hi);
            const bool is_edge = (p == 0 && q == 0) || (p == last && q == pieces - 1);
            for (std::size_t i = 0; i < r.size(); ++i) {
                out.rule.nodes.push_back(r.nodes[i]);
                out.rule.weights.push_back(r.weights[i]);
                out.edge.push_back(is_edge);
            }
        }
    }
    return out;
}

inline QuadraturePlan tensor_plan(const AxisRule& a, const AxisRule& b, const AxisRule& c,
                                  std::string description)
{
    QuadraturePlan plan;
    plan.description = std::move(description);
    const std::size_t n = a.rule.size() * b.rule.size() * c.rule.size();
    plan.nodes.reserve(n);
    plan.weights.reserve(n);
    plan.edge.reserve(n);
    for (std::size_t i = 0; i < a.rule.size(); ++i)
        for (std::size_t j = 0; j < b.rule.size(); ++j)
            for (std::size_t k = 0; k < c.rule.size(); ++k) {
                plan.nodes.emplace_back(a.rule.nodes[i], b.rule.nodes[j], c.rule.nodes[k]);
                plan.weights.push_back(a.rule.weights[i] * b.rule.weights[j] * c.rule.weights[k]);
                plan.edge.push_back(a.edge[i] || b.edge[j] || c.edge[k]);
            }
    return plan;
}

/// Gauss-Hermite plan for integrands with Gaussian tails around `mean` with
/// per-axis scale `sd`: weights are w_i / phi(u_i).
inline QuadraturePlan gaussian_plan(const Vec3& mean, const Vec3& sd, int order)
{
    const Rule& h = hermite_rule(order);
    std::array<AxisRule, 3> axes;
    for (int a = 0; a < 3; ++a) {
        for (std::size_t i = 0; i < h.size(); ++i) {
            const double z = h.nodes[i];
            axes[a].rule.nodes.push_back(mean[a] + std::sqrt(2.0) * sd[a] * z);
            // int g(u) du = sqrt(2) sd int g e^{z^2} e^{-z^2} dz
            axes[a].rule.weights.push_back(std::sqrt(2.0) * sd[a] * h.weights[i] * std::exp(z * z));
            axes[a].edge.push_back(i == 0 || i + 1 == h.size());
        }
    }
    return tensor_plan(axes[0], axes[1], axes[2], "gauss-hermite order " + std::to_string(order));
}

/// Box plan for the showcase: breakpoints at every face of I plus a geometric
/// midpoint inside each band piece, Gaussian tails truncated at tail_sd
/// standard deviations of alpha and cut into pieces no wider than one sd.
inline QuadraturePlan showcase_plan(int order = 8, double tail_sd = 10.0)
{
    const auto& sp = showcase::spec();
    std::array<AxisRule, 3> axes;
    for (int a = 0; a < 3; ++a) {
        const auto& band = sp.region[a];
        const double sd = std::sqrt(sp.sigma_diag[a]);
        const double lo = band.lo(), hi = band.hi, mid = std::sqrt(lo * hi);
        const double L = std::max(tail_sd * sd, hi + sd);
        const std::vector<double> breaks{-L, -hi, -mid, -lo, lo, mid, hi, L};
        axes[a] = composite_rule(breaks, order, sd);
    }
    return tensor_plan(axes[0], axes[1], axes[2],
                       "showcase boxes, gauss-legendre order " + std::to_string(order));
}

// ---------------------------------------------------------------------------

using DensityAtX = std::function<double(const Vec3& u)>;
using DensityUX = std::function<double(const Vec3& u, const Vec3& x)>;
using DensityUXT = std::function<double(const Vec3& u, const Vec3& x, double t)>;

/// int p du and |int p du - 1|.
inline VerificationReport check_mass(const DensityAtX& p, const QuadraturePlan& plan, double tolerance = 1e-6,
                                     bool assertable = false)
{
    VerificationReport r;
    r.name = "mass";
    r.assertable = assertable;
    r.tolerance = tolerance;
    double mass = 0.0, edge = 0.0;
    for (std::size_t i = 0; i < plan.size(); ++i) {
        const double v = plan.weights[i] * p(plan.nodes[i]);
        if (!std::isfinite(v))
            throw NumericError("mass integrand not finite at u=" + format_vec(plan.nodes[i]));
        mass += v;
        if (plan.edge[i])
            edge += v;
    }
    r.value = std::abs(mass - 1.0);
    r.measured = {{"mass", mass}, {"abs_error", r.value}, {"edge_contribution", edge}};
    r.config = {{"plan", plan.description}, {"nodes", std::to_string(plan.size())}};
    if (std::abs(edge) > 1e-6)
        r.notes.push_back("quadrature coverage: outermost cells contribute " + std::to_string(edge));
    return r.finish();
}

/// m^i(x) = int u^i p(u; x) du at the six points x +- h e_k and the central
/// difference sum_k d m^k / d x^k.
inline VerificationReport check_divergence_free(const DensityUX& p, const Vec3& x, double h_x,
                                                const QuadraturePlan& plan, double tolerance = 1e-6,
                                                bool assertable = false)
{
    if (!(h_x > 0.0))
        throw DomainError("check_divergence_free needs h_x > 0");
    VerificationReport r;
    r.name = "divergence_free";
    r.assertable = assertable;
    r.tolerance = tolerance;
    double div = 0.0;
    for (int k = 0; k < 3; ++k) {
        const Vec3 xp = x + h_x * unit(k), xm = x - h_x * unit(k);
        const double mp = plan.integrate([&](const Vec3& u) { return u[k] * p(u, xp); });
        const double mm = plan.integrate([&](const Vec3& u) { return u[k] * p(u, xm); });
        const double d = (mp - mm) / (2.0 * h_x);
        div += d;
        r.measured.emplace_back("dm" + std::to_string(k + 1) + "/dx" + std::to_string(k + 1), d);
    }
    r.value = div;
    r.measured.emplace_back("divergence", div);
    r.config = {{"x", format_vec(x)}, {"h_x", format_double_short(h_x)}, {"plan", plan.description}};
    return r.finish();
}

struct PdeResidual {
    double coarse = 0.0;  // R at step h
    double fine = 0.0;    // R at step h/2
    double order = std::numeric_limits<double>::quiet_NaN();
};

namespace detail {

inline double pde_residual_at(const DensityUXT& p, const DriftField& C, double nu, const Vec3& u,
                              const Vec3& x, double t, double h)
{
    const double p0 = p(u, x, t);
    double dt;
    if (t >= h)
        dt = (p(u, x, t + h) - p(u, x, t - h)) / (2.0 * h);
    else
        dt = (-3.0 * p0 + 4.0 * p(u, x, t + h) - p(u, x, t + 2.0 * h)) / (2.0 * h);
    double transport = 0.0, lap = 0.0;
    for (int k = 0; k < 3; ++k) {
        const Vec3 e = h * unit(k);
        const double pp = p(u, Vec3(x + e), t), pm = p(u, Vec3(x - e), t);
        transport += u[k] * (pp - pm) / (2.0 * h);
        lap += ((pp - p0) + (pm - p0)) / (h * h);
    }
    double flux = 0.0;
    if (!C.identically_zero) {
        for (int k = 0; k < 3; ++k) {
            const Vec3 e = h * unit(k);
            const Vec3 up = u + e, um = u - e;
            flux += (p(up, x, t) * C(x, up, t)[k] - p(um, x, t) * C(x, um, t)[k]) / (2.0 * h);
        }
    }
    const double R = dt + transport - nu * lap - flux;
    if (!std::isfinite(R))
        throw NumericError("PDE residual not finite at u=" + format_vec(u) + " x=" + format_vec(x));
    return R;
}

} // namespace detail

/// R = d_t p + u . grad_x p - nu lap_x p - div_u (p C) by central differences at
/// steps h and h/2. `discontinuity_distance`, when given, is the distance of u
/// from a known jump surface of p.
inline VerificationReport check_pde_residual(const DensityUXT& p, const DriftField& C, double nu,
                                             const Vec3& u, const Vec3& x, double t, double h,
                                             double tolerance, bool assertable = true,
                                             const std::function<double(const Vec3&)>& discontinuity_distance = {})
{
    if (!(h > 0.0))
        throw DomainError("check_pde_residual needs h > 0");
    if (!(t >= 0.0))
        throw DomainError("check_pde_residual needs t >= 0");
    VerificationReport r;
    r.name = "pde_residual";
    r.assertable = assertable;
    r.tolerance = tolerance;
    PdeResidual res;
    res.coarse = detail::pde_residual_at(p, C, nu, u, x, t, h);
    res.fine = detail::pde_residual_at(p, C, nu, u, x, t, 0.5 * h);
    if (res.coarse != 0.0 && res.fine != 0.0)
        res.order = std::log2(std::abs(res.coarse) / std::abs(res.fine));
    r.value = res.fine;
    r.measured = {{"residual_h", res.coarse}, {"residual_h2", res.fine}, {"observed_order", res.order}};
    r.config = {{"u", format_vec(u)}, {"x", format_vec(x)}, {"t", format_double_short(t)},
                {"h", format_double_short(h)}, {"nu", format_double_short(nu)}};
    if (discontinuity_distance && discontinuity_distance(u) < 2.0 * h)
        r.notes.push_back("u lies within 2h of a discontinuity surface");
    return r.finish();
}

/// LHS = div_x int C p du and RHS = -d_i d_j int u^i u^j p du, both by central
/// differences of step h_x around x.
inline VerificationReport check_moment_identity(const DriftField& C, const DensityUX& p, const Vec3& x,
                                                double t, const QuadraturePlan& plan, double h_x,
                                                double tolerance = 1e-6, bool assertable = false)
{
    if (!(h_x > 0.0))
        throw DomainError("check_moment_identity needs h_x > 0");
    VerificationReport r;
    r.name = "moment_identity";
    r.assertable = assertable;
    r.tolerance = tolerance;

    double lhs = 0.0;
    if (!C.identically_zero) {
        for (int k = 0; k < 3; ++k) {
            auto mean_C = [&](const Vec3& y) {
                return plan.integrate([&](const Vec3& u) { return C(y, u, t)[k] * p(u, y); });
            };
            lhs += central_derivative(mean_C, x, k, h_x);
        }
    }
    double rhs = 0.0;
    for (int i = 0; i < 3; ++i) {
        for (int j = i; j < 3; ++j) {
            auto second = [&](const Vec3& y) {
                return plan.integrate([&](const Vec3& u) { return u[i] * u[j] * p(u, y); });
            };
            if (i == j)
                rhs -= central_second(second, x, i, h_x);
            else
                rhs -= 2.0 * central_second_mixed(second, x, i, j, h_x);
        }
    }
    r.value = lhs - rhs;
    r.measured = {{"lhs", lhs}, {"rhs", rhs}, {"difference", lhs - rhs}};
    r.config = {{"x", format_vec(x)}, {"t", format_double_short(t)}, {"h_x", format_double_short(h_x)},
                {"plan", plan.description}};
    return r.finish();
}

/// Positivity audit of the showcase data p0 = alpha + beta gamma.
///
/// Reports m_I = min alpha |u1 u2 u3| over the u grid points inside I (the
/// largest |gamma| keeping p0 >= 0), the largest |gamma| on the x grid, the
/// smallest p0 over the product grid, and the ratio sup |beta / alpha| that the
/// published bound uses. Diagnostic only.
inline VerificationReport check_positivity_bound(const std::vector<Vec3>& u_grid,
                                                 const std::vector<Vec3>& x_grid)
{
    if (u_grid.empty() || x_grid.empty())
        throw DomainError("check_positivity_bound needs non-empty grids");
    using namespace showcase;
    VerificationReport r;
    r.name = "positivity_bound";
    r.assertable = false;
    r.tolerance = 0.0;

    double m_I = std::numeric_limits<double>::infinity();
    double sup_ratio = 0.0;
    for (const Vec3& u : u_grid) {
        if (!in_region(u))
            continue;
        const double a = alpha(u) * std::abs(u[0] * u[1] * u[2]);
        m_I = std::min(m_I, a);
        sup_ratio = std::max(sup_ratio, std::abs(beta(u)) / alpha(u));
    }
    double gamma_max = 0.0;
    for (const Vec3& x : x_grid)
        gamma_max = std::max(gamma_max, std::abs(gamma(x)));

    double p_min = std::numeric_limits<double>::infinity();
    Vec3 u_arg = Vec3::Zero(), x_arg = Vec3::Zero();
    for (const Vec3& x : x_grid) {
        const double g = gamma(x);
        for (const Vec3& u : u_grid) {
            const double v = alpha(u) + beta(u) * g;
            if (v < p_min) {
                p_min = v;
                u_arg = u;
                x_arg = x;
            }
        }
    }
    const Vec3 corner(-showcase::spec().region[0].lo(), showcase::spec().region[1].lo(),
                      showcase::spec().region[2].lo());
    r.value = std::min(p_min, 0.0);
    r.measured = {{"m_I", m_I},
                  {"gamma_sup", gamma_max},
                  {"sup_beta_over_alpha", sup_ratio},
                  {"p0_min", p_min},
                  {"p0_min_u1", u_arg[0]}, {"p0_min_u2", u_arg[1]}, {"p0_min_u3", u_arg[2]},
                  {"p0_min_x1", x_arg[0]}, {"p0_min_x2", x_arg[1]}, {"p0_min_x3", x_arg[2]},
                  {"alpha_abs_u_at_inner_corner", alpha(corner) * std::abs(corner[0] * corner[1] * corner[2])},
                  {"p0_at_inner_corner_x0", example_p0(corner, Vec3::Zero())}};
    r.config = {{"u_grid", std::to_string(u_grid.size())}, {"x_grid", std::to_string(x_grid.size())}};
    if (gamma_max > m_I)
        r.notes.push_back("sup|gamma| exceeds min alpha|u1u2u3| on I, so p0 takes negative values");
    if (p_min < 0.0)
        r.notes.push_back("p0 is negative at u=" + format_vec(u_arg) + " x=" + format_vec(x_arg));
    return r.finish();
}

/// u grid for the positivity audit: every face coordinate of I and the
/// geometric midpoints, in all sign combinations.
inline std::vector<Vec3> region_corner_grid()
{
    const auto& sp = showcase::spec();
    std::array<std::vector<double>, 3> axis;
    for (int a = 0; a < 3; ++a) {
        const auto& b = sp.region[a];
        for (double v : {b.lo(), std::sqrt(b.lo() * b.hi), b.hi}) {
            axis[a].push_back(v);
            axis[a].push_back(-v);
        }
    }
    std::vector<Vec3> grid;
    for (double a : axis[0])
        for (double b : axis[1])
            for (double c : axis[2])
                grid.emplace_back(a, b, c);
    return grid;
}

} // namespace pdfflow
