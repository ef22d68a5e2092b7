#pragma once

/* Quadrature rules, Gaussian expectations, the Newtonian-kernel integrator
 * and the central-difference stencils shared by the other modules.
 */

#include "pdfflow/types.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <shared_mutex>
#include <string>
#include <vector>

namespace pdfflow {

/// Nodes and weights of a one-dimensional rule.
struct Rule {
    std::vector<double> nodes;
    std::vector<double> weights;
    std::size_t size() const { return nodes.size(); }
};

struct QuadratureConfig {
    int gl_order = 12;           // per axis, per box
    int gh_order = 20;           // per axis
    int radial_nodes = 64;
    int polar_nodes = 32;        // Gauss-Legendre in cos(theta)
    int azimuthal_nodes = 64;    // trapezoid in phi
    double radius = 12.0;        // truncation radius of the kernel integral
    double tolerance = 1e-6;
    double stencil_step = 1e-4;  // relative step of the second-derivative stencil
    bool check_radius = false;   // re-run with doubled radius and compare

    void validate() const
    {
        if (gl_order < 2 || gh_order < 2 || radial_nodes < 2 || polar_nodes < 2 ||
            azimuthal_nodes < 2)
            throw ConfigError("quadrature orders must be >= 2");
        if (!(radius > 0.0))
            throw ConfigError("quadrature radius must be positive");
        if (!(tolerance > 0.0))
            throw ConfigError("quadrature tolerance must be positive");
        if (!(stencil_step > 0.0))
            throw ConfigError("quadrature stencil_step must be positive");
    }
};

namespace detail {

constexpr double newton_tol = 1e-15;
constexpr int newton_max_iter = 100;

// Legendre rule on [-1, 1] by Newton iteration on the three-term recurrence.
inline Rule compute_legendre(int n)
{
    Rule r;
    r.nodes.assign(n, 0.0);
    r.weights.assign(n, 0.0);
    const int m = (n + 1) / 2;
    for (int i = 0; i < m; ++i) {
        double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double pp = 1.0;
        for (int it = 0; it < newton_max_iter; ++it) {
            double p1 = 1.0, p2 = 0.0;
            for (int j = 1; j <= n; ++j) {
                const double p3 = p2;
                p2 = p1;
                p1 = ((2.0 * j - 1.0) * z * p2 - (j - 1.0) * p3) / j;
            }
            pp = n * (z * p1 - p2) / (z * z - 1.0);
            const double z1 = z;
            z = z1 - p1 / pp;
            if (std::abs(z - z1) <= newton_tol)
                break;
        }
        if (n % 2 == 1 && i == m - 1)
            z = 0.0;
        // Final derivative at the converged root.
        {
            double p1 = 1.0, p2 = 0.0;
            for (int j = 1; j <= n; ++j) {
                const double p3 = p2;
                p2 = p1;
                p1 = ((2.0 * j - 1.0) * z * p2 - (j - 1.0) * p3) / j;
            }
            pp = n * (z * p1 - p2) / (z * z - 1.0);
        }
        r.nodes[i] = -z;
        r.nodes[n - 1 - i] = z;
        const double w = 2.0 / ((1.0 - z * z) * pp * pp);
        r.weights[i] = w;
        r.weights[n - 1 - i] = w;
    }
    return r;
}

// Physicists' Hermite rule (weight exp(-z^2)) using the orthonormal recurrence.
inline Rule compute_hermite(int n)
{
    Rule r;
    r.nodes.assign(n, 0.0);
    r.weights.assign(n, 0.0);
    const double pim4 = std::pow(std::numbers::pi, -0.25);
    const int m = (n + 1) / 2;
    double z = 0.0;
    for (int i = 0; i < m; ++i) {
        if (i == 0)
            z = std::sqrt(2.0 * n + 1.0) - 1.85575 * std::pow(2.0 * n + 1.0, -1.0 / 6.0);
        else if (i == 1)
            z -= 1.14 * std::pow(double(n), 0.426) / z;
        else if (i == 2)
            z = 1.86 * z - 0.86 * r.nodes[0];
        else if (i == 3)
            z = 1.91 * z - 0.91 * r.nodes[1];
        else
            z = 2.0 * z - r.nodes[i - 2];
        double pp = 1.0;
        for (int it = 0; it < newton_max_iter; ++it) {
            double p1 = pim4, p2 = 0.0;
            for (int j = 0; j < n; ++j) {
                const double p3 = p2;
                p2 = p1;
                p1 = z * std::sqrt(2.0 / (j + 1)) * p2 - std::sqrt(double(j) / (j + 1)) * p3;
            }
            pp = std::sqrt(2.0 * n) * p2;
            const double z1 = z;
            z = z1 - p1 / pp;
            if (std::abs(z - z1) <= newton_tol * std::max(1.0, std::abs(z)))
                break;
        }
        if (n % 2 == 1 && i == m - 1)
            z = 0.0;
        {
            double p1 = pim4, p2 = 0.0;
            for (int j = 0; j < n; ++j) {
                const double p3 = p2;
                p2 = p1;
                p1 = z * std::sqrt(2.0 / (j + 1)) * p2 - std::sqrt(double(j) / (j + 1)) * p3;
            }
            pp = std::sqrt(2.0 * n) * p2;
        }
        r.nodes[i] = z;
        r.nodes[n - 1 - i] = -z;
        const double w = 2.0 / (pp * pp);
        r.weights[i] = w;
        r.weights[n - 1 - i] = w;
    }
    // Store ascending.
    std::reverse(r.nodes.begin(), r.nodes.end());
    std::reverse(r.weights.begin(), r.weights.end());
    return r;
}

enum class RuleKind { legendre, hermite };

// Read-dominant cache; concurrent population of the same order is idempotent.
inline const Rule& cached_rule(RuleKind kind, int n)
{
    static std::shared_mutex mutex;
    static std::map<std::pair<int, int>, std::unique_ptr<Rule>> cache;
    const auto key = std::make_pair(static_cast<int>(kind), n);
    {
        std::shared_lock lock(mutex);
        auto it = cache.find(key);
        if (it != cache.end())
            return *it->second;
    }
    auto rule = std::make_unique<Rule>(kind == RuleKind::legendre ? compute_legendre(n)
                                                                   : compute_hermite(n));
    std::unique_lock lock(mutex);
    auto [it, inserted] = cache.try_emplace(key, std::move(rule));
    return *it->second;
}

} // namespace detail

/// Gauss-Legendre rule on [-1, 1] (cached).
inline const Rule& legendre_rule(int n)
{
    if (n < 1)
        throw DomainError("Gauss-Legendre order must be >= 1");
    return detail::cached_rule(detail::RuleKind::legendre, n);
}

/// Physicists' Gauss-Hermite rule, integrating f(z) exp(-z^2) over R (cached).
inline const Rule& hermite_rule(int n)
{
    if (n < 1)
        throw DomainError("Gauss-Hermite order must be >= 1");
    return detail::cached_rule(detail::RuleKind::hermite, n);
}

/// Gauss-Legendre nodes and weights mapped to [a, b]. Exact for degree <= 2n-1.
inline Rule gauss_legendre_nodes(int n, double a, double b)
{
    if (!(a < b))
        throw DomainError("gauss_legendre_nodes requires a < b");
    const Rule& ref = legendre_rule(n);
    Rule r;
    r.nodes.resize(n);
    r.weights.resize(n);
    const double half = 0.5 * (b - a);
    const double mid = 0.5 * (a + b);
    for (int i = 0; i < n; ++i) {
        r.nodes[i] = mid + half * ref.nodes[i];
        r.weights[i] = half * ref.weights[i];
    }
    return r;
}

/// E[f(mean + sqrt(variance) * xi)] for a standard normal xi in one dimension.
template <class F>
double gauss_hermite_expectation_1d(F&& f, double mean, double variance, int order)
{
    if (order < 2)
        throw DomainError("Gauss-Hermite order must be >= 2");
    const Rule& rule = hermite_rule(order);
    const double scale = std::sqrt(2.0 * variance);
    double sum = 0.0;
    for (std::size_t i = 0; i < rule.size(); ++i)
        sum += rule.weights[i] * f(mean + scale * rule.nodes[i]);
    return sum / std::sqrt(std::numbers::pi);
}

/// E[f(mean + sqrt(variance) .* xi)] for xi ~ N(0, I_3), tensor Gauss-Hermite.
template <class F>
double gauss_hermite_expectation(F&& f, const Vec3& mean, const Vec3& variance, int order)
{
    if (order < 2)
        throw DomainError("Gauss-Hermite order must be >= 2");
    if ((variance.array() < 0.0).any())
        throw DomainError("Gauss-Hermite variance must be non-negative");
    const Rule& rule = hermite_rule(order);
    const std::size_t n = rule.size();
    const Vec3 scale = (2.0 * variance).cwiseSqrt();
    const double norm = std::pow(std::numbers::pi, -1.5);
    double sum = 0.0;
    Vec3 z;
    for (std::size_t i = 0; i < n; ++i) {
        z[0] = mean[0] + scale[0] * rule.nodes[i];
        double si = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            z[1] = mean[1] + scale[1] * rule.nodes[j];
            double sj = 0.0;
            for (std::size_t k = 0; k < n; ++k) {
                z[2] = mean[2] + scale[2] * rule.nodes[k];
                sj += rule.weights[k] * f(static_cast<const Vec3&>(z));
            }
            si += rule.weights[j] * sj;
        }
        sum += rule.weights[i] * si;
    }
    return sum * norm;
}

template <class F>
double gauss_hermite_expectation(F&& f, const Vec3& mean, double variance, int order)
{
    return gauss_hermite_expectation(std::forward<F>(f), mean, Vec3::Constant(variance), order);
}

// ---------------------------------------------------------------------------
// Central differences (second order).

/// df/dz along axis k at p.
template <class F>
auto central_derivative(F&& f, const Vec3& p, int k, double h)
{
    const Vec3 e = h * unit(k);
    using R = std::decay_t<decltype(f(p))>;
    R v = (f(Vec3(p + e)) - f(Vec3(p - e))) / (2.0 * h);
    return v;
}

/// The three first derivatives of f at p.
template <class F>
auto central_gradient(F&& f, const Vec3& p, double h)
{
    using R = std::decay_t<decltype(f(p))>;
    std::array<R, 3> g;
    for (int k = 0; k < 3; ++k)
        g[k] = central_derivative(f, p, k, h);
    return g;
}

/// d2f/dz_k^2 at p.
template <class F>
auto central_second(F&& f, const Vec3& p, int k, double h)
{
    const Vec3 e = h * unit(k);
    using R = std::decay_t<decltype(f(p))>;
    R v = (f(Vec3(p + e)) - 2.0 * f(p) + f(Vec3(p - e))) / (h * h);
    return v;
}

/// Sum of the three pure second derivatives.
template <class F>
auto central_laplacian(F&& f, const Vec3& p, double h)
{
    const Vec3 e0 = h * unit(0), e1 = h * unit(1), e2 = h * unit(2);
    using R = std::decay_t<decltype(f(p))>;
    const R c = f(p);
    R v = (f(Vec3(p + e0)) + f(Vec3(p - e0)) + f(Vec3(p + e1)) + f(Vec3(p - e1)) +
           f(Vec3(p + e2)) + f(Vec3(p - e2)) - 6.0 * c) /
          (h * h);
    return v;
}

/// d2f/dz_j dz_k at p (j may equal k).
template <class F>
auto central_second_mixed(F&& f, const Vec3& p, int j, int k, double h)
{
    if (j == k)
        return central_second(f, p, j, h);
    const Vec3 ej = h * unit(j), ek = h * unit(k);
    using R = std::decay_t<decltype(f(p))>;
    R v = (f(Vec3(p + ej + ek)) - f(Vec3(p + ej - ek)) - f(Vec3(p - ej + ek)) +
           f(Vec3(p - ej - ek))) /
          (4.0 * h * h);
    return v;
}

// ---------------------------------------------------------------------------
// Newtonian-kernel integral.

struct SingularIntegral {
    Vec3 value = Vec3::Zero();
    bool radius_checked = false;
    double radius_shift = 0.0;  // max component change under R -> 2R
    bool converged = true;
};

/// sum_{j,k} d_j d_k T^{jk} at offset d, by second-order stencils of step h.
/// Constant tensors give exactly zero.
template <class T>
double stencil_divdiv(T&& tensor, const Vec3& d, double h)
{
    const Mat3 c = tensor(d);
    double acc = 0.0;
    for (int j = 0; j < 3; ++j) {
        const Vec3 e = h * unit(j);
        const Mat3 tp = tensor(Vec3(d + e));
        const Mat3 tm = tensor(Vec3(d - e));
        acc += ((tp(j, j) - c(j, j)) + (tm(j, j) - c(j, j))) / (h * h);
    }
    for (int j = 0; j < 3; ++j) {
        for (int k = j + 1; k < 3; ++k) {
            const Vec3 ej = h * unit(j), ek = h * unit(k);
            const Mat3 tpp = tensor(Vec3(d + ej + ek));
            const Mat3 tpm = tensor(Vec3(d + ej - ek));
            const Mat3 tmp = tensor(Vec3(d - ej + ek));
            const Mat3 tmm = tensor(Vec3(d - ej - ek));
            const double s_pp = tpp(j, k) + tpp(k, j);
            const double s_pm = tpm(j, k) + tpm(k, j);
            const double s_mp = tmp(j, k) + tmp(k, j);
            const double s_mm = tmm(j, k) + tmm(k, j);
            acc += ((s_pp - s_pm) - (s_mp - s_mm)) / (4.0 * h * h);
        }
    }
    return acc;
}

namespace detail {

template <class T>
Vec3 spherical_kernel_pass(T& tensor, double radius, int n_r, int n_theta, int n_phi,
                           double h)
{
    const Rule radial = gauss_legendre_nodes(n_r, 0.0, radius);
    const Rule& polar = legendre_rule(n_theta);
    const double dphi = 2.0 * std::numbers::pi / n_phi;
    std::vector<double> cphi(n_phi), sphi(n_phi);
    if (n_phi % 4 == 0) {
        // Fill from the first quadrant so the grid is mapped exactly onto
        // itself by the reflections z1 -> -z1 and z2 -> -z2.
        const int quarter = n_phi / 4;
        for (int m = 0; m <= quarter; ++m) {
            const double c = (m == quarter) ? 0.0 : std::cos(m * dphi);
            const double s = (m == 0) ? 0.0 : (m == quarter ? 1.0 : std::sin(m * dphi));
            cphi[m] = c;
            sphi[m] = s;
            cphi[2 * quarter - m] = -c;
            sphi[2 * quarter - m] = s;
            cphi[(2 * quarter + m) % n_phi] = -c;
            sphi[(2 * quarter + m) % n_phi] = -s;
            cphi[(n_phi - m) % n_phi] = c;
            sphi[(n_phi - m) % n_phi] = -s;
        }
        sphi[0] = 0.0;
        sphi[2 * quarter] = 0.0;
    } else {
        for (int m = 0; m < n_phi; ++m) {
            cphi[m] = std::cos(m * dphi);
            sphi[m] = std::sin(m * dphi);
        }
    }
    Vec3 acc = Vec3::Zero();
    for (int a = 0; a < n_theta; ++a) {
        const double ct = polar.nodes[a];
        const double st = std::sqrt(std::max(0.0, 1.0 - ct * ct));
        Vec3 shell = Vec3::Zero();
        for (int m = 0; m < n_phi; ++m) {
            const Vec3 omega(st * cphi[m], st * sphi[m], ct);
            double line = 0.0;
            for (int i = 0; i < n_r; ++i) {
                const Vec3 d = radial.nodes[i] * omega;
                line += radial.weights[i] * stencil_divdiv(tensor, d, h);
            }
            shell += line * omega;
        }
        acc += polar.weights[a] * dphi * shell;
    }
    acc /= 4.0 * std::numbers::pi;
    if (!acc.allFinite())
        throw NumericError("singular kernel integral produced a non-finite value");
    return acc;
}

} // namespace detail

/**
 * Integral over y of (y - x) / (4 pi |y - x|^3) * d_j d_k T^{jk}(y).
 *
 * The tensor is supplied in kernel-centred form, as a function of the offset
 * d = y - x. With y = x + r omega the r^2 volume factor cancels the kernel,
 * leaving (1/4pi) * int_0^R dr int_S2 omega * divdiv T(r omega) domega, which
 * is evaluated by Gauss-Legendre in r and cos(theta) and the trapezoid rule in
 * phi. Only r > 0 nodes are used, so the diagonal y = x is never touched.
 */
template <class T>
SingularIntegral singular_kernel_integral(T&& tensor, const QuadratureConfig& cfg,
                                          double stencil_h)
{
    cfg.validate();
    if (!(stencil_h >= 1e-12))
        throw DomainError("stencil step underflow in singular_kernel_integral");
    SingularIntegral out;
    out.value = detail::spherical_kernel_pass(tensor, cfg.radius, cfg.radial_nodes,
                                              cfg.polar_nodes, cfg.azimuthal_nodes, stencil_h);
    if (cfg.check_radius) {
        const Vec3 wide = detail::spherical_kernel_pass(tensor, 2.0 * cfg.radius,
                                                        2 * cfg.radial_nodes, cfg.polar_nodes,
                                                        cfg.azimuthal_nodes, stencil_h);
        out.radius_checked = true;
        out.radius_shift = (wide - out.value).cwiseAbs().maxCoeff();
        out.converged = out.radius_shift <= cfg.tolerance;
    }
    return out;
}

} // namespace pdfflow
