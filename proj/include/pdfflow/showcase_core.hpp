#pragma once

// The worked example: Gaussian alpha, reciprocal beta on the box union I,
// spatial profile gamma, and the statistics whose Q vanishes by symmetry.

#include "pdfflow/flow_model.hpp"
#include "pdfflow/types.hpp"

#include <array>
#include <cmath>
#include <numbers>

namespace pdfflow::showcase {

/// One symmetric interval union [lo, hi] U [-hi, -lo] with lo = num/den.
struct SymmetricBand {
    double num;  // lower bound numerator
    double den;  // lower bound denominator
    double hi;

    double lo() const { return num / den; }

    /// Closed membership; the lower bound is tested as den*|v| >= num so the
    /// rational endpoint is not rounded first.
    bool contains(double v) const
    {
        const double a = std::abs(v);
        return den * a >= num && a <= hi;
    }
};

struct ShowcaseSpec {
    Vec3 sigma_diag = Vec3(2.0 / 3.0, 1.0, 1.5);
    std::array<SymmetricBand, 3> region{{{1.0, 4.0, 1.0}, {1.0, 4.0, 2.0}, {2.0, 7.0, 3.0}}};
    double nu = 1.0;
    double gamma_prefactor = 1.0 / (36.0 * std::pow(2.0 * std::numbers::pi, 1.5));
    double gamma_width = 200.0;
};

inline const ShowcaseSpec& spec()
{
    static const ShowcaseSpec s;
    return s;
}

inline bool in_region(const Vec3& u)
{
    const auto& r = spec().region;
    return r[0].contains(u[0]) && r[1].contains(u[1]) && r[2].contains(u[2]);
}

/// Centred Gaussian with covariance diag(2/3, 1, 3/2); det = 1.
inline double alpha(const Vec3& u)
{
    const Vec3& s = spec().sigma_diag;
    const double q = u[0] * u[0] / s[0] + u[1] * u[1] / s[1] + u[2] * u[2] / s[2];
    const double det = s[0] * s[1] * s[2];
    return std::exp(-0.5 * q) / (std::pow(2.0 * std::numbers::pi, 1.5) * std::sqrt(det));
}

/// 1 / (u1 u2 u3) on I, 0 elsewhere.
inline double beta(const Vec3& u)
{
    if (!in_region(u))
        return 0.0;
    return 1.0 / (u[0] * u[1] * u[2]);
}

/// The bracketed expression of gamma before the prefactor; equals 2 at x = 0.
inline double gamma_bracket(const Vec3& x)
{
    const double r2 = x.squaredNorm();
    const double ratio = 30.0 * (x[0] - 1.0) / (30.0 + 3.0 * x[1] * x[1] + 2.0 * x[2] * x[2]);
    const double envelope = std::exp(-x[0] * x[0] / 3.0 + std::sin(x[0] + x[1] + x[2]) / 3.0);
    const double ripple = std::cos(x[1] + x[2]) / (r2 + 1.0);
    return (ratio * envelope + ripple) + 2.0 * std::exp(-r2 / spec().gamma_width);
}

inline double gamma(const Vec3& x) { return spec().gamma_prefactor * gamma_bracket(x); }

inline double example_p0(const Vec3& u, const Vec3& x) { return alpha(u) + beta(u) * gamma(x); }

// ---------------------------------------------------------------------------
// Statistics with rho = 0 and sigma^{jk} = c + lambda * f(d1) f(d2) f(d3).

/// f(z, t) = z^4 / 8 * exp(-z^2 (1 + t) / 2): even, flat at 0, Gaussian tail.
inline double f_shape(double z, double t)
{
    const double z2 = z * z;
    return 0.125 * z2 * z2 * std::exp(-0.5 * z2 * (1.0 + t));
}

/// Deliberately uneven variant f * (1 + z), used as a negative control.
inline double f_shape_uneven(double z, double t) { return f_shape(z, t) * (1.0 + z); }

inline constexpr double sigma_constant = 1.0;  // c
inline constexpr double sigma_lambda = 1.0;    // lambda(x, u, t)

template <class F>
ConditionalStatistics product_statistics(std::string name, F shape)
{
    ConditionalStatistics s;
    s.name = std::move(name);
    s.rho_is_zero = true;
    s.rho = [](const Vec3&, const Vec3&, const Vec3&, double) -> Vec3 { return Vec3::Zero(); };
    s.sigma = [shape](const Vec3& x, const Vec3& y, const Vec3&, double t) -> Mat3 {
        const Vec3 d = y - x;
        const double prod = shape(d[0], t) * shape(d[1], t) * shape(d[2], t);
        return Mat3::Constant(sigma_constant + sigma_lambda * prod);
    };
    s.claimed_class = StatisticsClass::weakly_homogeneous;
    return s;
}

inline ConditionalStatistics statistics() { return product_statistics("showcase", f_shape); }

inline ConditionalStatistics uneven_statistics()
{
    return product_statistics("showcase-uneven", f_shape_uneven);
}

inline InitialDensity initial_density()
{
    InitialDensity d;
    d.name = "showcase";
    d.p0 = example_p0;
    d.decay_exponent = 4.0;
    return d;
}

inline InitialDensity alpha_density()
{
    InitialDensity d;
    d.name = "alpha";
    d.p0 = [](const Vec3& u, const Vec3&) { return alpha(u); };
    d.decay_exponent = 4.0;
    d.x_independent = true;
    return d;
}

/// Showcase flow: nu = 1, the statistics above, and the drift C = 0 they imply.
inline FlowSpec flow()
{
    FlowSpec f;
    f.name = "showcase";
    f.viscosity = spec().nu;
    f.regime = Regime::weakly_homogeneous;
    f.statistics = statistics();
    DriftField c = zero_drift();
    c.name = "showcase";
    f.drift = c;
    return f;
}

} // namespace pdfflow::showcase
