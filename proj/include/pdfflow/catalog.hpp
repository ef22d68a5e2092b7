#pragma once

// Named statistics, drifts and initial densities addressable from configs.
//
// Statistics:
//   zero                  rho = 0, sigma = I                       (C = 0)
//   showcase              rho = 0, sigma^{jk} = 1 + f f f          (C = 0)
//   quadratic-rho         rho^i = (d^i)^2, sigma = I               (C = -2 nu (1, 1, 1))
//   anisotropic-gaussian  rho = 0, sigma = I (1 + d1 exp(-|d|^2))  (C = (-1, 0, 0))
// with d = y - x. The closed-form C of each entry is attached so estimators do
// not have to evaluate the kernel integral at every step; `drift: statistics`
// in a config forces the numerical route.

#include "pdfflow/characteristics.hpp"
#include "pdfflow/flow_model.hpp"
#include "pdfflow/showcase_core.hpp"

#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

namespace pdfflow::catalog {

struct StatisticsEntry {
    ConditionalStatistics stats;
    // C as a function of nu, when known in closed form.
    std::function<DriftField(double nu)> closed_form_drift;
    std::string note;
};

inline ConditionalStatistics zero_statistics()
{
    ConditionalStatistics s;
    s.name = "zero";
    s.rho_is_zero = true;
    s.rho = [](const Vec3&, const Vec3&, const Vec3&, double) -> Vec3 { return Vec3::Zero(); };
    s.sigma = [](const Vec3&, const Vec3&, const Vec3&, double) -> Mat3 { return Mat3::Identity(); };
    s.claimed_class = StatisticsClass::weakly_isotropic;
    return s;
}

inline ConditionalStatistics quadratic_rho_statistics()
{
    ConditionalStatistics s;
    s.name = "quadratic-rho";
    s.rho = [](const Vec3& x, const Vec3& y, const Vec3&, double) -> Vec3 {
        const Vec3 d = y - x;
        return d.cwiseProduct(d);
    };
    s.sigma = [](const Vec3&, const Vec3&, const Vec3&, double) -> Mat3 { return Mat3::Identity(); };
    s.claimed_class = StatisticsClass::weakly_homogeneous;
    return s;
}

/// Q oracle: the kernel integral of d1 exp(-|d|^2) is minus its gradient at 0.
inline ConditionalStatistics anisotropic_gaussian_statistics()
{
    ConditionalStatistics s;
    s.name = "anisotropic-gaussian";
    s.rho_is_zero = true;
    s.rho = [](const Vec3&, const Vec3&, const Vec3&, double) -> Vec3 { return Vec3::Zero(); };
    s.sigma = [](const Vec3& x, const Vec3& y, const Vec3&, double) -> Mat3 {
        const Vec3 d = y - x;
        return Mat3::Identity() * (1.0 + d[0] * std::exp(-d.squaredNorm()));
    };
    s.claimed_class = StatisticsClass::weakly_homogeneous;
    return s;
}

inline DriftField constant_drift(const Vec3& c, std::string name)
{
    DriftField d = zero_drift();
    d.name = std::move(name);
    if (c.isZero(0.0))
        return d;
    d.identically_zero = false;
    d.value = [c](const Vec3&, const Vec3&, double) -> Vec3 { return c; };
    d.divergence = [](const Vec3&, const Vec3&, double) { return 0.0; };
    d.x_independent = true;
    return d;
}

inline const std::vector<std::string>& statistics_names()
{
    static const std::vector<std::string> names{"zero", "showcase", "quadratic-rho",
                                                "anisotropic-gaussian"};
    return names;
}

inline StatisticsEntry statistics(const std::string& name)
{
    StatisticsEntry e;
    if (name == "zero") {
        e.stats = zero_statistics();
        e.closed_form_drift = [](double) { return zero_drift(); };
    }
    else if (name == "showcase") {
        e.stats = showcase::statistics();
        e.closed_form_drift = [](double) {
            DriftField d = zero_drift();
            d.name = "showcase";
            return d;
        };
        e.note = "c = 1 and lambda = 1 are catalog choices";
    }
    else if (name == "quadratic-rho") {
        e.stats = quadratic_rho_statistics();
        e.closed_form_drift = [](double nu) {
            return constant_drift(Vec3::Constant(-2.0 * nu), "quadratic-rho");
        };
    }
    else if (name == "anisotropic-gaussian") {
        e.stats = anisotropic_gaussian_statistics();
        e.closed_form_drift = [](double) { return constant_drift(Vec3(-1.0, 0.0, 0.0), "anisotropic-gaussian"); };
    }
    else {
        std::string known;
        for (const auto& n : statistics_names())
            known += (known.empty() ? "" : ", ") + n;
        throw ConfigError("unknown statistics '" + name + "' (known: " + known + ")");
    }
    return e;
}

// ---------------------------------------------------------------------------

/// Gaussian p0 independent of x, centred at `mean` with per-axis variances.
inline InitialDensity gaussian_density(const Vec3& mean, const Vec3& variance, std::string name = "gaussian")
{
    if ((variance.array() <= 0.0).any())
        throw ConfigError("gaussian initial density needs positive variances");
    InitialDensity d;
    d.name = std::move(name);
    const double norm = 1.0 / (std::pow(2.0 * std::numbers::pi, 1.5) * std::sqrt(variance.prod()));
    d.p0 = [mean, variance, norm](const Vec3& u, const Vec3&) {
        const Vec3 z = u - mean;
        return norm * std::exp(-0.5 * (z.array().square() / variance.array()).sum());
    };
    d.decay_exponent = 4.0;
    d.x_independent = true;
    return d;
}

inline InitialDensity initial_density(const std::string& name)
{
    if (name == "showcase")
        return showcase::initial_density();
    if (name == "alpha")
        return showcase::alpha_density();
    throw ConfigError("unknown initial density '" + name + "' (showcase, alpha, or an object with "
                      "kind 'gaussian')");
}

} // namespace pdfflow::catalog
